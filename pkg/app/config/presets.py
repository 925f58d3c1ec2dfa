"""ED 규모별 기본 구성과 표적 기준선(High-Volume, Stressed Staffing)."""

import copy
import math
from dataclasses import dataclass, field
from typing import Dict, List

from app.models.scenario_models import BaselineName, EdSize

BLOCK_OFFSETS = [420, 1140]
BLOCK_MINUTES = 720
WATERFALL_MINUTES = 600
HIGH_VOLUME_SURGE = 1.5
STRESSED_NURSE_FRACTION = 0.5
MIN_NURSES = 1


@dataclass(frozen=True)
class SizePreset:
    doctors: int
    nurses: int
    assistants: int
    lambda_avg: float
    triage: int
    exam: int
    shock: int
    imaging: int
    floor_plan: str
    doctor_pattern: str
    doctor_offsets: List[int]
    doctor_minutes: int
    doctor_specializations: List[str]
    equipment: Dict[str, int]
    np_count: int
    ft_room_count: int
    triage_doctor_count: int
    reserve_nurses: int
    notes: str = field(default="", compare=False)


TABLE1: Dict[str, SizePreset] = {
    "S": SizePreset(
        doctors=2, nurses=1, assistants=1, lambda_avg=2.0,
        triage=1, exam=2, shock=1, imaging=1, floor_plan="small",
        doctor_pattern="block_12h", doctor_offsets=list(BLOCK_OFFSETS), doctor_minutes=BLOCK_MINUTES,
        doctor_specializations=["trauma", "trauma"],
        equipment={"ecg_monitor": 2, "suture_kit": 1, "trauma_kit": 1},
        np_count=2, ft_room_count=1, triage_doctor_count=2, reserve_nurses=1,
        notes="기능 테스트용 소형 ED (스터디 대상 아님)",
    ),
    "M": SizePreset(
        doctors=4, nurses=2, assistants=2, lambda_avg=4.0,
        triage=1, exam=4, shock=1, imaging=1, floor_plan="medium",
        doctor_pattern="waterfall", doctor_offsets=[420, 600, 780, 1260], doctor_minutes=WATERFALL_MINUTES,
        doctor_specializations=["trauma", "general", "trauma", "trauma"],
        equipment={"ecg_monitor": 3, "suture_kit": 2, "trauma_kit": 1},
        np_count=2, ft_room_count=1, triage_doctor_count=2, reserve_nurses=1,
    ),
    "L": SizePreset(
        doctors=10, nurses=5, assistants=4, lambda_avg=8.0,
        triage=2, exam=10, shock=2, imaging=2, floor_plan="large",
        doctor_pattern="waterfall",
        doctor_offsets=[60, 420, 480, 600, 660, 780, 900, 1020, 1260, 1320],
        doctor_minutes=WATERFALL_MINUTES,
        doctor_specializations=[
            "general", "trauma", "general", "general", "general",
            "trauma", "general", "trauma", "trauma", "general",
        ],
        equipment={"ecg_monitor": 6, "suture_kit": 4, "trauma_kit": 2},
        np_count=4, ft_room_count=3, triage_doctor_count=2, reserve_nurses=2,
    ),
    "XL": SizePreset(
        doctors=16, nurses=32, assistants=8, lambda_avg=20.0,
        triage=4, exam=20, shock=4, imaging=4, floor_plan="xlarge",
        doctor_pattern="waterfall",
        doctor_offsets=[60, 360, 420, 480, 540, 600, 660, 720, 780, 840, 900, 1020, 1080, 1200, 1260, 1320],
        doctor_minutes=WATERFALL_MINUTES,
        doctor_specializations=[
            "general", "general", "trauma", "general", "trauma", "general", "general", "general",
            "trauma", "general", "general", "trauma", "general", "trauma", "trauma", "general",
        ],
        equipment={"ecg_monitor": 12, "suture_kit": 8, "trauma_kit": 4},
        np_count=6, ft_room_count=5, triage_doctor_count=4, reserve_nurses=4,
    ),
}


def _block(per_block: bool = False) -> dict:
    return {
        "pattern": "block_12h",
        "start_offsets": list(BLOCK_OFFSETS),
        "duration": BLOCK_MINUTES,
        "per_block": per_block,
    }


def preset_document(size: EdSize) -> dict:
    """규모 preset을 SimConfig 형태의 dict로 만든다."""
    if size not in TABLE1:
        raise KeyError(size)
    p = TABLE1[size]
    return {
        "name": f"{size.lower()}_default",
        "size": size,
        "baseline": "default",
        "floor_plan": p.floor_plan,
        "arrivals": {"lambda_avg": p.lambda_avg, "surge_multiplier": 1.0},
        "staffing": {
            "doctors": p.doctors,
            "nurses": p.nurses,
            "assistants": p.assistants,
            "doctor_shift": {
                "pattern": p.doctor_pattern,
                "start_offsets": list(p.doctor_offsets),
                "duration": p.doctor_minutes,
            },
            "doctor_specializations": list(p.doctor_specializations),
            "nurse_shift": _block(per_block=True),
            "assistant_shift": _block(per_block=True),
        },
        "rooms": {"triage": p.triage, "exam": p.exam, "shock": p.shock, "imaging": p.imaging},
        "equipment": dict(p.equipment),
        "interventions": {
            "enabled": [],
            "fast_track": {"np_count": p.np_count, "ft_room_count": p.ft_room_count, "np_shift": _block()},
            "nurse_ratio": {"reserve_nurses": p.reserve_nurses},
            "split_flow": {"triage_doctor_count": p.triage_doctor_count, "triage_doctor_shift": _block()},
        },
    }


def stressed_nurses(nurses: int) -> int:
    """블록당 간호사 수를 절반(올림)으로. 블록마다 최소 1명은 남긴다."""
    return max(math.ceil(nurses * STRESSED_NURSE_FRACTION), MIN_NURSES)


def apply_baseline(document: dict, baseline: BaselineName) -> dict:
    doc = copy.deepcopy(document)
    doc["baseline"] = baseline
    if baseline == "high_volume":
        doc.setdefault("arrivals", {})["surge_multiplier"] = HIGH_VOLUME_SURGE
    elif baseline == "stressed":
        staffing = doc.setdefault("staffing", {})
        staffing["nurses"] = stressed_nurses(int(staffing.get("nurses", MIN_NURSES)))
        doc.setdefault("arrivals", {})["surge_multiplier"] = 1.0
    elif baseline != "default":
        raise ValueError(f"unknown baseline {baseline!r}")
    size = doc.get("size", "M")
    doc["name"] = f"{str(size).lower()}_{baseline}"
    return doc
