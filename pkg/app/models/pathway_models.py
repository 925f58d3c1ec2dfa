from __future__ import annotations

from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

IMAGING_MODALITIES = ("xray", "ct", "ultrasound")
ROOM_KINDS = (
    "triage_room",
    "exam_room",
    "shock_room",
    "fast_track_room",
    *(f"imaging_room:{modality}" for modality in IMAGING_MODALITIES),
)
BED_KINDS = ("exam_room", "shock_room", "fast_track_room")
STEP_KINDS = (
    "triage",
    "provider_exam",
    "labs",
    "imaging",
    "procedure",
    "observation",
    "disposition",
    "pit_assessment",
)
DOCTOR_SPECIALIZATIONS = ("general", "trauma", "triage")


class StaffRequirement(BaseModel):
    """단계에 필요한 인력. 의사 전문분야를 목록으로 주면 그중 먼저 비는 쪽이 맡는다 (any_of)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    role: Literal["doctor", "nurse", "np_pa", "assistant"] = Field(..., description="역할")
    specialization: Optional[Union[str, Tuple[str, ...]]] = Field(
        default=None, description="의사 전문분야 또는 대체 가능한 전문분야 목록 (앞쪽 우선)"
    )
    count: int = Field(1, ge=1, description="필요 인원")

    @field_validator("specialization", mode="before")
    @classmethod
    def _specialization_list(cls, value):
        if isinstance(value, (list, tuple)):
            if not value:
                raise ValueError("specialization 목록이 비어 있습니다")
            if len(set(value)) != len(value):
                raise ValueError("specialization 목록에 중복이 있습니다")
            return value[0] if len(value) == 1 else tuple(value)
        return value

    @model_validator(mode="after")
    def _specialization(self) -> "StaffRequirement":
        if self.specialization is not None:
            if self.role != "doctor":
                raise ValueError(f"{self.role}에는 specialization을 지정할 수 없습니다")
            unknown = [s for s in self.specializations() if s not in DOCTOR_SPECIALIZATIONS]
            if unknown:
                raise ValueError(f"알 수 없는 전문분야: {unknown[0]}")
        return self

    def specializations(self) -> Tuple[Optional[str], ...]:
        if isinstance(self.specialization, tuple):
            return self.specialization
        return (self.specialization,)


class BranchOption(BaseModel):
    model_config = ConfigDict(extra="forbid")

    probability: float = Field(..., ge=0, le=1, description="선택 확률")
    steps: List["StepDef"] = Field(default_factory=list, description="선택 시 삽입되는 단계들")


class StepDef(BaseModel):
    """치료 단계 정의"""

    model_config = ConfigDict(extra="forbid")

    id: str = Field(..., min_length=1)
    kind: Literal[
        "triage",
        "provider_exam",
        "labs",
        "imaging",
        "procedure",
        "observation",
        "disposition",
        "pit_assessment",
    ]
    base_duration: int = Field(..., ge=1, description="기본 소요 시간(분)")
    room: List[str] = Field(default_factory=list, description="필요한 방 종류 (여러 개면 any_of)")
    equipment: List[str] = Field(default_factory=list)
    staff: List[StaffRequirement] = Field(default_factory=list)
    branch: Optional[List[BranchOption]] = Field(default=None, description="완료 후 확률적 분기")

    @field_validator("room", mode="before")
    @classmethod
    def _room_list(cls, value):
        if value is None:
            return []
        if isinstance(value, str):
            return [value]
        return value

    @field_validator("room")
    @classmethod
    def _room_kinds(cls, kinds: List[str]) -> List[str]:
        unknown = [kind for kind in kinds if kind not in ROOM_KINDS]
        if unknown:
            raise ValueError(f"unknown room kind {unknown[0]!r}")
        if len(set(kinds)) != len(kinds):
            raise ValueError("room 목록에 중복이 있습니다")
        return kinds

    @field_validator("staff")
    @classmethod
    def _one_doctor_line(cls, staff: List[StaffRequirement]) -> List[StaffRequirement]:
        if sum(1 for item in staff if item.role == "doctor") > 1:
            raise ValueError("한 단계에는 의사 요구사항을 하나만 둘 수 있습니다")
        return staff

    @field_validator("branch")
    @classmethod
    def _branch_sum(cls, options: Optional[List[BranchOption]]) -> Optional[List[BranchOption]]:
        if options is None:
            return options
        if not options:
            raise ValueError("branch가 비어 있습니다")
        total = sum(option.probability for option in options)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"branch probabilities sum to {round(total, 9):g}")
        return options


BranchOption.model_rebuild()


class PathwayDef(BaseModel):
    """질환별 환자 경로"""

    model_config = ConfigDict(extra="forbid")

    id: str = Field(..., min_length=1)
    name: str = Field(..., description="표시 이름")
    eligible_esi: List[int] = Field(..., min_length=1, description="대상 실제 ESI")
    initial_severity: int = Field(..., ge=1, le=5)
    treat_and_release: bool = Field(False, description="트리아지에서 바로 처치 후 귀가 가능")
    steps: List[StepDef] = Field(..., min_length=1)

    @field_validator("eligible_esi")
    @classmethod
    def _esi(cls, values: List[int]) -> List[int]:
        if any(v not in (1, 2, 3, 4, 5) for v in values):
            raise ValueError("eligible_esi는 1-5 범위여야 합니다")
        return values

    @field_validator("steps")
    @classmethod
    def _starts_with_triage(cls, steps: List[StepDef]) -> List[StepDef]:
        if steps[0].kind != "triage":
            raise ValueError("pathway는 triage 단계로 시작해야 합니다")
        ids = [step.id for step in steps]
        if len(set(ids)) != len(ids):
            raise ValueError("step id가 중복됩니다")
        if any(step.kind == "pit_assessment" for step in steps):
            raise ValueError("pit_assessment는 split-flow 개입 전용 단계입니다")
        return steps


class PathwayManifest(BaseModel):
    """실제 ESI별 질환(pathway) 선택 가중치"""

    model_config = ConfigDict(extra="forbid")

    conditions: Dict[int, Dict[str, float]] = Field(..., description="ESI -> {pathway id: weight}")

    @field_validator("conditions")
    @classmethod
    def _levels(cls, conditions: Dict[int, Dict[str, float]]) -> Dict[int, Dict[str, float]]:
        if sorted(conditions) != [1, 2, 3, 4, 5]:
            raise ValueError("manifest는 ESI 1-5 모두에 대한 가중치가 필요합니다")
        for level, weights in conditions.items():
            if not weights or any(w < 0 for w in weights.values()) or sum(weights.values()) <= 0:
                raise ValueError(f"ESI {level} 가중치가 유효하지 않습니다")
        return conditions
