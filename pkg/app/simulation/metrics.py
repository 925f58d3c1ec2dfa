"""KPI 집계: 스텝별 시계열, 대기 시간 분해, 병목 순위, run 요약."""

import logging
from typing import Dict, Iterable, List, Mapping, Optional

import numpy as np
import pandas as pd

from app.models.report_models import BottleneckRow, InterventionCounters, RunSummary
from app.simulation.population import Patient

logger = logging.getLogger(__name__)

NURSE_RATIO_BLOCK = "nurse_ratio_block"
ROLES = ("doctor", "nurse", "np_pa", "assistant")
COMPLETED = ("discharged", "admitted")


def queue_column(pool_id: str) -> str:
    return f"{pool_id}.queue"


def in_use_column(pool_id: str) -> str:
    return f"{pool_id}.in_use"


def capacity_column(pool_id: str) -> str:
    return f"{pool_id}.capacity"


class MetricsCollector:
    """스텝 훅 5번에서 한 행씩 샘플을 쌓는다."""

    def __init__(self):
        self.rows: List[dict] = []
        self.disposed = 0

    def record_step(self, sim, t: int) -> dict:
        """대기 중인 요청마다 1분을 그 요청의 첫 번째 막힌 그룹 자원 종류에 청구한다.

        그룹 순서는 방, 장비, 인력 순이므로 방과 인력이 함께 막혀 있으면 방이 대기를 떠안는다.
        막힌 자원이 없는데도 대기 중이면 nurse ratio 차단으로 본다.
        """
        kernel = sim.kernel
        queues: Dict[str, int] = {pool_id: 0 for pool_id in kernel.pools}
        for request in kernel.pending_requests():
            for pool_id in set(request.targets):
                queues[pool_id] += 1
            patient = sim.patient_by_entity(request.requester)
            if patient is None:
                continue
            blocked = kernel.first_blocked(request)
            patient.add_wait(kernel.pools[blocked].kind if blocked is not None else NURSE_RATIO_BLOCK)

        waiting = in_treatment = 0
        for patient in sim.active.values():
            if patient.status == "waiting":
                waiting += 1
            elif patient.status in ("moving", "in_step"):
                in_treatment += 1
        row = {
            "step": t,
            "waiting": waiting,
            "in_treatment": in_treatment,
            "disposed": len(sim.patients) - len(sim.active),
            "census": len(sim.active),
        }
        for pool_id, pool in kernel.pools.items():
            row[queue_column(pool_id)] = queues[pool_id]
            row[in_use_column(pool_id)] = pool.in_use
            row[capacity_column(pool_id)] = pool.capacity
        fatigue = []
        for role in ROLES:
            on_duty = sim.roster.on_duty(role)
            row[f"on_duty.{role}"] = len(on_duty)
            fatigue.extend(member.fatigue for member in on_duty)
        row["mean_fatigue"] = float(np.mean(fatigue)) if fatigue else 0.0
        self.rows.append(row)
        return row

    def frame(self) -> pd.DataFrame:
        return timeseries_frame(self.rows)


def timeseries_frame(rows: Iterable[Mapping]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows))
    if frame.empty:
        return frame
    # run 도중 생긴 풀(fast track 등)은 이전 스텝을 0으로 채운다
    return frame.fillna(0)


def bottleneck_report(frame: pd.DataFrame, kinds: Optional[Mapping[str, str]] = None) -> List[BottleneckRow]:
    """queue/capacity 평균 비율 내림차순, 동률이면 가동률 내림차순"""
    kinds = kinds or {}
    entries = []
    for column in frame.columns:
        if not column.endswith(".queue"):
            continue
        pool_id = column[: -len(".queue")]
        queue = frame[column].to_numpy(dtype=float)
        capacity = frame[capacity_column(pool_id)].to_numpy(dtype=float)
        in_use = frame[in_use_column(pool_id)].to_numpy(dtype=float)
        ratio = float(np.mean(queue / np.maximum(capacity, 1.0)))
        utilization = float(np.mean(np.divide(in_use, capacity, out=np.zeros_like(in_use), where=capacity > 0)))
        entries.append((pool_id, ratio, utilization))
    entries.sort(key=lambda item: (-item[1], -item[2], item[0]))
    return [
        BottleneckRow(
            pool=pool_id, kind=kinds.get(pool_id, pool_id), mean_queue_ratio=ratio, mean_utilization=utilization, rank=i + 1
        )
        for i, (pool_id, ratio, utilization) in enumerate(entries)
    ]


def bottleneck_frame(rows: List[BottleneckRow]) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in rows])


def _stats(values: List[float]):
    if not values:
        return None, None, None
    array = np.asarray(values, dtype=float)
    return float(array.mean()), float(np.median(array)), float(np.percentile(array, 95))


def wait_breakdown(patients: Iterable[Patient]) -> Dict[str, float]:
    """환자당 자원 종류별 평균 대기(분). 성분 합 = 평균 총 대기"""
    patients = list(patients)
    if not patients:
        return {}
    totals: Dict[str, int] = {}
    for patient in patients:
        for kind, minutes in patient.cumulative_wait.items():
            totals[kind] = totals.get(kind, 0) + minutes
    return {kind: totals[kind] / len(patients) for kind in sorted(totals)}


def summarize(patients: Iterable[Patient], counters: InterventionCounters, horizon_steps: int = 0) -> RunSummary:
    patients = sorted(patients, key=lambda p: p.id)
    arrivals = len(patients)
    by_disposition: Dict[str, List[Patient]] = {}
    for patient in patients:
        by_disposition.setdefault(patient.disposition, []).append(patient)
    completed = [p for p in patients if p.disposition in COMPLETED]
    los = [p.disposition_time - p.arrival_time for p in completed]
    waits = [p.total_wait for p in completed]
    avg_los, median_los, p95_los = _stats(los)
    avg_wait, median_wait, p95_wait = _stats(waits)

    lwbs_by_esi: Dict[str, Dict[str, int]] = {}
    for patient in by_disposition.get("lwbs", []):
        row = lwbs_by_esi.setdefault(str(patient.initial_esi), {})
        key = str(patient.assigned_triage or 0)
        row[key] = row.get(key, 0) + 1

    def rate(count: int) -> float:
        return 100.0 * count / arrivals if arrivals else 0.0

    lwbs_count = len(by_disposition.get("lwbs", []))
    deceased = by_disposition.get("deceased", [])
    return RunSummary(
        arrivals=arrivals,
        completed=len(completed),
        discharged=len(by_disposition.get("discharged", [])),
        admitted=len(by_disposition.get("admitted", [])),
        lwbs=lwbs_count,
        deceased=len(deceased),
        in_progress=len(by_disposition.get("in_progress", [])),
        avg_los=avg_los,
        median_los=median_los,
        p95_los=p95_los,
        avg_wait=avg_wait,
        median_wait=median_wait,
        p95_wait=p95_wait,
        wait_breakdown=wait_breakdown(completed),
        high_acuity_wait_breakdown=wait_breakdown(p for p in completed if p.initial_esi <= 2),
        deceased_wait_breakdown=wait_breakdown(deceased),
        lwbs_rate=rate(lwbs_count),
        mortality_rate=rate(len(deceased)),
        counters=counters.model_copy(),
        lwbs_by_esi=lwbs_by_esi,
        horizon_steps=horizon_steps,
    )


def patients_frame(patients: Iterable[Patient]) -> pd.DataFrame:
    records = []
    for patient in sorted(patients, key=lambda p: p.id):
        record = {
            "patient_id": patient.entity_id,
            "arrival_time": patient.arrival_time,
            "initial_esi": patient.initial_esi,
            "true_esi": patient.true_esi,
            "assigned_triage": patient.assigned_triage,
            "condition": patient.condition,
            "route": patient.route,
            "disposition": patient.disposition,
            "disposition_time": patient.disposition_time,
            "los": None if patient.disposition_time is None else patient.disposition_time - patient.arrival_time,
            "total_wait": patient.total_wait,
            "travel_minutes": patient.travel_minutes,
            "treatment_minutes": patient.treatment_minutes,
            "severity_worsened_by_error": patient.severity_worsened_by_error,
            "steps": "|".join(entry["step"] for entry in patient.step_log),
        }
        for name, t in patient.milestones.items():
            record[f"t.{name}"] = t
        for kind, minutes in patient.cumulative_wait.items():
            record[f"wait.{kind}"] = minutes
        records.append(record)
    return pd.DataFrame(records)
