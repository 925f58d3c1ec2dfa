"""악화, 사망, LWBS 판정. 임상 위험은 배정 레벨이 아닌 실제 ESI로 계산한다."""

import logging
import math
from typing import List

from app.models.ledger_models import EventKind
from app.models.scenario_models import DeteriorationParams, MortalityParams
from app.simulation import population

logger = logging.getLogger(__name__)


def patients_per_nurse(roomed: int, nurses_on_duty: int) -> float:
    return roomed / max(nurses_on_duty, 1)


def hours_untreated(patient: population.Patient, now: int) -> float:
    if "first_provider" in patient.milestones:
        return 0.0
    return max(0, now - patient.arrival_time) / 60.0


def deterioration_probability(patient: population.Patient, now: int, params: DeteriorationParams) -> float:
    base = params.per_minute.get(patient.true_esi, 0.0)
    if base <= 0:
        return 0.0
    factor = min(1.0 + params.wait_growth_per_hour * hours_untreated(patient, now), params.max_factor)
    return min(1.0, base * factor)


def step_mortality_probability(
    patient: population.Patient, now: int, params: MortalityParams, ratio: float
) -> float:
    per_hour = params.base_per_hour.get(patient.true_esi, 0.0) + params.wait_risk_per_hour * hours_untreated(patient, now)
    p = per_hour / 60.0
    if patient.severity_worsened_by_error:
        p *= params.error_multiplier
    p *= 1.0 + params.ratio_risk_per_extra_patient * max(0.0, ratio - params.ratio_threshold)
    return min(1.0, p)


def is_waiting_untreated(patient: population.Patient) -> bool:
    return patient.status == "waiting" and "first_provider" not in patient.milestones


def check_lwbs(patient: population.Patient, now: int, config) -> bool:
    if patient.bed_room is not None or patient.status != "waiting":
        return False
    patience = population.patience_minutes(
        patient.patience_quantile, patient.triage_level, config.arrivals.patience_minutes
    )
    if math.isinf(patience):
        return False
    return now - patient.arrival_time > patience


class ClinicalMonitor:
    """스텝 훅 4번: 진행 중 환자 전원에 대해 악화 -> 사망 -> LWBS 순으로 평가"""

    def __init__(self, sim):
        self.sim = sim

    def evaluate(self, t: int) -> None:
        sim = self.sim
        patients: List[population.Patient] = [sim.active[pid] for pid in sorted(sim.active)]
        if not patients:
            return
        draws = sim.dynamics_rng.random((len(patients), 2))
        ratio = patients_per_nurse(sim.roomed_main, len(sim.roster.on_duty("nurse")))
        config = sim.config
        for patient, (u_det, u_death) in zip(patients, draws):
            if not patient.in_progress:
                continue
            if is_waiting_untreated(patient) and u_det < deterioration_probability(patient, t, config.deterioration):
                previous = patient.true_esi
                patient.true_esi = max(1, previous - 1)
                sim.kernel.record(
                    EventKind.DETERIORATION, patient.entity_id, {"esi_before": previous, "esi_after": patient.true_esi}
                )
            p_death = step_mortality_probability(patient, t, config.mortality, ratio)
            if u_death < p_death:
                sim.kernel.record(EventKind.DEATH, patient.entity_id, {"true_esi": patient.true_esi, "p": p_death})
                sim.executor.abort(patient, "deceased")
                continue
            if check_lwbs(patient, t, config):
                sim.kernel.record(
                    EventKind.LWBS, patient.entity_id,
                    {"waited": t - patient.arrival_time, "level": patient.triage_level},
                )
                sim.executor.abort(patient, "lwbs")
