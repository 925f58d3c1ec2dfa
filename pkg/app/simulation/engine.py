"""단일 ED 시뮬레이션 run 조립.

커널의 listener로서 이벤트를 에이전트 계층(환자 여정, 인력, 임상 판정, 지표)에 분배한다.
"""

import logging
from typing import Dict, List, Optional

from app.config.loader import fingerprint, load_floor_plan, load_pathway_library
from app.errors import ConfigurationError
from app.models.ledger_models import EventKind, EventRecord, InterventionCommand
from app.models.report_models import RunSummary
from app.models.scenario_models import SimConfig
from app.simulation import metrics as metrics_service
from app.simulation.clinical_outcomes import ClinicalMonitor
from app.simulation.interventions import InterventionController
from app.simulation.kernel import EventHandle, Request, SimKernel
from app.simulation.pathways import JourneyExecutor, PathwayLibrary, walk_steps
from app.simulation.population import (
    ArrivalProfile,
    Patient,
    generate_arrivals,
    make_streams,
    stream_digest,
)
from app.simulation.spatial import FloorPlan, RoomBoard, SpatialModel, pool_kind, room_counts
from app.simulation.staff import (
    ASSISTANT_TIME,
    DOCTOR_GENERAL,
    DOCTOR_TRAUMA,
    NURSE_TIME,
    POOL_KINDS,
    StaffRoster,
    roster,
    requirement_pools,
)

logger = logging.getLogger(__name__)

PATIENT_PREFIX = "patient-"
STEP_START_KINDS = (EventKind.TRIAGE_START, EventKind.TREATMENT_START)
STEP_DONE_KINDS = (EventKind.TRIAGE_DONE, EventKind.TREATMENT_DONE)


class EDSimulation:
    """한 시나리오의 run 상태 전체. pickle 가능해야 체크포인트가 된다."""

    def __init__(
        self,
        config: SimConfig,
        library: Optional[PathwayLibrary] = None,
        plan: Optional[FloorPlan] = None,
    ):
        self.config = config
        self.plan = plan if plan is not None else load_floor_plan(config.floor_plan)
        self.library = library if library is not None else load_pathway_library(config.pathways)
        self.config_hash = fingerprint(config, self.library, self.plan)

        self.kernel = SimKernel(listener=self)
        self.patient_rng, self.dynamics_rng = make_streams(config.seeds)
        self.profile = ArrivalProfile.from_config(config.arrivals)

        self.spatial = SpatialModel(self.plan, config.movement.hauling_multiplier)
        self.waiting_area = self.plan.first_of_kind("waiting_area").id
        self.staff_area = self.plan.first_of_kind("staff_area").id
        self.rooms = RoomBoard.from_plan(self.plan, room_counts(config.rooms))
        for kind in self.rooms.kinds():
            self.kernel.add_pool(kind, pool_kind(kind), self.rooms.capacity(kind))
        for name, count in config.equipment.items():
            self.kernel.add_pool(f"equipment:{name}", "equipment", count)
        for pool_id in (DOCTOR_GENERAL, DOCTOR_TRAUMA, NURSE_TIME, ASSISTANT_TIME):
            self.kernel.add_pool(pool_id, POOL_KINDS[pool_id], 0)

        self.roster = StaffRoster(roster(config), config.staffing.fatigue, config.movement.walking_speed)
        self.roster.bootstrap(self.kernel, self.spatial, self.staff_area)

        self.patients: Dict[int, Patient] = {}
        self.active: Dict[int, Patient] = {}
        self.roomed_main = 0

        self.interventions = InterventionController(self)
        self.counters = self.interventions.counters
        self.interventions.provision_initial()
        self._validate_library()

        self.executor = JourneyExecutor(self)
        self.monitor = ClinicalMonitor(self)
        self.metrics = metrics_service.MetricsCollector()

        self.arrivals = generate_arrivals(
            config.horizon_steps,
            self.profile,
            self.patient_rng,
            config.arrivals.esi_distribution,
            self.library.condition_weights(),
        )
        self.arrival_digest = stream_digest(self.arrivals)
        for index, spec in enumerate(self.arrivals):
            self.kernel.schedule(
                EventKind.ARRIVAL,
                spec.arrival_time,
                f"{PATIENT_PREFIX}{index + 1:05d}",
                {"index": index, "true_esi": spec.true_esi, "condition": spec.condition},
            )
        logger.info(
            "Simulation %s ready: %d arrivals over %d days (hash %s)",
            config.name, len(self.arrivals), config.horizon_days, self.config_hash[:12],
        )

    # ------------------------------------------------------------ validation
    def _validate_library(self) -> None:
        pools = self.kernel.pools
        for pathway in self.library.pathways.values():
            for step in walk_steps(pathway.steps):
                if step.room and not any(room in pools and pools[room].capacity > 0 for room in step.room):
                    raise ConfigurationError(
                        f"pathway {pathway.id} step {step.id}: no open room of kind {step.room}"
                    )
        for item in self.library.equipment_names():
            if self.config.equipment.get(item, 0) < 1:
                raise ConfigurationError(f"pathway가 요구하는 장비 {item!r}가 시나리오에 없습니다")
        for requirement in self.library.staff_requirements():
            if requirement.role == "np_pa":
                continue
            pools = requirement_pools(requirement.role, requirement.specializations())
            if not any(pool_id in member.pools() for pool_id in pools for member in self.roster.members.values()):
                label = requirement.role
                if requirement.specialization is not None:
                    label = f"{'/'.join(requirement.specializations())} {requirement.role}"
                raise ConfigurationError(f"시나리오에 {label} 인력이 없습니다")

    # -------------------------------------------------------------- lookups
    def patient_by_entity(self, entity: str) -> Optional[Patient]:
        if not entity.startswith(PATIENT_PREFIX):
            return None
        return self.patients.get(int(entity[len(PATIENT_PREFIX):]))

    @property
    def horizon_steps(self) -> int:
        return self.config.horizon_steps

    @property
    def next_step(self) -> int:
        return self.kernel.next_step

    # --------------------------------------------------------- kernel hooks
    def handle_event(self, handle: EventHandle) -> None:
        kind = handle.kind
        if kind == EventKind.ARRIVAL:
            self._on_arrival(handle)
        elif kind == EventKind.SHIFT_CHANGE:
            self.roster.handle_shift_change(self.kernel, handle)
        elif kind == EventKind.REST_END:
            self.roster.handle_rest_end(self.kernel, handle)
        else:
            patient = self.patient_by_entity(handle.subject)
            if patient is None or not patient.in_progress:
                return
            if kind in STEP_START_KINDS:
                self.executor.on_step_start(patient, handle)
            elif kind in STEP_DONE_KINDS:
                self.executor.on_step_done(patient, handle)
            elif kind == EventKind.MOVEMENT:
                self.executor.on_movement(patient, handle)

    def _on_arrival(self, handle: EventHandle) -> None:
        spec = self.arrivals[handle.payload["index"]]
        patient = Patient.from_arrival(handle.payload["index"] + 1, spec)
        self.patients[patient.id] = patient
        self.active[patient.id] = patient
        patient.mark("arrival", handle.time)
        self.executor.execute_journey(patient, self.library[spec.condition])

    def on_grant(self, request: Request) -> None:
        patient = self.patient_by_entity(request.requester)
        if patient is not None:
            self.executor.on_grant(patient, request)

    def admit(self, request: Request) -> bool:
        return self.interventions.admit(request)

    def on_agents(self, t: int) -> None:
        queued = {target for request in self.kernel.pending_requests() for target in request.targets}
        self.roster.step(self.kernel, t, queued)

    def on_clinical(self, t: int) -> None:
        self.monitor.evaluate(t)

    def on_metrics(self, t: int) -> None:
        self.metrics.record_step(self, t)

    # ----------------------------------------------------------------- runs
    def run_until(self, t_end: int) -> List[EventRecord]:
        return self.kernel.run_until(t_end)

    def run(self) -> RunSummary:
        """남은 horizon 전체를 실행하고 요약을 돌려준다."""
        last = self.horizon_steps - 1
        if self.kernel.next_step <= last:
            self.run_until(last)
        summary = self.summary()
        logger.info(
            "Run %s finished: arrivals=%d avg_los=%s lwbs=%.1f%%",
            self.config.name, summary.arrivals, summary.avg_los, summary.lwbs_rate,
        )
        return summary

    def apply_command(self, command: InterventionCommand) -> bool:
        return self.interventions.inject_intervention(command)

    def take_ledger(self) -> List[EventRecord]:
        return self.kernel.take_ledger()

    # -------------------------------------------------------------- reports
    def summary(self) -> RunSummary:
        return metrics_service.summarize(self.patients.values(), self.counters, self.kernel.next_step)

    def timeseries(self):
        return self.metrics.frame()

    def bottlenecks(self):
        kinds = {pool_id: pool.kind for pool_id, pool in self.kernel.pools.items()}
        return metrics_service.bottleneck_report(self.timeseries(), kinds)

    def patient_digest(self) -> str:
        return self.arrival_digest

    def observable_state(self) -> dict:
        """외부 의사결정자에게 공개하는 상태. 대기열/병목 정보는 포함하지 않는다."""
        waiting = [p for p in self.active.values() if p.status == "waiting"]
        dispositions: Dict[str, int] = {}
        for patient in self.patients.values():
            if not patient.in_progress:
                dispositions[patient.disposition] = dispositions.get(patient.disposition, 0) + 1
        t = self.kernel.next_step
        return {
            "time": t,
            "census": len(self.active),
            "waiting": len(waiting),
            "in_treatment": sum(1 for p in self.active.values() if p.status in ("moving", "in_step")),
            "mean_wait_so_far": (sum(t - p.arrival_time for p in waiting) / len(waiting)) if waiting else 0.0,
            "dispositions": dispositions,
            "staff_on_duty": {role: len(self.roster.on_duty(role)) for role in ("doctor", "nurse", "np_pa", "assistant")},
            "rooms_open": {kind: self.rooms.capacity(kind) for kind in self.rooms.kinds()},
            "interventions": sorted(self.interventions.enabled),
            "counters": self.counters.model_dump(),
        }
