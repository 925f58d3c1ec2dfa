"""질환별 pathway 라이브러리와 환자 여정(journey) 실행기."""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from app.errors import ConfigurationError, EngineInvariantError, PathwayLoadError, RoomFullError
from app.models.ledger_models import EventKind
from app.models.pathway_models import BED_KINDS, BranchOption, PathwayDef, PathwayManifest, StaffRequirement, StepDef
from app.simulation import population
from app.simulation.staff import POOL_KINDS, effective_duration, error_probability, requirement_pools

logger = logging.getLogger(__name__)

PROVIDER_ROLES = ("doctor", "np_pa")
DIAGNOSTIC_KINDS = ("labs", "imaging")


@dataclass(frozen=True)
class StepInstance:
    """실행 중인 여정의 단계. 개입 변환은 새 인스턴스를 만든다."""

    step_id: str
    kind: str
    base_duration: int
    rooms: Tuple[str, ...] = ()
    equipment: Tuple[str, ...] = ()
    staff: Tuple[StaffRequirement, ...] = ()
    branch: Optional[Tuple[BranchOption, ...]] = None

    @classmethod
    def from_def(cls, step: StepDef) -> "StepInstance":
        return cls(
            step_id=step.id,
            kind=step.kind,
            base_duration=step.base_duration,
            rooms=tuple(step.room),
            equipment=tuple(step.equipment),
            staff=tuple(step.staff),
            branch=tuple(step.branch) if step.branch else None,
        )

    @property
    def needs_bed(self) -> bool:
        return any(room in BED_KINDS for room in self.rooms)

    def with_changes(self, **changes) -> "StepInstance":
        return replace(self, **changes)


@dataclass
class PathwayLibrary:
    pathways: Dict[str, PathwayDef]
    manifest: PathwayManifest

    def __getitem__(self, pathway_id: str) -> PathwayDef:
        return self.pathways[pathway_id]

    def condition_weights(self) -> Dict[int, Dict[str, float]]:
        return {level: dict(weights) for level, weights in self.manifest.conditions.items()}

    def room_kinds(self) -> List[str]:
        kinds: List[str] = []
        for pathway in self.pathways.values():
            for step in walk_steps(pathway.steps):
                for room in step.room:
                    if room not in kinds:
                        kinds.append(room)
        return kinds

    def staff_requirements(self) -> List[StaffRequirement]:
        found: List[StaffRequirement] = []
        for pathway in self.pathways.values():
            for step in walk_steps(pathway.steps):
                for requirement in step.staff:
                    if requirement not in found:
                        found.append(requirement)
        return found

    def equipment_names(self) -> List[str]:
        names: List[str] = []
        for pathway in self.pathways.values():
            for step in walk_steps(pathway.steps):
                for item in step.equipment:
                    if item not in names:
                        names.append(item)
        return names

    def to_document(self) -> dict:
        return {
            "pathways": [p.model_dump(mode="json") for p in self.pathways.values()],
            "manifest": self.manifest.model_dump(mode="json"),
        }


def walk_steps(steps: Sequence[StepDef]) -> Iterable[StepDef]:
    for step in steps:
        yield step
        for option in step.branch or ():
            yield from walk_steps(option.steps)


def load_pathways(
    documents: Iterable[Tuple[str, Mapping]],
    manifest_document: Mapping,
    *,
    available_rooms: Optional[Sequence[str]] = None,
    manifest_source: str = "manifest",
) -> PathwayLibrary:
    """pathway 문서들을 검증해 라이브러리로 만든다. 위반 시 경로와 사유를 담은 PathwayLoadError."""
    pathways: Dict[str, PathwayDef] = {}
    for source, document in documents:
        try:
            pathway = PathwayDef.model_validate(document)
        except ValidationError as exc:
            raise PathwayLoadError(_validation_reason(exc), source=source) from exc
        if pathway.id in pathways:
            raise PathwayLoadError(f"duplicate pathway id {pathway.id!r}", source=source)
        if available_rooms is not None:
            for step in walk_steps(pathway.steps):
                missing = [room for room in step.room if room not in available_rooms]
                if missing:
                    raise PathwayLoadError(
                        f"step {step.id}: room kind {missing[0]!r} is not provided by the floor plan",
                        source=source,
                    )
        pathways[pathway.id] = pathway
    if not pathways:
        raise PathwayLoadError("no pathway documents", source=manifest_source)

    try:
        manifest = PathwayManifest.model_validate(manifest_document)
    except ValidationError as exc:
        raise PathwayLoadError(_validation_reason(exc), source=manifest_source) from exc
    for level, weights in manifest.conditions.items():
        for pathway_id in weights:
            if pathway_id not in pathways:
                raise PathwayLoadError(f"manifest references unknown pathway {pathway_id!r}", source=manifest_source)
            if level not in pathways[pathway_id].eligible_esi:
                raise PathwayLoadError(
                    f"pathway {pathway_id!r} is not eligible for ESI {level}", source=manifest_source
                )
    return PathwayLibrary(pathways=pathways, manifest=manifest)


def _validation_reason(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(item) for item in error.get("loc", ()))
        parts.append(f"{location}: {error.get('msg')}" if location else str(error.get("msg")))
    return "; ".join(parts)


def instantiate(pathway: PathwayDef) -> List[StepInstance]:
    return [StepInstance.from_def(step) for step in pathway.steps]


def choose_branch(step: StepInstance, rng: np.random.Generator) -> List[StepInstance]:
    options = step.branch or ()
    if not options:
        return []
    u = rng.random()
    cumulative = 0.0
    chosen = options[-1]
    for option in options:
        cumulative += option.probability
        if u < cumulative:
            chosen = option
            break
    return [StepInstance.from_def(item) for item in chosen.steps]


def assign_provider(roster, pool_id: str):
    """가장 적게 배정되고 덜 피로한 가용 인력. 없으면 None."""
    options = roster.candidates(pool_id)
    return options[0] if options else None


class JourneyExecutor:
    """환자 여정을 이벤트 기반으로 진행시킨다.

    단계마다 방 + 장비 + 인력 시간을 all_of 요청으로 묶고, 승인되면 이동 후
    피로/인지 효율로 보정한 시간 동안 처치한다. 병상(exam/shock/fast track)은
    처음 획득한 단계부터 disposition까지 유지한다.
    """

    def __init__(self, sim):
        self.sim = sim

    def execute_journey(self, patient: population.Patient, pathway: PathwayDef) -> None:
        sim = self.sim
        patient.plan = instantiate(pathway)
        patient.step_index = 0
        sim.spatial.place(patient.entity_id, sim.waiting_area)
        self._advance(patient)

    def current_step(self, patient: population.Patient) -> StepInstance:
        return patient.plan[patient.step_index]

    def priority(self, patient: population.Patient) -> int:
        if patient.assigned_triage is not None:
            return patient.assigned_triage
        return self.sim.config.triage.pre_triage_priority

    def groups_for(self, patient: population.Patient, step: StepInstance) -> List[Tuple[str, ...]]:
        groups: List[Tuple[str, ...]] = []
        if step.rooms and not (step.needs_bed and patient.bed_room is not None):
            groups.append(tuple(step.rooms))
        for item in step.equipment:
            groups.append((f"equipment:{item}",))
        for requirement in step.staff:
            pools = requirement_pools(requirement.role, requirement.specializations())
            groups.extend([pools] * requirement.count)
        return groups

    def _advance(self, patient: population.Patient) -> None:
        sim = self.sim
        if patient.step_index >= len(patient.plan):
            self.dispose(patient)
            return
        step = self.current_step(patient)
        groups = self.groups_for(patient, step)
        if not groups:
            patient.active_request = None
            patient.attending = []
            patient.step_rooms = []
            self._start_step(patient, step, sim.kernel.now)
            return
        patient.status = "waiting"
        mode = "any_of" if len(groups) == 1 and len(groups[0]) > 1 else "all_of"
        patient.active_request = sim.kernel.request_groups(
            patient.entity_id, self.priority(patient), groups, tag=step.step_id, mode=mode
        )

    def on_grant(self, patient: population.Patient, request) -> None:
        sim = self.sim
        step = self.current_step(patient)
        patient.granted_at = sim.kernel.now
        patient.step_rooms = []
        patient.attending = []
        for target in request.held:
            if target.startswith("equipment:") or target in POOL_KINDS:
                continue
            room = sim.rooms.claim(target, patient.id)
            if target in BED_KINDS:
                patient.bed_room = room.spec.id
                patient.bed_kind = target
                patient.bed_request = request
                patient.mark("room_entry", sim.kernel.now)
                if target == "fast_track_room":
                    sim.counters.fast_track_count += 1
                else:
                    sim.roomed_main += 1
            else:
                patient.step_rooms.append(room.spec.id)
        for target in request.held:
            if target in POOL_KINDS:
                member = sim.roster.pick(sim.kernel, target, request.id, patient.id)
                patient.attending.append(member.id)
        patient.status = "moving"
        self._move_parties(patient, step, request)

    def destination(self, patient: population.Patient) -> str:
        if patient.step_rooms:
            return patient.step_rooms[0]
        if patient.bed_room is not None:
            return patient.bed_room
        return self.sim.spatial.room_of(patient.entity_id) or self.sim.waiting_area

    def _move_parties(self, patient: population.Patient, step: StepInstance, request) -> None:
        sim = self.sim
        destination = self.destination(patient)
        speed = sim.config.movement.walking_speed
        try:
            delays = [sim.spatial.assign_destination(patient.entity_id, destination, speed)]
            for member_id in patient.attending:
                member = sim.roster.members[member_id]
                delays.append(
                    sim.spatial.assign_destination(
                        member_id, destination, sim.roster.speed(member), hauling=bool(step.equipment)
                    )
                )
        except RoomFullError:
            patient.pending_event = sim.kernel.schedule(
                EventKind.MOVEMENT, sim.kernel.now + 1, patient.entity_id,
                {"request": request.id, "destination": destination},
            )
            return
        kind = EventKind.TRIAGE_START if step.kind == "triage" else EventKind.TREATMENT_START
        patient.pending_event = sim.kernel.schedule(
            kind, sim.kernel.now + max(delays), patient.entity_id,
            {"step": step.step_id, "request": request.id},
        )

    def on_movement(self, patient: population.Patient, handle) -> None:
        self._move_parties(patient, self.current_step(patient), patient.active_request)

    def on_step_start(self, patient: population.Patient, handle) -> None:
        step = self.current_step(patient)
        if patient.granted_at is not None:
            patient.travel_minutes += handle.time - patient.granted_at
        self._start_step(patient, step, handle.time)

    def _start_step(self, patient: population.Patient, step: StepInstance, t: int) -> None:
        sim = self.sim
        members = [sim.roster.members[member_id] for member_id in patient.attending]
        for member in members:
            if not sim.spatial.proximity_ok(patient.entity_id, member.id):
                raise EngineInvariantError(f"{member.id} is not with {patient.entity_id} for {step.step_id}")
            member.in_step = True
        patient.status = "in_step"
        if step.kind == "triage":
            patient.mark("triage_start", t)
        elif any(m.role in PROVIDER_ROLES for m in members):
            patient.mark("first_provider", t)
        duration = population_duration(step, members, sim.roster, t)
        patient.treatment_minutes += duration
        patient.step_log.append({"step": step.step_id, "kind": step.kind, "start": t})
        payload = {"step": step.step_id, "duration": duration}
        kind = EventKind.TREATMENT_DONE
        if step.kind == "triage":
            kind = EventKind.TRIAGE_DONE
            payload["assigned"] = population.triage(patient.true_esi, sim.config.triage, sim.dynamics_rng)
        elif patient.active_request is None:
            sim.kernel.record(EventKind.TREATMENT_START, patient.entity_id, {"step": step.step_id})
        patient.pending_event = sim.kernel.schedule(kind, t + duration, patient.entity_id, payload)

    def on_step_done(self, patient: population.Patient, handle) -> None:
        sim = self.sim
        step = self.current_step(patient)
        patient.pending_event = None
        patient.step_log[-1]["done"] = handle.time
        members = [sim.roster.members[member_id] for member_id in patient.attending]

        if step.kind == "triage":
            patient.assigned_triage = int(handle.payload["assigned"])
            patient.mark("triage_done", handle.time)
        elif members:
            for member in members:
                probability = error_probability(member.fatigue, sim.roster.params(member))
                if sim.dynamics_rng.random() < probability:
                    previous = patient.true_esi
                    patient.true_esi = max(1, patient.true_esi - 1)
                    patient.severity_worsened_by_error = True
                    sim.kernel.record(
                        EventKind.TREATMENT_ERROR, patient.entity_id,
                        {"step": step.step_id, "staff": member.id, "esi_before": previous, "esi_after": patient.true_esi},
                    )
        if step.kind == "pit_assessment":
            sim.counters.physician_triage_count += 1
        if step.branch:
            chosen = choose_branch(step, sim.dynamics_rng)
            patient.plan[patient.step_index + 1:patient.step_index + 1] = chosen

        self._release_step(patient)
        if step.kind == "triage":
            sim.interventions.route_after_triage(patient)
        patient.step_index += 1
        self._advance(patient)

    def _release_step(self, patient: population.Patient) -> None:
        sim = self.sim
        request = patient.active_request
        if request is not None and request.status == "granted":
            keep = [patient.bed_kind] if request is patient.bed_request else []
            releasing = list(request.held)
            for item in keep:
                releasing.remove(item)
            sim.kernel.release(request, releasing)
        for room_id in patient.step_rooms:
            self._vacate(room_id)
        patient.step_rooms = []
        for member_id in patient.attending:
            sim.roster.free(sim.kernel, sim.spatial, sim.roster.members[member_id])
        patient.attending = []
        patient.active_request = None
        if patient.in_progress:
            sim.spatial.place(patient.entity_id, patient.bed_room or sim.waiting_area)

    def _vacate(self, room_id: str) -> None:
        sim = self.sim
        room = sim.rooms.rooms[room_id]
        kind = room.kind
        if sim.rooms.vacate(room_id):
            sim.kernel.resize(kind, sim.rooms.capacity(kind))
            sim.kernel.record(EventKind.ROOM_CLOSED, room_id, {"kind": kind})

    def dispose(self, patient: population.Patient) -> None:
        sim = self.sim
        t = sim.kernel.now
        admit_p = sim.config.admission_probability[patient.true_esi]
        outcome = "admitted" if sim.dynamics_rng.random() < admit_p else "discharged"
        self._finish(patient, outcome, t)
        sim.kernel.record(EventKind.DISCHARGE, patient.entity_id, {"disposition": outcome, "los": t - patient.arrival_time})

    def abort(self, patient: population.Patient, outcome: str) -> None:
        """사망 또는 LWBS로 여정 중단. 대기 요청과 예약 이벤트를 취소하고 보유 자원을 해제한다."""
        sim = self.sim
        sim.kernel.cancel(patient.pending_event)
        patient.pending_event = None
        request = patient.active_request
        if request is not None and request.status == "pending":
            sim.kernel.cancel_request(request)
            patient.active_request = None
        elif request is not None:
            self._release_step(patient)
        self._finish(patient, outcome, sim.kernel.now)

    def _finish(self, patient: population.Patient, outcome: str, t: int) -> None:
        sim = self.sim
        if patient.bed_request is not None and patient.bed_request.status == "granted":
            sim.kernel.release(patient.bed_request)
        if patient.bed_room is not None:
            if patient.bed_kind in ("exam_room", "shock_room"):
                sim.roomed_main -= 1
            self._vacate(patient.bed_room)
        patient.bed_request = None
        patient.disposition = outcome
        patient.disposition_time = t
        patient.status = "done"
        patient.mark("disposition", t)
        sim.spatial.remove(patient.entity_id)
        sim.roster.forget_patient(patient.id)
        sim.active.pop(patient.id, None)


def population_duration(step: StepInstance, members, roster, t: int) -> int:
    return effective_duration(step.base_duration, [roster.duration_factor(m, t) for m in members])
