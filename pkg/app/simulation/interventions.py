"""세 가지 운영 개입(Fast Track, Nurse Ratio, Split-Flow/PIT)과 외부 명령 주입.

경로 변환은 순수 함수로 두고, 자원 준비와 런타임 상태는 InterventionController가 맡는다.
"""

import logging
from typing import List, Optional, Sequence

from app.errors import CommandRejected, ConfigurationError
from app.models.ledger_models import CommandAction, EventKind, InterventionCommand
from app.models.pathway_models import PathwayDef, StaffRequirement
from app.models.report_models import InterventionCounters
from app.models.scenario_models import MINUTES_PER_DAY, SplitFlowConfig
from app.simulation.pathways import DIAGNOSTIC_KINDS, StepInstance
from app.simulation.staff import DOCTOR_TRIAGE, NP_TIME, POOL_KINDS, ROLE_PREFIX, build_members, member_pools

logger = logging.getLogger(__name__)

INTERVENTIONS = ("fast_track", "nurse_ratio", "split_flow")
FAST_TRACK_ROOM = "fast_track_room"
MAIN_BEDS = ("exam_room", "shock_room")
PIT_STEP_ID = "pit_assessment"
ADDED_SHIFT_MINUTES = 720

TRIAGE_DOCTOR = StaffRequirement(role="doctor", specialization="triage", count=1)
NP_PA = StaffRequirement(role="np_pa", count=1)


def apply_fast_track(steps: Sequence[StepInstance]) -> List[StepInstance]:
    """진료실 요구를 fast track 병상으로, 의사/간호사 요구를 NP/PA 한 명으로 바꾼다."""
    routed: List[StepInstance] = []
    for step in steps:
        rooms = tuple(FAST_TRACK_ROOM if room == "exam_room" else room for room in step.rooms)
        kept = tuple(req for req in step.staff if req.role not in ("doctor", "nurse"))
        replaced = len(kept) != len(step.staff)
        staff = (NP_PA,) + kept if replaced else kept
        routed.append(step.with_changes(rooms=rooms, staff=staff))
    return routed


def pit_step(config: SplitFlowConfig) -> StepInstance:
    return StepInstance(
        step_id=PIT_STEP_ID, kind="pit_assessment", base_duration=config.pit_duration, staff=(TRIAGE_DOCTOR,)
    )


def apply_split_flow(
    steps: Sequence[StepInstance],
    pathway: PathwayDef,
    assigned: int,
    config: SplitFlowConfig,
) -> Optional[List[StepInstance]]:
    """트리아지 이후 단계들을 PIT 흐름으로 변환한다. 대상이 아니면 None.

    - treat-and-release pathway의 배정 4/5: [pit, disposition]만 남기고 트리아지 구역에서 귀가
    - 배정 레벨 대상: pit 삽입 후, 첫 병상 단계 뒤의 검사/영상을 그 앞으로 옮긴다 (상대 순서 유지)
    """
    if pathway.treat_and_release and assigned in config.treat_and_release_levels:
        disposition = next((step for step in reversed(steps) if step.kind == "disposition"), None)
        duration = disposition.base_duration if disposition is not None else 5
        release = StepInstance(
            step_id="pit_release", kind="disposition", base_duration=duration, staff=(TRIAGE_DOCTOR,)
        )
        return [pit_step(config), release]
    if assigned not in config.eligible_levels:
        return None
    steps = list(steps)
    first_bed = next((i for i, step in enumerate(steps) if step.needs_bed), None)
    if first_bed is not None:
        head = steps[:first_bed]
        tail = steps[first_bed:]
        moved = [step for step in tail[1:] if step.kind in DIAGNOSTIC_KINDS]
        rest = [tail[0]] + [step for step in tail[1:] if step.kind not in DIAGNOSTIC_KINDS]
        steps = head + moved + rest
    return [pit_step(config)] + steps


def enforce_nurse_ratio(roomed: int, nurses: int, max_ratio: float, reserves_left: int) -> str:
    """방 배정 직전 예상 비율 검사. 'proceed' | 'activate' | 'blocked'"""
    if nurses > 0 and (roomed + 1) / nurses <= max_ratio:
        return "proceed"
    if reserves_left > 0:
        return "activate"
    return "blocked"


class InterventionController:
    def __init__(self, sim):
        self.sim = sim
        self.enabled = set(sim.config.interventions.enabled)
        self.provisioned: set = set()
        self.reserve_ready_at: List[int] = [0] * sim.config.interventions.nurse_ratio.reserve_nurses
        self.counters = InterventionCounters()

    @property
    def settings(self):
        return self.sim.config.interventions

    def provision_initial(self) -> None:
        for name in INTERVENTIONS:
            if name in self.enabled:
                try:
                    self._provision(name)
                except CommandRejected as exc:
                    raise ConfigurationError(f"{name}: {exc}") from exc

    def _provision(self, name: str) -> None:
        if name in self.provisioned:
            return
        if name == "fast_track":
            self._provision_fast_track()
        elif name == "split_flow":
            self._provision_split_flow()
        self.provisioned.add(name)

    def _ensure_pool(self, pool_id: str, kind: str) -> None:
        if pool_id not in self.sim.kernel.pools:
            self.sim.kernel.add_pool(pool_id, kind, 0)

    def _add_line(self, members) -> None:
        sim = self.sim
        for member in members:
            sim.roster.members[member.id] = member
        sim.roster.bootstrap(sim.kernel, sim.spatial, sim.staff_area, members=members)

    def _provision_fast_track(self) -> None:
        sim = self.sim
        cfg = self.settings.fast_track
        if sim.rooms.capacity("exam_room") - cfg.ft_room_count < 1:
            raise CommandRejected("fast track would leave no main exam room")
        converted = sim.rooms.convert("exam_room", FAST_TRACK_ROOM, cfg.ft_room_count)
        if len(converted) < cfg.ft_room_count:
            for room in converted:
                room.kind = "exam_room"
            raise CommandRejected(f"only {len(converted)} free exam rooms to convert")
        sim.kernel.resize("exam_room", sim.rooms.capacity("exam_room"))
        self._ensure_pool(FAST_TRACK_ROOM, FAST_TRACK_ROOM)
        sim.kernel.resize(FAST_TRACK_ROOM, sim.rooms.capacity(FAST_TRACK_ROOM))
        self._ensure_pool(NP_TIME, POOL_KINDS[NP_TIME])
        existing = sum(1 for m in sim.roster.members.values() if m.role == "np_pa")
        self._add_line(build_members("np_pa", cfg.np_count, cfg.np_shift, start_index=existing + 1))
        logger.info("Fast track provisioned: %d rooms, %d NP/PA", len(converted), cfg.np_count)

    def _provision_split_flow(self) -> None:
        sim = self.sim
        cfg = self.settings.split_flow
        self._ensure_pool(DOCTOR_TRIAGE, POOL_KINDS[DOCTOR_TRIAGE])
        existing = sum(1 for m in sim.roster.members.values() if m.role == "doctor")
        self._add_line(
            build_members("doctor", cfg.triage_doctor_count, cfg.triage_doctor_shift, ["triage"], start_index=existing + 1)
        )
        logger.info("Split-flow provisioned: %d triage doctors", cfg.triage_doctor_count)

    def route_after_triage(self, patient) -> None:
        sim = self.sim
        assigned = patient.assigned_triage
        head = patient.plan[: patient.step_index + 1]
        remaining = patient.plan[patient.step_index + 1:]
        if "fast_track" in self.enabled and assigned in self.settings.fast_track.eligible_levels:
            patient.plan = head + apply_fast_track(remaining)
            patient.route = "fast_track"
            return
        if "split_flow" in self.enabled:
            transformed = apply_split_flow(remaining, sim.library[patient.condition], assigned, self.settings.split_flow)
            if transformed is not None:
                patient.plan = head + transformed
                patient.route = "split_flow"

    def admit(self, request) -> bool:
        if "nurse_ratio" not in self.enabled:
            return True
        if not any(target in MAIN_BEDS for target in request.targets):
            return True
        patient = self.sim.patient_by_entity(request.requester)
        if patient is None or patient.bed_room is not None:
            return True
        sim = self.sim
        cfg = self.settings.nurse_ratio
        decision = enforce_nurse_ratio(
            sim.roomed_main, len(sim.roster.on_duty("nurse")), cfg.max_ratio, self.reserves_left(sim.kernel.now)
        )
        if decision == "activate":
            self._activate_reserve()
            return True
        if decision == "blocked":
            t = sim.kernel.now
            if patient.last_blocked != t:
                patient.last_blocked = t
                self.counters.nurse_ratio_blocked_count += 1
                sim.kernel.record(
                    EventKind.ADMISSION_BLOCKED, request.requester,
                    {"request": request.id, "roomed": sim.roomed_main, "nurses": len(sim.roster.on_duty("nurse"))},
                )
            return False
        return True

    def reserves_left(self, t: int) -> int:
        """블록을 마치고 휴식 시간까지 지난 예비 간호사는 다시 부를 수 있다."""
        return sum(1 for ready in self.reserve_ready_at if ready <= t)

    def _activate_reserve(self) -> None:
        sim = self.sim
        cfg = self.settings.nurse_ratio
        slot = next(i for i, ready in enumerate(self.reserve_ready_at) if ready <= sim.kernel.now)
        self.reserve_ready_at[slot] = sim.kernel.now + cfg.reserve_block_minutes + cfg.reserve_rest_minutes
        member = sim.roster.add_member(
            sim.kernel, sim.spatial, "nurse", None,
            start=sim.kernel.now, duration=cfg.reserve_block_minutes, recurring=False, reserve=True,
        )
        sim.kernel.record(
            EventKind.INTERVENTION_APPLIED, member.id,
            {"intervention": "nurse_ratio", "action": "activate_reserve", "until": sim.kernel.now + cfg.reserve_block_minutes},
        )
        logger.info("Reserve nurse %s activated at t=%d", member.id, sim.kernel.now)

    def inject_intervention(self, command: InterventionCommand) -> bool:
        """명령을 다음 스텝 시작 시점에 적용한다. 거부되면 command_rejected 기록을 남기고 False."""
        sim = self.sim
        t = sim.kernel.next_step
        payload = {"action": command.action.value, "params": dict(command.params), "t": command.t}
        try:
            result = self._apply(command, t)
        except CommandRejected as exc:
            payload["reason"] = str(exc)
            sim.kernel.record(EventKind.COMMAND_REJECTED, "command", payload, time=t)
            logger.info("Command %s rejected at t=%d: %s", command.action.value, t, exc)
            return False
        payload.update(result)
        sim.kernel.record(EventKind.INTERVENTION_APPLIED, "command", payload, time=t)
        logger.info("Command %s applied at t=%d", command.action.value, t)
        return True

    def _apply(self, command: InterventionCommand, t: int) -> dict:
        action = command.action
        params = command.params
        if action in (CommandAction.ENABLE, CommandAction.DISABLE):
            name = params.get("intervention")
            if name not in INTERVENTIONS:
                raise CommandRejected(f"unknown intervention {name!r}")
            if action == CommandAction.ENABLE:
                if name in self.enabled:
                    raise CommandRejected(f"{name} is already enabled")
                self._provision(name)
                self.enabled.add(name)
            else:
                if name not in self.enabled:
                    raise CommandRejected(f"{name} is not enabled")
                self.enabled.discard(name)
            return {}
        if action == CommandAction.OPEN_ROOM:
            return self._open_room(params.get("kind"))
        if action == CommandAction.CLOSE_ROOM:
            return self._close_room(params.get("room_id"))
        if action == CommandAction.ADD_STAFF:
            return self._add_staff(params.get("role"), params.get("specialization"), t)
        if action == CommandAction.REMOVE_STAFF:
            return self._remove_staff(params.get("staff_id"))
        raise CommandRejected(f"unsupported action {action!r}")

    def _open_room(self, kind) -> dict:
        sim = self.sim
        if kind not in sim.kernel.pools or kind not in sim.rooms.kinds():
            raise CommandRejected(f"unknown room kind {kind!r}")
        room = sim.rooms.open_room(kind)
        sim.kernel.resize(kind, sim.rooms.capacity(kind))
        return {"room_id": room.spec.id}

    def _close_room(self, room_id) -> dict:
        sim = self.sim
        room = sim.rooms.close_room(room_id)
        if not room.open:
            sim.kernel.resize(room.kind, sim.rooms.capacity(room.kind))
            return {"room_id": room_id, "closed": True}
        return {"room_id": room_id, "closed": False, "draining": True}

    def _add_staff(self, role, specialization, t: int) -> dict:
        sim = self.sim
        if role not in ROLE_PREFIX:
            raise CommandRejected(f"unknown staff role {role!r}")
        if role == "doctor":
            specialization = specialization or "general"
            if specialization not in ("general", "trauma", "triage"):
                raise CommandRejected(f"unknown specialization {specialization!r}")
        elif specialization is not None:
            raise CommandRejected(f"{role} takes no specialization")
        for pool_id in member_pools(role, specialization):
            self._ensure_pool(pool_id, POOL_KINDS[pool_id])
        member = sim.roster.add_member(
            sim.kernel, sim.spatial, role, specialization, start=t, duration=ADDED_SHIFT_MINUTES, recurring=True
        )
        return {"staff_id": member.id, "shift_start": t % MINUTES_PER_DAY}

    def _remove_staff(self, staff_id) -> dict:
        sim = self.sim
        member = sim.roster.members.get(staff_id)
        if member is None or member.removed or member.draining:
            raise CommandRejected(f"unknown staff id {staff_id!r}")
        sim.roster.remove(sim.kernel, staff_id)
        return {"staff_id": staff_id, "draining": member.draining}
