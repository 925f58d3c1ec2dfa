"""인력 에이전트: 교대 일정, 피로 누적/회복, 오류 확률, 인지 효율, 작업 지연."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.errors import ConfigurationError, EngineInvariantError
from app.models.ledger_models import EventKind
from app.models.scenario_models import MINUTES_PER_DAY, FatigueParams, ShiftSpec, SimConfig

logger = logging.getLogger(__name__)

DOCTOR_GENERAL = "doctor_time:general"
DOCTOR_TRAUMA = "doctor_time:trauma"
DOCTOR_TRIAGE = "doctor_time:triage"
NURSE_TIME = "nurse_time"
NP_TIME = "np_time"
ASSISTANT_TIME = "assistant_time"

POOL_KINDS = {
    DOCTOR_GENERAL: "doctor_time",
    DOCTOR_TRAUMA: "doctor_time",
    DOCTOR_TRIAGE: "doctor_time",
    NURSE_TIME: "nurse_time",
    NP_TIME: "np_time",
    ASSISTANT_TIME: "assistant_time",
}
ROLE_PREFIX = {"doctor": "doctor", "nurse": "nurse", "np_pa": "np", "assistant": "assistant"}


def staff_pool_for(role: str, specialization: Optional[str] = None) -> str:
    if role == "doctor":
        if specialization == "trauma":
            return DOCTOR_TRAUMA
        if specialization == "triage":
            return DOCTOR_TRIAGE
        return DOCTOR_GENERAL
    return {"nurse": NURSE_TIME, "np_pa": NP_TIME, "assistant": ASSISTANT_TIME}[role]


def requirement_pools(role: str, specializations: Sequence[Optional[str]] = (None,)) -> Tuple[str, ...]:
    """요구사항 한 줄이 받아들이는 풀들 (any_of 대안, 앞쪽 우선)"""
    pools: List[str] = []
    for specialization in specializations:
        pool_id = staff_pool_for(role, specialization)
        if pool_id not in pools:
            pools.append(pool_id)
    return tuple(pools)


def member_pools(role: str, specialization: Optional[str] = None) -> List[str]:
    """인력이 시간을 제공하는 풀. 전문분야마다 자기 풀 하나에만 속한다."""
    return [staff_pool_for(role, specialization)]


def step_fatigue(fatigue: float, params: FatigueParams, working: bool) -> float:
    if working:
        return min(1.0, fatigue + params.r_work)
    return max(0.0, fatigue - params.r_rest)


def error_probability(fatigue: float, params: FatigueParams) -> float:
    return params.p0 * math.exp(params.k * fatigue)


def cognitive_effectiveness(minutes_into_shift: float, shift_duration: float, params: FatigueParams) -> float:
    plateau = params.plateau_minutes
    if shift_duration <= plateau or minutes_into_shift <= plateau:
        return 1.0
    progress = min(1.0, (minutes_into_shift - plateau) / (shift_duration - plateau))
    return 1.0 - (1.0 - params.c_min) * progress


def slowdown_factor(fatigue: float, params: FatigueParams) -> float:
    return 1.0 + (params.s_max - 1.0) * fatigue


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def effective_duration(base: int, factors: Iterable[float]) -> int:
    """factors는 참여 인력별 slowdown/effectiveness 값. 가장 느린 인력이 소요 시간을 결정한다."""
    factors = list(factors)
    scale = max(factors) if factors else 1.0
    return max(1, round_half_up(base * scale))


@dataclass
class StaffMember:
    id: str
    role: str
    specialization: Optional[str]
    shift_start: int
    shift_duration: int
    recurring: bool = True
    fatigue: float = 0.0
    state: str = "off_duty"
    shift_started_at: Optional[int] = None
    shift_over: bool = False
    busy_request: Optional[int] = None
    busy_pool: Optional[str] = None
    in_step: bool = False
    assigned_patients: List[int] = field(default_factory=list)
    overtime_minutes: int = 0
    draining: bool = False
    removed: bool = False
    reserve: bool = False

    @property
    def on_duty(self) -> bool:
        return self.state != "off_duty"

    @property
    def busy(self) -> bool:
        return self.busy_request is not None

    def on_shift(self, t: int) -> bool:
        return (t - self.shift_start) % MINUTES_PER_DAY < self.shift_duration

    def minutes_into_shift(self, t: int) -> int:
        if self.shift_started_at is None:
            return 0
        return t - self.shift_started_at

    def pools(self) -> List[str]:
        return member_pools(self.role, self.specialization)


def build_members(role: str, count: int, shift: ShiftSpec, specializations: Sequence[Optional[str]] = (None,),
                  start_index: int = 1) -> List[StaffMember]:
    """오프셋을 순환 배정한다. per_block이면 오프셋마다 count명."""
    members = []
    offsets = shift.start_offsets
    total = count * len(offsets) if shift.per_block else count
    for i in range(total):
        members.append(
            StaffMember(
                id=f"{ROLE_PREFIX[role]}-{start_index + i:02d}",
                role=role,
                specialization=specializations[i % len(specializations)],
                shift_start=offsets[i % len(offsets)],
                shift_duration=shift.duration,
            )
        )
    return members


def coverage(members: Sequence[StaffMember], role: Optional[str] = None) -> np.ndarray:
    """하루 1440분 각각에 근무 중인 인원 수"""
    minutes = np.arange(MINUTES_PER_DAY)
    counts = np.zeros(MINUTES_PER_DAY, dtype=int)
    for member in members:
        if role is not None and member.role != role:
            continue
        counts += ((minutes - member.shift_start) % MINUTES_PER_DAY) < member.shift_duration
    return counts


def roster(config: SimConfig) -> List[StaffMember]:
    """시나리오의 기본 근무표. 간호사/보조 인력은 12시간 블록, 의사는 waterfall."""
    staffing = config.staffing
    if staffing.doctors < 1 or staffing.nurses < 1:
        raise ConfigurationError("의사와 간호사는 최소 1명 이상이어야 합니다")
    members = build_members("doctor", staffing.doctors, staffing.doctor_shift, staffing.doctor_specializations)
    members += build_members("nurse", staffing.nurses, staffing.nurse_shift)
    members += build_members("assistant", staffing.assistants, staffing.assistant_shift)
    return members


class StaffRoster:
    """근무표 상태와 인력 풀 용량 동기화"""

    def __init__(self, members: Iterable[StaffMember], fatigue: Mapping[str, FatigueParams], walking_speed: float):
        self.members: Dict[str, StaffMember] = {}
        self.fatigue_params = dict(fatigue)
        for role in ROLE_PREFIX:
            self.fatigue_params.setdefault(role, FatigueParams())
        self.walking_speed = walking_speed
        self.staff_area: Optional[str] = None
        for member in members:
            self.members[member.id] = member

    def bootstrap(self, kernel, spatial, staff_area: str, members: Optional[Iterable[StaffMember]] = None) -> None:
        self.staff_area = staff_area
        targets = list(members) if members is not None else list(self.members.values())
        for member in targets:
            spatial.place(member.id, staff_area)
            self._schedule_initial(kernel, member)
        self.sync(kernel)

    def _schedule_initial(self, kernel, member: StaffMember) -> None:
        t = kernel.next_step
        if member.on_shift(t):
            member.state = "active"
            member.shift_started_at = t - (t - member.shift_start) % MINUTES_PER_DAY
            kernel.schedule(EventKind.SHIFT_CHANGE, member.shift_started_at + member.shift_duration,
                            member.id, {"edge": "end"})
        else:
            start = t + (member.shift_start - t) % MINUTES_PER_DAY
            kernel.schedule(EventKind.SHIFT_CHANGE, start, member.id, {"edge": "start"})

    def add_member(self, kernel, spatial, role: str, specialization: Optional[str], *, start: int,
                   duration: int, recurring: bool = True, reserve: bool = False) -> StaffMember:
        prefix = ROLE_PREFIX[role]
        index = 1 + sum(1 for m in self.members.values() if m.role == role and m.id.startswith(prefix + "-"))
        member_id = f"{prefix}-{index:02d}"
        while member_id in self.members:
            index += 1
            member_id = f"{prefix}-{index:02d}"
        member = StaffMember(
            id=member_id,
            role=role,
            specialization=specialization,
            shift_start=start % MINUTES_PER_DAY,
            shift_duration=duration,
            recurring=recurring,
            reserve=reserve,
        )
        self.members[member.id] = member
        spatial.place(member.id, self.staff_area)
        member.state = "active"
        member.shift_started_at = start
        kernel.schedule(EventKind.SHIFT_CHANGE, start + duration, member.id, {"edge": "end"})
        self.sync(kernel)
        return member

    def params(self, member: StaffMember) -> FatigueParams:
        return self.fatigue_params[member.role]

    def available(self, member: StaffMember) -> bool:
        return member.state == "active" and not member.busy and not member.draining and not member.removed

    def candidates(self, pool_id: str) -> List[StaffMember]:
        found = [m for m in self.members.values() if pool_id in m.pools() and self.available(m)]
        found.sort(key=lambda m: (len(m.assigned_patients), m.fatigue, m.id))
        return found

    def capacity(self, pool_id: str) -> int:
        count = 0
        for member in self.members.values():
            if member.busy and member.busy_pool == pool_id:
                count += 1
            elif pool_id in member.pools() and self.available(member):
                count += 1
        return count

    def on_duty(self, role: str) -> List[StaffMember]:
        return [m for m in self.members.values() if m.role == role and m.on_duty]

    def sync(self, kernel) -> None:
        for pool_id in POOL_KINDS:
            if pool_id in kernel.pools:
                kernel.resize(pool_id, self.capacity(pool_id))

    def speed(self, member: StaffMember) -> float:
        return self.walking_speed / slowdown_factor(member.fatigue, self.params(member))

    def duration_factor(self, member: StaffMember, t: int) -> float:
        params = self.params(member)
        c = cognitive_effectiveness(
            min(member.minutes_into_shift(t), member.shift_duration), member.shift_duration, params
        )
        return slowdown_factor(member.fatigue, params) / c

    def pick(self, kernel, pool_id: str, request_id: int, patient_id: int) -> StaffMember:
        options = self.candidates(pool_id)
        if not options:
            raise EngineInvariantError(f"pool {pool_id} granted but no member is available")
        member = options[0]
        member.busy_request = request_id
        member.busy_pool = pool_id
        if patient_id not in member.assigned_patients:
            member.assigned_patients.append(patient_id)
        self.sync(kernel)
        return member

    def free(self, kernel, spatial, member: StaffMember) -> None:
        member.busy_request = None
        member.busy_pool = None
        member.in_step = False
        spatial.place(member.id, self.staff_area)
        if member.draining:
            member.removed = True
            member.state = "off_duty"
            kernel.record(EventKind.SHIFT_CHANGE, member.id, {"edge": "removed"})
        elif member.shift_over:
            member.state = "off_duty"
            member.shift_over = False
            kernel.record(EventKind.SHIFT_CHANGE, member.id, {"edge": "end", "overtime": member.overtime_minutes})
        self.sync(kernel)

    def forget_patient(self, patient_id: int) -> None:
        for member in self.members.values():
            if patient_id in member.assigned_patients:
                member.assigned_patients.remove(patient_id)

    def remove(self, kernel, member_id: str) -> StaffMember:
        member = self.members[member_id]
        if member.busy:
            member.draining = True
        else:
            member.removed = True
            member.state = "off_duty"
        self.sync(kernel)
        return member

    def handle_shift_change(self, kernel, handle) -> None:
        member = self.members[handle.subject]
        t = handle.time
        if handle.payload.get("edge") == "start":
            if member.removed:
                return
            member.state = "active"
            member.shift_started_at = t
            member.shift_over = False
            kernel.schedule(EventKind.SHIFT_CHANGE, t + member.shift_duration, member.id, {"edge": "end"})
        else:
            if member.busy:
                member.shift_over = True
            else:
                member.state = "off_duty"
            if member.recurring and not member.removed:
                started = member.shift_started_at if member.shift_started_at is not None else t - member.shift_duration
                kernel.schedule(EventKind.SHIFT_CHANGE, started + MINUTES_PER_DAY, member.id, {"edge": "start"})
        self.sync(kernel)

    def handle_rest_end(self, kernel, handle) -> None:
        member = self.members[handle.subject]
        if member.state == "resting":
            member.state = "active" if not member.shift_over else "off_duty"
            member.shift_over = False
        self.sync(kernel)

    def step(self, kernel, t: int, queued_pools: Iterable[str]) -> None:
        """1분 피로 갱신과 휴식 결정 (스텝 훅 2번 위치)"""
        queued = list(queued_pools)
        changed = False
        for member in self.members.values():
            params = self.params(member)
            if member.busy:
                member.fatigue = step_fatigue(member.fatigue, params, True)
                if member.shift_over:
                    member.overtime_minutes += 1
                continue
            member.fatigue = step_fatigue(member.fatigue, params, False)
            if member.state != "active" or member.draining:
                continue
            if member.fatigue >= params.rest_trigger and not any(p in queued for p in member.pools()):
                member.state = "resting"
                kernel.record(EventKind.REST_START, member.id, {"fatigue": round(member.fatigue, 6)})
                kernel.schedule(EventKind.REST_END, t + params.rest_duration, member.id)
                changed = True
        if changed:
            self.sync(kernel)
