import pytest
from hypothesis import given, strategies as st

from app.config.loader import scenario_from_preset
from app.config.presets import stressed_nurses
from app.models.ledger_models import EventKind
from app.models.scenario_models import FatigueParams, ShiftSpec, SimConfig
from app.simulation.kernel import SimKernel
from app.simulation.spatial import SpatialModel
from app.simulation.staff import (
    DOCTOR_GENERAL,
    DOCTOR_TRAUMA,
    NURSE_TIME,
    POOL_KINDS,
    StaffRoster,
    build_members,
    cognitive_effectiveness,
    coverage,
    effective_duration,
    error_probability,
    requirement_pools,
    roster,
    slowdown_factor,
    step_fatigue,
)
from tests.test_spatial import tiny_plan

PARAMS = FatigueParams()
BLOCK = ShiftSpec(pattern="block_12h", start_offsets=[420, 1140], duration=720)


class ShiftListener:
    def __init__(self):
        self.roster = None

    def handle_event(self, handle):
        if handle.kind == EventKind.SHIFT_CHANGE:
            self.roster.handle_shift_change(self.kernel, handle)
        elif handle.kind == EventKind.REST_END:
            self.roster.handle_rest_end(self.kernel, handle)


def staffed(members):
    listener = ShiftListener()
    kernel = SimKernel(listener)
    listener.kernel = kernel
    for pool_id, kind in POOL_KINDS.items():
        kernel.add_pool(pool_id, kind, 0)
    staff = StaffRoster(members, {}, walking_speed=4.0)
    listener.roster = staff
    staff.bootstrap(kernel, SpatialModel(tiny_plan()), "staff_room")
    return kernel, staff


def test_error_probability_anchors():
    assert error_probability(0.0, PARAMS) == pytest.approx(0.005, abs=1e-12)
    assert error_probability(1.0, PARAMS) == pytest.approx(0.055, abs=1e-9)


def test_slowdown_bounds():
    assert slowdown_factor(0.0, PARAMS) == 1.0
    assert slowdown_factor(1.0, PARAMS) == pytest.approx(PARAMS.s_max)


def test_cognitive_effectiveness_plateau_then_decline():
    assert cognitive_effectiveness(0, 720, PARAMS) == 1.0
    assert cognitive_effectiveness(480, 720, PARAMS) == 1.0
    assert cognitive_effectiveness(600, 720, PARAMS) == pytest.approx(0.85)
    assert cognitive_effectiveness(720, 720, PARAMS) == pytest.approx(PARAMS.c_min)
    # shifts no longer than the plateau never decline
    assert cognitive_effectiveness(400, 400, PARAMS) == 1.0


@given(
    fatigue=st.floats(min_value=0.0, max_value=1.0),
    pattern=st.lists(st.booleans(), max_size=2000),
)
def test_fatigue_stays_in_unit_interval(fatigue, pattern):
    for working in pattern:
        fatigue = step_fatigue(fatigue, PARAMS, working)
        assert 0.0 <= fatigue <= 1.0


def test_full_fatigue_after_twelve_working_hours():
    fatigue = 0.0
    for _ in range(720):
        fatigue = step_fatigue(fatigue, PARAMS, True)
    assert fatigue == pytest.approx(1.0)


def test_effective_duration_rounds_half_up():
    assert effective_duration(10, [1.25]) == 13
    assert effective_duration(10, [1.05]) == 11
    assert effective_duration(10, [1.04]) == 10
    assert effective_duration(10, [1.0, 1.5]) == 15
    assert effective_duration(1, [0.2]) == 1
    assert effective_duration(7, []) == 7


def test_block_shift_covers_every_minute():
    nurses = build_members("nurse", 2, BLOCK)
    assert coverage(nurses).min() == 1
    assert coverage(nurses).max() == 1


def test_per_block_count_staffs_every_start_offset():
    nurses = build_members("nurse", 2, BLOCK.model_copy(update={"per_block": True}))
    assert len(nurses) == 4
    assert coverage(nurses).min() == 2
    assert coverage(nurses).max() == 2


def test_requirement_pools_accepts_any_of_specializations():
    assert requirement_pools("doctor", ("general", "trauma")) == (DOCTOR_GENERAL, DOCTOR_TRAUMA)
    assert requirement_pools("doctor", ("trauma",)) == (DOCTOR_TRAUMA,)
    assert requirement_pools("nurse") == (NURSE_TIME,)


def test_default_roster_has_a_doctor_around_the_clock():
    members = roster(SimConfig())
    assert coverage(members, "doctor").min() >= 1
    trauma = [m for m in members if m.specialization == "trauma"]
    assert trauma and all(m.pools() == [DOCTOR_TRAUMA] for m in trauma)


def test_stressed_medium_has_fewer_nurses_but_full_coverage():
    assert stressed_nurses(2) == 1
    assert stressed_nurses(5) == 3
    assert stressed_nurses(1) == 1
    default = [m for m in roster(scenario_from_preset("M", "default")) if m.role == "nurse"]
    stressed = [m for m in roster(scenario_from_preset("M", "stressed")) if m.role == "nurse"]
    assert len(stressed) < len(default)
    assert coverage(stressed).min() == 1
    assert coverage(default).min() == 2

def test_shift_edges_update_pool_capacity():
    kernel, staff = staffed(build_members("nurse", 2, BLOCK))
    # nurse-02 works the night block, which is already running at t=0
    assert staff.members["nurse-02"].on_duty
    assert not staff.members["nurse-01"].on_duty
    assert kernel.pools[NURSE_TIME].capacity == 1

    kernel.run_until(420)
    assert staff.members["nurse-01"].on_duty
    assert not staff.members["nurse-02"].on_duty
    assert kernel.pools[NURSE_TIME].capacity == 1


def test_busy_member_still_counts_in_its_pool():
    members = build_members("nurse", 2, ShiftSpec(pattern="block_12h", start_offsets=[0], duration=720))
    kernel, staff = staffed(members)
    assert kernel.pools[NURSE_TIME].capacity == 2
    picked = staff.pick(kernel, NURSE_TIME, request_id=1, patient_id=7)
    assert picked.id == "nurse-01"
    assert staff.capacity(NURSE_TIME) == 2
    assert [m.id for m in staff.candidates(NURSE_TIME)] == ["nurse-02"]


def test_busy_member_at_shift_end_works_overtime():
    members = build_members("nurse", 1, ShiftSpec(pattern="block_12h", start_offsets=[0], duration=60))
    kernel, staff = staffed(members)
    member = staff.pick(kernel, NURSE_TIME, request_id=1, patient_id=1)
    for t in range(70):
        kernel.run_until(t)
        staff.step(kernel, t, [])
    assert member.shift_over and member.on_duty
    assert member.overtime_minutes > 0
    staff.free(kernel, SpatialModel(tiny_plan()), member)
    assert not member.on_duty


def test_rest_is_deferred_while_own_pool_is_queued():
    members = build_members("nurse", 1, ShiftSpec(pattern="block_12h", start_offsets=[0], duration=720))
    kernel, staff = staffed(members)
    member = staff.members["nurse-01"]
    member.fatigue = 0.8

    staff.step(kernel, 0, [NURSE_TIME])
    assert member.state == "active"

    staff.step(kernel, 1, [DOCTOR_GENERAL])
    assert member.state == "resting"
    assert kernel.pools[NURSE_TIME].capacity == 0
    kinds = [record.kind for record in kernel.ledger[-2:]]
    assert kinds == [EventKind.REST_START, EventKind.CAPACITY_CHANGED]
    assert kernel.ledger[-1].payload == {"pool": NURSE_TIME, "old": 1, "new": 0}

    kernel.run_until(1 + PARAMS.rest_duration)
    assert member.state == "active"
    assert kernel.pools[NURSE_TIME].capacity == 1


def test_removed_idle_member_leaves_immediately():
    members = build_members("nurse", 2, ShiftSpec(pattern="block_12h", start_offsets=[0], duration=720))
    kernel, staff = staffed(members)
    staff.remove(kernel, "nurse-02")
    assert kernel.pools[NURSE_TIME].capacity == 1
