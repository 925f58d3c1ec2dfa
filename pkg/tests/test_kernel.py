import pytest
from hypothesis import given, strategies as st

from app.errors import EngineInvariantError, SchedulingError
from app.models.ledger_models import EventKind
from app.simulation.kernel import SimKernel


class Recorder:
    def __init__(self):
        self.calls = []
        self.events = []
        self.grants = []

    def handle_event(self, handle):
        self.events.append((handle.time, handle.kind, handle.subject))

    def on_grant(self, request):
        self.grants.append(request.id)

    def on_arrivals(self, t):
        self.calls.append(("arrivals", t))

    def on_agents(self, t):
        self.calls.append(("agents", t))

    def on_clinical(self, t):
        self.calls.append(("clinical", t))

    def on_metrics(self, t):
        self.calls.append(("metrics", t))


def test_schedule_in_past_is_rejected():
    kernel = SimKernel()
    kernel.run_until(5)
    with pytest.raises(SchedulingError):
        kernel.schedule(EventKind.SHIFT_CHANGE, 3, "nurse-01")


def test_hook_order_per_step():
    listener = Recorder()
    kernel = SimKernel(listener)
    kernel.run_until(1)
    assert listener.calls == [
        ("arrivals", 0), ("agents", 0), ("clinical", 0), ("metrics", 0),
        ("arrivals", 1), ("agents", 1), ("clinical", 1), ("metrics", 1),
    ]
    assert kernel.next_step == 2


def test_arrivals_fire_before_other_events_in_same_step():
    listener = Recorder()
    kernel = SimKernel(listener)
    kernel.schedule(EventKind.TREATMENT_DONE, 4, "patient-00001")
    kernel.schedule(EventKind.ARRIVAL, 4, "patient-00002")
    kernel.schedule(EventKind.TREATMENT_DONE, 2, "patient-00003")
    kernel.run_until(4)
    assert listener.events == [
        (2, EventKind.TREATMENT_DONE, "patient-00003"),
        (4, EventKind.ARRIVAL, "patient-00002"),
        (4, EventKind.TREATMENT_DONE, "patient-00001"),
    ]
    assert [r.seq for r in kernel.ledger] == [0, 1, 2]


def test_cancelled_event_never_fires():
    listener = Recorder()
    kernel = SimKernel(listener)
    handle = kernel.schedule(EventKind.TREATMENT_DONE, 3, "patient-00001")
    kernel.cancel(handle)
    kernel.run_until(5)
    assert listener.events == []


def test_same_step_requests_compete_by_priority():
    kernel = SimKernel(Recorder())
    kernel.add_pool("exam_room", "exam_room", 1)
    low = kernel.request_resources("patient-00001", 3, ["exam_room"], mode="single")
    high = kernel.request_resources("patient-00002", 1, ["exam_room"], mode="single")
    mid = kernel.request_resources("patient-00003", 2, ["exam_room"], mode="single")
    granted = kernel.service_queues()
    assert granted == [high]
    kernel.release(high)
    assert kernel.service_queues() == [mid]
    kernel.release(mid)
    assert kernel.service_queues() == [low]


def test_all_of_is_atomic():
    kernel = SimKernel(Recorder())
    kernel.add_pool("exam_room", "exam_room", 1)
    kernel.add_pool("nurse_time", "nurse_time", 0)
    bundle = kernel.request_resources("patient-00001", 1, ["exam_room", "nurse_time"])
    assert kernel.service_queues() == []
    assert kernel.pools["exam_room"].in_use == 0
    assert kernel.first_blocked(bundle) == "nurse_time"

    single = kernel.request_resources("patient-00002", 5, ["exam_room"], mode="single")
    assert kernel.service_queues() == [single]


def test_any_of_takes_first_free_alternative():
    kernel = SimKernel(Recorder())
    kernel.add_pool("shock_room", "shock_room", 0)
    kernel.add_pool("exam_room", "exam_room", 2)
    request = kernel.request_resources("patient-00001", 1, ["shock_room", "exam_room"], mode="any_of")
    kernel.service_queues()
    assert request.held == ["exam_room"]


def test_partial_release_keeps_remaining_targets():
    kernel = SimKernel(Recorder())
    kernel.add_pool("exam_room", "exam_room", 1)
    kernel.add_pool("nurse_time", "nurse_time", 1)
    request = kernel.request_resources("patient-00001", 1, ["exam_room", "nurse_time"])
    kernel.service_queues()
    kernel.release(request, ["nurse_time"])
    assert request.status == "granted"
    assert request.held == ["exam_room"]
    assert kernel.pools["nurse_time"].in_use == 0
    assert kernel.ledger[-1].kind == EventKind.RESOURCE_RELEASE
    assert kernel.ledger[-1].payload["targets"] == ["nurse_time"]


def test_double_release_is_an_invariant_error():
    kernel = SimKernel(Recorder())
    kernel.add_pool("exam_room", "exam_room", 1)
    request = kernel.request_resources("patient-00001", 1, ["exam_room"], mode="single")
    kernel.service_queues()
    kernel.release(request)
    with pytest.raises(EngineInvariantError):
        kernel.release(request)


def test_resize_below_in_use_is_an_invariant_error():
    kernel = SimKernel(Recorder())
    kernel.add_pool("exam_room", "exam_room", 2)
    kernel.request_resources("patient-00001", 1, ["exam_room"], mode="single")
    kernel.request_resources("patient-00002", 1, ["exam_room"], mode="single")
    kernel.service_queues()
    with pytest.raises(EngineInvariantError):
        kernel.resize("exam_room", 1)


def test_listener_can_veto_a_grant():
    class Veto(Recorder):
        def admit(self, request):
            return request.requester != "patient-00001"

    kernel = SimKernel(Veto())
    kernel.add_pool("exam_room", "exam_room", 1)
    vetoed = kernel.request_resources("patient-00001", 1, ["exam_room"], mode="single")
    other = kernel.request_resources("patient-00002", 2, ["exam_room"], mode="single")
    assert kernel.service_queues() == [other]
    assert vetoed.status == "pending"


operations = st.lists(
    st.one_of(
        st.tuples(st.just("request"), st.integers(min_value=1, max_value=5)),
        st.tuples(st.just("release"), st.integers(min_value=0, max_value=50)),
    ),
    max_size=60,
)


@given(capacity=st.integers(min_value=1, max_value=4), ops=operations)
def test_single_pool_matches_naive_queue(capacity, ops):
    kernel = SimKernel(Recorder())
    kernel.add_pool("exam_room", "exam_room", capacity)
    held = []
    naive_pending = []
    naive_in_use = 0
    for number, (op, value) in enumerate(ops):
        if op == "request":
            request = kernel.request_resources(f"patient-{number:05d}", value, ["exam_room"], mode="single")
            naive_pending.append((value, request.id))
        elif held:
            request = held.pop(value % len(held))
            kernel.release(request)
            naive_in_use -= 1
        granted = kernel.service_queues()

        naive_pending.sort()
        expected = []
        while naive_pending and naive_in_use < capacity:
            expected.append(naive_pending.pop(0)[1])
            naive_in_use += 1
        assert [r.id for r in granted] == expected
        held.extend(granted)
        pool = kernel.pools["exam_room"]
        assert pool.in_use == naive_in_use <= pool.capacity


@given(
    capacities=st.lists(st.integers(min_value=0, max_value=2), min_size=3, max_size=3),
    requests=st.lists(
        st.tuples(
            st.integers(min_value=1, max_value=5),
            st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=3, unique=True),
        ),
        max_size=20,
    ),
    release_every=st.integers(min_value=1, max_value=4),
)
def test_all_of_holds_everything_or_nothing(capacities, requests, release_every):
    kernel = SimKernel(Recorder())
    for pool_id, capacity in zip("abc", capacities):
        kernel.add_pool(pool_id, "test", capacity)
    live = []
    for number, (priority, targets) in enumerate(requests):
        live.append(kernel.request_resources(f"patient-{number:05d}", priority, targets))
        kernel.service_queues()
        if number % release_every == 0:
            for request in live:
                if request.status == "granted":
                    kernel.release(request)
                    break
            kernel.service_queues()
        for request in live:
            if request.status == "granted":
                assert sorted(request.held) == sorted(request.targets)
            else:
                assert request.held == [] or request.status == "released"
        for pool_id in "abc":
            pool = kernel.pools[pool_id]
            holding = sum(1 for r in live if r.status == "granted" and pool_id in r.held)
            assert pool.in_use == holding <= pool.capacity


def test_resize_is_recorded_only_when_capacity_changes():
    kernel = SimKernel(Recorder())
    kernel.add_pool("exam_room", "exam_room", 2)
    kernel.run_until(4)
    kernel.resize("exam_room", 2)
    assert kernel.ledger == []
    kernel.resize("exam_room", 3)
    record = kernel.ledger[-1]
    assert record.kind == EventKind.CAPACITY_CHANGED
    assert record.time == 5
    assert record.payload == {"pool": "exam_room", "old": 2, "new": 3}
