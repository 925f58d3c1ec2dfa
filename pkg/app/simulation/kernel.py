"""결정적 이산사건 커널.

시계(1분 스텝), 미래 이벤트 달력, 우선순위 자원 풀, 복합(all_of/any_of) 자원 요청,
그리고 에이전트 계층이 끼어드는 스텝 루프를 담당한다.

스텝 t의 처리 순서:
    1) arrival 이벤트 발화 -> on_arrivals
    2) 나머지 이벤트 발화 -> on_agents
    3) 대기열 서비스
    4) on_clinical (해제가 있었으면 대기열 재서비스)
    5) on_metrics
"""

import bisect
import heapq
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from app.errors import ConfigurationError, EngineInvariantError, SchedulingError
from app.models.ledger_models import EventKind, EventRecord

logger = logging.getLogger(__name__)

PHASE_ARRIVAL = 0
PHASE_GENERAL = 1


@dataclass
class EventHandle:
    seq: int
    time: int
    kind: EventKind
    subject: str
    payload: Dict[str, Any]
    cancelled: bool = False


@dataclass
class ResourcePool:
    """용량 제한이 있는 자원 풀 (방, 장비, 인력 시간)"""

    id: str
    kind: str
    capacity: int
    in_use: int = 0

    @property
    def free(self) -> int:
        return self.capacity - self.in_use

    def resize(self, capacity: int) -> None:
        if capacity < self.in_use:
            raise EngineInvariantError(
                f"pool {self.id}: capacity {capacity} below in_use {self.in_use}"
            )
        self.capacity = capacity


@dataclass
class Request:
    """자원 요청. groups의 각 그룹에서 대안 하나씩을 원자적으로 획득한다."""

    id: int
    requester: str
    priority: int
    mode: str
    groups: Tuple[Tuple[str, ...], ...]
    issued_at: int
    tag: str = ""
    status: str = "pending"
    held: List[str] = field(default_factory=list)
    granted_at: Optional[int] = None

    @property
    def targets(self) -> List[str]:
        return [target for group in self.groups for target in group]

    @property
    def sort_key(self) -> Tuple[int, int]:
        return (self.priority, self.id)


def _groups_for(mode: str, targets: Sequence[str]) -> Tuple[Tuple[str, ...], ...]:
    if mode == "single":
        if len(targets) != 1:
            raise SchedulingError("single 요청은 대상이 정확히 하나여야 합니다")
        return ((targets[0],),)
    if mode == "all_of":
        return tuple((target,) for target in targets)
    if mode == "any_of":
        return (tuple(targets),)
    raise SchedulingError(f"unknown request mode {mode!r}")


class SimKernel:
    def __init__(self, listener: Any = None):
        self.listener = listener
        self.now = 0
        self.next_step = 0
        self.pools: Dict[str, ResourcePool] = {}
        self.requests: Dict[int, Request] = {}
        self.ledger: List[EventRecord] = []
        self._pending: List[Request] = []
        self._calendars: Tuple[list, list] = ([], [])
        self._event_seq = 0
        self._record_seq = 0
        self._request_seq = 0
        self._dirty = False
        self._stepping = False

    # ----------------------------------------------------------------- pools
    def add_pool(self, pool_id: str, kind: str, capacity: int) -> ResourcePool:
        if pool_id in self.pools:
            raise ConfigurationError(f"duplicate resource id {pool_id!r}")
        if capacity < 0:
            raise ConfigurationError(f"resource {pool_id!r} capacity must be >= 0")
        pool = ResourcePool(id=pool_id, kind=kind, capacity=capacity)
        self.pools[pool_id] = pool
        return pool

    def resize(self, pool_id: str, capacity: int) -> None:
        """용량 변경은 ledger에 남긴다. 스텝 사이(명령 주입)의 변경은 다음 스텝 시각으로 기록."""
        pool = self.pools[pool_id]
        old = pool.capacity
        if capacity == old:
            return
        if capacity > old:
            self._dirty = True
        pool.resize(capacity)
        self.record(
            EventKind.CAPACITY_CHANGED,
            pool_id,
            {"pool": pool_id, "old": old, "new": capacity},
            time=self.now if self._stepping else self.next_step,
        )

    # ---------------------------------------------------------------- ledger
    def record(
        self,
        kind: EventKind,
        subject: str,
        payload: Optional[Dict[str, Any]] = None,
        time: Optional[int] = None,
    ) -> EventRecord:
        record = EventRecord(
            seq=self._record_seq,
            time=self.now if time is None else time,
            kind=kind,
            subject=subject,
            payload=payload or {},
        )
        self._record_seq += 1
        self.ledger.append(record)
        return record

    def take_ledger(self) -> List[EventRecord]:
        records, self.ledger = self.ledger, []
        return records

    # -------------------------------------------------------------- calendar
    def schedule(
        self,
        kind: EventKind,
        at: int,
        subject: str,
        payload: Optional[Dict[str, Any]] = None,
    ) -> EventHandle:
        if at < self.now:
            raise SchedulingError(f"cannot schedule {kind.value} at t={at} (clock at t={self.now})")
        handle = EventHandle(
            seq=self._event_seq, time=at, kind=kind, subject=subject, payload=payload or {}
        )
        self._event_seq += 1
        phase = PHASE_ARRIVAL if kind == EventKind.ARRIVAL else PHASE_GENERAL
        heapq.heappush(self._calendars[phase], (at, handle.seq, handle))
        return handle

    @staticmethod
    def cancel(handle: Optional[EventHandle]) -> None:
        if handle is not None:
            handle.cancelled = True

    def pending_events(self) -> int:
        return sum(1 for calendar in self._calendars for _, _, h in calendar if not h.cancelled)

    def _fire_phase(self, phase: int, t: int) -> None:
        calendar = self._calendars[phase]
        while calendar and calendar[0][0] <= t:
            _, _, handle = heapq.heappop(calendar)
            if handle.cancelled:
                continue
            self.record(handle.kind, handle.subject, handle.payload)
            if self.listener is not None:
                self.listener.handle_event(handle)

    # -------------------------------------------------------------- requests
    def request_resources(
        self,
        requester: str,
        priority: int,
        targets: Sequence[str],
        mode: str = "all_of",
        tag: str = "",
    ) -> Request:
        return self.request_groups(requester, priority, _groups_for(mode, targets), tag=tag, mode=mode)

    def request_groups(
        self,
        requester: str,
        priority: int,
        groups: Sequence[Sequence[str]],
        tag: str = "",
        mode: str = "all_of",
    ) -> Request:
        groups = tuple(tuple(group) for group in groups)
        if not groups or any(not group for group in groups):
            raise SchedulingError("request targets must be non-empty")
        for group in groups:
            for target in group:
                if target not in self.pools:
                    raise ConfigurationError(f"unknown resource id {target!r}")
        request = Request(
            id=self._request_seq,
            requester=requester,
            priority=priority,
            mode=mode,
            groups=groups,
            issued_at=self.now,
            tag=tag,
        )
        self._request_seq += 1
        self.requests[request.id] = request
        bisect.insort(self._pending, request, key=lambda r: r.sort_key)
        self._dirty = True
        self.record(
            EventKind.RESOURCE_REQUEST,
            requester,
            {
                "request": request.id,
                "priority": priority,
                "mode": mode,
                "targets": [list(group) for group in groups],
                "tag": tag,
            },
        )
        return request

    def pending_requests(self) -> List[Request]:
        return list(self._pending)

    def cancel_request(self, request: Request) -> None:
        if request.status != "pending":
            return
        request.status = "cancelled"
        self._pending.remove(request)

    def _satisfy(self, request: Request) -> Optional[List[str]]:
        tentative: Counter = Counter()
        picks: List[str] = []
        for group in request.groups:
            for target in group:
                if self.pools[target].free - tentative[target] >= 1:
                    tentative[target] += 1
                    picks.append(target)
                    break
            else:
                return None
        return picks

    def first_blocked(self, request: Request) -> Optional[str]:
        """대안이 모두 막힌 첫 그룹의 첫 자원 id. 모두 가능하면 None."""
        tentative: Counter = Counter()
        for group in request.groups:
            for target in group:
                if self.pools[target].free - tentative[target] >= 1:
                    tentative[target] += 1
                    break
            else:
                return group[0]
        return None

    def service_queues(self) -> List[Request]:
        granted: List[Request] = []
        admit = getattr(self.listener, "admit", None)
        for request in list(self._pending):
            if request.status != "pending":
                continue
            picks = self._satisfy(request)
            if picks is None:
                continue
            if admit is not None and not admit(request):
                continue
            self._grant(request, picks)
            granted.append(request)
        self._pending = [r for r in self._pending if r.status == "pending"]
        self._dirty = False
        return granted

    def _grant(self, request: Request, picks: List[str]) -> None:
        for target in picks:
            pool = self.pools[target]
            pool.in_use += 1
            if pool.in_use > pool.capacity:
                raise EngineInvariantError(f"pool {target} overflow on request {request.id}")
        request.status = "granted"
        request.held = list(picks)
        request.granted_at = self.now
        self.record(
            EventKind.RESOURCE_GRANT,
            request.requester,
            {
                "request": request.id,
                "priority": request.priority,
                "targets": list(picks),
                "waited": self.now - request.issued_at,
                "tag": request.tag,
            },
        )
        if self.listener is not None:
            self.listener.on_grant(request)

    def release(self, request: Request, targets: Optional[Sequence[str]] = None) -> None:
        """보유 자원 해제. targets가 주어지면 그 일부만 해제하고 나머지는 계속 보유한다."""
        if request.status != "granted":
            raise EngineInvariantError(f"release of request {request.id} in state {request.status}")
        to_release = list(request.held) if targets is None else list(targets)
        remaining = list(request.held)
        for target in to_release:
            if target not in remaining:
                raise EngineInvariantError(f"request {request.id} does not hold {target}")
            remaining.remove(target)
        if not to_release:
            return
        for target in to_release:
            pool = self.pools[target]
            pool.in_use -= 1
            if pool.in_use < 0:
                raise EngineInvariantError(f"pool {target} in_use below zero")
        request.held = remaining
        if not remaining:
            request.status = "released"
        self._dirty = True
        self.record(
            EventKind.RESOURCE_RELEASE,
            request.requester,
            {"request": request.id, "targets": to_release, "tag": request.tag},
        )

    # ------------------------------------------------------------------ loop
    def run_until(self, t_end: int) -> List[EventRecord]:
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is behind the clock (t={self.now})")
        start = len(self.ledger)
        listener = self.listener
        while self.next_step <= t_end:
            t = self.next_step
            self.now = t
            self._stepping = True
            self._fire_phase(PHASE_ARRIVAL, t)
            self._hook(listener, "on_arrivals", t)
            self._fire_phase(PHASE_GENERAL, t)
            self._hook(listener, "on_agents", t)
            self.service_queues()
            self._hook(listener, "on_clinical", t)
            if self._dirty:
                self.service_queues()
            self._hook(listener, "on_metrics", t)
            self._stepping = False
            self.next_step = t + 1
        return self.ledger[start:]

    @staticmethod
    def _hook(listener: Any, name: str, t: int) -> None:
        hook = getattr(listener, name, None)
        if hook is not None:
            hook(t)
