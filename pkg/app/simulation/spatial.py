"""격자 평면도, 방 점유 한도, 이동 속도 기반 이동 시간."""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from app.errors import CommandRejected, ConfigurationError, EngineInvariantError, FloorPlanError, RoomFullError
from app.models.pathway_models import BED_KINDS, IMAGING_MODALITIES, ROOM_KINDS

logger = logging.getLogger(__name__)

WALL = "#"
FLOOR = "."
AREA_KINDS = ("waiting_area", "staff_area")
PLAN_ROOM_KINDS = tuple(kind for kind in ROOM_KINDS if kind != "fast_track_room") + AREA_KINDS

Cell = Tuple[int, int]


@dataclass(frozen=True)
class RoomSpec:
    id: str
    kind: str
    letter: str
    cells: Tuple[Cell, ...]
    max_occupancy: int


@dataclass
class FloorPlan:
    name: str
    width: int
    height: int
    rows: List[str]
    rooms: Dict[str, RoomSpec]

    @classmethod
    def from_document(cls, doc: Mapping, source: str = "<floor plan>") -> "FloorPlan":
        try:
            grid = doc["grid"]
            table = doc["rooms"]
        except (KeyError, TypeError) as exc:
            raise FloorPlanError("grid와 rooms 항목이 필요합니다", source=source) from exc
        rows = [row for row in str(grid).splitlines() if row.strip()]
        if not rows:
            raise FloorPlanError("grid가 비어 있습니다", source=source)
        width = len(rows[0])
        if any(len(row) != width for row in rows):
            raise FloorPlanError("grid 행 길이가 서로 다릅니다", source=source)
        if not isinstance(table, Mapping) or not table:
            raise FloorPlanError("rooms 테이블이 비어 있습니다", source=source)

        cells_by_letter: Dict[str, List[Cell]] = {}
        for y, row in enumerate(rows):
            for x, char in enumerate(row):
                if char in (WALL, FLOOR):
                    continue
                if char not in table:
                    raise FloorPlanError(f"grid 문자 {char!r}가 rooms 테이블에 없습니다", source=source)
                cells_by_letter.setdefault(char, []).append((x, y))

        rooms: Dict[str, RoomSpec] = {}
        for letter, entry in table.items():
            letter = str(letter)
            if len(letter) != 1 or letter in (WALL, FLOOR):
                raise FloorPlanError(f"방 문자 {letter!r}가 유효하지 않습니다", source=source)
            if letter not in cells_by_letter:
                raise FloorPlanError(f"방 {letter!r}가 grid에 없습니다", source=source)
            room_id = str(entry.get("id", ""))
            kind = str(entry.get("kind", ""))
            max_occupancy = int(entry.get("max_occupancy", 0))
            if not room_id:
                raise FloorPlanError(f"방 {letter!r}에 id가 없습니다", source=source)
            if room_id in rooms:
                raise FloorPlanError(f"방 id {room_id!r}가 중복됩니다", source=source)
            if kind not in PLAN_ROOM_KINDS:
                raise FloorPlanError(f"방 {room_id}: 알 수 없는 종류 {kind!r}", source=source)
            if max_occupancy < 1:
                raise FloorPlanError(f"방 {room_id}: max_occupancy는 1 이상이어야 합니다", source=source)
            cells = tuple(cells_by_letter[letter])
            _check_region(rows, letter, cells, room_id, source)
            rooms[room_id] = RoomSpec(room_id, kind, letter, cells, max_occupancy)

        for kind in AREA_KINDS:
            if not any(room.kind == kind for room in rooms.values()):
                raise FloorPlanError(f"{kind}가 평면도에 없습니다", source=source)
        return cls(name=str(doc.get("name", source)), width=width, height=len(rows), rows=rows, rooms=rooms)

    def rooms_of_kind(self, kind: str) -> List[RoomSpec]:
        return [room for room in self.rooms.values() if room.kind == kind]

    def first_of_kind(self, kind: str) -> RoomSpec:
        return self.rooms_of_kind(kind)[0]

    def is_wall(self, cell: Cell) -> bool:
        x, y = cell
        return self.rows[y][x] == WALL

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "grid": "\n".join(self.rows),
            "rooms": {
                room.letter: {"id": room.id, "kind": room.kind, "max_occupancy": room.max_occupancy}
                for room in self.rooms.values()
            },
        }


def _check_region(rows: List[str], letter: str, cells: Tuple[Cell, ...], room_id: str, source: str) -> None:
    height, width = len(rows), len(rows[0])
    members = set(cells)
    for x, y in cells:
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if not (0 <= nx < width and 0 <= ny < height):
                raise FloorPlanError(f"방 {room_id}가 벽으로 닫혀 있지 않습니다 (격자 경계)", source=source)
            neighbour = rows[ny][nx]
            if neighbour != letter and neighbour != WALL:
                raise FloorPlanError(f"방 {room_id}가 벽으로 닫혀 있지 않습니다 ({nx},{ny})", source=source)
    seen = {cells[0]}
    queue = deque([cells[0]])
    while queue:
        x, y = queue.popleft()
        for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nxt in members and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    if len(seen) != len(cells):
        raise FloorPlanError(f"방 {room_id} 영역이 연결되어 있지 않습니다", source=source)


@dataclass
class Position:
    entity: str
    x: int
    y: int
    room_id: Optional[str]


class SpatialModel:
    """에이전트 위치와 방 점유 관리. 경로 탐색 없이 직선 거리/속도로 이동 시간을 계산한다."""

    def __init__(self, plan: FloorPlan, hauling_multiplier: float = 0.5):
        self.plan = plan
        self.hauling_multiplier = hauling_multiplier
        self.positions: Dict[str, Position] = {}
        self.occupancy: Dict[str, int] = {room_id: 0 for room_id in plan.rooms}
        self._cells = {room_id: np.array(room.cells, dtype=float) for room_id, room in plan.rooms.items()}

    def _nearest_cell(self, room_id: str, origin: Optional[Position]) -> Tuple[Cell, float]:
        cells = self._cells[room_id]
        if origin is None:
            x, y = cells[0]
            return (int(x), int(y)), 0.0
        distances = np.hypot(cells[:, 0] - origin.x, cells[:, 1] - origin.y)
        index = int(np.argmin(distances))
        return (int(cells[index, 0]), int(cells[index, 1])), float(distances[index])

    def travel_steps(self, entity: str, room_id: str, speed: float, *, hauling: bool = False) -> int:
        effective = speed * (self.hauling_multiplier if hauling else 1.0)
        if effective <= 0:
            raise ValueError("이동 속도는 양수여야 합니다")
        _, distance = self._nearest_cell(room_id, self.positions.get(entity))
        return max(1, math.ceil(round(distance / effective, 9)))

    def assign_destination(self, entity: str, room_id: str, speed: float, *, hauling: bool = False) -> int:
        """목적지 방으로 즉시 배치하고 도착까지의 스텝 수를 돌려준다."""
        if room_id not in self.plan.rooms:
            raise ConfigurationError(f"unknown room id {room_id!r}")
        delay = self.travel_steps(entity, room_id, speed, hauling=hauling)
        self.place(entity, room_id)
        return delay

    def place(self, entity: str, room_id: str) -> Position:
        current = self.positions.get(entity)
        if current is not None and current.room_id == room_id:
            return current
        room = self.plan.rooms[room_id]
        if self.occupancy[room_id] >= room.max_occupancy:
            raise RoomFullError(f"room {room_id} is at max occupancy {room.max_occupancy}")
        (x, y), _ = self._nearest_cell(room_id, current)
        if current is not None and current.room_id is not None:
            self.occupancy[current.room_id] -= 1
        position = Position(entity=entity, x=x, y=y, room_id=room_id)
        self.positions[entity] = position
        self.occupancy[room_id] += 1
        return position

    def remove(self, entity: str) -> None:
        position = self.positions.pop(entity, None)
        if position is not None and position.room_id is not None:
            self.occupancy[position.room_id] -= 1

    def room_of(self, entity: str) -> Optional[str]:
        position = self.positions.get(entity)
        return position.room_id if position else None

    def proximity_ok(self, a: str, b: str) -> bool:
        pa, pb = self.positions.get(a), self.positions.get(b)
        if pa is None or pb is None:
            return False
        if pa.room_id is not None or pb.room_id is not None:
            return pa.room_id == pb.room_id
        return (pa.x, pa.y) == (pb.x, pb.y)

    def corridor_occupants(self) -> int:
        return sum(1 for position in self.positions.values() if position.room_id is None)


@dataclass
class RoomState:
    spec: RoomSpec
    kind: str
    open: bool
    draining: bool = False
    occupant: Optional[int] = None


@dataclass
class RoomBoard:
    """방 단위 런타임 상태(개방/폐쇄/점유)와 방 종류별 커널 풀 용량을 맞춘다."""

    rooms: Dict[str, RoomState] = field(default_factory=dict)

    @classmethod
    def from_plan(cls, plan: FloorPlan, counts: Mapping[str, int]) -> "RoomBoard":
        board = cls()
        for kind, count in counts.items():
            available = plan.rooms_of_kind(kind)
            if len(available) < count:
                raise ConfigurationError(
                    f"평면도 {plan.name}에 {kind}가 {len(available)}개뿐입니다 (필요 {count})"
                )
        for room in plan.rooms.values():
            if room.kind in AREA_KINDS:
                continue
            rank = [r.id for r in plan.rooms_of_kind(room.kind)].index(room.id)
            board.rooms[room.id] = RoomState(spec=room, kind=room.kind, open=rank < counts.get(room.kind, 0))
        return board

    def capacity(self, kind: str) -> int:
        return sum(1 for room in self.rooms.values() if room.kind == kind and room.open)

    def kinds(self) -> List[str]:
        seen: List[str] = []
        for room in self.rooms.values():
            if room.kind not in seen:
                seen.append(room.kind)
        return seen

    def claim(self, kind: str, patient_id: int) -> RoomState:
        for room in self.rooms.values():
            if room.kind == kind and room.open and not room.draining and room.occupant is None:
                room.occupant = patient_id
                return room
        raise EngineInvariantError(f"no free {kind} although the pool granted one")

    def vacate(self, room_id: str) -> bool:
        """점유 해제. 폐쇄 대기 중이던 방이면 닫고 True를 돌려준다."""
        room = self.rooms[room_id]
        room.occupant = None
        if room.draining:
            room.draining = False
            room.open = False
            return True
        return False

    def open_room(self, kind: str) -> RoomState:
        for room in self.rooms.values():
            if room.kind == kind and not room.open:
                room.open = True
                return room
        raise CommandRejected(f"no closed {kind} available to open")

    def close_room(self, room_id: str) -> RoomState:
        room = self.rooms.get(room_id)
        if room is None:
            raise CommandRejected(f"unknown room id {room_id!r}")
        if not room.open or room.draining:
            raise CommandRejected(f"room {room_id} is already closed or closing")
        if room.occupant is None:
            room.open = False
        else:
            room.draining = True
        return room

    def convert(self, kind_from: str, kind_to: str, count: int) -> List[RoomState]:
        """비어 있는 방을 뒤에서부터 다른 종류로 전환 (fast track 병상 확보용)"""
        converted: List[RoomState] = []
        for room in reversed(list(self.rooms.values())):
            if len(converted) == count:
                break
            if room.kind == kind_from and room.open and not room.draining and room.occupant is None:
                room.kind = kind_to
                converted.append(room)
        return converted


def room_counts(rooms_config) -> Dict[str, int]:
    counts = {
        "triage_room": rooms_config.triage,
        "exam_room": rooms_config.exam,
        "shock_room": rooms_config.shock,
    }
    for modality in IMAGING_MODALITIES:
        counts[f"imaging_room:{modality}"] = rooms_config.imaging
    return counts


def pool_kind(room_kind: str) -> str:
    return "imaging_room" if room_kind.startswith("imaging_room:") else room_kind


def is_bed(room_kind: str) -> bool:
    return room_kind in BED_KINDS
