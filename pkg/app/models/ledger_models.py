import json
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class EventKind(str, Enum):
    ARRIVAL = "arrival"
    TRIAGE_START = "triage_start"
    TRIAGE_DONE = "triage_done"
    RESOURCE_REQUEST = "resource_request"
    RESOURCE_GRANT = "resource_grant"
    RESOURCE_RELEASE = "resource_release"
    TREATMENT_START = "treatment_start"
    TREATMENT_DONE = "treatment_done"
    TREATMENT_ERROR = "treatment_error"
    DETERIORATION = "deterioration"
    DEATH = "death"
    LWBS = "lwbs"
    DISCHARGE = "discharge"
    SHIFT_CHANGE = "shift_change"
    INTERVENTION_APPLIED = "intervention_applied"
    CHECKPOINT = "checkpoint"
    # 내부 보조 이벤트
    MOVEMENT = "movement"
    REST_START = "rest_start"
    REST_END = "rest_end"
    ADMISSION_BLOCKED = "admission_blocked"
    COMMAND_REJECTED = "command_rejected"
    ROOM_CLOSED = "room_closed"
    CAPACITY_CHANGED = "capacity_changed"


class EventRecord(BaseModel):
    """append-only ledger 항목"""

    model_config = ConfigDict(frozen=True)

    seq: int = Field(..., ge=0, description="단조 증가 일련번호")
    time: int = Field(..., ge=0, description="발생 시각(분)")
    kind: EventKind = Field(..., description="이벤트 종류")
    subject: str = Field(..., description="대상 엔티티 id")
    payload: Dict[str, Any] = Field(default_factory=dict, description="종류별 데이터")

    def to_line(self) -> str:
        return json.dumps(self.model_dump(mode="json"), separators=(",", ":"))


class CommandAction(str, Enum):
    ENABLE = "enable"
    DISABLE = "disable"
    OPEN_ROOM = "open_room"
    CLOSE_ROOM = "close_room"
    ADD_STAFF = "add_staff"
    REMOVE_STAFF = "remove_staff"


class InterventionCommand(BaseModel):
    """외부 의사결정자가 주입하는 명령 한 줄"""

    model_config = ConfigDict(extra="forbid")

    t: int = Field(..., ge=0, description="적용 시각(분). 해당 스텝 시작 시 적용")
    action: CommandAction
    params: Dict[str, Any] = Field(default_factory=dict)


class BatchEntry(BaseModel):
    """배치 하나의 아카이브 색인"""

    batch: int
    start: int
    end: int
    checkpoint: str
    baseline: str
    intervened: Optional[str] = None
    branch_time: Optional[int] = None
    commands: List[InterventionCommand] = Field(default_factory=list)
    rejected: List[Dict[str, Any]] = Field(default_factory=list)
    summary_delta: Dict[str, Optional[float]] = Field(default_factory=dict)


class ArchiveIndex(BaseModel):
    """pairs.json 문서"""

    format_version: int
    config_hash: str
    batch_len: int
    horizon_steps: int
    batches: List[BatchEntry] = Field(default_factory=list)

    def entry(self, batch: int) -> Optional[BatchEntry]:
        for item in self.batches:
            if item.batch == batch:
                return item
        return None
