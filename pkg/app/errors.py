"""시뮬레이터 전역 예외 정의.

라우터(CLI)는 이 예외들을 종료 코드로 변환한다.
"""

from typing import Optional


class ConfigurationError(ValueError):
    """시나리오, 경로(pathway), 평면도 설정이 유효하지 않을 때 발생"""

    def __init__(self, message: str, *, source: Optional[str] = None):
        self.source = source
        self.reason = message
        super().__init__(f"{source}: {message}" if source else message)


class PathwayLoadError(ConfigurationError):
    """pathway 문서 스키마 위반"""


class FloorPlanError(ConfigurationError):
    """평면도 격자/방 테이블 위반"""


class SchedulingError(ValueError):
    """과거 시각으로의 이벤트 예약 등 커널 사용 오류"""


class EngineInvariantError(RuntimeError):
    """엔진 내부 불변식 위반 (이중 해제, 용량 초과 등). 실행을 중단한다."""


class ArchiveMismatchError(RuntimeError):
    """체크포인트의 설정 해시/포맷이 현재 빌드와 다를 때"""


class ReplayError(RuntimeError):
    """존재하지 않는 배치 등 아카이브 재생 실패"""


class UndefinedResultError(ValueError):
    """표본 수 부족 또는 분산 0 등으로 통계량을 정의할 수 없을 때"""


class StudyRunError(RuntimeError):
    """스터디 실행 중 개별 run 실패. 재현용 시드를 함께 보관한다."""

    def __init__(self, message: str, *, cell: Optional[str] = None, seeds: Optional[dict] = None):
        self.cell = cell
        self.seeds = seeds or {}
        detail = f" cell={cell}" if cell else ""
        if self.seeds:
            detail += " seeds=" + ",".join(f"{k}={v}" for k, v in self.seeds.items())
        super().__init__(message + detail)


class CommandRejected(ValueError):
    """개입 명령을 적용할 수 없음. 실행은 계속되고 ledger에 거부 기록이 남는다."""


class RoomFullError(RuntimeError):
    """목적지 방이 최대 수용 인원에 도달"""
