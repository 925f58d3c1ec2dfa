import math
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

RoleName = Literal["doctor", "nurse", "np_pa", "assistant"]
InterventionName = Literal["fast_track", "nurse_ratio", "split_flow"]
EdSize = Literal["S", "M", "L", "XL"]
BaselineName = Literal["default", "high_volume", "stressed"]

MINUTES_PER_DAY = 1440

DEFAULT_DAILY_ANCHORS: List[Tuple[float, float]] = [
    (0.0, 0.6),
    (4.0, 0.5),
    (11.0, 1.4),
    (19.0, 1.3),
    (24.0, 0.6),
]
DEFAULT_WEEKLY_FACTORS: List[float] = [1.10, 1.05, 1.02, 1.00, 0.98, 0.95, 0.95]
DEFAULT_ESI_DISTRIBUTION: Dict[int, float] = {1: 0.02, 2: 0.13, 3: 0.45, 4: 0.30, 5: 0.10}
DEFAULT_PATIENCE: Dict[int, Optional[Tuple[float, float]]] = {
    1: None,
    2: None,
    3: (120.0, 360.0),
    4: (60.0, 240.0),
    5: (45.0, 180.0),
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_esi_keys(values: Dict[int, float], label: str) -> Dict[int, float]:
    unknown = [key for key in values if key not in (1, 2, 3, 4, 5)]
    if unknown:
        raise ValueError(f"{label}: ESI 레벨은 1-5만 허용됩니다 (입력: {unknown})")
    return values


class ArrivalConfig(_Strict):
    """NHPP 도착 프로파일 설정"""

    lambda_avg: float = Field(8.0, ge=0, description="시간당 평균 도착 환자 수")
    surge_multiplier: float = Field(1.0, gt=0, description="High-Volume 배율 (기본 1.0)")
    daily_anchors: List[Tuple[float, float]] = Field(
        default_factory=lambda: list(DEFAULT_DAILY_ANCHORS),
        description="(시각, 배율) 앵커. 24개 시간값으로 선형 보간 후 평균 1로 정규화",
    )
    daily_shape: Optional[List[float]] = Field(default=None, description="24개 시간별 배율 (지정 시 앵커 무시)")
    weekly_factors: List[float] = Field(
        default_factory=lambda: list(DEFAULT_WEEKLY_FACTORS), description="월요일부터 7일 배율"
    )
    esi_distribution: Dict[int, float] = Field(
        default_factory=lambda: dict(DEFAULT_ESI_DISTRIBUTION), description="실제 ESI 분포"
    )
    patience_minutes: Dict[int, Optional[Tuple[float, float]]] = Field(
        default_factory=lambda: dict(DEFAULT_PATIENCE),
        description="트리아지 레벨별 LWBS 인내 시간 범위 (None=무한)",
    )

    @field_validator("daily_anchors")
    @classmethod
    def _anchors(cls, anchors: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        if len(anchors) < 2:
            raise ValueError("daily_anchors에는 최소 2개의 앵커가 필요합니다")
        hours = [hour for hour, _ in anchors]
        if hours[0] != 0.0 or hours[-1] != 24.0:
            raise ValueError("daily_anchors는 0시에서 시작해 24시에서 끝나야 합니다")
        if any(b <= a for a, b in zip(hours, hours[1:])):
            raise ValueError("daily_anchors 시각은 엄격히 증가해야 합니다")
        if any(mult <= 0 for _, mult in anchors):
            raise ValueError("daily_anchors 배율은 양수여야 합니다")
        return anchors

    @field_validator("daily_shape")
    @classmethod
    def _shape(cls, shape: Optional[List[float]]) -> Optional[List[float]]:
        if shape is None:
            return shape
        if len(shape) != 24 or any(value <= 0 for value in shape):
            raise ValueError("daily_shape는 양수 24개여야 합니다")
        return shape

    @field_validator("weekly_factors")
    @classmethod
    def _weekly(cls, factors: List[float]) -> List[float]:
        if len(factors) != 7 or any(value <= 0 for value in factors):
            raise ValueError("weekly_factors는 양수 7개여야 합니다")
        return factors

    @field_validator("esi_distribution")
    @classmethod
    def _distribution(cls, values: Dict[int, float]) -> Dict[int, float]:
        _check_esi_keys(values, "esi_distribution")
        if any(p < 0 for p in values.values()):
            raise ValueError("esi_distribution 확률은 음수일 수 없습니다")
        total = sum(values.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"esi_distribution 합이 1이 아닙니다 (합계 {total:g})")
        return values

    @field_validator("patience_minutes")
    @classmethod
    def _patience(cls, values: Dict[int, Optional[Tuple[float, float]]]):
        _check_esi_keys(values, "patience_minutes")
        for level, bounds in values.items():
            if bounds is not None and not 0 <= bounds[0] <= bounds[1]:
                raise ValueError(f"patience_minutes[{level}] 범위가 잘못되었습니다: {bounds}")
        return values


class TriageConfig(_Strict):
    """트리아지 오류 모델 (과소/과대 분류)"""

    p_correct: float = Field(0.80, ge=0, le=1, description="정확 분류 확률")
    p_under: float = Field(0.10, ge=0, le=1, description="과소 분류(덜 긴급) 확률")
    p_over: float = Field(0.10, ge=0, le=1, description="과대 분류(더 긴급) 확률")
    pre_triage_priority: int = Field(3, ge=1, le=5, description="트리아지 전 대기열 우선순위")

    @model_validator(mode="after")
    def _sums_to_one(self) -> "TriageConfig":
        total = self.p_correct + self.p_under + self.p_over
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"트리아지 확률 합이 1이 아닙니다 (합계 {total:g})")
        return self


class FatigueParams(_Strict):
    """역할별 피로 파라미터"""

    r_work: float = Field(1.0 / 720.0, gt=0, description="근무 1분당 피로 증가량")
    r_rest: float = Field(3.0 / 720.0, gt=0, description="휴식 1분당 회복량")
    p0: float = Field(0.005, ge=0, le=1, description="F=0에서의 오류 확률")
    k: float = Field(math.log(11.0), ge=0, description="오류 확률 지수 계수")
    s_max: float = Field(1.5, ge=1, description="최대 지연 배율")
    c_min: float = Field(0.7, gt=0, le=1, description="교대 종료 시점 최소 인지 효율")
    plateau_minutes: int = Field(480, ge=0, description="인지 효율이 유지되는 교대 초반 시간")
    rest_trigger: float = Field(0.6, ge=0, le=1, description="휴식을 시도하는 피로 임계값")
    rest_duration: int = Field(15, ge=1, description="휴식 시간(분)")


class ShiftSpec(_Strict):
    """교대 패턴"""

    pattern: Literal["block_12h", "waterfall"] = Field(..., description="교대 방식")
    start_offsets: List[int] = Field(..., min_length=1, description="하루 중 시작 시각(분)")
    duration: int = Field(..., gt=0, le=MINUTES_PER_DAY, description="교대 길이(분)")
    per_block: bool = Field(False, description="true면 인원 수를 블록(시작 시각)마다 배치, false면 블록들에 나눠 배치")

    @field_validator("start_offsets")
    @classmethod
    def _offsets(cls, offsets: List[int]) -> List[int]:
        if any(not 0 <= value < MINUTES_PER_DAY for value in offsets):
            raise ValueError("start_offsets는 0-1439 범위여야 합니다")
        return offsets

    @model_validator(mode="after")
    def _waterfall_increasing(self) -> "ShiftSpec":
        if self.pattern == "waterfall":
            offsets = self.start_offsets
            if any(b <= a for a, b in zip(offsets, offsets[1:])):
                raise ValueError("waterfall start_offsets는 엄격히 증가해야 합니다")
        return self


def _block_shift() -> ShiftSpec:
    return ShiftSpec(pattern="block_12h", start_offsets=[420, 1140], duration=720)


def _default_fatigue() -> Dict[str, FatigueParams]:
    return {role: FatigueParams() for role in ("doctor", "nurse", "np_pa", "assistant")}


class StaffingConfig(_Strict):
    """인력 구성과 교대 일정"""

    doctors: int = Field(4, ge=0, description="의사 수")
    nurses: int = Field(2, ge=0, description="간호사 수")
    assistants: int = Field(2, ge=0, description="보조 인력 수 (검사/영상)")
    doctor_shift: ShiftSpec = Field(
        default_factory=lambda: ShiftSpec(pattern="waterfall", start_offsets=[420, 600, 780, 1260], duration=600)
    )
    doctor_specializations: List[str] = Field(
        default_factory=lambda: ["trauma", "general", "trauma", "trauma"],
        description="doctor_shift 오프셋과 같은 순서로 순환 배정되는 전문분야",
    )
    nurse_shift: ShiftSpec = Field(default_factory=_block_shift)
    assistant_shift: ShiftSpec = Field(default_factory=_block_shift)
    fatigue: Dict[RoleName, FatigueParams] = Field(default_factory=_default_fatigue)

    @field_validator("doctor_specializations")
    @classmethod
    def _specializations(cls, values: List[str]) -> List[str]:
        if not values:
            raise ValueError("doctor_specializations가 비어 있습니다")
        unknown = [v for v in values if v not in ("general", "trauma")]
        if unknown:
            raise ValueError(f"알 수 없는 의사 전문분야: {unknown}")
        return values

    @model_validator(mode="after")
    def _required_roles(self) -> "StaffingConfig":
        if self.doctors == 0:
            raise ValueError("doctors 인원이 0입니다")
        if self.nurses == 0:
            raise ValueError("nurses 인원이 0입니다")
        for role in ("doctor", "nurse", "np_pa", "assistant"):
            self.fatigue.setdefault(role, FatigueParams())
        return self


class RoomCounts(_Strict):
    """규모별 방 구성. imaging은 모달리티별 개수"""

    triage: int = Field(1, ge=1)
    exam: int = Field(4, ge=1)
    shock: int = Field(1, ge=0)
    imaging: int = Field(1, ge=0, description="X-ray/CT/초음파 각각의 방 수")


class MovementConfig(_Strict):
    walking_speed: float = Field(4.0, gt=0, description="칸/분")
    hauling_multiplier: float = Field(0.5, gt=0, le=1, description="장비 운반 시 속도 배율")


class MortalityParams(_Strict):
    """사망 모델 파라미터"""

    base_per_hour: Dict[int, float] = Field(
        default_factory=lambda: {1: 0.02, 2: 0.005, 3: 0.001, 4: 0.0001, 5: 0.00005}
    )
    wait_risk_per_hour: float = Field(0.0005, ge=0, le=1)
    error_multiplier: float = Field(2.0, ge=1)
    ratio_threshold: float = Field(4.0, gt=0)
    ratio_risk_per_extra_patient: float = Field(0.07, ge=0)

    @field_validator("base_per_hour")
    @classmethod
    def _rates(cls, values: Dict[int, float]) -> Dict[int, float]:
        _check_esi_keys(values, "base_per_hour")
        if any(not 0 <= p <= 1 for p in values.values()):
            raise ValueError("base_per_hour 확률은 0-1 범위여야 합니다")
        return values


class DeteriorationParams(_Strict):
    """대기 중 중증도 악화 파라미터"""

    per_minute: Dict[int, float] = Field(
        default_factory=lambda: {1: 0.0, 2: 0.0005, 3: 0.0003, 4: 0.0001, 5: 0.00005}
    )
    wait_growth_per_hour: float = Field(0.25, ge=0)
    max_factor: float = Field(3.0, ge=1)

    @field_validator("per_minute")
    @classmethod
    def _rates(cls, values: Dict[int, float]) -> Dict[int, float]:
        _check_esi_keys(values, "per_minute")
        if any(not 0 <= p <= 1 for p in values.values()):
            raise ValueError("per_minute 확률은 0-1 범위여야 합니다")
        return values


class FastTrackConfig(_Strict):
    np_count: int = Field(2, ge=1, description="NP/PA 인원")
    ft_room_count: int = Field(1, ge=1, description="fast track으로 전환할 진료실 수")
    eligible_levels: List[int] = Field(default_factory=lambda: [4, 5])
    np_shift: ShiftSpec = Field(default_factory=_block_shift)


class NurseRatioConfig(_Strict):
    max_ratio: float = Field(4.0, gt=0, description="간호사 1명당 최대 환자 수")
    reserve_nurses: int = Field(1, ge=0, description="호출 가능한 예비 간호사 수")
    reserve_block_minutes: int = Field(720, ge=1, description="예비 간호사 근무 시간")
    reserve_rest_minutes: int = Field(720, ge=0, description="근무를 마친 예비 간호사를 다시 부를 수 있을 때까지의 시간")


class SplitFlowConfig(_Strict):
    triage_doctor_count: int = Field(2, ge=1, description="전담 트리아지 의사 수")
    eligible_levels: List[int] = Field(default_factory=lambda: [3])
    treat_and_release_levels: List[int] = Field(default_factory=lambda: [4, 5])
    pit_duration: int = Field(6, ge=1, description="PIT 평가 시간(분)")
    triage_doctor_shift: ShiftSpec = Field(default_factory=_block_shift)


class InterventionConfig(_Strict):
    enabled: List[InterventionName] = Field(default_factory=list, description="활성화된 개입")
    fast_track: FastTrackConfig = Field(default_factory=FastTrackConfig)
    nurse_ratio: NurseRatioConfig = Field(default_factory=NurseRatioConfig)
    split_flow: SplitFlowConfig = Field(default_factory=SplitFlowConfig)

    @field_validator("enabled")
    @classmethod
    def _unique(cls, values: List[str]) -> List[str]:
        if len(set(values)) != len(values):
            raise ValueError("enabled에 중복된 개입이 있습니다")
        return values


class SeedConfig(_Strict):
    patient: int = Field(0, ge=0, description="환자 도착 스트림 시드")
    dynamics: int = Field(1, ge=0, description="내부 동역학 스트림 시드")


class SimConfig(_Strict):
    """단일 시뮬레이션 시나리오 전체"""

    name: str = Field("scenario", description="시나리오 이름")
    size: EdSize = Field("M", description="ED 규모 (S, M, L, XL)")
    baseline: BaselineName = Field("default", description="표적 기준선")
    floor_plan: str = Field("medium", description="평면도 이름 또는 경로")
    pathways: str = Field("default", description="pathway 라이브러리 디렉터리")
    horizon_days: int = Field(3, ge=1, description="시뮬레이션 일수")
    seeds: SeedConfig = Field(default_factory=SeedConfig)
    arrivals: ArrivalConfig = Field(default_factory=ArrivalConfig)
    triage: TriageConfig = Field(default_factory=TriageConfig)
    staffing: StaffingConfig = Field(default_factory=StaffingConfig)
    rooms: RoomCounts = Field(default_factory=RoomCounts)
    equipment: Dict[str, int] = Field(default_factory=dict, description="장비 이름별 수량")
    movement: MovementConfig = Field(default_factory=MovementConfig)
    mortality: MortalityParams = Field(default_factory=MortalityParams)
    deterioration: DeteriorationParams = Field(default_factory=DeteriorationParams)
    admission_probability: Dict[int, float] = Field(
        default_factory=lambda: {1: 0.9, 2: 0.6, 3: 0.3, 4: 0.05, 5: 0.01}
    )
    interventions: InterventionConfig = Field(default_factory=InterventionConfig)

    @field_validator("equipment")
    @classmethod
    def _equipment(cls, values: Dict[str, int]) -> Dict[str, int]:
        if any(count < 0 for count in values.values()):
            raise ValueError("장비 수량은 음수일 수 없습니다")
        return values

    @field_validator("admission_probability")
    @classmethod
    def _admission(cls, values: Dict[int, float]) -> Dict[int, float]:
        _check_esi_keys(values, "admission_probability")
        if sorted(values) != [1, 2, 3, 4, 5]:
            raise ValueError("admission_probability는 ESI 1-5를 모두 포함해야 합니다")
        if any(not 0 <= p <= 1 for p in values.values()):
            raise ValueError("admission_probability는 0-1 범위여야 합니다")
        return values

    @property
    def horizon_steps(self) -> int:
        return self.horizon_days * MINUTES_PER_DAY
