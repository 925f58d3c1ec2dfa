"""NHPP 환자 도착 생성, 실제 ESI/질환 배정, 오류가 있는 트리아지.

환자 스트림(도착 시각, ESI, 질환, 인내 분위수)과 동역학 스트림은 서로 다른
numpy Generator를 쓰며 상태를 공유하지 않는다.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.errors import ConfigurationError
from app.models.scenario_models import ArrivalConfig, SeedConfig, TriageConfig

logger = logging.getLogger(__name__)

ESI_LEVELS = (1, 2, 3, 4, 5)
MINUTES_PER_HOUR = 60.0
MINUTES_PER_DAY = 1440


def make_streams(seeds: SeedConfig) -> Tuple[np.random.Generator, np.random.Generator]:
    patient = np.random.Generator(np.random.PCG64(seeds.patient))
    dynamics = np.random.Generator(np.random.PCG64(seeds.dynamics))
    return patient, dynamics


def normalized(values: Sequence[float]) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    return array / array.mean()


def daily_shape_from_anchors(anchors: Sequence[Tuple[float, float]]) -> np.ndarray:
    hours = [hour for hour, _ in anchors]
    mults = [mult for _, mult in anchors]
    return normalized(np.interp(np.arange(24, dtype=float), hours, mults))


@dataclass(frozen=True)
class ArrivalProfile:
    lambda_avg: float
    daily_shape: Tuple[float, ...]
    weekly_factors: Tuple[float, ...]
    surge_multiplier: float = 1.0

    @classmethod
    def from_config(cls, config: ArrivalConfig) -> "ArrivalProfile":
        shape = (
            normalized(config.daily_shape)
            if config.daily_shape is not None
            else daily_shape_from_anchors(config.daily_anchors)
        )
        return cls(
            lambda_avg=config.lambda_avg,
            daily_shape=tuple(float(v) for v in shape),
            weekly_factors=tuple(float(v) for v in normalized(config.weekly_factors)),
            surge_multiplier=config.surge_multiplier,
        )

    @property
    def lambda_max(self) -> float:
        return self.lambda_avg * self.surge_multiplier * max(self.daily_shape) * max(self.weekly_factors)


def instantaneous_rate(t: float, profile: ArrivalProfile) -> float:
    """시각 t(분)에서의 도착률(명/시간). 시간별 배율 사이는 선형 보간."""
    hour = (t / MINUTES_PER_HOUR) % 24.0
    lower = int(hour)
    frac = hour - lower
    shape = profile.daily_shape
    daily = shape[lower] * (1.0 - frac) + shape[(lower + 1) % 24] * frac
    day = int(t // MINUTES_PER_DAY) % 7
    return profile.lambda_avg * profile.surge_multiplier * daily * profile.weekly_factors[day]


@dataclass(frozen=True)
class ArrivalSpec:
    arrival_time: int
    exact_time: float
    true_esi: int
    condition: str
    patience_quantile: float

    def digest_tuple(self) -> Tuple[int, int, str, float]:
        return (self.arrival_time, self.true_esi, self.condition, self.patience_quantile)


def _categorical(rng: np.random.Generator, weights: Sequence[float]) -> int:
    probs = np.asarray(weights, dtype=float)
    return int(rng.choice(len(probs), p=probs / probs.sum()))


def draw_true_esi(rng: np.random.Generator, distribution: Mapping[int, float]) -> int:
    levels = sorted(distribution)
    probs = [distribution[level] for level in levels]
    if any(level not in ESI_LEVELS for level in levels) or any(p < 0 for p in probs):
        raise ConfigurationError(f"ESI 분포가 유효하지 않습니다: {dict(distribution)}")
    total = sum(probs)
    if abs(total - 1.0) > 1e-9:
        raise ConfigurationError(f"ESI 분포 합이 1이 아닙니다 (합계 {total:g})")
    return levels[_categorical(rng, probs)]


def draw_condition(
    rng: np.random.Generator, true_esi: int, weights: Optional[Mapping[int, Mapping[str, float]]]
) -> str:
    if not weights:
        return "unspecified"
    options = weights[true_esi]
    names = list(options)
    return names[_categorical(rng, [options[name] for name in names])]


def generate_arrivals(
    horizon_minutes: int,
    profile: ArrivalProfile,
    rng: np.random.Generator,
    esi_distribution: Mapping[int, float],
    condition_weights: Optional[Mapping[int, Mapping[str, float]]] = None,
) -> List[ArrivalSpec]:
    """thinning으로 NHPP 도착을 생성한다. 모든 추첨은 환자 스트림에서만 한다."""
    lam_max = profile.lambda_max
    if lam_max <= 0 or horizon_minutes <= 0:
        return []
    mean_gap = MINUTES_PER_HOUR / lam_max
    arrivals: List[ArrivalSpec] = []
    t = 0.0
    while True:
        t += rng.exponential(mean_gap)
        if t >= horizon_minutes:
            break
        if rng.random() * lam_max >= instantaneous_rate(t, profile):
            continue
        esi = draw_true_esi(rng, esi_distribution)
        condition = draw_condition(rng, esi, condition_weights)
        quantile = float(rng.random())
        arrivals.append(ArrivalSpec(int(math.floor(t)), t, esi, condition, quantile))
    logger.debug("Generated %d arrivals over %d minutes (lambda_max=%.3f)", len(arrivals), horizon_minutes, lam_max)
    return arrivals


def stream_digest(arrivals: Sequence[ArrivalSpec]) -> str:
    digest = hashlib.sha256()
    for spec in arrivals:
        digest.update(repr(spec.digest_tuple()).encode("utf-8"))
    return digest.hexdigest()


def patience_minutes(
    quantile: float, level: int, ranges: Mapping[int, Optional[Tuple[float, float]]]
) -> float:
    bounds = ranges.get(level)
    if bounds is None:
        return math.inf
    low, high = bounds
    return low + quantile * (high - low)


def triage_row(true_esi: int, config: TriageConfig) -> Dict[int, float]:
    """배정 레벨 분포. 범위를 벗어나는 확률은 정확 분류로 접는다."""
    over = config.p_over if true_esi > 1 else 0.0
    under = config.p_under if true_esi < 5 else 0.0
    row = {true_esi: 1.0 - over - under}
    if over:
        row[true_esi - 1] = over
    if under:
        row[true_esi + 1] = under
    return row


def triage_matrix(config: TriageConfig) -> np.ndarray:
    matrix = np.zeros((5, 5))
    for esi in ESI_LEVELS:
        for level, prob in triage_row(esi, config).items():
            matrix[esi - 1, level - 1] = prob
    return matrix


def triage(true_esi: int, config: TriageConfig, rng: np.random.Generator) -> int:
    row = triage_row(true_esi, config)
    u = rng.random()
    cumulative = 0.0
    for level in sorted(row):
        cumulative += row[level]
        if u < cumulative:
            return level
    return true_esi


@dataclass
class Patient:
    """ED 환자 에이전트. 임상 속성과 경로 진행 상태를 함께 가진다."""

    id: int
    arrival_time: int
    true_esi: int
    condition: str
    patience_quantile: float
    initial_esi: int = 0
    assigned_triage: Optional[int] = None
    disposition: str = "in_progress"
    disposition_time: Optional[int] = None
    severity_worsened_by_error: bool = False
    milestones: Dict[str, int] = field(default_factory=dict)
    cumulative_wait: Dict[str, int] = field(default_factory=dict)
    total_wait: int = 0
    travel_minutes: int = 0
    treatment_minutes: int = 0
    # 경로 진행 상태
    plan: list = field(default_factory=list)
    step_index: int = 0
    status: str = "new"
    active_request: object = None
    bed_request: object = None
    bed_room: Optional[str] = None
    bed_kind: Optional[str] = None
    step_rooms: List[str] = field(default_factory=list)
    attending: List[str] = field(default_factory=list)
    pending_event: object = None
    granted_at: Optional[int] = None
    route: str = "main"
    last_blocked: Optional[int] = None
    step_log: List[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.initial_esi:
            self.initial_esi = self.true_esi

    @property
    def entity_id(self) -> str:
        return f"patient-{self.id:05d}"

    @property
    def triage_level(self) -> int:
        return self.assigned_triage if self.assigned_triage is not None else self.true_esi

    @property
    def in_progress(self) -> bool:
        return self.disposition == "in_progress"

    def mark(self, milestone: str, t: int) -> None:
        self.milestones.setdefault(milestone, t)

    def add_wait(self, kind: str, minutes: int = 1) -> None:
        self.cumulative_wait[kind] = self.cumulative_wait.get(kind, 0) + minutes
        self.total_wait += minutes

    @classmethod
    def from_arrival(cls, patient_id: int, spec: ArrivalSpec) -> "Patient":
        return cls(
            id=patient_id,
            arrival_time=spec.arrival_time,
            true_esi=spec.true_esi,
            condition=spec.condition,
            patience_quantile=spec.patience_quantile,
        )
