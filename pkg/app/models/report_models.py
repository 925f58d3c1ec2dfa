from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator


class InterventionCounters(BaseModel):
    """개입 활동 카운터 (run 내에서 단조 증가)"""

    fast_track_count: int = Field(0, ge=0, description="fast track 병상을 사용한 환자 수")
    nurse_ratio_blocked_count: int = Field(0, ge=0, description="간호사 비율로 입실이 막힌 환자-스텝 수")
    physician_triage_count: int = Field(0, ge=0, description="수행된 PIT 평가 수")


class RunSummary(BaseModel):
    """단일 run KPI 요약"""

    arrivals: int = Field(..., ge=0)
    completed: int = Field(..., ge=0, description="discharged + admitted")
    discharged: int = Field(0, ge=0)
    admitted: int = Field(0, ge=0)
    lwbs: int = Field(0, ge=0)
    deceased: int = Field(0, ge=0)
    in_progress: int = Field(0, ge=0)
    avg_los: Optional[float] = Field(default=None, description="평균 재원 시간(분)")
    median_los: Optional[float] = None
    p95_los: Optional[float] = None
    avg_wait: Optional[float] = Field(default=None, description="평균 총 대기 시간(분)")
    median_wait: Optional[float] = None
    p95_wait: Optional[float] = None
    wait_breakdown: Dict[str, float] = Field(default_factory=dict, description="자원 종류별 평균 대기")
    high_acuity_wait_breakdown: Dict[str, float] = Field(default_factory=dict, description="실제 ESI 1-2")
    deceased_wait_breakdown: Dict[str, float] = Field(default_factory=dict)
    lwbs_rate: float = Field(0.0, ge=0, le=100, description="도착 대비 LWBS %")
    mortality_rate: float = Field(0.0, ge=0, le=100, description="도착 대비 사망 %")
    counters: InterventionCounters = Field(default_factory=InterventionCounters)
    lwbs_by_esi: Dict[str, Dict[str, int]] = Field(
        default_factory=dict, description="실제 ESI -> 배정 트리아지(0=미분류) -> LWBS 수"
    )
    horizon_steps: int = 0
    note: str = "LoS/wait averages cover discharged and admitted patients; LWBS and deceased are reported as rates."

    @model_validator(mode="after")
    def _partition(self) -> "RunSummary":
        total = self.discharged + self.admitted + self.lwbs + self.deceased + self.in_progress
        if total != self.arrivals:
            raise ValueError(f"disposition 합계({total})가 도착 수({self.arrivals})와 다릅니다")
        return self


class BottleneckRow(BaseModel):
    pool: str
    kind: str
    mean_queue_ratio: float
    mean_utilization: float
    rank: int


MetricName = Literal["los", "wait", "lwbs_rate", "mortality_rate"]


class StatResult(BaseModel):
    """기준선 대비 개입 효과 검정 결과"""

    size: str
    intervention: str
    metric: MetricName
    mean_baseline: Optional[float]
    mean_intervention: Optional[float]
    relative_change_pct: Optional[float]
    welch_t: Optional[float]
    df: Optional[float]
    p_value: Optional[float] = Field(default=None, ge=0, le=1)
    cohens_d: Optional[float] = Field(default=None, description="양수 = 개입이 지표를 낮춤(개선)")
    n_baseline: int
    n_intervention: int


class StudyReport(BaseModel):
    name: str
    master_seed: int
    runs: int
    results: List[StatResult] = Field(default_factory=list)
