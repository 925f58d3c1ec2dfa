from typing import Dict, List, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.models.scenario_models import BaselineName, EdSize, InterventionName

# 개입별 표적 기준선
TARGET_BASELINES: Dict[str, BaselineName] = {
    "fast_track": "high_volume",
    "split_flow": "high_volume",
    "nurse_ratio": "stressed",
}


class ScenarioMatrix(BaseModel):
    """스터디 설정 (규모 x 개입 x 반복)"""

    model_config = ConfigDict(extra="forbid")

    name: str = Field("study", description="스터디 이름")
    sizes: List[EdSize] = Field(default_factory=lambda: ["M"], min_length=1)
    interventions: List[InterventionName] = Field(
        default_factory=lambda: ["fast_track", "nurse_ratio", "split_flow"], min_length=1
    )
    replications: int = Field(10, ge=1, description="셀당 반복 수")
    horizon_days: int = Field(3, ge=1)
    master_seed: int = Field(20240601, ge=0)
    paired_dynamics: bool = Field(True, description="두 arm에 같은 dynamics 시드 사용")
    output_dir: str = Field("study_out")
    jobs: int = Field(1, ge=1, description="동시 실행 프로세스 수")
    write_timeseries: bool = Field(True)
    overrides: Dict[str, dict] = Field(default_factory=dict, description="규모별 시나리오 덮어쓰기")

    @field_validator("sizes", "interventions")
    @classmethod
    def _unique(cls, values: List[str]) -> List[str]:
        if len(set(values)) != len(values):
            raise ValueError("중복 항목이 있습니다")
        return values

    @property
    def run_count(self) -> int:
        return len(self.sizes) * len(self.interventions) * self.replications * 2

    def baseline_for(self, intervention: str) -> BaselineName:
        return TARGET_BASELINES[intervention]


class RunTask(BaseModel):
    """워커 프로세스에 넘기는 단일 run 작업"""

    size: EdSize
    intervention: InterventionName
    arm: Literal["baseline", "intervention"]
    replication: int
    config: dict
    timeseries_path: str = ""
