"""기준선 대비 개입 효과 검정 (Welch t, Cohen's d)."""

import logging
import math
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from app.errors import UndefinedResultError
from app.models.report_models import MetricName, StatResult

logger = logging.getLogger(__name__)


def _sample(values: Iterable[Optional[float]], label: str) -> np.ndarray:
    array = np.asarray([v for v in values if v is not None], dtype=float)
    if array.size < 2:
        raise UndefinedResultError(f"{label}: 표본이 2개 미만입니다 (n={array.size})")
    if not np.all(np.isfinite(array)):
        raise UndefinedResultError(f"{label}: 유한하지 않은 값이 있습니다")
    return array


def welch_t(sample_a: Sequence[float], sample_b: Sequence[float]) -> Tuple[float, float, float]:
    """Welch t 검정. (t, Welch-Satterthwaite 자유도, 양측 p)를 돌려준다."""
    a = _sample(sample_a, "sample_a")
    b = _sample(sample_b, "sample_b")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    se2 = va + vb
    diff = float(a.mean() - b.mean())
    if se2 == 0.0:
        if diff == 0.0:
            return 0.0, float(a.size + b.size - 2), 1.0
        raise UndefinedResultError("두 표본의 분산이 모두 0이고 평균이 다릅니다")
    df = se2**2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    result = stats.ttest_ind(a, b, equal_var=False)
    t = float(result.statistic)
    p = float(result.pvalue)
    if math.isnan(p):
        p = float(2.0 * stats.t.sf(abs(t), df))
    return t, float(df), min(max(p, 0.0), 1.0)


def cohens_d(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """(mean_a - mean_b) / pooled SD. a=기준선이면 양수가 개선(감소)을 뜻한다."""
    a = _sample(sample_a, "sample_a")
    b = _sample(sample_b, "sample_b")
    pooled_var = ((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1)) / (a.size + b.size - 2)
    if pooled_var <= 0.0:
        raise UndefinedResultError("pooled 표준편차가 0입니다")
    return float((a.mean() - b.mean()) / math.sqrt(pooled_var))


def relative_change(mean_baseline: Optional[float], mean_intervention: Optional[float]) -> Optional[float]:
    if mean_baseline is None or mean_intervention is None or mean_baseline == 0:
        return None
    return 100.0 * (mean_intervention - mean_baseline) / mean_baseline


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def compare(
    size: str,
    intervention: str,
    metric: MetricName,
    baseline: Sequence[Optional[float]],
    treated: Sequence[Optional[float]],
) -> StatResult:
    """한 셀/지표의 StatResult. 정의되지 않는 통계량은 None으로 남긴다."""
    mean_b, mean_i = _mean(baseline), _mean(treated)
    t = df = p = d = None
    try:
        t, df, p = welch_t(baseline, treated)
    except UndefinedResultError as exc:
        logger.warning("%s/%s %s: Welch test undefined (%s)", size, intervention, metric, exc)
    try:
        d = cohens_d(baseline, treated)
    except UndefinedResultError as exc:
        logger.warning("%s/%s %s: Cohen's d undefined (%s)", size, intervention, metric, exc)
    return StatResult(
        size=size,
        intervention=intervention,
        metric=metric,
        mean_baseline=mean_b,
        mean_intervention=mean_i,
        relative_change_pct=relative_change(mean_b, mean_i),
        welch_t=t,
        df=df,
        p_value=p,
        cohens_d=d,
        n_baseline=sum(1 for v in baseline if v is not None),
        n_intervention=sum(1 for v in treated if v is not None),
    )
