"""Medium ED 10회 paired 반복의 방향성 검증. `pytest -m calibration` 으로 실행."""

import pandas as pd
import pytest

from app.experiments import study_service
from app.models.study_models import ScenarioMatrix

pytestmark = pytest.mark.calibration

REPS = 10


@pytest.fixture(scope="module")
def desk_study(tmp_path_factory):
    matrix = ScenarioMatrix(
        name="desk_calibration",
        sizes=["M"],
        replications=REPS,
        horizon_days=3,
        write_timeseries=False,
    )
    report, written = study_service.run_study(matrix, out_dir=str(tmp_path_factory.mktemp("desk")), jobs=1)
    results = {(r.intervention, r.metric): r for r in report.results}
    return results, written


def test_fast_track_shortens_stays(desk_study):
    results, _ = desk_study
    los = results[("fast_track", "los")]
    assert -40.0 <= los.relative_change_pct <= -10.0
    assert los.p_value < 0.05
    assert results[("fast_track", "lwbs_rate")].relative_change_pct < -50.0


def test_split_flow_cuts_waiting(desk_study):
    results, _ = desk_study
    wait = results[("split_flow", "wait")]
    assert -50.0 <= wait.relative_change_pct <= -20.0
    assert wait.p_value < 0.05
    mortality = results[("split_flow", "mortality_rate")]
    assert mortality.mean_intervention <= mortality.mean_baseline + 1e-9 or mortality.p_value >= 0.05


def test_nurse_ratio_is_roughly_neutral_on_flow(desk_study):
    results, written = desk_study
    assert abs(results[("nurse_ratio", "los")].relative_change_pct) < 10.0
    assert abs(results[("nurse_ratio", "wait")].relative_change_pct) < 15.0
    assert results[("nurse_ratio", "lwbs_rate")].relative_change_pct < -20.0
    table = pd.read_csv(written["summary_table"])
    treated = table[(table["intervention"] == "nurse_ratio") & (table["arm"] == "intervention")]
    assert treated["nurse_ratio_blocked_count"].iloc[0] > 0


def test_high_volume_baseline_band(desk_study):
    results, _ = desk_study
    lwbs = results[("fast_track", "lwbs_rate")].mean_baseline
    los = results[("fast_track", "los")].mean_baseline
    assert 5.0 <= lwbs <= 15.0
    assert 150.0 <= los <= 280.0


def test_exam_rooms_dominate_high_volume_waits(desk_study):
    _, written = desk_study
    waits = pd.read_csv(written["wait_breakdown"])
    baseline = waits[
        (waits["intervention"] == "fast_track") & (waits["arm"] == "baseline") & (waits["group"] == "all")
    ]
    top = baseline.sort_values("mean_minutes", ascending=False).iloc[0]
    assert top["component"] == "exam_room"
