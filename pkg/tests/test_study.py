import pandas as pd
import pytest

from app.config.loader import load_matrix
from app.errors import StudyRunError
from app.experiments import study_service
from app.models.study_models import ScenarioMatrix


def tiny_matrix(**changes):
    document = {
        "name": "tiny",
        "sizes": ["S"],
        "interventions": ["fast_track"],
        "replications": 2,
        "horizon_days": 1,
        "master_seed": 7,
        "write_timeseries": False,
    }
    document.update(changes)
    return ScenarioMatrix.model_validate(document)


def test_derive_seed_is_stable_and_distinct():
    seed = study_service.derive_seed(1, "M", "fast_track", 0, "patient")
    assert seed == study_service.derive_seed(1, "M", "fast_track", 0, "patient")
    assert 0 <= seed < 2**63
    others = {
        study_service.derive_seed(2, "M", "fast_track", 0, "patient"),
        study_service.derive_seed(1, "L", "fast_track", 0, "patient"),
        study_service.derive_seed(1, "M", "split_flow", 0, "patient"),
        study_service.derive_seed(1, "M", "fast_track", 1, "patient"),
        study_service.derive_seed(1, "M", "fast_track", 0, "dynamics"),
    }
    assert seed not in others and len(others) == 5


def test_shipped_study_presets():
    assert load_matrix("desk").run_count == 60
    assert load_matrix("full").run_count == 540


def test_arms_share_patient_seed_and_differ_only_in_intervention():
    tasks = study_service.build_tasks(tiny_matrix(interventions=["nurse_ratio"]))
    assert len(tasks) == 4
    for rep in range(2):
        baseline, treated = [t for t in tasks if t.replication == rep]
        assert baseline.arm == "baseline" and treated.arm == "intervention"
        assert baseline.config["seeds"] == treated.config["seeds"]
        assert baseline.config["baseline"] == "stressed"
        assert baseline.config["interventions"]["enabled"] == []
        assert treated.config["interventions"]["enabled"] == ["nurse_ratio"]
    assert tasks[0].config["seeds"] != tasks[2].config["seeds"]


def test_unpaired_dynamics_uses_separate_streams():
    baseline, treated = study_service.build_tasks(tiny_matrix(paired_dynamics=False, replications=1))
    assert baseline.config["seeds"]["patient"] == treated.config["seeds"]["patient"]
    assert baseline.config["seeds"]["dynamics"] != treated.config["seeds"]["dynamics"]


def test_size_overrides_are_merged():
    matrix = tiny_matrix(overrides={"S": {"arrivals": {"lambda_avg": 3.0}}}, replications=1)
    for task in study_service.build_tasks(matrix):
        assert task.config["arrivals"]["lambda_avg"] == 3.0
        assert task.config["arrivals"]["surge_multiplier"] == 1.5


def test_timeseries_paths_follow_run_labels(tmp_path):
    tasks = study_service.build_tasks(tiny_matrix(write_timeseries=True, replications=1), tmp_path)
    assert [task.timeseries_path for task in tasks] == [
        str(tmp_path / "timeseries" / "S_fast_track_baseline_00.csv"),
        str(tmp_path / "timeseries" / "S_fast_track_intervention_00.csv"),
    ]


def test_tiny_study_writes_exports(tmp_path):
    report, written = study_service.run_study(tiny_matrix(), out_dir=str(tmp_path / "serial"), jobs=1)
    assert report.runs == 4
    assert [r.metric for r in report.results] == ["los", "wait", "lwbs_rate", "mortality_rate"]
    for path in written.values():
        assert path.is_file()
    table = pd.read_csv(written["summary_table"])
    assert set(table["arm"]) == {"baseline", "intervention"}
    assert table.loc[table["arm"] == "intervention", "fast_track_count"].iloc[0] > 0
    assert (table.loc[table["arm"] == "baseline", "fast_track_count"] == 0).all()
    waits = pd.read_csv(written["wait_breakdown"])
    assert set(waits["group"]) <= {"all", "high_acuity", "deceased"}


def test_parallel_study_matches_serial(tmp_path):
    matrix = tiny_matrix()
    _, serial = study_service.run_study(matrix, out_dir=str(tmp_path / "serial"), jobs=1)
    _, parallel = study_service.run_study(matrix, out_dir=str(tmp_path / "parallel"), jobs=2)
    for name in ("stat_results", "summary_table", "lwbs_heatmap", "wait_breakdown"):
        assert serial[name].read_text(encoding="utf-8") == parallel[name].read_text(encoding="utf-8")


def test_failed_run_reports_cell_and_seeds(tmp_path):
    matrix = tiny_matrix(replications=1, overrides={"S": {"equipment": {"trauma_kit": 0}}})
    with pytest.raises(StudyRunError) as info:
        study_service.run_study(matrix, out_dir=str(tmp_path))
    assert info.value.cell == "S_fast_track_baseline_00"
    assert set(info.value.seeds) == {"patient", "dynamics"}
