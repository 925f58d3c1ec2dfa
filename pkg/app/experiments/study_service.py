"""스터디 실행: 규모 x 개입 x 반복, 표적 기준선과의 paired run, 결과 내보내기.

각 run은 서로 독립이며 worker 프로세스에서 실행될 수 있다.
결과는 (규모, 개입, 반복, arm) 키로 정렬하여 모으므로 --jobs 값과 무관하게 같은 파일이 나온다.
"""

import hashlib
import logging
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd

from app.config.loader import build_config, deep_merge, scenario_document
from app.errors import StudyRunError
from app.experiments.stats_service import compare
from app.models.report_models import StatResult, StudyReport
from app.models.study_models import RunTask, ScenarioMatrix
from app.simulation.engine import EDSimulation

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 63) - 1
ARMS = ("baseline", "intervention")
METRICS: Dict[str, str] = {
    "los": "avg_los",
    "wait": "avg_wait",
    "lwbs_rate": "lwbs_rate",
    "mortality_rate": "mortality_rate",
}
STAT_FILE = "stat_results.csv"
SUMMARY_TABLE_FILE = "summary_table.csv"
HEATMAP_FILE = "lwbs_heatmap.csv"
WAIT_FILE = "wait_breakdown.csv"
REPORT_FILE = "study_report.json"
TIMESERIES_DIR = "timeseries"

RunKey = Tuple[str, str, int, str]


def derive_seed(master: int, size: str, intervention: str, replication: int, stream: str) -> int:
    token = f"{master}|{size}|{intervention}|{replication}|{stream}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(token).digest()[:8], "big") & SEED_MASK


def run_label(size: str, intervention: str, replication: int, arm: str) -> str:
    return f"{size}_{intervention}_{arm}_{replication:02d}"


def build_tasks(matrix: ScenarioMatrix, out_dir: Optional[Path] = None) -> List[RunTask]:
    """셀마다 반복 i의 두 arm은 같은 patient 시드를 공유한다."""
    tasks: List[RunTask] = []
    for size in matrix.sizes:
        for intervention in matrix.interventions:
            baseline = matrix.baseline_for(intervention)
            for rep in range(matrix.replications):
                patient_seed = derive_seed(matrix.master_seed, size, intervention, rep, "patient")
                for arm in ARMS:
                    stream = "dynamics" if matrix.paired_dynamics else f"dynamics:{arm}"
                    document = scenario_document({"preset": size, "baseline": baseline}, source=f"study:{size}")
                    document = deep_merge(document, matrix.overrides.get(size, {}))
                    document["horizon_days"] = matrix.horizon_days
                    document["seeds"] = {
                        "patient": patient_seed,
                        "dynamics": derive_seed(matrix.master_seed, size, intervention, rep, stream),
                    }
                    interventions = document.setdefault("interventions", {})
                    interventions["enabled"] = [intervention] if arm == "intervention" else []
                    timeseries = ""
                    if out_dir is not None and matrix.write_timeseries:
                        timeseries = str(out_dir / TIMESERIES_DIR / f"{run_label(size, intervention, rep, arm)}.csv")
                    tasks.append(
                        RunTask(
                            size=size,
                            intervention=intervention,
                            arm=arm,
                            replication=rep,
                            config=document,
                            timeseries_path=timeseries,
                        )
                    )
    return tasks


def execute_run(task: RunTask) -> dict:
    """worker 진입점. 예외를 밖으로 던지지 않고 결과 dict에 담는다."""
    key = [task.size, task.intervention, task.replication, task.arm]
    try:
        config = build_config(task.config, source=run_label(task.size, task.intervention, task.replication, task.arm))
        sim = EDSimulation(config)
        summary = sim.run()
        if task.timeseries_path:
            path = Path(task.timeseries_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            sim.timeseries().to_csv(path, index=False)
        return {"key": key, "summary": summary.model_dump(mode="json"), "digest": sim.patient_digest(), "error": None}
    except Exception as exc:
        logger.exception("Study run %s failed", run_label(task.size, task.intervention, task.replication, task.arm))
        return {"key": key, "summary": None, "digest": None, "error": f"{type(exc).__name__}: {exc}"}


def _execute_all(tasks: List[RunTask], jobs: int) -> List[dict]:
    if jobs <= 1 or len(tasks) <= 1:
        return [execute_run(task) for task in tasks]
    with Pool(processes=min(jobs, len(tasks))) as pool:
        return pool.map(execute_run, tasks, chunksize=1)


def _check_outcomes(tasks: List[RunTask], outcomes: List[dict]) -> Dict[RunKey, dict]:
    by_key: Dict[RunKey, dict] = {}
    seeds = {(t.size, t.intervention, t.replication, t.arm): t.config["seeds"] for t in tasks}
    for outcome in outcomes:
        key: RunKey = tuple(outcome["key"])
        if outcome["error"] is not None:
            raise StudyRunError(outcome["error"], cell=run_label(*key[:3], key[3]), seeds=seeds[key])
        by_key[key] = outcome
    for (size, intervention, rep, arm), outcome in by_key.items():
        if arm != "baseline":
            continue
        partner = by_key.get((size, intervention, rep, "intervention"))
        if partner is not None and partner["digest"] != outcome["digest"]:
            raise StudyRunError(
                "patient stream digest differs between arms",
                cell=f"{size}_{intervention}_{rep:02d}",
                seeds=seeds[(size, intervention, rep, arm)],
            )
    return dict(sorted(by_key.items()))


def stat_results(matrix: ScenarioMatrix, outcomes: Dict[RunKey, dict]) -> List[StatResult]:
    results: List[StatResult] = []
    for size in matrix.sizes:
        for intervention in matrix.interventions:
            arms = {
                arm: [outcomes[(size, intervention, rep, arm)]["summary"] for rep in range(matrix.replications)]
                for arm in ARMS
            }
            for metric, field_name in METRICS.items():
                results.append(
                    compare(
                        size,
                        intervention,
                        metric,
                        [s[field_name] for s in arms["baseline"]],
                        [s[field_name] for s in arms["intervention"]],
                    )
                )
    return results


def runs_frame(outcomes: Dict[RunKey, dict]) -> pd.DataFrame:
    rows = []
    for (size, intervention, rep, arm), outcome in outcomes.items():
        summary = outcome["summary"]
        rows.append(
            {
                "size": size,
                "intervention": intervention,
                "arm": arm,
                "replication": rep,
                "arrivals": summary["arrivals"],
                "avg_los": summary["avg_los"],
                "avg_wait": summary["avg_wait"],
                "lwbs_rate": summary["lwbs_rate"],
                "mortality_rate": summary["mortality_rate"],
                **summary["counters"],
            }
        )
    return pd.DataFrame(rows)


def summary_table(runs: pd.DataFrame) -> pd.DataFrame:
    """셀/arm별 평균 KPI (arm당 한 행)"""
    grouped = runs.groupby(["size", "intervention", "arm"], sort=True)
    table = grouped[
        ["arrivals", "avg_los", "avg_wait", "lwbs_rate", "mortality_rate",
         "fast_track_count", "nurse_ratio_blocked_count", "physician_triage_count"]
    ].mean()
    table["runs"] = grouped.size()
    return table.reset_index()


def lwbs_heatmap(outcomes: Dict[RunKey, dict]) -> pd.DataFrame:
    rows = []
    for (size, intervention, rep, arm), outcome in outcomes.items():
        for true_esi, row in outcome["summary"]["lwbs_by_esi"].items():
            for assigned, count in row.items():
                rows.append(
                    {"size": size, "intervention": intervention, "arm": arm,
                     "true_esi": int(true_esi), "assigned_triage": int(assigned), "lwbs": count}
                )
    columns = ["size", "intervention", "arm", "true_esi", "assigned_triage", "lwbs"]
    if not rows:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(rows)
    return frame.groupby(columns[:-1], sort=True)["lwbs"].sum().reset_index()


def wait_breakdown_table(outcomes: Dict[RunKey, dict], replications: int) -> pd.DataFrame:
    """반복 평균 대기 분해. group = all | high_acuity | deceased"""
    groups = {"all": "wait_breakdown", "high_acuity": "high_acuity_wait_breakdown", "deceased": "deceased_wait_breakdown"}
    rows = []
    for (size, intervention, rep, arm), outcome in outcomes.items():
        for group, field_name in groups.items():
            for component, minutes in outcome["summary"][field_name].items():
                rows.append(
                    {"size": size, "intervention": intervention, "arm": arm,
                     "group": group, "component": component, "minutes": minutes}
                )
    columns = ["size", "intervention", "arm", "group", "component"]
    if not rows:
        return pd.DataFrame(columns=columns + ["mean_minutes"])
    frame = pd.DataFrame(rows)
    table = frame.groupby(columns, sort=True)["minutes"].sum() / replications
    return table.rename("mean_minutes").reset_index()


def write_exports(matrix: ScenarioMatrix, outcomes: Dict[RunKey, dict], results: List[StatResult], out: Path) -> Dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = {
        "stat_results": out / STAT_FILE,
        "summary_table": out / SUMMARY_TABLE_FILE,
        "lwbs_heatmap": out / HEATMAP_FILE,
        "wait_breakdown": out / WAIT_FILE,
        "report": out / REPORT_FILE,
    }
    pd.DataFrame([r.model_dump() for r in results]).to_csv(written["stat_results"], index=False)
    summary_table(runs_frame(outcomes)).to_csv(written["summary_table"], index=False)
    lwbs_heatmap(outcomes).to_csv(written["lwbs_heatmap"], index=False)
    wait_breakdown_table(outcomes, matrix.replications).to_csv(written["wait_breakdown"], index=False)
    report = StudyReport(name=matrix.name, master_seed=matrix.master_seed, runs=len(outcomes), results=results)
    written["report"].write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return written


def run_study(matrix: ScenarioMatrix, out_dir: Optional[str] = None, jobs: Optional[int] = None) -> Tuple[StudyReport, Dict[str, Path]]:
    out = Path(out_dir or matrix.output_dir)
    jobs = jobs if jobs is not None else matrix.jobs
    tasks = build_tasks(matrix, out)
    logger.info(
        "Study %s: %d sizes x %d interventions x %d reps = %d runs (jobs=%d)",
        matrix.name, len(matrix.sizes), len(matrix.interventions), matrix.replications, len(tasks), jobs,
    )
    outcomes = _check_outcomes(tasks, _execute_all(tasks, jobs))
    results = stat_results(matrix, outcomes)
    written = write_exports(matrix, outcomes, results, out)
    logger.info("Study %s finished: %d runs, exports in %s", matrix.name, len(outcomes), out)
    report = StudyReport(name=matrix.name, master_seed=matrix.master_seed, runs=len(outcomes), results=results)
    return report, written
