import logging
from pathlib import Path
from typing import Dict, Iterable, Optional

from app.models.ledger_models import EventRecord
from app.simulation import metrics as metrics_service

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
TIMESERIES_FILE = "timeseries.csv"
PATIENTS_FILE = "patients.csv"
BOTTLENECK_FILE = "bottleneck.csv"
LEDGER_FILE = "ledger.evlog"


def write_ledger(records: Iterable[EventRecord], path: Path) -> int:
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(record.to_line())
            handle.write("\n")
            count += 1
    return count


def write_run_outputs(sim, out_dir, ledger: Optional[Iterable[EventRecord]] = None) -> Dict[str, Path]:
    """run 산출물(summary, 시계열, 환자 기록, 병목, ledger)을 out_dir에 쓴다."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: Dict[str, Path] = {}

    summary_path = out / SUMMARY_FILE
    summary_path.write_text(sim.summary().model_dump_json(indent=2), encoding="utf-8")
    written["summary"] = summary_path

    frame = sim.timeseries()
    timeseries_path = out / TIMESERIES_FILE
    frame.to_csv(timeseries_path, index=False)
    written["timeseries"] = timeseries_path

    patients_path = out / PATIENTS_FILE
    metrics_service.patients_frame(sim.patients.values()).to_csv(patients_path, index=False)
    written["patients"] = patients_path

    bottleneck_path = out / BOTTLENECK_FILE
    rows = sim.bottlenecks() if not frame.empty else []
    metrics_service.bottleneck_frame(rows).to_csv(bottleneck_path, index=False)
    written["bottleneck"] = bottleneck_path

    if ledger is not None:
        ledger_path = out / LEDGER_FILE
        count = write_ledger(ledger, ledger_path)
        written["ledger"] = ledger_path
        logger.debug("Wrote %d ledger records to %s", count, ledger_path)

    logger.info("Run outputs written to %s", out)
    return written
