"""배치 단위 체크포인트, 결정적 재생, 개입 주입 분기.

체크포인트 파일 = JSON 헤더 한 줄 + zlib 압축 pickle 본문.
헤더에는 포맷/빌드 버전, 설정 해시, 배치 번호, 시각, 두 RNG 스트림 상태가 들어간다.
"""

import json
import logging
import pickle
import zlib
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from app import __version__
from app.config.loader import load_commands, parse_commands
from app.errors import ArchiveMismatchError, ConfigurationError, ReplayError
from app.models.ledger_models import ArchiveIndex, BatchEntry, EventRecord, InterventionCommand
from app.models.report_models import RunSummary
from app.simulation.report_service import write_ledger

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
INDEX_FILE = "pairs.json"
LEDGER_FILE = "ledger.evlog"
FINAL_CHECKPOINT = "checkpoint_final.bin"
DELTA_FIELDS = ("arrivals", "completed", "lwbs", "deceased", "avg_los", "avg_wait", "lwbs_rate", "mortality_rate")


def checkpoint_name(batch: int) -> str:
    return f"checkpoint_{batch}.bin"


def baseline_name(batch: int) -> str:
    return f"baseline_{batch}.evlog"


def intervened_name(batch: int) -> str:
    return f"intervened_{batch}.evlog"


def checkpoint(sim, batch: int) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "build_version": __version__,
        "config_hash": sim.config_hash,
        "batch": batch,
        "time": sim.next_step,
        "rng": {
            "patient": sim.patient_rng.bit_generator.state,
            "dynamics": sim.dynamics_rng.bit_generator.state,
        },
    }
    body = zlib.compress(pickle.dumps(sim, protocol=pickle.HIGHEST_PROTOCOL))
    return json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + body


def read_header(blob: bytes) -> Tuple[dict, bytes]:
    head, sep, body = blob.partition(b"\n")
    if not sep:
        raise ArchiveMismatchError("checkpoint header is missing")
    try:
        header = json.loads(head.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveMismatchError("checkpoint header is not valid JSON") from exc
    return header, body


def restore(blob: bytes, expected_hash: Optional[str] = None):
    """체크포인트에서 run 상태를 복원한다. 해시/포맷이 다르면 ArchiveMismatchError."""
    header, body = read_header(blob)
    if header.get("format_version") != FORMAT_VERSION or header.get("build_version") != __version__:
        raise ArchiveMismatchError(
            f"checkpoint format {header.get('format_version')}/{header.get('build_version')} "
            f"does not match {FORMAT_VERSION}/{__version__}"
        )
    if expected_hash is not None and header.get("config_hash") != expected_hash:
        raise ArchiveMismatchError(
            f"config hash mismatch: checkpoint {str(header.get('config_hash'))[:12]} vs {expected_hash[:12]}"
        )
    sim = pickle.loads(zlib.decompress(body))
    sim.patient_rng.bit_generator.state = header["rng"]["patient"]
    sim.dynamics_rng.bit_generator.state = header["rng"]["dynamics"]
    return sim


def load_checkpoint(path, expected_hash: Optional[str] = None):
    path = Path(path)
    if not path.is_file():
        raise ReplayError(f"checkpoint not found: {path}")
    return restore(path.read_bytes(), expected_hash)


def read_ledger(path) -> List[EventRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                records.append(EventRecord.model_validate_json(line))
    return records


def summary_delta(baseline: RunSummary, intervened: RunSummary) -> Dict[str, Optional[float]]:
    delta: Dict[str, Optional[float]] = {}
    for name in DELTA_FIELDS:
        a, b = getattr(baseline, name), getattr(intervened, name)
        delta[name] = None if a is None or b is None else float(b) - float(a)
    return delta


class CommandSource:
    """배치 경계에서만 읽는 명령 소스. 파일이면 매번 다시 읽어 새로 추가된 줄을 반영한다."""

    def __init__(self, path=None, commands: Optional[Sequence[InterventionCommand]] = None):
        self.path = Path(path) if path is not None else None
        self._static = list(commands or [])
        self._seen: set = set()

    def _all(self) -> List[InterventionCommand]:
        if self.path is None:
            return list(self._static)
        if not self.path.is_file():
            return []
        return load_commands(self.path)

    def read_window(self, start: int, end: int) -> Tuple[List[InterventionCommand], List[dict]]:
        accepted: List[InterventionCommand] = []
        rejected: List[dict] = []
        for index, command in enumerate(self._all()):
            if index in self._seen:
                continue
            if start <= command.t <= end:
                accepted.append(command)
                self._seen.add(index)
            elif command.t < start:
                rejected.append(
                    {"command": command.model_dump(mode="json"), "reason": f"t={command.t} is outside batch window [{start}, {end}]"}
                )
                self._seen.add(index)
        return accepted, rejected


def split_window(commands: Iterable[InterventionCommand], start: int, end: int):
    accepted, rejected = [], []
    for command in commands:
        if start <= command.t <= end:
            accepted.append(command)
        else:
            rejected.append(
                {"command": command.model_dump(mode="json"), "reason": f"t={command.t} is outside batch window [{start}, {end}]"}
            )
    return accepted, rejected


def advance_with_commands(sim, commands: Sequence[InterventionCommand], end: int) -> List[EventRecord]:
    """명령 시각마다 멈춰 적용하면서 end까지 진행하고 그 구간 ledger를 돌려준다."""
    for command in sorted(commands, key=lambda c: c.t):
        if sim.next_step < command.t:
            sim.run_until(command.t - 1)
        sim.apply_command(command)
    if sim.next_step <= end:
        sim.run_until(end)
    return sim.take_ledger()


def run_batched(sim, batch_len: int, source: Optional[CommandSource], out_dir):
    """배치 단위로 진행하며 기준/개입 궤적을 아카이브한다. (최종 run 상태, 색인)을 돌려준다."""
    if batch_len < 1:
        raise ConfigurationError("batch 길이는 1 이상이어야 합니다")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    horizon = sim.horizon_steps
    index = ArchiveIndex(
        format_version=FORMAT_VERSION, config_hash=sim.config_hash, batch_len=batch_len, horizon_steps=horizon
    )
    chosen: List[EventRecord] = list(sim.take_ledger())
    batch = 0
    while sim.next_step < horizon:
        start = sim.next_step
        end = min(start + batch_len, horizon) - 1
        blob = checkpoint(sim, batch)
        (out / checkpoint_name(batch)).write_bytes(blob)

        sim.run_until(end)
        baseline = sim.take_ledger()
        write_ledger(baseline, out / baseline_name(batch))
        entry = BatchEntry(
            batch=batch, start=start, end=end, checkpoint=checkpoint_name(batch), baseline=baseline_name(batch)
        )

        accepted, rejected = source.read_window(start, end) if source is not None else ([], [])
        entry.rejected = rejected
        if accepted:
            baseline_summary = sim.summary()
            branch = restore(blob, sim.config_hash)
            intervened = advance_with_commands(branch, accepted, end)
            write_ledger(intervened, out / intervened_name(batch))
            entry.intervened = intervened_name(batch)
            entry.branch_time = min(command.t for command in accepted)
            entry.commands = list(accepted)
            entry.summary_delta = summary_delta(baseline_summary, branch.summary())
            logger.info("Batch %d: %d commands injected from t=%d", batch, len(accepted), entry.branch_time)
            sim = branch
            chosen.extend(intervened)
        else:
            chosen.extend(baseline)
        index.batches.append(entry)
        batch += 1

    (out / FINAL_CHECKPOINT).write_bytes(checkpoint(sim, batch))
    write_ledger(chosen, out / LEDGER_FILE)
    (out / INDEX_FILE).write_text(index.model_dump_json(indent=2), encoding="utf-8")
    logger.info("Batched run archived: %d batches in %s", batch, out)
    return sim, index


def load_index(archive_dir) -> ArchiveIndex:
    path = Path(archive_dir) / INDEX_FILE
    if not path.is_file():
        raise ReplayError(f"archive index not found: {path}")
    return ArchiveIndex.model_validate_json(path.read_text(encoding="utf-8"))


def replay_batch(archive_dir, batch: int, inject: Sequence[InterventionCommand], expected_hash: Optional[str] = None):
    """배치 K의 체크포인트에서 다시 실행하며 명령을 주입한다. 쌍 문서를 써서 돌려준다."""
    archive = Path(archive_dir)
    index = load_index(archive)
    entry = index.entry(batch)
    if entry is None:
        raise ReplayError(f"batch {batch} does not exist in {archive}")
    if expected_hash is not None and expected_hash != index.config_hash:
        raise ArchiveMismatchError(
            f"scenario hash {expected_hash[:12]} does not match archive {index.config_hash[:12]}"
        )
    blob = (archive / entry.checkpoint).read_bytes()
    sim = restore(blob, expected_hash if expected_hash is not None else index.config_hash)
    accepted, rejected = split_window(inject, entry.start, entry.end)
    records = advance_with_commands(sim, accepted, entry.end)

    replay_ledger = archive / f"replay_{batch}.evlog"
    write_ledger(records, replay_ledger)
    baseline = read_ledger(archive / entry.baseline)
    branch_time = min((c.t for c in accepted), default=None)
    prefix_end = branch_time if branch_time is not None else entry.end + 1
    base_prefix = [r.to_line() for r in baseline if r.time < prefix_end]
    new_prefix = [r.to_line() for r in records if r.time < prefix_end]
    pair = {
        "batch": batch,
        "start": entry.start,
        "end": entry.end,
        "baseline": entry.baseline,
        "intervened": replay_ledger.name,
        "branch_time": branch_time,
        "commands": [c.model_dump(mode="json") for c in accepted],
        "rejected": rejected,
        "prefix_identical": base_prefix == new_prefix,
        "identical": [r.to_line() for r in baseline] == [r.to_line() for r in records],
    }
    (archive / f"replay_{batch}.json").write_text(json.dumps(pair, indent=2), encoding="utf-8")
    logger.info("Replayed batch %d with %d commands (%d rejected)", batch, len(accepted), len(rejected))
    return pair, records


def read_inject_file(path) -> List[InterventionCommand]:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError("주입 파일이 없습니다", source=str(path))
    return parse_commands(path.read_text(encoding="utf-8").splitlines(), source=str(path))
