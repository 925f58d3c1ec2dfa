import argparse
import logging
from pathlib import Path

from app.config.loader import DATA_DIR, load_matrix, load_scenario, scenario_with_overrides
from app.errors import ConfigurationError
from app.replay import ledger_service
from app.simulation import report_service
from app.simulation.engine import EDSimulation

logger = logging.getLogger(__name__)

DEFAULT_SCENARIO = DATA_DIR / "scenarios" / "medium.yaml"
DEFAULT_COMMAND_BATCH = 60


def register(subparsers) -> None:
    run = subparsers.add_parser("run", help="시나리오 한 개 실행")
    run.add_argument("--scenario", default=str(DEFAULT_SCENARIO), help="시나리오 YAML (기본: 내장 Medium)")
    run.add_argument("--seed", type=int, default=None, help="patient 시드 (dynamics = seed + 1)")
    run.add_argument("--days", type=int, default=None, help="시뮬레이션 일수 덮어쓰기")
    run.add_argument("--batch", type=int, default=None, help="배치 길이(스텝). 지정 시 체크포인트 아카이브 생성")
    run.add_argument("--commands", default=None, help="JSON lines 개입 명령 파일 (배치 경계마다 다시 읽음)")
    run.add_argument("--out", default="run_out", help="출력 디렉터리")
    run.set_defaults(handler=run_command)

    validate = subparsers.add_parser("validate-config", help="시나리오/스터디 설정 검증")
    validate.add_argument("--scenario", default=None, help="검증할 시나리오 YAML")
    validate.add_argument("--matrix", default=None, help="검증할 스터디 YAML")
    validate.set_defaults(handler=validate_command)

    export = subparsers.add_parser("export", help="run 디렉터리의 최종 체크포인트에서 보고서 재생성")
    export.add_argument("--run", required=True, help="run 출력 디렉터리")
    export.add_argument("--out", default=None, help="보고서 출력 디렉터리 (기본: --run)")
    export.set_defaults(handler=export_command)


def run_command(args: argparse.Namespace) -> int:
    config = scenario_with_overrides(args.scenario, args.seed, args.days)
    batch_len = args.batch
    if args.commands and batch_len is None:
        batch_len = DEFAULT_COMMAND_BATCH
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sim = EDSimulation(config)
    print(f"[Run] {config.name}: {len(sim.arrivals)} arrivals over {config.horizon_days} days")

    if batch_len is not None:
        source = ledger_service.CommandSource(args.commands) if args.commands else None
        sim, index = ledger_service.run_batched(sim, batch_len, source, out)
        written = report_service.write_run_outputs(sim, out)
        written["ledger"] = out / ledger_service.LEDGER_FILE
        written["archive"] = out / ledger_service.INDEX_FILE
        branched = sum(1 for entry in index.batches if entry.intervened)
        print(f"[Run] {len(index.batches)} batches archived, {branched} with injected commands")
    else:
        sim.run()
        written = report_service.write_run_outputs(sim, out, sim.take_ledger())
        (out / ledger_service.FINAL_CHECKPOINT).write_bytes(ledger_service.checkpoint(sim, 0))

    summary = sim.summary()
    for name, path in written.items():
        print(f"[Run] {name}: {path}")
    print(
        f"[Run] arrivals={summary.arrivals} completed={summary.completed} "
        f"avg_los={summary.avg_los if summary.avg_los is None else round(summary.avg_los, 1)} "
        f"lwbs={summary.lwbs_rate:.1f}% mortality={summary.mortality_rate:.2f}%"
    )
    return 0


def validate_command(args: argparse.Namespace) -> int:
    if not args.scenario and not args.matrix:
        raise ConfigurationError("--scenario 또는 --matrix 중 하나가 필요합니다")
    if args.scenario:
        config = load_scenario(args.scenario)
        sim = EDSimulation(config)
        print(f"[Config] scenario {config.name} ok (size={config.size}, baseline={config.baseline}, hash={sim.config_hash[:12]})")
    if args.matrix:
        matrix = load_matrix(args.matrix)
        print(f"[Config] study {matrix.name} ok ({matrix.run_count} runs)")
    return 0


def export_command(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    expected = None
    if (run_dir / ledger_service.INDEX_FILE).is_file():
        expected = ledger_service.load_index(run_dir).config_hash
    sim = ledger_service.load_checkpoint(run_dir / ledger_service.FINAL_CHECKPOINT, expected)
    written = report_service.write_run_outputs(sim, args.out or run_dir)
    for name, path in written.items():
        print(f"[Export] {name}: {path}")
    return 0
