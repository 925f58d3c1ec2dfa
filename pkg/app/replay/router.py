import argparse
import logging

from app.config.loader import scenario_fingerprint, scenario_with_overrides
from app.replay import ledger_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("replay", help="아카이브 배치를 체크포인트에서 재생하며 명령 주입")
    parser.add_argument("--archive", required=True, help="run --batch 로 만든 아카이브 디렉터리")
    parser.add_argument("--batch", type=int, required=True, help="재생할 배치 번호 K")
    parser.add_argument("--inject", default=None, help="JSON lines 명령 파일 (생략 시 명령 없음)")
    parser.add_argument("--scenario", default=None, help="아카이브를 만든 시나리오 YAML. 해시가 다르면 종료 코드 3")
    parser.add_argument("--seed", type=int, default=None, help="run 때 준 --seed")
    parser.add_argument("--days", type=int, default=None, help="run 때 준 --days")
    parser.set_defaults(handler=replay_command)


def replay_command(args: argparse.Namespace) -> int:
    expected_hash = None
    if args.scenario:
        config = scenario_with_overrides(args.scenario, args.seed, args.days)
        expected_hash = scenario_fingerprint(config)
    else:
        logger.warning("No --scenario given; checking %s only against its own index", args.archive)
    commands = ledger_service.read_inject_file(args.inject) if args.inject else []
    logger.info("Replaying batch %d of %s with %d commands", args.batch, args.archive, len(commands))
    pair, records = ledger_service.replay_batch(args.archive, args.batch, commands, expected_hash=expected_hash)
    print(f"[Replay] batch={pair['batch']} window=[{pair['start']}, {pair['end']}] events={len(records)}")
    print(f"[Replay] intervened slice: {pair['intervened']}")
    if pair["rejected"]:
        print(f"[Replay] rejected commands: {len(pair['rejected'])}")
    print(f"[Replay] identical to baseline: {pair['identical']}")
    return 0
