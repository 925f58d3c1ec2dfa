import argparse
import logging
import sys
from typing import List, Optional

from app import __version__
from app.errors import ArchiveMismatchError, ConfigurationError, StudyRunError
from app.experiments.router import register as register_experiments
from app.replay.router import register as register_replay
from app.simulation.router import register as register_simulation

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_ARCHIVE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ed-sim", description="응급실 hybrid DES/ABM 시뮬레이터")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="로그 레벨 (기본 WARNING)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_simulation(subparsers)
    register_experiments(subparsers)
    register_replay(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except ArchiveMismatchError as exc:
        print(f"[Error] 아카이브가 현재 설정/빌드와 맞지 않습니다: {exc}", file=sys.stderr)
        return EXIT_ARCHIVE
    except ConfigurationError as exc:
        print(f"[Error] 설정이 유효하지 않습니다: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StudyRunError as exc:
        print(f"[Error] 스터디 run 실패: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:
        logger.exception("Command %s failed", args.command)
        print(f"[Error] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
