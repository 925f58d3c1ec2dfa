import argparse
import logging

from app.config.loader import load_matrix
from app.experiments import study_service

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("study", help="규모 x 개입 paired 스터디 실행")
    parser.add_argument("--matrix", required=True, help="스터디 YAML 경로 또는 내장 preset 이름 (desk, full)")
    parser.add_argument("--reps", type=int, default=None, help="셀당 반복 수 덮어쓰기")
    parser.add_argument("--out", default=None, help="출력 디렉터리 (기본: 스터디 설정의 output_dir)")
    parser.add_argument("--jobs", type=int, default=None, help="동시 실행 프로세스 수")
    parser.set_defaults(handler=study_command)


def study_command(args: argparse.Namespace) -> int:
    matrix = load_matrix(args.matrix)
    updates = {}
    if args.reps is not None:
        updates["replications"] = args.reps
    if args.jobs is not None:
        updates["jobs"] = args.jobs
    if updates:
        matrix = matrix.model_validate({**matrix.model_dump(), **updates})
    print(f"[Study] {matrix.name}: {matrix.run_count} runs")
    report, written = study_service.run_study(matrix, out_dir=args.out)
    for name, path in written.items():
        print(f"[Study] {name}: {path}")
    significant = sum(1 for r in report.results if r.p_value is not None and r.p_value < 0.05)
    print(f"[Study] {significant}/{len(report.results)} comparisons with p < 0.05")
    return 0
