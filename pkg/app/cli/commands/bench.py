"""``pulse bench``: runtime of analytic, exponential and finite-difference kernels."""
import argparse
from pathlib import Path

from app.cli.common import EXIT_OK, write_report
from app.services.bench import run_bench


def register(subparsers) -> None:
    parser = subparsers.add_parser("bench", help="time the derivative kernels")
    parser.add_argument("--calls", type=int, help="kernel calls per method (default from config.json)")
    parser.add_argument("--per-call", action="store_true", help="time every method one call at a time")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", metavar="PATH", help="write the report JSON here")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    report = run_bench(args.calls, args.per_call, args.seed)
    for entry in report.entries:
        print(f"{entry.path} {entry.method:<17} d/d{entry.control}: {entry.us_per_1000:12.1f} us per 1000 calls")
    for name, ratio in report.ratios.items():
        print(f"{name}: {ratio:.1f}x")
    mode = "per call" if report.per_call else "batched"
    for name, met in report.targets.items():
        print(f"{name} ({mode}): {'holds' if met else 'does not hold'}")
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_report(report, path)
    return EXIT_OK
