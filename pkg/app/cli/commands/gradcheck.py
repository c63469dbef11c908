"""``pulse gradcheck``: analytic gradients against both oracles."""
import argparse
from pathlib import Path

from app.cli.common import EXIT_CHECK_FAILED, EXIT_OK, write_report
from app.services.gradcheck import BASIS_GROUPS, run_gradcheck


def register(subparsers) -> None:
    parser = subparsers.add_parser("gradcheck", help="compare analytic gradients with exact and numerical oracles")
    parser.add_argument(
        "--basis", default="all",
        help=f"basis name or group ({', '.join(BASIS_GROUPS)})",
    )
    parser.add_argument("--instances", type=int, help="random instances per check")
    parser.add_argument("--digits", type=int, nargs="+", help="shape lengths for the full-gradient checks")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", metavar="PATH", help="write the report JSON here")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    report = run_gradcheck(args.basis, args.instances, args.digits, args.seed)
    for entry in report.entries:
        status = "ok  " if entry.passed else "FAIL"
        digits = f" N={entry.n_digits}" if entry.n_digits is not None else ""
        print(
            f"{status} {entry.basis:<28} {entry.oracle:<22}{digits:<7} "
            f"max dev {entry.max_deviation:.3e} (tol {entry.tolerance:.0e}) worst {entry.worst}"
        )
    for note in report.notes:
        print(f"note: {note}")
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_report(report, path)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED
