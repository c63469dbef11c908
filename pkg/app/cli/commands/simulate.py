"""``pulse simulate``: offset/B1 profile of a stored shape."""
import argparse
import logging

from app.cli.common import EXIT_OK, add_config_arguments, load_config, output_dir, write_report
from app.core.config import get_config
from app.schemas.report import ProfileReport
from app.services.simprofile import band_average, evaluation_grid, simulate_target, write_profile
from app.utils.shape_io import FORMATS, load_shape

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="simulate a shape over the configured offset/B1 band")
    add_config_arguments(parser)
    parser.add_argument("--shape", required=True, metavar="PATH", help="shape file (.json native or .jdx JCAMP-DX)")
    parser.add_argument("--format", choices=FORMATS, help="shape format (default from the file suffix)")
    parser.add_argument("--density", type=int, help="evaluation grid density (1 = optimization grid)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    shape, stored = load_shape(args.shape, args.format)
    # a constraint stored with the shape describes how it was optimized
    constraint = stored if stored is not None else config.build_constraint()
    target = config.build_target()
    density = args.density or config.evaluation.density or get_config().evaluation_density
    grid = evaluation_grid(config.to_problem().grid, density)
    logger.info("Simulating %d-digit shape on %d x %d cells", shape.n_digits, grid.n_off, grid.n_rf)

    profile = simulate_target(shape, target, grid, constraint=constraint)
    average = band_average(profile) if profile.quality is not None else None
    out = output_dir(args, config.name)
    files = [str(write_profile(profile, out / "profile.tsv"))]
    report = ProfileReport(name=config.name, cells=grid.n_points, band_average=average, files=files)
    files.append(str(write_report(report, out / "profile_report.json")))
    if average is not None:
        print(f"{config.name}: band average {average:.6f} over {grid.n_points} cells")
    print(f"output: {out}")
    return EXIT_OK
