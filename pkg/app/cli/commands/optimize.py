"""``pulse optimize``: multistart optimization, export and run report."""
import argparse
import logging
from pathlib import Path
from typing import List

from app.cli.common import EXIT_OK, add_config_arguments, base_dir, load_config, output_dir, write_report
from app.core.config import get_config
from app.models.problem import MultistartResult
from app.schemas.report import RunReport, StartReport
from app.services.constraints import is_feasible, sanitize_for_export
from app.services.controls import amplitude_phase
from app.services.optimizer import multistart
from app.services.simprofile import band_average, evaluation_grid, simulate_target, write_profile
from app.utils.shape_io import FORMATS, JCAMP, write_shape
from app.utils.units import average_power_hz2, energy_over_h

logger = logging.getLogger(__name__)

SUFFIXES = {"native": ".json", JCAMP: ".jdx"}


def register(subparsers) -> None:
    parser = subparsers.add_parser("optimize", help="optimize a pulse from a run configuration")
    add_config_arguments(parser)
    parser.add_argument("--seed", type=int, help="seed of the first start")
    parser.add_argument("--starts", type=int, help="number of random starts")
    parser.add_argument("--basis", help="override pulse.basis")
    parser.add_argument("--format", choices=FORMATS, help="write only this shape format")
    parser.add_argument("--threads", type=int, help="parallel starts (0 = all cores)")
    parser.set_defaults(handler=run)


def _write_trajectory(result, path: Path) -> Path:
    lines = ["# iteration quality objective"]
    for index, (quality, value) in enumerate(zip(result.quality_trajectory, result.objective_trajectory)):
        lines.append(f"{index}\t{quality!r}\t{value!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _starts(outcome: MultistartResult) -> List[StartReport]:
    return [StartReport(**result.summary()) for result in outcome.results]


def run(args: argparse.Namespace) -> int:
    settings = get_config()
    config = load_config(
        args,
        {"optimizer.seed": args.seed, "starts": args.starts, "pulse.basis": args.basis},
    )
    problem = config.to_problem(base_dir(args))
    threads = settings.threads if args.threads is None or args.threads <= 0 else args.threads
    logger.info(
        "Optimizing %s: %d %s digits, %d grid points, %d starts",
        config.name, problem.shape_template.n_digits, problem.shape_template.basis.name,
        problem.grid.n_points, config.starts,
    )
    outcome = multistart(problem, config.starts, threads=threads)
    best = outcome.best

    shape = sanitize_for_export(problem.constraint, best.shape)
    feasible = is_feasible(problem.constraint, shape)
    density = config.evaluation.density or settings.evaluation_density
    profile = simulate_target(shape, problem.target, evaluation_grid(problem.grid, density), constraint=problem.constraint)
    evaluation_quality = band_average(profile)
    amplitude, _ = amplitude_phase(shape, problem.constraint)

    out = output_dir(args, config.name)
    files = []
    formats = [args.format] if args.format else list(dict.fromkeys(config.export.formats))
    for fmt in formats:
        path = out / f"{config.name}{SUFFIXES[fmt]}"
        files.append(str(write_shape(shape, path, fmt, constraint=problem.constraint, title=config.name)))
    files.append(str(_write_trajectory(best, out / "trajectory.tsv")))
    files.append(str(write_profile(profile, out / "profile.tsv")))

    report = RunReport(
        name=config.name,
        basis=shape.basis.name,
        n_digits=shape.n_digits,
        duration_us=shape.duration * 1e6,
        quality=best.quality,
        signed_cost=best.signed_cost,
        iterations=best.iterations,
        wall_time_s=best.wall_time_s,
        time_per_iteration_s=best.time_per_iteration_s,
        termination=best.termination.value,
        seed=best.seed,
        evaluation_quality=evaluation_quality,
        average_power_hz2=average_power_hz2(shape, amplitude),
        energy_over_h_hz2s=energy_over_h(shape, amplitude),
        feasible=feasible,
        starts=_starts(outcome),
        failures=[{k: str(v) for k, v in failure.items()} for failure in outcome.failures],
        files=files,
    )
    files.append(str(write_report(report, out / "report.json")))
    print(
        f"{config.name}: quality {best.quality:.6f} (evaluation grid {evaluation_quality:.6f}), "
        f"{best.iterations} iterations, {best.wall_time_s:.3f} s, "
        f"{best.time_per_iteration_s * 1e3:.3f} ms/iter, {best.termination.value}"
    )
    print(f"output: {out}")
    return EXIT_OK
