"""
Runtime comparison of derivative kernels.

Every method computes one Cartesian control's derivative per call and every
method is timed the same way: vectorized over all instances at once by
default, or one instance at a time with ``per_call``. The report carries one
row per path, method and control, the speedup ratios per control and whether
each path meets the speedup targets.
"""
import logging
import time
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np

from app.core.config import get_config
from app.models.rotation import RotationParams
from app.schemas.report import BenchEntry, BenchReport
from app.services.gradcheck import random_params
from app.services.gradients import CARTESIAN_LABELS, d_quaternion, d_rotation_cartesian
from app.services.oracles import augmented_gradient_rot, augmented_gradient_su2, finite_difference, su2_to_quaternion
from app.services.rotkernel import quaternion_from_params, rotation_from_params

logger = logging.getLogger(__name__)

REPEATS = 3
METHODS = ("analytic", "exponential", "finite_difference")

# The analytic kernel should beat the exponential by this factor and stay
# within FD_BAND of the finite-difference cost in either direction.
EXPONENTIAL_SPEEDUP = 20.0
FD_BAND = 3.0

Kernel = Callable[[RotationParams, int], object]


def _best_time(run: Callable[[], object], repeats: int = REPEATS) -> float:
    run()
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        run()
        best = min(best, time.perf_counter() - started)
    return best


def _fd(builder: Callable[[RotationParams], np.ndarray], p: RotationParams, k: int) -> np.ndarray:
    shift = np.eye(3)[k]
    return finite_difference(
        lambda t: builder(RotationParams.from_cartesian(p.theta_x + t * shift[0], p.theta_y + t * shift[1], p.theta_z + t * shift[2])),
        0.0,
        1e-6,
    )


KERNELS: Dict[str, Dict[str, Kernel]] = {
    "PP": {
        "analytic": lambda q, k: d_rotation_cartesian(q, controls=(k,)),
        "exponential": augmented_gradient_rot,
        "finite_difference": lambda q, k: _fd(rotation_from_params, q, k),
    },
    "UR": {
        "analytic": lambda q, k: d_quaternion(q, controls=(k,)),
        "exponential": lambda q, k: su2_to_quaternion(augmented_gradient_su2(q, k)),
        "finite_difference": lambda q, k: _fd(quaternion_from_params, q, k),
    },
}


def _runner(p: RotationParams, kernel: Kernel, k: int, per_call: bool) -> Callable[[], None]:
    if not per_call:
        return lambda: kernel(p, k)
    singles = [p[i] for i in range(p.shape[0])]

    def run() -> None:
        for single in singles:
            kernel(single, k)
    return run


def speedup_targets(timings: Mapping[str, Mapping[str, float]]) -> Dict[str, bool]:
    """Targets for one path from ``timings[method][control]``.

    The exponential target holds when every control's exponential/analytic
    ratio reaches EXPONENTIAL_SPEEDUP; the finite-difference target when every
    finite_difference/analytic ratio lies in [1/FD_BAND, FD_BAND].
    """
    analytic = timings["analytic"]
    exponential = [timings["exponential"][c] / analytic[c] for c in analytic]
    fd = [timings["finite_difference"][c] / analytic[c] for c in analytic]
    return {
        f"exponential >= {EXPONENTIAL_SPEEDUP:g}x analytic": min(exponential) >= EXPONENTIAL_SPEEDUP,
        f"finite_difference within {FD_BAND:g}x of analytic": all(1.0 / FD_BAND <= r <= FD_BAND for r in fd),
    }


def run_bench(calls: Optional[int] = None, per_call: bool = False, seed: int = 0) -> BenchReport:
    calls = calls or get_config().bench_calls
    p = random_params(np.random.default_rng(seed), calls)
    scale = 1000.0 / calls * 1e6  # seconds for `calls` -> microseconds per 1000
    entries: List[BenchEntry] = []
    ratios: Dict[str, float] = {}
    targets: Dict[str, bool] = {}
    for path, methods in KERNELS.items():
        timings: Dict[str, Dict[str, float]] = {method: {} for method in METHODS}
        for method in METHODS:
            for k, control in enumerate(CARTESIAN_LABELS):
                elapsed = _best_time(_runner(p, methods[method], k, per_call)) * scale
                timings[method][control] = elapsed
                entries.append(BenchEntry(path=path, method=method, control=control, us_per_1000=elapsed))
                logger.info("%s %-17s d/d%s: %12.1f us per 1000 calls", path, method, control, elapsed)
        for control in CARTESIAN_LABELS:
            analytic = timings["analytic"][control]
            ratios[f"{path} {control} exponential/analytic"] = timings["exponential"][control] / analytic
            ratios[f"{path} {control} finite_difference/analytic"] = timings["finite_difference"][control] / analytic
        for name, met in speedup_targets(timings).items():
            targets[f"{path} {name}"] = met
            if not met:
                logger.warning("%s target not met: %s", path, name)
    return BenchReport(calls=calls, per_call=per_call, entries=entries, ratios=ratios, targets=targets)
