"""
Limited-memory BFGS driver that maximizes the grid-averaged quality of a pulse.

The optimizer minimizes f = 1 - Q + penalties, where Q is the grid mean of
Phi (PP and saturation) or |mean Phi_UR| (UR). Steps come from the L-BFGS
two-loop recursion and a strong Wolfe line search; a failed search drops the
curvature memory and retries along steepest descent once before giving up.
"""
import logging
import time
import warnings
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import line_search

from app.core.errors import ContractViolation, PulseDesignError
from app.models.problem import (
    AmplitudeLimit,
    ControlUnits,
    InitStrategy,
    MultistartResult,
    OptimizationProblem,
    OptimizationResult,
    PowerLimit,
    TerminationReason,
    constraint_limits,
)
from app.models.pulse import PulseShape
from app.services.constraints import apply_constraint, chain_gradient, penalty, z_penalty
from app.services.gradients import grid_average

logger = logging.getLogger(__name__)

# Memory pairs with s.y at or below this are skipped to keep H positive definite.
_CURVATURE_FLOOR = 1e-300

_ANGLE_LABELS = ("theta_x", "theta_y", "theta_xy", "theta_z")


def _limit_scale(limit, n: int) -> np.ndarray:
    """Per-digit amplitude a limit allows when all digits share it equally (radians)."""
    if isinstance(limit, AmplitudeLimit):
        return limit.per_digit(n)
    if isinstance(limit, PowerLimit):
        return np.full(n, np.sqrt(limit.p_max_avg))
    return np.full(n, np.sqrt(limit.e_theta_max / n))


def reference_amplitude(problem: OptimizationProblem) -> float:
    """Per-digit amplitude scale used by the random initialisations (radians).

    With several limits the tightest one sets the scale.
    """
    template = problem.shape_template
    n = template.n_digits
    if template.basis.theta_xy_const is not None:
        return template.basis.theta_xy_const
    limits = constraint_limits(problem.constraint)
    if limits:
        return float(min(np.min(_limit_scale(limit, n)) for limit in limits))
    return np.pi / n


def init_shape(
    problem: OptimizationProblem,
    strategy: Optional[InitStrategy] = None,
    seed: Optional[int] = None,
) -> PulseShape:
    """Starting shape for ``problem``; deterministic for a fixed seed."""
    options = problem.options
    strategy = InitStrategy(strategy or options.init_strategy)
    seed = options.seed if seed is None else seed
    template = problem.shape_template
    basis = template.basis
    n = template.n_digits

    if strategy is InitStrategy.FROM_FILE:
        from app.utils.shape_io import read_shape

        shape = read_shape(options.init_file)
        if shape.basis != basis or shape.n_digits != n:
            raise ContractViolation(
                f"init file {options.init_file} holds {shape.n_digits} {shape.basis.name} digits, "
                f"expected {n} {basis.name} digits"
            )
        return PulseShape(shape.controls, template.dt, basis)

    rng = np.random.default_rng(seed)
    reference = reference_amplitude(problem)
    if strategy is InitStrategy.RANDOM_SMALL:
        return template.with_controls(rng.normal(0.0, 0.1 * reference, size=template.controls.shape))

    phase = rng.uniform(0.0, 2.0 * np.pi, size=n)
    amplitude = np.full(n, 0.5 * reference)
    controls = np.zeros(template.controls.shape)
    if basis.is_cartesian:
        controls[:, 0] = amplitude * np.cos(phase)
        controls[:, 1] = amplitude * np.sin(phase)
    else:
        controls[:, basis.index("alpha")] = phase
        if basis.index("theta_xy") is not None:
            if basis.is_reduced:
                # auxiliary amplitude whose clamped image is the requested one
                scale = _limit_scale(problem.constraint, n)
                amplitude = scale * np.arctanh(amplitude / scale)
            controls[:, basis.index("theta_xy")] = amplitude
    return template.with_controls(controls)


class Objective:
    """f(x) and grad f(x) over the flattened controls, with evaluation memo."""

    def __init__(self, problem: OptimizationProblem) -> None:
        self.problem = problem
        self.template = problem.shape_template
        self.evaluations = 0
        self._memo: Dict[bytes, Tuple[float, np.ndarray, float, float]] = {}
        scale = np.ones(self.template.controls.shape)
        if problem.options.units is ControlUnits.RADIANS_PER_SECOND:
            for column, label in enumerate(self.template.basis.labels):
                if label in _ANGLE_LABELS:
                    scale[:, column] = self.template.dt
        # controls = scale * x
        self._scale = scale

    def to_vector(self, shape: PulseShape) -> np.ndarray:
        return (shape.controls / self._scale).ravel()

    def to_shape(self, x: np.ndarray) -> PulseShape:
        return self.template.with_controls(self._scale * np.reshape(x, self._scale.shape))

    def evaluate(self, x: np.ndarray) -> Tuple[float, np.ndarray, float, float]:
        """(f, grad f, quality, signed mean cost) at ``x``."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        key = x.tobytes()
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        problem = self.problem
        options = problem.options
        shape = self.to_shape(x)
        clamp = apply_constraint(problem.constraint, shape)
        signed, grad = grid_average(problem, shape, clamp)
        quality = signed
        if problem.is_universal and signed < 0.0:
            quality, grad = -signed, -grad
        grad = chain_gradient(grad, clamp)
        value = 1.0 - quality
        grad_f = -grad
        for extra, extra_grad in (
            penalty(problem.constraint, shape, options.penalty_weight),
            z_penalty(shape, options.z_limit, options.penalty_weight),
        ):
            value += extra
            grad_f = grad_f + extra_grad
        result = (float(value), (grad_f * self._scale).ravel(), float(quality), float(signed))
        self.evaluations += 1
        if len(self._memo) > 64:
            self._memo.clear()
        self._memo[key] = result
        return result

    def value(self, x: np.ndarray) -> float:
        return self.evaluate(x)[0]

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate(x)[1]


def _two_loop(grad: np.ndarray, memory: Deque[Tuple[np.ndarray, np.ndarray, float]]) -> np.ndarray:
    """H_k grad by the L-BFGS two-loop recursion."""
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(memory):
        alpha = rho * np.dot(s, q)
        q -= alpha * y
        alphas.append(alpha)
    if memory:
        s, y, _ = memory[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), alpha in zip(memory, reversed(alphas)):
        beta = rho * np.dot(y, q)
        q += (alpha - beta) * s
    return q


def _search(objective: Objective, x, direction, grad, value, old_value, options):
    with warnings.catch_warnings():
        # LineSearchWarning is a RuntimeWarning; failures are reported through alpha=None
        warnings.simplefilter("ignore", RuntimeWarning)
        alpha, *_ = line_search(
            objective.value,
            objective.gradient,
            x,
            direction,
            gfk=grad,
            old_fval=value,
            old_old_fval=old_value,
            c1=options.wolfe_c1,
            c2=options.wolfe_c2,
        )
    if alpha is None or not np.isfinite(alpha) or alpha <= 0.0:
        return None
    return float(alpha)


def optimize(problem: OptimizationProblem, initial: Optional[PulseShape] = None) -> OptimizationResult:
    """Maximize the grid-averaged quality of ``problem`` starting from ``initial``."""
    options = problem.options
    if initial is None:
        initial = init_shape(problem)
    if initial.basis != problem.shape_template.basis or initial.n_digits != problem.shape_template.n_digits:
        raise ContractViolation("initial shape does not match the problem template")
    objective = Objective(problem)
    started = time.perf_counter()

    x = objective.to_vector(initial)
    value, grad, quality, signed = objective.evaluate(x)
    quality_trajectory: List[float] = [quality]
    objective_trajectory: List[float] = [value]
    memory: Deque[Tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=options.lbfgs_memory)
    old_value = value + 0.5 * float(np.linalg.norm(grad))
    termination = TerminationReason.MAX_ITERATIONS
    iterations = 0

    while True:
        if np.max(np.abs(grad)) < options.grad_tolerance:
            termination = TerminationReason.CONVERGED
            break
        if iterations >= options.max_iterations:
            break
        direction = -_two_loop(grad, memory)
        if np.dot(direction, grad) >= 0.0:
            memory.clear()
            direction = -grad
        alpha = _search(objective, x, direction, grad, value, old_value, options)
        if alpha is None and memory:
            logger.warning("Line search failed at iteration %d; restarting from steepest descent", iterations)
            memory.clear()
            direction = -grad
            old_value = value + 0.5 * float(np.linalg.norm(grad))
            alpha = _search(objective, x, direction, grad, value, old_value, options)
        if alpha is None:
            termination = TerminationReason.LINE_SEARCH_FAILURE
            break

        step = alpha * direction
        x_new = x + step
        value_new, grad_new, quality, signed = objective.evaluate(x_new)
        y = grad_new - grad
        curvature = float(np.dot(step, y))
        if curvature > _CURVATURE_FLOOR:
            memory.append((step, y, 1.0 / curvature))
        old_value, value = value, value_new
        x, grad = x_new, grad_new
        iterations += 1
        quality_trajectory.append(quality)
        objective_trajectory.append(value)
        logger.debug(
            "iter %d: f=%.12g quality=%.12g |g|inf=%.3e step=%.3e",
            iterations, value, quality, float(np.max(np.abs(grad))), alpha,
        )

    wall_time = time.perf_counter() - started
    result = OptimizationResult(
        shape=objective.to_shape(x),
        quality=quality,
        signed_cost=signed,
        iterations=iterations,
        wall_time_s=wall_time,
        termination=termination,
        seed=options.seed,
        evaluations=objective.evaluations,
        quality_trajectory=quality_trajectory,
        objective_trajectory=objective_trajectory,
    )
    if problem.is_universal:
        logger.info(
            "Seed %s: quality %.6f (signed %.6f) after %d iterations, %s",
            options.seed, quality, signed, iterations, termination.value,
        )
    else:
        logger.info("Seed %s: quality %.6f after %d iterations, %s", options.seed, quality, iterations, termination.value)
    return result


def _run_seed(problem: OptimizationProblem, seed: int) -> OptimizationResult:
    seeded = replace(problem, options=replace(problem.options, seed=seed))
    return optimize(seeded, init_shape(seeded))


def multistart(
    problem: OptimizationProblem,
    n_starts: int = 1,
    seeds: Optional[Sequence[int]] = None,
    threads: int = 1,
) -> MultistartResult:
    """Run one optimization per seed and keep the best final quality.

    Results are listed in seed order whatever the thread count; ties go to the
    earlier seed.
    """
    if seeds is None:
        if n_starts < 1:
            raise ContractViolation("n_starts must be >= 1")
        seeds = [problem.options.seed + i for i in range(n_starts)]
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ContractViolation("multistart needs at least one seed")

    def attempt(seed: int):
        try:
            return _run_seed(problem, seed)
        except Exception as exc:
            logger.exception("Start with seed %d failed", seed)
            return {"seed": seed, "error": f"{type(exc).__name__}: {exc}"}

    workers = max(1, min(int(threads), len(seeds)))
    if workers == 1:
        outcomes = [attempt(seed) for seed in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(attempt, seeds))

    results = [o for o in outcomes if isinstance(o, OptimizationResult)]
    failures = [o for o in outcomes if not isinstance(o, OptimizationResult)]
    if not results:
        raise PulseDesignError(f"all {len(seeds)} starts failed: {failures[0]['error']}")
    best = results[0]
    for result in results[1:]:
        if result.quality > best.quality:
            best = result
    logger.info("Best of %d starts: seed %s, quality %.6f", len(results), best.seed, best.quality)
    return MultistartResult(best=best, results=results, failures=failures)
