"""Optimization problem types: grid, targets, constraints, options, results."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from app.core.errors import ContractViolation, InfeasibleConstraintError
from app.models.pulse import PulseShape

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-9


def _unit(vector: Any, size: int, name: str) -> np.ndarray:
    array = np.array(vector, dtype=np.float64).reshape(-1)
    if array.shape != (size,):
        raise ContractViolation(f"{name} must have {size} components, got {array.shape[0]}")
    norm = float(np.linalg.norm(array))
    if abs(norm - 1.0) > UNIT_TOLERANCE:
        raise ContractViolation(f"{name} must be a unit vector, |{name}| = {norm}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class GridSpec:
    """Offset / B1 robustness grid (offset-major ordering)."""
    n_off: int = 1
    bandwidth_hz: float = 0.0
    n_rf: int = 1
    b1_tolerance: float = 0.0

    def __post_init__(self) -> None:
        if int(self.n_off) < 1 or int(self.n_rf) < 1:
            raise ContractViolation("grid needs n_off >= 1 and n_rf >= 1")
        if self.bandwidth_hz < 0.0:
            raise ContractViolation("bandwidth_hz must be non-negative")
        if not 0.0 <= self.b1_tolerance < 1.0:
            raise ContractViolation("b1_tolerance must lie in [0, 1)")

    @staticmethod
    def _symmetric(half_width: float, count: int) -> np.ndarray:
        if count == 1:
            return np.zeros(1)
        values = np.linspace(-half_width, half_width, count)
        # exact mirror symmetry about zero
        return 0.5 * (values - values[::-1])

    def offsets_hz(self) -> np.ndarray:
        return self._symmetric(0.5 * self.bandwidth_hz, int(self.n_off))

    def b1_scales(self) -> np.ndarray:
        return 1.0 + self._symmetric(self.b1_tolerance, int(self.n_rf))

    @property
    def n_points(self) -> int:
        return int(self.n_off) * int(self.n_rf)

    def denser(self, factor: int) -> "GridSpec":
        """Grid with ``factor`` times as many intervals on each non-trivial axis."""
        factor = max(1, int(factor))
        n_off = 1 if self.n_off == 1 else (self.n_off - 1) * factor + 1
        n_rf = 1 if self.n_rf == 1 else (self.n_rf - 1) * factor + 1
        return GridSpec(n_off, self.bandwidth_hz, n_rf, self.b1_tolerance)


@dataclass(frozen=True, eq=False)
class PPTarget:
    """Point-to-point transfer rho0 -> lambda_f."""
    rho0: np.ndarray
    lambda_f: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho0", _unit(self.rho0, 3, "rho0"))
        object.__setattr__(self, "lambda_f", _unit(self.lambda_f, 3, "lambda_f"))


@dataclass(frozen=True, eq=False)
class URTarget:
    """Universal rotation given by its unit quaternion (a, b, c, d)."""
    q_f: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "q_f", _unit(self.q_f, 4, "q_f"))


@dataclass(frozen=True, eq=False)
class SaturationTarget:
    """Bring rho0 into the transverse plane: quality 1 - M_z^2."""
    rho0: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho0", _unit(self.rho0, 3, "rho0"))


Target = Union[PPTarget, URTarget, SaturationTarget]


def _positive(value: Any, name: str) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    if array.size == 0 or not np.all(np.isfinite(array)) or not np.all(array > 0.0):
        raise InfeasibleConstraintError(f"{name} must be positive and finite")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class AmplitudeLimit:
    """Per-digit transverse amplitude cap (radians, scalar or one per digit)."""
    theta_max: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta_max", _positive(self.theta_max, "theta_max"))

    def per_digit(self, n_digits: int) -> np.ndarray:
        if self.theta_max.ndim == 0:
            return np.full(n_digits, float(self.theta_max))
        if self.theta_max.shape != (n_digits,):
            raise InfeasibleConstraintError(
                f"theta_max has {self.theta_max.size} entries for a {n_digits}-digit shape"
            )
        return np.array(self.theta_max)


@dataclass(frozen=True, eq=False)
class PowerLimit:
    """Cap on the mean of theta_xy^2 over digits (radians^2)."""
    p_max_avg: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_max_avg", float(_positive(self.p_max_avg, "p_max_avg")))


@dataclass(frozen=True, eq=False)
class EnergyLimit:
    """Cap on the sum of theta_xy^2 over digits (radians^2)."""
    e_theta_max: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "e_theta_max", float(_positive(self.e_theta_max, "e_theta_max")))


ConstraintSpec = Union[AmplitudeLimit, PowerLimit, EnergyLimit]

# One limit, or several that must all hold (non-reduced bases only).
Constraint = Union[ConstraintSpec, Tuple[ConstraintSpec, ...]]

_LIMIT_TYPES = (AmplitudeLimit, PowerLimit, EnergyLimit)


def constraint_limits(constraint: Optional[Constraint]) -> Tuple[ConstraintSpec, ...]:
    """The individual limits of ``constraint``; empty for None."""
    if constraint is None:
        return ()
    limits = tuple(constraint) if isinstance(constraint, (list, tuple)) else (constraint,)
    for limit in limits:
        if not isinstance(limit, _LIMIT_TYPES):
            raise ContractViolation(f"unsupported constraint {type(limit).__name__}")
    return limits


def normalize_constraint(constraint: Optional[Constraint]) -> Optional[Constraint]:
    """None, a single limit, or a tuple of two or more limits."""
    limits = constraint_limits(constraint)
    if not limits:
        return None
    return limits[0] if len(limits) == 1 else limits


class InitStrategy(str, Enum):
    RANDOM_PHASE = "random_phase"
    RANDOM_SMALL = "random_small"
    FROM_FILE = "from_file"


class ControlUnits(str, Enum):
    RADIANS = "rad"
    RADIANS_PER_SECOND = "rad_per_s"


class TerminationReason(str, Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    LINE_SEARCH_FAILURE = "LineSearchFailure"


@dataclass(frozen=True)
class OptimizerOptions:
    max_iterations: int = 1000
    grad_tolerance: float = 1e-8
    lbfgs_memory: int = 10
    seed: int = 0
    init_strategy: InitStrategy = InitStrategy.RANDOM_PHASE
    init_file: Optional[str] = None
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    penalty_weight: float = 100.0
    units: ControlUnits = ControlUnits.RADIANS
    z_limit: Optional[float] = None  # radians per digit, off by default

    def __post_init__(self) -> None:
        object.__setattr__(self, "init_strategy", InitStrategy(self.init_strategy))
        object.__setattr__(self, "units", ControlUnits(self.units))
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ContractViolation("line search constants need 0 < c1 < c2 < 1")
        if self.lbfgs_memory < 1:
            raise ContractViolation("lbfgs_memory must be >= 1")
        if self.max_iterations < 0:
            raise ContractViolation("max_iterations must be >= 0")
        if not self.grad_tolerance > 0.0:
            raise ContractViolation("grad_tolerance must be positive")
        if self.init_strategy is InitStrategy.FROM_FILE and not self.init_file:
            raise ContractViolation("from_file initialisation needs init_file")
        if self.z_limit is not None and not self.z_limit > 0.0:
            raise InfeasibleConstraintError("z_limit must be positive")


@dataclass(frozen=True, eq=False)
class OptimizationProblem:
    shape_template: PulseShape
    grid: GridSpec
    target: Target
    constraint: Optional[Constraint] = None
    options: OptimizerOptions = field(default_factory=OptimizerOptions)

    def __post_init__(self) -> None:
        object.__setattr__(self, "constraint", normalize_constraint(self.constraint))
        basis = self.shape_template.basis
        if basis.is_reduced and self.constraint is None:
            raise InfeasibleConstraintError(f"basis {basis.name} requires a constraint")
        limits = constraint_limits(self.constraint)
        if basis.is_reduced and len(limits) > 1:
            raise InfeasibleConstraintError(f"basis {basis.name} takes exactly one limit, got {len(limits)}")
        n_digits = self.shape_template.n_digits
        for limit in limits:
            if isinstance(limit, AmplitudeLimit):
                theta_max = limit.per_digit(n_digits)
                if basis.theta_xy_const is not None and np.any(basis.theta_xy_const > theta_max):
                    raise InfeasibleConstraintError("phase_only amplitude exceeds the amplitude limit")
                continue
            if basis.theta_xy_const is None:
                continue
            total = n_digits * basis.theta_xy_const ** 2
            bound = limit.p_max_avg * n_digits if isinstance(limit, PowerLimit) else limit.e_theta_max
            if total > bound:
                raise InfeasibleConstraintError("phase_only amplitude exceeds the power/energy limit")

    @property
    def is_universal(self) -> bool:
        return isinstance(self.target, URTarget)


@dataclass
class OptimizationResult:
    """Outcome of one optimizer run.

    ``objective_trajectory`` holds f after the start and after every accepted
    step and never increases. ``quality_trajectory`` holds the grid quality at
    the same points; it never decreases unless a penalty is active (a limit on
    a non-reduced basis, or ``z_limit``), where a step may trade a little
    quality for a smaller penalty.
    """
    shape: PulseShape
    quality: float
    signed_cost: float
    iterations: int
    wall_time_s: float
    termination: TerminationReason
    seed: Optional[int] = None
    evaluations: int = 0
    quality_trajectory: List[float] = field(default_factory=list)
    objective_trajectory: List[float] = field(default_factory=list)

    @property
    def time_per_iteration_s(self) -> float:
        return self.wall_time_s / max(1, self.iterations)

    def summary(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "quality": self.quality,
            "signed_cost": self.signed_cost,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "wall_time_s": self.wall_time_s,
            "time_per_iteration_s": self.time_per_iteration_s,
            "termination": self.termination.value,
        }


@dataclass
class MultistartResult:
    best: OptimizationResult
    results: List[OptimizationResult]
    failures: List[Dict[str, Any]] = field(default_factory=list)
