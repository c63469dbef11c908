"""
Three-way agreement suite: analytic kernels, augmented exponentials and finite differences.

Kernel checks draw random rotation parameters (a tenth of them with angles
below 1e-5 so the series branches run). Shape checks compare the full
per-grid-point gradient of random shapes, targets and constraints against
central differences of the cost. Comparisons use the allclose criterion
|analytic - reference| <= atol + rtol * |reference|.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import get_config
from app.models.problem import AmplitudeLimit, EnergyLimit, PowerLimit, PPTarget, SaturationTarget, URTarget
from app.models.pulse import BasisKind, ControlBasis, PulseShape
from app.models.rotation import RotationParams
from app.schemas.report import CheckEntry, GradcheckReport
from app.services import gradients
from app.services.constraints import apply_constraint, chain_gradient
from app.services.oracles import (
    augmented_gradient_rot,
    augmented_gradient_su2,
    finite_difference,
    finite_difference_gradient,
    su2_to_quaternion,
)
from app.services.rotkernel import cost_pp, cost_ur, propagate_pp, propagate_ur, quaternion_from_params, rotation_from_params

logger = logging.getLogger(__name__)

AXES = "xyz"
QUATERNION_COMPONENTS = "ABCD"

BASIS_GROUPS = {
    "all": tuple(BasisKind),
    "cartesian": (BasisKind.CARTESIAN_XY, BasisKind.CARTESIAN_XYZ),
    "polar": (
        BasisKind.POLAR_AMP_PHASE,
        BasisKind.POLAR_AMP_PHASE_Z,
        BasisKind.POLAR_REDUCED_AMP_PHASE,
        BasisKind.POLAR_REDUCED_AMP_PHASE_Z,
        BasisKind.PHASE_ONLY,
    ),
}

POLAR_NOTE = (
    "augmented exponential skipped for polar controls: amplitude and phase have no "
    "generator, so they are checked against finite differences only"
)

FD_STEP = 1e-6


@dataclass(frozen=True)
class Tolerances:
    exponential: float = 1e-10
    rtol: float = 1e-7
    atol: float = 1e-8

    @classmethod
    def from_config(cls) -> "Tolerances":
        raw = get_config().gradcheck_tolerances
        return cls(raw["exponential"], raw["finiteDifference"], raw["finiteDifferenceAbsolute"])


def resolve_bases(selection: Optional[str]) -> Tuple[BasisKind, ...]:
    """Basis kinds for a --basis value: a basis name or one of all / cartesian / polar."""
    if not selection:
        return BASIS_GROUPS["all"]
    if selection in BASIS_GROUPS:
        return BASIS_GROUPS[selection]
    return (ControlBasis.from_name(selection).kind,)


def _compare(
    analytic: np.ndarray,
    reference: np.ndarray,
    names: Callable[[tuple], str],
    atol: float,
    rtol: float = 0.0,
) -> Tuple[float, str, bool]:
    error = np.abs(analytic - reference)
    allowed = atol + rtol * np.abs(reference)
    ratio = error / allowed
    worst = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return float(np.max(error)), names(worst), bool(np.all(error <= allowed))


def _rotation_label(controls: Sequence[str]) -> Callable[[tuple], str]:
    # index layout (..., control, row, column)
    def name(index: tuple) -> str:
        k, i, j = index[-3:]
        return f"dR_{AXES[i]}{AXES[j]}/d{controls[k]}"
    return name


def _quaternion_label(controls: Sequence[str]) -> Callable[[tuple], str]:
    def name(index: tuple) -> str:
        k, i = index[-2:]
        return f"d{QUATERNION_COMPONENTS[i]}/d{controls[k]}"
    return name


def random_params(rng: np.random.Generator, count: int) -> RotationParams:
    """Random rotation vectors; every tenth one with |theta| < 1e-5."""
    vectors = rng.normal(0.0, 1.5, size=(count, 3))
    vectors[::10] *= 1e-6
    return RotationParams.from_cartesian(vectors[:, 0], vectors[:, 1], vectors[:, 2])


def _perturbed(p: RotationParams, polar: bool, k: int, t: float) -> RotationParams:
    if polar:
        # control order alpha, theta_xy, theta_z
        shift = np.eye(3)[k] * t
        return RotationParams.from_polar(p.theta_xy + shift[1], p.alpha + shift[0], p.theta_z + shift[2])
    shift = np.eye(3)[k] * t
    return RotationParams.from_cartesian(p.theta_x + shift[0], p.theta_y + shift[1], p.theta_z + shift[2])


def _fd_kernel(p: RotationParams, polar: bool, builder: Callable[[RotationParams], np.ndarray], axis: int) -> np.ndarray:
    derivatives = [
        finite_difference(lambda t, k=k: builder(_perturbed(p, polar, k, t)), 0.0, FD_STEP) for k in range(3)
    ]
    return np.stack(derivatives, axis=axis)


def check_kernels(
    rng: np.random.Generator,
    instances: int,
    polar: bool,
    tolerances: Tolerances,
) -> List[CheckEntry]:
    family = "polar" if polar else "cartesian"
    p = random_params(rng, instances)
    if polar:
        # polar draws keep theta_xy >= 0
        p = RotationParams.from_polar(np.abs(p.theta_xy), p.alpha, p.theta_z)
        rot = gradients.d_rotation_polar(p)
        quat = gradients.d_quaternion(p, ControlBasis(BasisKind.POLAR_AMP_PHASE))
    else:
        rot = gradients.d_rotation_cartesian(p)
        quat = gradients.d_quaternion(p)
    entries = []

    def add(oracle: str, outcome: Tuple[float, str, bool], tolerance: float) -> None:
        deviation, worst, passed = outcome
        entries.append(
            CheckEntry(
                basis=family, oracle=oracle, instances=instances,
                max_deviation=deviation, tolerance=tolerance, worst=worst, passed=passed,
            )
        )

    if not polar:
        exp_rot = np.stack([augmented_gradient_rot(p, k) for k in range(3)], axis=-3)
        add("exponential_rotation", _compare(rot.values, exp_rot, _rotation_label(rot.labels), tolerances.exponential), tolerances.exponential)
        exp_quat = np.stack([su2_to_quaternion(augmented_gradient_su2(p, k)) for k in range(3)], axis=-2)
        add("exponential_quaternion", _compare(quat.values, exp_quat, _quaternion_label(quat.labels), tolerances.exponential), tolerances.exponential)

    fd_rot = _fd_kernel(p, polar, rotation_from_params, -3)
    add("fd_rotation", _compare(rot.values, fd_rot, _rotation_label(rot.labels), tolerances.atol, tolerances.rtol), tolerances.rtol)
    fd_quat = _fd_kernel(p, polar, quaternion_from_params, -2)
    add("fd_quaternion", _compare(quat.values, fd_quat, _quaternion_label(quat.labels), tolerances.atol, tolerances.rtol), tolerances.rtol)

    if polar and np.any(p.theta_xy > 1e-4):
        # d/dtheta_x = cos(a) d/dtheta_xy - sin(a) / theta_xy d/dalpha
        keep = p.theta_xy > 1e-4
        sub = p[keep]
        cart = gradients.d_rotation_cartesian(sub)["theta_x"]
        pol = gradients.d_rotation_polar(sub)
        chained = (
            np.cos(sub.alpha)[:, None, None] * pol["theta_xy"]
            - (np.sin(sub.alpha) / sub.theta_xy)[:, None, None] * pol["alpha"]
        )
        deviation, worst, passed = _compare(chained, cart, lambda i: f"dR_{AXES[i[-2]]}{AXES[i[-1]]}/dtheta_x", tolerances.atol)
        entries.append(
            CheckEntry(
                basis=family, oracle="chain_rule", instances=int(np.sum(keep)),
                max_deviation=deviation, tolerance=tolerances.atol, worst=worst, passed=passed,
            )
        )
    return entries


def _random_unit(rng: np.random.Generator, size: int) -> np.ndarray:
    v = rng.normal(size=size)
    return v / np.linalg.norm(v)


def _random_case(rng: np.random.Generator, kind: BasisKind, n: int, index: int):
    theta_const = float(rng.uniform(0.05, 0.6)) if kind is BasisKind.PHASE_ONLY else None
    basis = ControlBasis(kind, theta_const)
    controls = rng.normal(0.0, 0.4, size=(n, basis.arity))
    if basis.index("alpha") is not None:
        controls[:, basis.index("alpha")] = rng.uniform(-np.pi, np.pi, size=n)
    shape = PulseShape(controls, 1e-6, basis)
    constraint = None
    if basis.is_reduced:
        choice = index % 3
        if choice == 0:
            constraint = AmplitudeLimit(rng.uniform(0.2, 1.0))
        elif choice == 1:
            constraint = PowerLimit(rng.uniform(0.02, 0.3))
        else:
            constraint = EnergyLimit(n * rng.uniform(0.02, 0.3))
    target_kind = index % 3
    if target_kind == 0:
        target = PPTarget(_random_unit(rng, 3), _random_unit(rng, 3))
    elif target_kind == 1:
        target = URTarget(_random_unit(rng, 4))
    else:
        target = SaturationTarget(_random_unit(rng, 3))
    omega = 2.0 * np.pi * rng.uniform(-5e4, 5e4)
    b1 = rng.uniform(0.9, 1.1)
    return shape, constraint, target, omega, b1


def point_value(shape: PulseShape, target, omega: float, b1: float, constraint) -> float:
    """Cost of ``shape`` at one grid point, without any gradient work."""
    if isinstance(target, URTarget):
        return float(cost_ur(propagate_ur(shape, omega, b1, target.q_f, constraint=constraint)))
    value = float(cost_pp(propagate_pp(shape, target, omega, b1, constraint=constraint)))
    if isinstance(target, SaturationTarget):
        return 1.0 - value * value
    return value


def point_gradient(shape: PulseShape, target, omega: float, b1: float, constraint) -> np.ndarray:
    """Analytic gradient with respect to the stored controls (auxiliary for reduced bases)."""
    clamp = apply_constraint(constraint, shape)
    _, grad = gradients.gradient_point(shape, target, omega, b1, clamp=clamp)
    return chain_gradient(grad, clamp)


def check_shapes(
    rng: np.random.Generator,
    kind: BasisKind,
    digits: Iterable[int],
    instances: int,
    tolerances: Tolerances,
) -> List[CheckEntry]:
    entries = []
    for n in digits:
        # long shapes cost N * arity cost evaluations each
        count = instances if n < 100 else max(2, instances // 10)
        worst_error, worst_name, passed = 0.0, "", True
        for index in range(count):
            shape, constraint, target, omega, b1 = _random_case(rng, kind, n, index)
            analytic = point_gradient(shape, target, omega, b1, constraint)
            reference = finite_difference_gradient(
                lambda x: point_value(shape.with_controls(x), target, omega, b1, constraint),
                shape.controls,
                get_config().fd_relative_step,
            )
            labels = shape.basis.labels
            error, name, ok = _compare(
                analytic, reference, lambda i: f"dPhi/d{labels[i[1]]}[{i[0]}]", tolerances.atol, tolerances.rtol
            )
            if error >= worst_error:
                worst_error, worst_name = error, f"{name} ({type(target).__name__})"
            passed = passed and ok
        entries.append(
            CheckEntry(
                basis=kind.value, oracle="fd_shape", n_digits=n, instances=count,
                max_deviation=worst_error, tolerance=tolerances.rtol, worst=worst_name, passed=passed,
            )
        )
    return entries


def run_gradcheck(
    selection: Optional[str] = None,
    instances: Optional[int] = None,
    digits: Optional[Sequence[int]] = None,
    seed: int = 0,
    tolerances: Optional[Tolerances] = None,
) -> GradcheckReport:
    config = get_config()
    instances = instances or config.gradcheck_instances
    digits = list(digits or config.gradcheck_digits)
    tolerances = tolerances or Tolerances.from_config()
    kinds = resolve_bases(selection)
    rng = np.random.default_rng(seed)

    entries: List[CheckEntry] = []
    notes: List[str] = []
    if any(k in BASIS_GROUPS["cartesian"] for k in kinds):
        entries.extend(check_kernels(rng, instances, False, tolerances))
    if any(k in BASIS_GROUPS["polar"] for k in kinds):
        entries.extend(check_kernels(rng, instances, True, tolerances))
        notes.append(POLAR_NOTE)
    for kind in kinds:
        entries.extend(check_shapes(rng, kind, digits, instances, tolerances))

    for entry in entries:
        if not entry.passed:
            logger.error(
                "Gradient check failed: %s %s deviation %.3e at %s", entry.basis, entry.oracle, entry.max_deviation, entry.worst
            )
    return GradcheckReport(passed=all(e.passed for e in entries), entries=entries, notes=notes)
