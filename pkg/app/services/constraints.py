"""Holonomic tanh clamps for amplitude, power and energy limits.

Reduced polar bases optimize an auxiliary amplitude whose tanh image is the
physical amplitude:

- amplitude:  red_j = max_j * tanh(aux_j / max_j)
- power:      red = aux * s(P),  s(P) = sqrt(Pmax / P) * tanh(sqrt(P / Pmax)),
              P = sum(aux^2) / N
- energy:     as power with E = sum(aux^2) and no 1/N

The power and energy clamps are global over the shape. Their Jacobian is
applied matrix-free: J = s * I + (2 / N) * s'(P) * aux aux^T, which is
symmetric, so one dot product and one scaled addition per application.

Non-reduced bases enforce the same limits with an exterior quadratic penalty
on the objective, and every exported shape goes through
:func:`sanitize_for_export`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from app.core.errors import ContractViolation
from app.models.problem import AmplitudeLimit, Constraint, ConstraintSpec, PowerLimit, constraint_limits
from app.models.pulse import PulseShape

logger = logging.getLogger(__name__)

# below this value of u = sqrt(P / Pmax) the scale factor uses its Taylor series
_SCALE_SERIES_LIMIT = 1e-2

# feasibility checks allow rounding at deep tanh saturation
_FEASIBILITY_RTOL = 1e-12

JacobianApply = Callable[[np.ndarray], np.ndarray]


def amp_clamp(theta_xy, theta_max) -> Tuple[np.ndarray, np.ndarray]:
    """Per-digit clamp; returns (reduced amplitude, d reduced / d aux)."""
    theta_max = np.asarray(theta_max, dtype=np.float64)
    if np.any(theta_max <= 0.0):
        raise ContractViolation("theta_max must be positive")
    t = np.tanh(np.asarray(theta_xy, dtype=np.float64) / theta_max)
    return theta_max * t, 1.0 - t * t


def _scale(u: np.ndarray | float) -> Tuple[float, float]:
    """s(u) = tanh(u) / u and (ds/du) / (2u), both series-safe at u -> 0."""
    u = float(u)
    if u < _SCALE_SERIES_LIMIT:
        u2 = u * u
        return 1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 15.0, -1.0 / 3.0 + 4.0 * u2 / 15.0 - 17.0 * u2 * u2 / 105.0
    t = np.tanh(u)
    return t / u, (u * (1.0 - t * t) - t) / (2.0 * u ** 3)


def _global_clamp(theta_xy, limit: float, normalizer: float) -> Tuple[np.ndarray, JacobianApply]:
    theta = np.asarray(theta_xy, dtype=np.float64)
    if not limit > 0.0:
        raise ContractViolation("clamp limit must be positive")
    measure = float(np.dot(theta, theta)) / normalizer
    if measure == 0.0:
        return theta.copy(), lambda g: np.array(g, dtype=np.float64)
    s, half_ds_du_over_u = _scale(np.sqrt(measure / limit))
    # ds/dP = (ds/du) / (2 u limit)
    ds_dp = half_ds_du_over_u / limit

    def jacobian_apply(grad: np.ndarray) -> np.ndarray:
        grad = np.asarray(grad, dtype=np.float64)
        return s * grad + (2.0 / normalizer) * ds_dp * float(np.dot(theta, grad)) * theta

    return s * theta, jacobian_apply


def power_clamp(theta_xy, p_max_avg: float) -> Tuple[np.ndarray, JacobianApply]:
    """Global clamp keeping mean(theta_red^2) below ``p_max_avg``."""
    theta = np.asarray(theta_xy, dtype=np.float64)
    return _global_clamp(theta, float(p_max_avg), float(theta.size))


def energy_clamp(theta_xy, e_theta_max: float) -> Tuple[np.ndarray, JacobianApply]:
    """Global clamp keeping sum(theta_red^2) below ``e_theta_max``."""
    return _global_clamp(theta_xy, float(e_theta_max), 1.0)


@dataclass(frozen=True, eq=False)
class ClampState:
    """Result of applying a constraint to the auxiliary amplitudes of one shape."""
    spec: ConstraintSpec
    aux: np.ndarray
    reduced: np.ndarray
    jacobian_apply: JacobianApply


def apply_constraint(spec: Optional[Constraint], shape: PulseShape) -> Optional[ClampState]:
    """Clamp the amplitude column of a reduced-basis shape; None for other bases."""
    if not shape.basis.is_reduced:
        return None
    limits = constraint_limits(spec)
    if not limits:
        raise ContractViolation(f"basis {shape.basis.name} requires a constraint")
    if len(limits) > 1:
        raise ContractViolation(f"basis {shape.basis.name} takes exactly one limit, got {len(limits)}")
    spec = limits[0]
    aux = np.array(shape.column("theta_xy"))
    if isinstance(spec, AmplitudeLimit):
        reduced, slope = amp_clamp(aux, spec.per_digit(shape.n_digits))
        return ClampState(spec, aux, reduced, lambda g: slope * np.asarray(g, dtype=np.float64))
    if isinstance(spec, PowerLimit):
        reduced, apply = power_clamp(aux, spec.p_max_avg)
    else:
        reduced, apply = energy_clamp(aux, spec.e_theta_max)
    return ClampState(spec, aux, reduced, apply)


def chain_gradient(outer: np.ndarray, clamp: Optional[ClampState], amplitude_index: int = 0) -> np.ndarray:
    """Map a gradient w.r.t. reduced amplitudes to the auxiliary controls.

    ``outer`` has shape (N, arity); only the amplitude column changes.
    """
    grad = np.array(outer, dtype=np.float64)
    if clamp is None:
        return grad
    grad[:, amplitude_index] = clamp.jacobian_apply(grad[:, amplitude_index])
    return grad


def _transverse_amplitude(shape: PulseShape) -> Tuple[np.ndarray, np.ndarray]:
    """Amplitude per digit and d amplitude / d controls, shape (N, arity)."""
    basis = shape.basis
    jac = np.zeros_like(shape.controls)
    if basis.is_cartesian:
        tx, ty = shape.controls[:, 0], shape.controls[:, 1]
        amplitude = np.hypot(tx, ty)
        safe = np.where(amplitude > 0.0, amplitude, 1.0)
        jac[:, 0] = np.where(amplitude > 0.0, tx / safe, 0.0)
        jac[:, 1] = np.where(amplitude > 0.0, ty / safe, 0.0)
        return amplitude, jac
    if basis.theta_xy_const is not None:
        return np.full(shape.n_digits, basis.theta_xy_const), jac
    signed = shape.controls[:, 0]
    jac[:, 0] = np.sign(signed)
    return np.abs(signed), jac


def _measure(spec: ConstraintSpec, amplitude: np.ndarray) -> Tuple[float, float, float]:
    """(power or energy of ``amplitude``, its limit, d measure / d amplitude^2)."""
    n = amplitude.size
    if isinstance(spec, PowerLimit):
        return float(np.dot(amplitude, amplitude)) / n, spec.p_max_avg, 1.0 / n
    return float(np.dot(amplitude, amplitude)), spec.e_theta_max, 1.0


def _limit_penalty(spec: ConstraintSpec, amplitude: np.ndarray, weight: float) -> Tuple[float, np.ndarray]:
    n = amplitude.size
    if isinstance(spec, AmplitudeLimit):
        excess = np.maximum(0.0, amplitude - spec.per_digit(n))
        return weight * float(np.dot(excess, excess)) / n, 2.0 * weight * excess / n
    measure, limit, scale = _measure(spec, amplitude)
    excess = max(0.0, measure / limit - 1.0)
    return weight * excess * excess, 4.0 * weight * excess / limit * scale * amplitude


def penalty(spec: Optional[Constraint], shape: PulseShape, weight: float) -> Tuple[float, np.ndarray]:
    """Exterior quadratic penalty for non-reduced bases, with its gradient.

    Several limits add their penalties.
    """
    grad = np.zeros_like(shape.controls)
    limits = constraint_limits(spec)
    if not limits or shape.basis.is_reduced or weight <= 0.0:
        return 0.0, grad
    amplitude, jac = _transverse_amplitude(shape)
    value = 0.0
    d_amp = np.zeros(shape.n_digits)
    for limit in limits:
        part, d_part = _limit_penalty(limit, amplitude, weight)
        value += part
        d_amp += d_part
    return value, jac * d_amp[:, None]


def z_penalty(shape: PulseShape, z_limit: Optional[float], weight: float) -> Tuple[float, np.ndarray]:
    """Optional safeguard keeping |theta_z| of z-bearing bases below ``z_limit``."""
    grad = np.zeros_like(shape.controls)
    index = shape.basis.index("theta_z")
    if z_limit is None or index is None or weight <= 0.0:
        return 0.0, grad
    theta_z = shape.controls[:, index]
    excess = np.maximum(0.0, np.abs(theta_z) - z_limit)
    n = shape.n_digits
    grad[:, index] = 2.0 * weight * excess * np.sign(theta_z) / n
    return weight * float(np.dot(excess, excess)) / n, grad


def fold_negative_amplitudes(shape: PulseShape) -> PulseShape:
    """Rewrite negative polar amplitudes as (|amp|, alpha + pi); same rotations."""
    index = shape.basis.index("theta_xy")
    if index is None:
        return shape
    controls = np.array(shape.controls)
    negative = controls[:, index] < 0.0
    if not np.any(negative):
        return shape
    controls[negative, index] = -controls[negative, index]
    controls[negative, index + 1] = controls[negative, index + 1] + np.pi
    return shape.with_controls(controls)


def _within(spec: ConstraintSpec, amplitude: np.ndarray) -> bool:
    if isinstance(spec, AmplitudeLimit):
        return bool(np.all(amplitude <= spec.per_digit(amplitude.size) * (1.0 + _FEASIBILITY_RTOL)))
    measure, limit, _ = _measure(spec, amplitude)
    return measure <= limit * (1.0 + _FEASIBILITY_RTOL)


def is_feasible(spec: Optional[Constraint], shape: PulseShape) -> bool:
    """Whether the physical amplitudes of ``shape`` respect every limit in ``spec``."""
    limits = constraint_limits(spec)
    if not limits:
        return True
    clamp = apply_constraint(spec, shape)
    amplitude = np.abs(clamp.reduced) if clamp is not None else _transverse_amplitude(shape)[0]
    return all(_within(limit, amplitude) for limit in limits)


def _export_factor(spec: ConstraintSpec, amplitude: np.ndarray) -> np.ndarray:
    """Per-digit scale that brings ``amplitude`` inside one limit; ones where it already is."""
    n = amplitude.size
    if _within(spec, amplitude):
        return np.ones(n)
    if isinstance(spec, AmplitudeLimit):
        cap = spec.per_digit(n)
        over = amplitude > cap
        logger.warning("Clipping %d digits to the amplitude limit at export", int(np.sum(over)))
        return np.where(over, cap / np.where(over, amplitude, 1.0) * (1.0 - 1e-12), 1.0)
    measure, limit, _ = _measure(spec, amplitude)
    factor = np.sqrt(limit / measure) * (1.0 - 1e-12)
    logger.warning("Scaling shape by %.6f to meet the %s limit at export", factor, type(spec).__name__)
    return np.full(n, factor)


def sanitize_for_export(spec: Optional[Constraint], shape: PulseShape) -> PulseShape:
    """Guarantee an exported shape satisfies ``spec``; clip only where needed.

    Amplitude limits are applied before power and energy limits; both only
    shrink amplitudes, so a later step never undoes an earlier one.
    """
    shape = fold_negative_amplitudes(shape)
    limits = constraint_limits(spec)
    if not limits or shape.basis.is_reduced or shape.basis.theta_xy_const is not None:
        return shape
    if is_feasible(spec, shape):
        return shape
    amplitude, _ = _transverse_amplitude(shape)
    factor = np.ones(shape.n_digits)
    for limit in sorted(limits, key=lambda item: not isinstance(item, AmplitudeLimit)):
        factor = factor * _export_factor(limit, amplitude * factor)
    controls = np.array(shape.controls)
    controls[:, 0] *= factor
    if shape.basis.is_cartesian:
        controls[:, 1] *= factor
    return shape.with_controls(controls)
