"""Conversions from stored controls to physical per-digit rotation parameters.

theta_z always carries the offset term, theta_z = (omega_z + omega_off) * dt,
and the B1 scale multiplies the transverse amplitude only. ``omega_off`` and
``b1_scale`` may be arrays; their shapes become leading axes of the result
(one entry per grid point) in front of the digit axis.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from app.core.errors import ContractViolation
from app.models.problem import AmplitudeLimit, Constraint
from app.models.pulse import BasisKind, ControlBasis, Digit, PulseShape
from app.models.rotation import RotationParams
from app.services.constraints import ClampState, apply_constraint

logger = logging.getLogger(__name__)


def physical_amplitude(
    shape: PulseShape,
    constraint: Optional[Constraint] = None,
    clamp: Optional[ClampState] = None,
) -> np.ndarray:
    """Signed transverse amplitude per digit for polar bases (after any clamp)."""
    basis = shape.basis
    if basis.is_cartesian:
        raise ContractViolation("physical_amplitude is defined for polar bases")
    if basis.theta_xy_const is not None:
        return np.full(shape.n_digits, basis.theta_xy_const)
    if basis.is_reduced:
        if clamp is None:
            clamp = apply_constraint(constraint, shape)
        return clamp.reduced
    return np.asarray(shape.column("theta_xy"))


def shape_rotation_params(
    shape: PulseShape,
    omega_off=0.0,
    b1_scale=1.0,
    *,
    constraint: Optional[Constraint] = None,
    clamp: Optional[ClampState] = None,
) -> RotationParams:
    """RotationParams of every digit, shape (*grid, N)."""
    omega = np.asarray(omega_off, dtype=np.float64)[..., None]
    scale = np.asarray(b1_scale, dtype=np.float64)[..., None]
    if np.any(scale <= 0.0):
        raise ContractViolation("b1_scale must be positive")
    basis = shape.basis
    controls = shape.controls
    z_index = basis.index("theta_z")
    theta_z = omega * shape.dt
    if z_index is not None:
        theta_z = controls[:, z_index] + theta_z
    if basis.is_cartesian:
        return RotationParams.from_cartesian(scale * controls[:, 0], scale * controls[:, 1], theta_z)
    amplitude = physical_amplitude(shape, constraint, clamp)
    phase = controls[:, basis.index("alpha")]
    return RotationParams.from_polar(scale * amplitude, phase, theta_z)


def digit_to_rotation_params(
    digit: Digit,
    basis: ControlBasis,
    omega_off: float = 0.0,
    b1_scale: float = 1.0,
    constraint: Optional[Constraint] = None,
) -> RotationParams:
    """Rotation parameters of a single digit."""
    digit.check_basis(basis)
    if basis.is_reduced and not isinstance(constraint, AmplitudeLimit):
        raise ContractViolation(
            "a single digit can only be clamped by an amplitude limit; power and energy act on whole shapes"
        )
    if isinstance(constraint, AmplitudeLimit) and constraint.theta_max.ndim != 0:
        raise ContractViolation("per-digit amplitude limits need the whole shape")
    shape = PulseShape(np.array([digit.controls]), np.array([digit.dt]), basis)
    return shape_rotation_params(shape, omega_off, b1_scale, constraint=constraint)[..., 0]


def amplitude_phase(shape: PulseShape, constraint: Optional[Constraint] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Physical (amplitude >= 0, phase) per digit with negative amplitudes folded."""
    if shape.basis.is_cartesian:
        tx, ty = shape.controls[:, 0], shape.controls[:, 1]
        return np.hypot(tx, ty), np.arctan2(ty, tx)
    amplitude = physical_amplitude(shape, constraint)
    phase = np.array(shape.column("alpha"))
    negative = amplitude < 0.0
    phase[negative] += np.pi
    return np.abs(amplitude), phase


def cartesian_to_polar(shape: PulseShape) -> PulseShape:
    """CartesianXY(Z) -> PolarAmpPhase(Z) with identical rotations."""
    kind = {
        BasisKind.CARTESIAN_XY: BasisKind.POLAR_AMP_PHASE,
        BasisKind.CARTESIAN_XYZ: BasisKind.POLAR_AMP_PHASE_Z,
    }.get(shape.basis.kind)
    if kind is None:
        raise ContractViolation(f"{shape.basis.name} is not a Cartesian basis")
    tx, ty = shape.controls[:, 0], shape.controls[:, 1]
    columns = [np.hypot(tx, ty), np.arctan2(ty, tx)] + [shape.controls[:, 2]] * shape.basis.has_z
    return PulseShape(np.stack(columns, axis=1), shape.dt, ControlBasis(kind))


def polar_to_cartesian(shape: PulseShape) -> PulseShape:
    """PolarAmpPhase(Z) -> CartesianXY(Z) with identical rotations."""
    kind = {
        BasisKind.POLAR_AMP_PHASE: BasisKind.CARTESIAN_XY,
        BasisKind.POLAR_AMP_PHASE_Z: BasisKind.CARTESIAN_XYZ,
    }.get(shape.basis.kind)
    if kind is None:
        raise ContractViolation(f"{shape.basis.name} is not a plain polar basis")
    amplitude, alpha = shape.controls[:, 0], shape.controls[:, 1]
    columns = [np.cos(alpha) * amplitude, np.sin(alpha) * amplitude] + [shape.controls[:, 2]] * shape.basis.has_z
    return PulseShape(np.stack(columns, axis=1), shape.dt, ControlBasis(kind))
