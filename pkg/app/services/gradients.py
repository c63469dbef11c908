"""Exact derivative kernels and cost gradients.

Cartesian rotation derivatives come from differentiating the Rodrigues form
R = cos(t) I + g(t) v v^T + h(t) [v]_x with respect to v_k:

    dR/dv_k = -h v_k I + g'(t)/t v_k v v^T + g (e_k v^T + v e_k^T)
              + h'(t)/t v_k [v]_x + h K_k

which reproduces the closed-form entries (e.g. dR_xx/dtheta_x =
(n_x^3 - n_x)(sin t + 2 (cos t - 1)/t)) without any division by t or theta_xy.
Polar derivatives follow by the chain rule through theta_x = cos(a) theta_xy,
theta_y = sin(a) theta_xy:

    d/dalpha = -theta_y d/dtheta_x + theta_x d/dtheta_y
    d/dtheta_xy = cos(a) d/dtheta_x + sin(a) d/dtheta_y

The closed-form dR_zz/dtheta_xy is often written with a factor (n_xy^2 + n_z^2)
on its sine term; that factor is 1, so both forms agree.

Quaternion derivatives use Q = (s(t) v, cos(t/2)):

    dQ/dv_k = (s e_k + s'(t)/t v_k v, -s v_k / 2)
"""
import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from app.core.errors import ContractViolation
from app.models.problem import OptimizationProblem, PPTarget, SaturationTarget, Target, URTarget
from app.models.pulse import ControlBasis, PulseShape
from app.models.rotation import RotationDerivatives, RotationParams
from app.services.constraints import ClampState, apply_constraint
from app.services.rotkernel import (
    GENERATORS,
    AngleTerms,
    angle_terms,
    cost_pp,
    cost_ur,
    propagate_pp,
    propagate_ur,
    quaternion_conjugate,
    quaternion_multiply,
    skew,
)

logger = logging.getLogger(__name__)

CARTESIAN_LABELS = ("theta_x", "theta_y", "theta_z")
POLAR_LABELS = ("alpha", "theta_xy", "theta_z")

# Cap on grid points x digits evaluated in one vectorized block.
_BLOCK_SIZE = 200_000

_TRANSVERSE = {"theta_x", "theta_y", "theta_xy"}


def d_rotation_cartesian(
    p: RotationParams,
    terms: Optional[AngleTerms] = None,
    controls: Sequence[int] = (0, 1, 2),
) -> RotationDerivatives:
    """dR/dtheta_x, dR/dtheta_y, dR/dtheta_z, values shape (..., k, 3, 3).

    ``controls`` picks a subset of the three Cartesian axes by index.
    """
    terms = terms or angle_terms(p.theta)
    v = p.vector
    outer = v[..., :, None] * v[..., None, :]
    cross = skew(v)
    h = terms.h[..., None, None]
    g = terms.g[..., None, None]
    dh = terms.dh[..., None, None]
    dg = terms.dg[..., None, None]
    eye = np.eye(3)
    matrices = []
    for k in controls:
        vk = v[..., k][..., None, None]
        e_k = eye[k]
        sym = e_k[:, None] * v[..., None, :] + v[..., :, None] * e_k[None, :]
        matrices.append(-h * vk * eye + dg * vk * outer + g * sym + dh * vk * cross + h * GENERATORS[k])
    return RotationDerivatives(tuple(CARTESIAN_LABELS[k] for k in controls), np.stack(matrices, axis=-3))


def _polar_from_cartesian(p: RotationParams, values: np.ndarray, control_axis: int) -> np.ndarray:
    extra = (None,) * (-control_axis - 1)
    index = (Ellipsis,) + extra
    d_x = np.take(values, 0, axis=control_axis)
    d_y = np.take(values, 1, axis=control_axis)
    d_z = np.take(values, 2, axis=control_axis)
    tx, ty = p.theta_x[index], p.theta_y[index]
    ca, sa = np.cos(p.alpha)[index], np.sin(p.alpha)[index]
    return np.stack([-ty * d_x + tx * d_y, ca * d_x + sa * d_y, d_z], axis=control_axis)


def d_rotation_polar(p: RotationParams, terms: Optional[AngleTerms] = None) -> RotationDerivatives:
    """dR/dalpha, dR/dtheta_xy, dR/dtheta_z, values shape (..., 3, 3, 3).

    No term divides by theta_xy, so theta_xy -> 0 needs no special limit.
    """
    cartesian = d_rotation_cartesian(p, terms).values
    return RotationDerivatives(POLAR_LABELS, _polar_from_cartesian(p, cartesian, -3))


def d_quaternion(
    p: RotationParams,
    basis: Optional[ControlBasis] = None,
    terms: Optional[AngleTerms] = None,
    controls: Sequence[int] = (0, 1, 2),
) -> RotationDerivatives:
    """Quaternion derivatives, values shape (..., k, 4).

    Cartesian controls unless ``basis`` is polar, in which case the labels are
    (alpha, theta_xy, theta_z) and ``controls`` must be all three.
    """
    polar = basis is not None and not basis.is_cartesian
    if polar and tuple(controls) != (0, 1, 2):
        raise ContractViolation("polar quaternion derivatives need all three controls")
    controls = list(controls)
    terms = terms or angle_terms(p.theta)
    v = p.vector
    v_k = v[..., controls]
    s = terms.s[..., None, None]
    ds = terms.ds[..., None, None]
    vector_part = s * np.eye(3)[controls] + ds * (v_k[..., :, None] * v[..., None, :])
    scalar_part = -0.5 * terms.s[..., None] * v_k
    values = np.concatenate([vector_part, scalar_part[..., None]], axis=-1)
    if not polar:
        return RotationDerivatives(tuple(CARTESIAN_LABELS[k] for k in controls), values)
    return RotationDerivatives(POLAR_LABELS, _polar_from_cartesian(p, values, -2))


def _to_basis(grad: np.ndarray, labels: Tuple[str, ...], basis: ControlBasis, b1_scale) -> np.ndarray:
    """Kernel-control gradient (..., N, k) -> stored-control gradient (..., N, arity)."""
    scale = np.asarray(b1_scale, dtype=np.float64)[..., None]
    columns = []
    for label in basis.labels:
        column = grad[..., labels.index(label)]
        if label in _TRANSVERSE:
            column = scale * column
        columns.append(column)
    return np.stack(columns, axis=-1)


def gradient_pp(
    shape: PulseShape,
    target: Union[PPTarget, SaturationTarget],
    omega_off=0.0,
    b1_scale=1.0,
    *,
    constraint=None,
    clamp: Optional[ClampState] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """(Phi_PP, dPhi/dcontrols) per grid point; gradient shape (..., N, arity).

    For reduced bases the amplitude column is with respect to the reduced
    (physical) amplitude; see constraints.chain_gradient.
    """
    cache = propagate_pp(shape, target, omega_off, b1_scale, constraint=constraint, clamp=clamp)
    if shape.basis.is_cartesian:
        derivatives = d_rotation_cartesian(cache.params, cache.terms)
    else:
        derivatives = d_rotation_polar(cache.params, cache.terms)
    contracted = np.einsum(
        "...ni,...nkij,...nj->...nk",
        cache.costates[..., 1:, :],
        derivatives.values,
        cache.states[..., :-1, :],
    )
    return cost_pp(cache), _to_basis(contracted, derivatives.labels, shape.basis, b1_scale)


def gradient_saturation(
    shape: PulseShape,
    target: SaturationTarget,
    omega_off=0.0,
    b1_scale=1.0,
    *,
    constraint=None,
    clamp: Optional[ClampState] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """(1 - M_z^2, gradient); M_z and its gradient come from gradient_pp with lambda_f = z."""
    m_z, grad = gradient_pp(shape, target, omega_off, b1_scale, constraint=constraint, clamp=clamp)
    return 1.0 - m_z * m_z, -2.0 * m_z[..., None, None] * grad


def gradient_ur(
    shape: PulseShape,
    q_f,
    omega_off=0.0,
    b1_scale=1.0,
    *,
    constraint=None,
    clamp: Optional[ClampState] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """(signed Phi_UR, dPhi/dcontrols) per grid point."""
    cache = propagate_ur(shape, omega_off, b1_scale, q_f, constraint=constraint, clamp=clamp)
    derivatives = d_quaternion(cache.params, shape.basis, cache.terms)
    # dot(P_j, dQ_j X_{j-1}) = dot(P_j X_{j-1}*, dQ_j)
    weights = quaternion_multiply(cache.suffix[..., 1:, :], quaternion_conjugate(cache.prefix[..., :-1, :]))
    contracted = np.einsum("...ni,...nki->...nk", weights, derivatives.values)
    return cost_ur(cache), _to_basis(contracted, derivatives.labels, shape.basis, b1_scale)


def gradient_point(
    shape: PulseShape,
    target: Target,
    omega_off=0.0,
    b1_scale=1.0,
    *,
    constraint=None,
    clamp: Optional[ClampState] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Dispatch on the target type."""
    if isinstance(target, URTarget):
        return gradient_ur(shape, target.q_f, omega_off, b1_scale, constraint=constraint, clamp=clamp)
    if isinstance(target, SaturationTarget):
        return gradient_saturation(shape, target, omega_off, b1_scale, constraint=constraint, clamp=clamp)
    if isinstance(target, PPTarget):
        return gradient_pp(shape, target, omega_off, b1_scale, constraint=constraint, clamp=clamp)
    raise ContractViolation(f"unsupported target {type(target).__name__}")


def grid_axes(problem: OptimizationProblem) -> Tuple[np.ndarray, np.ndarray]:
    """(omega_off, b1_scale) arrays of shape (n_off, n_rf), offset-major."""
    omega = 2.0 * np.pi * problem.grid.offsets_hz()
    return np.broadcast_arrays(omega[:, None], problem.grid.b1_scales()[None, :])


def grid_average(
    problem: OptimizationProblem,
    shape: PulseShape,
    clamp: Optional[ClampState] = None,
) -> Tuple[float, np.ndarray]:
    """Mean cost and mean gradient over the problem's offset/B1 grid.

    Per-point values are collected into full (n_off, n_rf) arrays before a
    single mean, so the reduction order does not depend on block size. For UR
    targets the signed cost is averaged.
    """
    if clamp is None:
        clamp = apply_constraint(problem.constraint, shape)
    omega, scale = grid_axes(problem)
    n_off, n_rf = omega.shape
    costs = np.empty((n_off, n_rf))
    grads = np.empty((n_off, n_rf) + shape.controls.shape)
    block = max(1, _BLOCK_SIZE // (n_rf * shape.n_digits))
    for start in range(0, n_off, block):
        stop = min(n_off, start + block)
        costs[start:stop], grads[start:stop] = gradient_point(
            shape, problem.target, omega[start:stop], scale[start:stop], clamp=clamp
        )
    return float(np.mean(costs)), np.mean(grads, axis=(0, 1))
