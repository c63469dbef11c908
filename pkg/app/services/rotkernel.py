"""Rotation matrices, quaternions and cached forward/backward propagation.

Rotations follow the Bloch convention R = exp(theta_x Kx + theta_y Ky + theta_z Kz)
with Kx = [e_x]_x etc., i.e. R = cos(t) I + (1 - cos t) n n^T + sin(t) [n]_x.
A 90 degree x pulse takes z to -y, free precession turns x towards y.

All kernels are written in terms of the rotation vector v = theta * n and the
even functions

    h(t)  = sin(t) / t              g(t)  = (1 - cos t) / t^2
    h'(t)/t, g'(t)/t                s(t)  = sin(t/2) / t,  s'(t)/t

which stay finite at t = 0; below SERIES_LIMIT their Taylor series are used.
Every array argument may carry leading grid axes; propagation runs along the
digit axis, which is the last axis of the RotationParams fields.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from app.core.errors import ContractViolation
from app.models.problem import Constraint, PPTarget, SaturationTarget
from app.models.pulse import PulseShape
from app.models.rotation import Quaternion, Rotation3, RotationParams
from app.services.constraints import ClampState
from app.services.controls import shape_rotation_params

logger = logging.getLogger(__name__)

SERIES_LIMIT = 0.05

IDENTITY_QUATERNION = np.array([0.0, 0.0, 0.0, 1.0])
Z_AXIS = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class AngleTerms:
    """Trigonometric factors of one or many rotation angles."""
    theta: np.ndarray
    cos: np.ndarray
    h: np.ndarray  # sin(t)/t
    g: np.ndarray  # (1 - cos t)/t^2
    dh: np.ndarray  # h'(t)/t
    dg: np.ndarray  # g'(t)/t
    cos_half: np.ndarray
    s: np.ndarray  # sin(t/2)/t
    ds: np.ndarray  # s'(t)/t


def angle_terms(theta) -> AngleTerms:
    theta = np.asarray(theta, dtype=np.float64)
    t2 = theta * theta
    series = theta < SERIES_LIMIT
    t = np.where(series, 1.0, theta)
    sin, cos = np.sin(theta), np.cos(theta)
    sin_half, cos_half = np.sin(0.5 * theta), np.cos(0.5 * theta)

    h = np.where(series, 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0))), sin / t)
    g = np.where(series, 0.5 - t2 / 24.0 * (1.0 - t2 / 30.0 * (1.0 - t2 / 56.0 * (1.0 - t2 / 90.0))), 2.0 * sin_half * sin_half / (t * t))
    dh = np.where(
        series,
        -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0 + t2 ** 3 / 45360.0,
        (theta * cos - sin) / t ** 3,
    )
    dg = np.where(
        series,
        -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0 + t2 ** 3 / 453600.0,
        (theta * sin - 4.0 * sin_half * sin_half) / t ** 4,
    )
    s = np.where(
        series,
        0.5 - t2 / 48.0 + t2 * t2 / 3840.0 - t2 ** 3 / 645120.0,
        sin_half / t,
    )
    ds = np.where(
        series,
        -1.0 / 24.0 + t2 / 960.0 - t2 * t2 / 107520.0 + t2 ** 3 / 23224320.0,
        (0.5 * theta * cos_half - sin_half) / t ** 3,
    )
    return AngleTerms(theta, cos, h, g, dh, dg, cos_half, s, ds)


def skew(v: np.ndarray) -> np.ndarray:
    """[v]_x for v of shape (..., 3)."""
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2] = -v[..., 2], v[..., 1]
    out[..., 1, 0], out[..., 1, 2] = v[..., 2], -v[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -v[..., 1], v[..., 0]
    return out


# Kx, Ky, Kz: antisymmetric SO(3) generators, R = exp(theta_x Kx + theta_y Ky + theta_z Kz)
GENERATORS = skew(np.eye(3))


def rotation_from_params(p: RotationParams, terms: Optional[AngleTerms] = None) -> Rotation3:
    """Rodrigues rotation matrix, shape (..., 3, 3)."""
    terms = terms or angle_terms(p.theta)
    v = p.vector
    rotation = terms.g[..., None, None] * (v[..., :, None] * v[..., None, :]) + terms.h[..., None, None] * skew(v)
    rotation += terms.cos[..., None, None] * np.eye(3)
    return rotation


def quaternion_from_params(p: RotationParams, terms: Optional[AngleTerms] = None) -> Quaternion:
    """(n sin(t/2), cos(t/2)), shape (..., 4)."""
    terms = terms or angle_terms(p.theta)
    return np.concatenate([terms.s[..., None] * p.vector, terms.cos_half[..., None]], axis=-1)


def quaternion_multiply(q2: Quaternion, q1: Quaternion) -> Quaternion:
    """Hamilton product q2 * q1: apply q1 first, then q2."""
    q2 = np.asarray(q2, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    a2, b2, c2, d2 = q2[..., 0], q2[..., 1], q2[..., 2], q2[..., 3]
    a1, b1, c1, d1 = q1[..., 0], q1[..., 1], q1[..., 2], q1[..., 3]
    return np.stack(
        [
            d2 * a1 - c2 * b1 + b2 * c1 + a2 * d1,
            c2 * a1 + d2 * b1 - a2 * c1 + b2 * d1,
            -b2 * a1 + a2 * b1 + d2 * c1 + c2 * d1,
            -a2 * a1 - b2 * b1 - c2 * c1 + d2 * d1,
        ],
        axis=-1,
    )


def quaternion_conjugate(q: Quaternion) -> Quaternion:
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([-1.0, -1.0, -1.0, 1.0])


def rotation_from_quaternion(q: Quaternion) -> Rotation3:
    """Rotation matrix induced by a unit quaternion."""
    q = np.asarray(q, dtype=np.float64)
    v, d = q[..., :3], q[..., 3]
    rotation = 2.0 * (v[..., :, None] * v[..., None, :]) + 2.0 * d[..., None, None] * skew(v)
    rotation += (d * d - np.sum(v * v, axis=-1))[..., None, None] * np.eye(3)
    return rotation


@dataclass(frozen=True, eq=False)
class PropagationCachePP:
    """Forward states and backward co-states of a point-to-point propagation.

    ``states[..., j, :]`` is rho_j (j = 0..N); ``costates[..., j, :]`` is
    lambda_j = R_{j+1}^T ... R_N^T lambda_f, so costates[..., N, :] = lambda_f.
    """
    params: RotationParams
    terms: AngleTerms
    rotations: np.ndarray
    states: np.ndarray
    costates: np.ndarray
    lambda_f: np.ndarray


@dataclass(frozen=True, eq=False)
class PropagationCacheUR:
    """Prefix and suffix quaternion products of a universal-rotation propagation.

    ``prefix[..., j, :]`` is X_j = Q_j ... Q_1 (X_0 = identity) and
    ``suffix[..., j, :]`` is P_j = Q_{j+1}* ... Q_N* q_f (P_N = q_f), so
    dot(P_j, X_j) is the same number for every j.
    """
    params: RotationParams
    terms: AngleTerms
    quaternions: np.ndarray
    prefix: np.ndarray
    suffix: np.ndarray
    q_f: np.ndarray


def _apply(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    return np.matmul(matrix, vector[..., None])[..., 0]


def propagate_pp(
    shape: PulseShape,
    target: Union[PPTarget, SaturationTarget],
    omega_off=0.0,
    b1_scale=1.0,
    *,
    constraint: Optional[Constraint] = None,
    clamp: Optional[ClampState] = None,
) -> PropagationCachePP:
    """Propagate rho0 forward and the target co-state backward through ``shape``.

    A saturation target propagates the z axis as its co-state, so cost_pp
    returns the final z magnetization.
    """
    if isinstance(target, SaturationTarget):
        lambda_f = Z_AXIS
    elif isinstance(target, PPTarget):
        lambda_f = target.lambda_f
    else:
        raise ContractViolation("propagate_pp needs a point-to-point or saturation target")
    params = shape_rotation_params(shape, omega_off, b1_scale, constraint=constraint, clamp=clamp)
    terms = angle_terms(params.theta)
    rotations = rotation_from_params(params, terms)

    grid_shape = params.shape[:-1]
    n = params.shape[-1]
    states = np.empty(grid_shape + (n + 1, 3))
    costates = np.empty(grid_shape + (n + 1, 3))
    states[..., 0, :] = target.rho0
    costates[..., n, :] = lambda_f
    for j in range(n):
        states[..., j + 1, :] = _apply(rotations[..., j, :, :], states[..., j, :])
    transposed = np.swapaxes(rotations, -1, -2)
    for j in range(n, 0, -1):
        costates[..., j - 1, :] = _apply(transposed[..., j - 1, :, :], costates[..., j, :])
    return PropagationCachePP(params, terms, rotations, states, costates, np.asarray(lambda_f))


def propagate_ur(
    shape: PulseShape,
    omega_off=0.0,
    b1_scale=1.0,
    q_f=IDENTITY_QUATERNION,
    *,
    constraint: Optional[Constraint] = None,
    clamp: Optional[ClampState] = None,
) -> PropagationCacheUR:
    q_f = np.asarray(q_f, dtype=np.float64)
    params = shape_rotation_params(shape, omega_off, b1_scale, constraint=constraint, clamp=clamp)
    terms = angle_terms(params.theta)
    quaternions = quaternion_from_params(params, terms)

    grid_shape = params.shape[:-1]
    n = params.shape[-1]
    prefix = np.empty(grid_shape + (n + 1, 4))
    suffix = np.empty(grid_shape + (n + 1, 4))
    prefix[..., 0, :] = IDENTITY_QUATERNION
    suffix[..., n, :] = q_f
    for j in range(n):
        prefix[..., j + 1, :] = quaternion_multiply(quaternions[..., j, :], prefix[..., j, :])
    conjugates = quaternion_conjugate(quaternions)
    for j in range(n, 0, -1):
        suffix[..., j - 1, :] = quaternion_multiply(conjugates[..., j - 1, :], suffix[..., j, :])
    return PropagationCacheUR(params, terms, quaternions, prefix, suffix, q_f)


def cost_pp(cache: PropagationCachePP) -> np.ndarray:
    """dot(lambda_f, rho_N) per grid point."""
    return np.sum(cache.lambda_f * cache.states[..., -1, :], axis=-1)


def cost_ur(cache: PropagationCacheUR) -> np.ndarray:
    """Signed 4-vector overlap dot(q_f, X_N) per grid point."""
    return np.sum(cache.q_f * cache.prefix[..., -1, :], axis=-1)
