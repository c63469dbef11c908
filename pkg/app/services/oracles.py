"""Independent reference derivatives: augmented matrix exponentials and finite differences.

The augmented exponential uses the block identity

    exp([[A, B], [0, A]]) = [[exp(A), d/de exp(A + e B)], [0, exp(A)]]

so the upper-right block is the exact directional derivative of the
propagator along the control generator B. The SO(3) generators are the real
antisymmetric K_x, K_y, K_z of the rotation kernel; the SU(2) generators are
the Pauli matrices divided by two. None of this applies to polar controls,
which have no generator; those are checked by finite differences only.
"""
import logging
from typing import Callable, Optional, Union

import numpy as np

from app.core.errors import ContractViolation
from app.models.rotation import RotationParams
from app.services.rotkernel import GENERATORS

logger = logging.getLogger(__name__)

KX, KY, KZ = GENERATORS

# sigma / 2
SPIN_HALF = 0.5 * np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ]
)

_CONTROLS = {"x": 0, "y": 1, "z": 2, "theta_x": 0, "theta_y": 1, "theta_z": 2}

# Pade-13 numerator coefficients and the one-norm bound below which it needs
# no scaling.
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def _control_index(control: Union[str, int]) -> int:
    if isinstance(control, (int, np.integer)) and 0 <= int(control) < 3:
        return int(control)
    try:
        return _CONTROLS[str(control)]
    except KeyError:
        raise ContractViolation(f"unknown Cartesian control {control!r}; expected x, y or z") from None


def _pade13(a: np.ndarray, eye: np.ndarray):
    b = _PADE13
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    return u, v


def expm(m: np.ndarray) -> np.ndarray:
    """Matrix exponential of (..., n, n) by scaling and squaring with a Pade-13 core.

    Each matrix in a batch gets its own scaling power.
    """
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ContractViolation(f"expm needs square matrices, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractViolation("expm needs finite entries")
    dtype = np.result_type(m.dtype, np.float64)
    m = m.astype(dtype)
    norm = np.max(np.sum(np.abs(m), axis=-2), axis=-1)
    ratio = np.where(norm > _THETA13, norm / _THETA13, 1.0)
    scale = np.maximum(0, np.ceil(np.log2(ratio))).astype(int)
    a = m * np.ldexp(1.0, -scale)[..., None, None]
    eye = np.eye(m.shape[-1], dtype=dtype)
    u, v = _pade13(a, eye)
    result = np.linalg.solve(v - u, v + u)
    for step in range(int(np.max(scale, initial=0))):
        squared = result @ result
        result = np.where(np.asarray(step < scale)[..., None, None], squared, result)
    return result


def augmented_gradient_rot(p: RotationParams, control: Union[str, int]) -> np.ndarray:
    """dR/dtheta_control from the upper-right block of a 6x6 exponential, shape (..., 3, 3)."""
    k = _control_index(control)
    generator = np.einsum("...k,kij->...ij", p.vector, GENERATORS)
    augmented = np.zeros(generator.shape[:-2] + (6, 6))
    augmented[..., :3, :3] = generator
    augmented[..., 3:, 3:] = generator
    augmented[..., :3, 3:] = GENERATORS[k]
    return expm(augmented)[..., :3, 3:]


def su2_propagator(p: RotationParams) -> np.ndarray:
    """U = exp(-i (theta_x s_x + theta_y s_y + theta_z s_z)), shape (..., 2, 2)."""
    return expm(-1.0j * np.einsum("...k,kij->...ij", p.vector, SPIN_HALF))


def augmented_gradient_su2(p: RotationParams, control: Union[str, int]) -> np.ndarray:
    """dU/dtheta_control from the upper-right block of a 4x4 exponential, shape (..., 2, 2)."""
    k = _control_index(control)
    hamiltonian = -1.0j * np.einsum("...k,kij->...ij", p.vector, SPIN_HALF)
    augmented = np.zeros(hamiltonian.shape[:-2] + (4, 4), dtype=np.complex128)
    augmented[..., :2, :2] = hamiltonian
    augmented[..., 2:, 2:] = hamiltonian
    augmented[..., :2, 2:] = -1.0j * SPIN_HALF[k]
    return expm(augmented)[..., :2, 2:]


def su2_to_quaternion(u: np.ndarray) -> np.ndarray:
    """(A, B, C, D) with U = D - i (A sigma_x + B sigma_y + C sigma_z).

    Linear, so it maps dU to the matching quaternion derivative as well.
    """
    u = np.asarray(u)
    u00, u01 = u[..., 0, 0], u[..., 0, 1]
    return np.stack([-u01.imag, -u01.real, -u00.imag, u00.real], axis=-1)


def finite_difference(f: Callable, x: float, h: Optional[float] = None):
    """Central difference (f(x + h) - f(x - h)) / 2h; f may return arrays."""
    if h is None:
        h = 1e-6 * max(1.0, abs(float(x)))
    if not h > 0.0:
        raise ContractViolation("finite-difference step must be positive")
    plus = np.asarray(f(x + h))
    minus = np.asarray(f(x - h))
    return (plus - minus) / (2.0 * h)


def finite_difference_gradient(func: Callable[[np.ndarray], float], x0: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function with respect to every entry of ``x0``."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros(x0.shape)
    x = x0.copy()
    for index in np.ndindex(x0.shape):
        step = rel_step * max(1.0, abs(x0[index]))
        x[index] = x0[index] + step
        plus = func(x)
        x[index] = x0[index] - step
        minus = func(x)
        x[index] = x0[index]
        grad[index] = (plus - minus) / (2.0 * step)
    logger.debug("Finite-difference gradient over %d entries", x0.size)
    return grad
