"""Rotation parameter and propagator types.

Every field is a numpy array so a single :class:`RotationParams` can describe
one digit, a whole shape (trailing axis N) or a shape evaluated on a grid of
offsets and B1 scales (leading grid axes). Rotation matrices are arrays of
shape (..., 3, 3); quaternions are arrays of shape (..., 4) ordered
(a, b, c, d) with d the scalar part.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

SMALL_ANGLE = 1e-9

# Type aliases for readability; both are plain float64 arrays.
Rotation3 = np.ndarray
Quaternion = np.ndarray


@dataclass(frozen=True, eq=False)
class RotationParams:
    """Per-digit rotation angles and axis.

    ``theta_xy`` keeps the sign of the amplitude control for polar bases (a
    negative amplitude is a rotation about the axis at alpha + pi), so that
    ``theta_x == cos(alpha) * theta_xy`` holds for every basis.
    """
    theta_x: np.ndarray
    theta_y: np.ndarray
    theta_z: np.ndarray
    theta: np.ndarray
    n_x: np.ndarray
    n_y: np.ndarray
    n_z: np.ndarray
    theta_xy: np.ndarray
    alpha: np.ndarray

    @classmethod
    def _build(cls, theta_x, theta_y, theta_z, theta_xy, alpha) -> "RotationParams":
        theta_x, theta_y, theta_z, theta_xy, alpha = np.broadcast_arrays(
            *(np.asarray(a, dtype=np.float64) for a in (theta_x, theta_y, theta_z, theta_xy, alpha))
        )
        theta = np.sqrt(theta_x * theta_x + theta_y * theta_y + theta_z * theta_z)
        small = theta <= SMALL_ANGLE
        safe = np.where(small, 1.0, theta)
        n_x = np.where(small, 0.0, theta_x / safe)
        n_y = np.where(small, 0.0, theta_y / safe)
        n_z = np.where(small, 1.0, theta_z / safe)
        return cls(theta_x, theta_y, theta_z, theta, n_x, n_y, n_z, theta_xy, alpha)

    @classmethod
    def from_cartesian(cls, theta_x: Any, theta_y: Any, theta_z: Any = 0.0) -> "RotationParams":
        theta_x = np.asarray(theta_x, dtype=np.float64)
        theta_y = np.asarray(theta_y, dtype=np.float64)
        return cls._build(theta_x, theta_y, theta_z, np.hypot(theta_x, theta_y), np.arctan2(theta_y, theta_x))

    @classmethod
    def from_polar(cls, theta_xy: Any, alpha: Any, theta_z: Any = 0.0) -> "RotationParams":
        theta_xy = np.asarray(theta_xy, dtype=np.float64)
        alpha = np.asarray(alpha, dtype=np.float64)
        return cls._build(np.cos(alpha) * theta_xy, np.sin(alpha) * theta_xy, theta_z, theta_xy, alpha)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.theta.shape

    @property
    def vector(self) -> np.ndarray:
        """Rotation vector theta * n, shape (..., 3)."""
        return np.stack([self.theta_x, self.theta_y, self.theta_z], axis=-1)

    @property
    def axis(self) -> np.ndarray:
        return np.stack([self.n_x, self.n_y, self.n_z], axis=-1)

    @property
    def n_xy(self) -> np.ndarray:
        """Auxiliary ratio theta_xy / theta (0 below the small-angle threshold)."""
        return np.where(self.theta <= SMALL_ANGLE, 0.0, self.theta_xy / np.where(self.theta <= SMALL_ANGLE, 1.0, self.theta))

    def __getitem__(self, index) -> "RotationParams":
        return RotationParams(*(getattr(self, name)[index] for name in self.__dataclass_fields__))


@dataclass(frozen=True, eq=False)
class RotationDerivatives:
    """Derivatives of one propagator representation with respect to named controls.

    ``values`` has the control axis just before the representation axes:
    (..., k, 3, 3) for rotation matrices, (..., k, 4) for quaternions.
    """
    labels: tuple[str, ...]
    values: np.ndarray

    @property
    def is_quaternion(self) -> bool:
        return self.values.shape[-1] == 4

    def __getitem__(self, label: str) -> np.ndarray:
        index = self.labels.index(label)
        if self.is_quaternion:
            return self.values[..., index, :]
        return self.values[..., index, :, :]
