"""Pulse shape domain types.

A shape is a sequence of N piecewise-constant digits. Each digit carries the
controls of one :class:`ControlBasis` and its own duration ``dt`` (seconds).
Controls are stored as dimensionless rotation angles (radians per digit),
never as frequencies.

Column order per basis:

- ``cartesian_xy``: theta_x, theta_y
- ``cartesian_xyz``: theta_x, theta_y, theta_z
- ``polar_amp_phase`` / ``polar_reduced_amp_phase``: theta_xy, alpha
- ``polar_amp_phase_z`` / ``polar_reduced_amp_phase_z``: theta_xy, alpha, theta_z
- ``phase_only``: alpha (amplitude fixed at ``theta_xy_const``)

For reduced bases the stored amplitude is the auxiliary (pseudo) control; the
physical amplitude is its tanh image under the attached constraint.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from app.core.errors import ContractViolation


class BasisKind(str, Enum):
    CARTESIAN_XY = "cartesian_xy"
    CARTESIAN_XYZ = "cartesian_xyz"
    POLAR_AMP_PHASE = "polar_amp_phase"
    POLAR_AMP_PHASE_Z = "polar_amp_phase_z"
    POLAR_REDUCED_AMP_PHASE = "polar_reduced_amp_phase"
    POLAR_REDUCED_AMP_PHASE_Z = "polar_reduced_amp_phase_z"
    PHASE_ONLY = "phase_only"


_LABELS: dict[BasisKind, tuple[str, ...]] = {
    BasisKind.CARTESIAN_XY: ("theta_x", "theta_y"),
    BasisKind.CARTESIAN_XYZ: ("theta_x", "theta_y", "theta_z"),
    BasisKind.POLAR_AMP_PHASE: ("theta_xy", "alpha"),
    BasisKind.POLAR_AMP_PHASE_Z: ("theta_xy", "alpha", "theta_z"),
    BasisKind.POLAR_REDUCED_AMP_PHASE: ("theta_xy", "alpha"),
    BasisKind.POLAR_REDUCED_AMP_PHASE_Z: ("theta_xy", "alpha", "theta_z"),
    BasisKind.PHASE_ONLY: ("alpha",),
}


@dataclass(frozen=True)
class ControlBasis:
    """Control parametrization shared by every digit of a shape."""
    kind: BasisKind
    theta_xy_const: Optional[float] = None  # phase_only amplitude, radians per digit

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if self.kind is BasisKind.PHASE_ONLY:
            if self.theta_xy_const is None or not float(self.theta_xy_const) > 0.0:
                raise ContractViolation("phase_only basis requires theta_xy_const > 0")
            object.__setattr__(self, "theta_xy_const", float(self.theta_xy_const))
        elif self.theta_xy_const is not None:
            raise ContractViolation(f"theta_xy_const is only valid for phase_only, not {self.kind.value}")

    @classmethod
    def from_name(cls, name: str, theta_xy_const: Optional[float] = None) -> "ControlBasis":
        try:
            kind = BasisKind(name)
        except ValueError as exc:
            raise ContractViolation(f"unknown control basis: {name!r}") from exc
        return cls(kind, theta_xy_const)

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def labels(self) -> tuple[str, ...]:
        return _LABELS[self.kind]

    @property
    def arity(self) -> int:
        return len(self.labels)

    @property
    def is_cartesian(self) -> bool:
        return self.kind in (BasisKind.CARTESIAN_XY, BasisKind.CARTESIAN_XYZ)

    @property
    def is_polar(self) -> bool:
        return not self.is_cartesian

    @property
    def is_reduced(self) -> bool:
        return self.kind in (BasisKind.POLAR_REDUCED_AMP_PHASE, BasisKind.POLAR_REDUCED_AMP_PHASE_Z)

    @property
    def has_z(self) -> bool:
        return "theta_z" in self.labels

    def index(self, label: str) -> Optional[int]:
        """Column of ``label`` in the stored controls, or None if absent."""
        return self.labels.index(label) if label in self.labels else None


@dataclass(frozen=True)
class Digit:
    """One piecewise-constant pulse element."""
    controls: tuple[float, ...]
    dt: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "controls", tuple(float(c) for c in self.controls))
        if not float(self.dt) > 0.0:
            raise ContractViolation(f"digit duration must be positive, got {self.dt}")
        object.__setattr__(self, "dt", float(self.dt))

    def check_basis(self, basis: ControlBasis) -> None:
        if len(self.controls) != basis.arity:
            raise ContractViolation(
                f"digit has {len(self.controls)} controls but basis {basis.name} needs {basis.arity}"
            )


@dataclass(frozen=True, eq=False)
class PulseShape:
    """Immutable pulse: controls of shape (N, arity) and per-digit durations (N,)."""
    controls: np.ndarray
    dt: np.ndarray
    basis: ControlBasis

    def __post_init__(self) -> None:
        controls = np.array(self.controls, dtype=np.float64)
        if controls.ndim == 1 and self.basis.arity == 1:
            controls = controls[:, None]
        if controls.ndim != 2 or controls.shape[0] < 1:
            raise ContractViolation("a pulse shape needs at least one digit")
        if controls.shape[1] != self.basis.arity:
            raise ContractViolation(
                f"controls have {controls.shape[1]} columns but basis {self.basis.name} needs {self.basis.arity}"
            )
        dt = np.broadcast_to(np.asarray(self.dt, dtype=np.float64), (controls.shape[0],)).copy()
        if not np.all(dt > 0.0):
            raise ContractViolation("digit durations must be positive")
        if not np.all(np.isfinite(controls)):
            raise ContractViolation("controls must be finite")
        controls.setflags(write=False)
        dt.setflags(write=False)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "dt", dt)

    @property
    def n_digits(self) -> int:
        return self.controls.shape[0]

    @property
    def digits(self) -> tuple[Digit, ...]:
        return tuple(Digit(tuple(row), dt) for row, dt in zip(self.controls, self.dt))

    @property
    def duration(self) -> float:
        return float(np.sum(self.dt))

    def column(self, label: str) -> np.ndarray:
        index = self.basis.index(label)
        if index is None:
            raise ContractViolation(f"basis {self.basis.name} has no {label} control")
        return self.controls[:, index]

    def with_controls(self, controls: Iterable) -> "PulseShape":
        return PulseShape(np.asarray(controls, dtype=np.float64).reshape(self.controls.shape), self.dt, self.basis)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PulseShape):
            return NotImplemented
        return (
            self.basis == other.basis
            and np.array_equal(self.controls, other.controls)
            and np.array_equal(self.dt, other.dt)
        )

    __hash__ = None
