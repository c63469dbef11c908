"""Conversions between frequencies (Hz) and per-digit rotation angles (radians)."""
from typing import Union

import numpy as np

from app.models.pulse import PulseShape

ArrayLike = Union[float, np.ndarray]

TWO_PI = 2.0 * np.pi


def hz_to_theta(nu_hz: ArrayLike, dt_s: ArrayLike) -> ArrayLike:
    """Rotation angle of a field of ``nu_hz`` applied for ``dt_s``."""
    return TWO_PI * np.asarray(dt_s) * np.asarray(nu_hz)


def theta_to_hz(theta: ArrayLike, dt_s: ArrayLike) -> ArrayLike:
    return np.asarray(theta) / (TWO_PI * np.asarray(dt_s))


def power_limit_from_rms_hz(rms_hz: float, dt_s: float) -> float:
    """Mean per-digit theta_xy^2 allowed by an rms amplitude."""
    return float(hz_to_theta(rms_hz, dt_s)) ** 2


def energy_limit_from_hz(e_over_h: float, dt_s: float) -> float:
    """Sum of theta_xy^2 allowed by E/h = sum(nu_j^2 dt) in Hz^2 s."""
    return TWO_PI ** 2 * float(dt_s) * float(e_over_h)


def _amplitude_hz(shape: PulseShape, amplitude: np.ndarray) -> np.ndarray:
    return np.asarray(theta_to_hz(amplitude, shape.dt))


def average_power_hz2(shape: PulseShape, amplitude: np.ndarray) -> float:
    """Time-averaged nu^2 (Hz^2) of per-digit physical amplitudes in radians."""
    nu = _amplitude_hz(shape, amplitude)
    return float(np.sum(nu * nu * shape.dt) / shape.duration)


def energy_over_h(shape: PulseShape, amplitude: np.ndarray) -> float:
    """E/h = sum(nu_j^2 dt_j) in Hz^2 s; equals average_power_hz2 * duration."""
    nu = _amplitude_hz(shape, amplitude)
    return float(np.sum(nu * nu * shape.dt))
