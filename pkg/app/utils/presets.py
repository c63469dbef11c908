"""Named Bloch states, UR target quaternions and ready-made run configurations."""
import copy
from typing import Any, Dict, Sequence, Union

import numpy as np

from app.core.errors import ContractViolation

NAMED_STATES: Dict[str, tuple] = {
    "x": (1.0, 0.0, 0.0),
    "-x": (-1.0, 0.0, 0.0),
    "y": (0.0, 1.0, 0.0),
    "-y": (0.0, -1.0, 0.0),
    "z": (0.0, 0.0, 1.0),
    "-z": (0.0, 0.0, -1.0),
}


def named_state(value: Union[str, Sequence[float]]) -> np.ndarray:
    """Bloch vector from an axis name like "-y" or from explicit components."""
    if isinstance(value, str):
        key = value.strip().lower().replace("+", "")
        if key not in NAMED_STATES:
            raise ContractViolation(f"unknown state {value!r}; expected one of {', '.join(NAMED_STATES)}")
        return np.array(NAMED_STATES[key])
    return np.asarray(value, dtype=np.float64)


def ur_quaternion(axis: Union[str, Sequence[float]], angle_rad: float) -> np.ndarray:
    """Unit quaternion (a, b, c, d) of a rotation by ``angle_rad`` about ``axis``."""
    n = named_state(axis)
    norm = float(np.linalg.norm(n))
    if norm == 0.0:
        raise ContractViolation("rotation axis must be non-zero")
    n = n / norm
    half = 0.5 * float(angle_rad)
    return np.append(np.sin(half) * n, np.cos(half))


def _excitation_desk(target_state: str) -> Dict[str, Any]:
    return {
        "name": f"n15_{'excitation' if target_state == '-y' else 'inversion'}",
        "pulse": {"basis": "cartesian_xy", "n_digits": 10, "dt_us": 50.0},
        "grid": {"n_off": 11, "bandwidth_hz": 6000.0, "n_rf": 3, "b1_tolerance": 0.1},
        "target": {"type": "pp", "rho0": "z", "lambda_f": target_state},
        "constraint": {"type": "amplitude", "max_amplitude_hz": 5000.0},
        "optimizer": {"max_iterations": 2000, "seed": 1},
        "starts": 5,
    }


SCENARIOS: Dict[str, Dict[str, Any]] = {
    # 15N band, 0.5 ms, 5 kHz cap
    "n15_excitation": _excitation_desk("-y"),
    "n15_inversion": _excitation_desk("-z"),
    # 13C constant-amplitude excitation on a reduced grid
    "c13_excitation_phase": {
        "name": "c13_excitation_phase",
        "pulse": {"basis": "phase_only", "n_digits": 100, "dt_us": 5.0, "amplitude_hz": 10000.0},
        "grid": {"n_off": 31, "bandwidth_hz": 40000.0, "n_rf": 3, "b1_tolerance": 0.05},
        "target": {"type": "pp", "rho0": "z", "lambda_f": "-y"},
        "optimizer": {"max_iterations": 3000, "seed": 1},
        "starts": 5,
    },
    # 13C excitation with free x/y controls under a 20 kHz cap and a 10 kHz rms power limit
    "c13_excitation_xy": {
        "name": "c13_excitation_xy",
        "pulse": {"basis": "cartesian_xy", "n_digits": 100, "dt_us": 5.0},
        "grid": {"n_off": 31, "bandwidth_hz": 40000.0, "n_rf": 3, "b1_tolerance": 0.05},
        "target": {"type": "pp", "rho0": "z", "lambda_f": "-y"},
        "constraint": [
            {"type": "amplitude", "max_amplitude_hz": 20000.0},
            {"type": "power", "rms_amplitude_hz": 10000.0},
        ],
        "optimizer": {"max_iterations": 3000, "seed": 1},
        "starts": 5,
    },
    # 19F band, 120 us constant-amplitude saturation without B1 compensation
    "f19_saturation": {
        "name": "f19_saturation",
        "pulse": {"basis": "phase_only", "n_digits": 60, "dt_us": 2.0, "amplitude_hz": 10000.0},
        "grid": {"n_off": 31, "bandwidth_hz": 120000.0, "n_rf": 1, "b1_tolerance": 0.0},
        "target": {"type": "saturation", "rho0": "z"},
        "optimizer": {"max_iterations": 1000, "seed": 1},
        "starts": 3,
    },
    "ur90_xy": {
        "name": "ur90_xy",
        "pulse": {"basis": "cartesian_xy", "n_digits": 40, "dt_us": 5.0},
        "grid": {"n_off": 11, "bandwidth_hz": 10000.0, "n_rf": 3, "b1_tolerance": 0.05},
        "target": {"type": "ur", "axis": "x", "angle_deg": 90.0},
        "constraint": {"type": "amplitude", "max_amplitude_hz": 20000.0},
        "optimizer": {"max_iterations": 2000, "seed": 1},
        "starts": 3,
    },
}


def scenario(name: str) -> Dict[str, Any]:
    """A fresh copy of the named run configuration document."""
    try:
        return copy.deepcopy(SCENARIOS[name])
    except KeyError:
        raise ContractViolation(f"unknown scenario {name!r}; known: {', '.join(sorted(SCENARIOS))}") from None
