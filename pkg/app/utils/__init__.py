"""Utility functions and helpers."""
from .presets import named_state, scenario, ur_quaternion
from .units import hz_to_theta, theta_to_hz

__all__ = ["hz_to_theta", "named_state", "scenario", "theta_to_hz", "ur_quaternion"]
