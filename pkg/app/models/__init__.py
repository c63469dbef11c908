"""Domain types: pulse shapes, rotations, optimization problems."""
from .pulse import BasisKind, ControlBasis, Digit, PulseShape
from .rotation import SMALL_ANGLE, Quaternion, Rotation3, RotationDerivatives, RotationParams
from .problem import (
    AmplitudeLimit,
    ConstraintSpec,
    ControlUnits,
    EnergyLimit,
    GridSpec,
    InitStrategy,
    MultistartResult,
    OptimizationProblem,
    OptimizationResult,
    OptimizerOptions,
    PowerLimit,
    PPTarget,
    SaturationTarget,
    Target,
    TerminationReason,
    URTarget,
)

__all__ = [
    "AmplitudeLimit",
    "BasisKind",
    "ConstraintSpec",
    "ControlBasis",
    "ControlUnits",
    "Digit",
    "EnergyLimit",
    "GridSpec",
    "InitStrategy",
    "MultistartResult",
    "OptimizationProblem",
    "OptimizationResult",
    "OptimizerOptions",
    "PowerLimit",
    "PPTarget",
    "PulseShape",
    "Quaternion",
    "Rotation3",
    "RotationDerivatives",
    "RotationParams",
    "SMALL_ANGLE",
    "SaturationTarget",
    "Target",
    "TerminationReason",
    "URTarget",
]
