"""Run configuration document for the optimize and simulate subcommands."""
import json
from pathlib import Path
from typing import Annotated, Any, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.errors import ConfigValidationError, ContractViolation
from app.models.problem import (
    AmplitudeLimit,
    Constraint,
    ConstraintSpec,
    EnergyLimit,
    GridSpec,
    OptimizationProblem,
    OptimizerOptions,
    PowerLimit,
    PPTarget,
    SaturationTarget,
    Target,
    URTarget,
)
from app.models.pulse import BasisKind, ControlBasis, PulseShape
from app.utils.presets import named_state, ur_quaternion
from app.utils.units import energy_limit_from_hz, hz_to_theta, power_limit_from_rms_hz

StateValue = Union[str, List[float]]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PulseSection(_Section):
    basis: str
    n_digits: int = Field(ge=1)
    dt_us: float = Field(gt=0)
    amplitude_hz: Optional[float] = Field(default=None, gt=0)  # phase_only constant amplitude
    z_limit_hz: Optional[float] = Field(default=None, gt=0)

    @field_validator("basis")
    @classmethod
    def known_basis(cls, value: str) -> str:
        names = [kind.value for kind in BasisKind]
        if value not in names:
            raise ValueError(f"unknown basis {value!r}; expected one of {', '.join(names)}")
        return value

    @model_validator(mode="after")
    def amplitude_for_phase_only(self) -> "PulseSection":
        phase_only = self.basis == BasisKind.PHASE_ONLY.value
        if phase_only and self.amplitude_hz is None:
            raise ValueError("phase_only needs amplitude_hz")
        if not phase_only and self.amplitude_hz is not None:
            raise ValueError("amplitude_hz is only valid for phase_only")
        return self

    @property
    def dt_s(self) -> float:
        return self.dt_us * 1e-6


class GridSection(_Section):
    n_off: int = Field(default=1, ge=1)
    bandwidth_hz: float = Field(default=0.0, ge=0)
    n_rf: int = Field(default=1, ge=1)
    b1_tolerance: float = Field(default=0.0, ge=0, lt=1)


class PPTargetSection(_Section):
    type: Literal["pp"]
    rho0: StateValue = "z"
    lambda_f: StateValue


class URTargetSection(_Section):
    type: Literal["ur"]
    axis: Optional[StateValue] = None
    angle_deg: Optional[float] = None
    q_f: Optional[List[float]] = None

    @model_validator(mode="after")
    def one_description(self) -> "URTargetSection":
        by_angle = self.axis is not None and self.angle_deg is not None
        if by_angle == (self.q_f is not None):
            raise ValueError("give either axis and angle_deg, or q_f")
        return self


class SaturationTargetSection(_Section):
    type: Literal["saturation"]
    rho0: StateValue = "z"


TargetSection = Annotated[
    Union[PPTargetSection, URTargetSection, SaturationTargetSection], Field(discriminator="type")
]


class AmplitudeSection(_Section):
    type: Literal["amplitude"]
    max_amplitude_hz: float = Field(gt=0)


class PowerSection(_Section):
    type: Literal["power"]
    rms_amplitude_hz: float = Field(gt=0)


class EnergySection(_Section):
    type: Literal["energy"]
    max_energy_hz2s: float = Field(gt=0)  # E/h


ConstraintSection = Annotated[
    Union[AmplitudeSection, PowerSection, EnergySection], Field(discriminator="type")
]

# several limits must all hold
ConstraintList = Annotated[List[ConstraintSection], Field(min_length=1)]


class OptimizerSection(_Section):
    max_iterations: int = Field(default=1000, ge=0)
    grad_tolerance: float = Field(default=1e-8, gt=0)
    lbfgs_memory: int = Field(default=10, ge=1)
    seed: int = 0
    init_strategy: Literal["random_phase", "random_small", "from_file"] = "random_phase"
    init_file: Optional[str] = None
    wolfe_c1: float = Field(default=1e-4, gt=0, lt=1)
    wolfe_c2: float = Field(default=0.9, gt=0, lt=1)
    units: Literal["rad", "rad_per_s"] = "rad"
    penalty_weight: float = Field(default=100.0, ge=0)

    @model_validator(mode="after")
    def ordered_wolfe(self) -> "OptimizerSection":
        if not self.wolfe_c1 < self.wolfe_c2:
            raise ValueError("wolfe_c1 must be smaller than wolfe_c2")
        if self.init_strategy == "from_file" and not self.init_file:
            raise ValueError("from_file needs init_file")
        return self


class EvaluationSection(_Section):
    density: Optional[int] = Field(default=None, ge=1)


class ExportSection(_Section):
    formats: List[Literal["native", "jcamp"]] = Field(default_factory=lambda: ["native", "jcamp"])


class RunConfig(_Section):
    name: str = "pulse"
    pulse: PulseSection
    grid: GridSection = Field(default_factory=GridSection)
    target: TargetSection
    constraint: Optional[Union[ConstraintSection, ConstraintList]] = None
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    starts: int = Field(default=1, ge=1)
    evaluation: EvaluationSection = Field(default_factory=EvaluationSection)
    export: ExportSection = Field(default_factory=ExportSection)

    def build_target(self) -> Target:
        target = self.target
        try:
            if isinstance(target, PPTargetSection):
                return PPTarget(named_state(target.rho0), named_state(target.lambda_f))
            if isinstance(target, SaturationTargetSection):
                return SaturationTarget(named_state(target.rho0))
            if target.q_f is not None:
                return URTarget(np.array(target.q_f))
            return URTarget(ur_quaternion(target.axis, np.radians(target.angle_deg)))
        except ContractViolation as exc:
            raise ConfigValidationError(str(exc), path="target") from exc

    def build_constraint(self) -> Optional[Constraint]:
        sections = self.constraint
        if sections is None:
            return None
        if isinstance(sections, list):
            limits = tuple(self._build_limit(section) for section in sections)
            return limits[0] if len(limits) == 1 else limits
        return self._build_limit(sections)

    def _build_limit(self, section) -> ConstraintSpec:
        dt = self.pulse.dt_s
        if isinstance(section, AmplitudeSection):
            return AmplitudeLimit(hz_to_theta(section.max_amplitude_hz, dt))
        if isinstance(section, PowerSection):
            return PowerLimit(power_limit_from_rms_hz(section.rms_amplitude_hz, dt))
        return EnergyLimit(energy_limit_from_hz(section.max_energy_hz2s, dt))

    def build_template(self) -> PulseShape:
        pulse = self.pulse
        theta_const = None
        if pulse.amplitude_hz is not None:
            theta_const = float(hz_to_theta(pulse.amplitude_hz, pulse.dt_s))
        basis = ControlBasis.from_name(pulse.basis, theta_const)
        return PulseShape(np.zeros((pulse.n_digits, basis.arity)), pulse.dt_s, basis)

    def to_problem(self, base_dir: Optional[Path] = None) -> OptimizationProblem:
        """Domain problem in radians; relative init_file paths resolve against ``base_dir``."""
        section = self.optimizer
        init_file = section.init_file
        if init_file and base_dir is not None and not Path(init_file).is_absolute():
            init_file = str(Path(base_dir) / init_file)
        z_limit = None
        if self.pulse.z_limit_hz is not None:
            z_limit = float(hz_to_theta(self.pulse.z_limit_hz, self.pulse.dt_s))
        options = OptimizerOptions(
            max_iterations=section.max_iterations,
            grad_tolerance=section.grad_tolerance,
            lbfgs_memory=section.lbfgs_memory,
            seed=section.seed,
            init_strategy=section.init_strategy,
            init_file=init_file,
            wolfe_c1=section.wolfe_c1,
            wolfe_c2=section.wolfe_c2,
            penalty_weight=section.penalty_weight,
            units=section.units,
            z_limit=z_limit,
        )
        grid = GridSpec(**self.grid.model_dump())
        try:
            return OptimizationProblem(
                self.build_template(), grid, self.build_target(), self.build_constraint(), options
            )
        except ConfigValidationError:
            raise
        except ContractViolation as exc:
            raise ConfigValidationError(str(exc), path="constraint" if self.constraint else "pulse") from exc


def _locate(text: str, loc: Sequence[Any]) -> Optional[int]:
    """1-based line of the innermost key of ``loc`` that appears in ``text``."""
    lines = text.splitlines()
    start, found = 0, None
    for part in loc:
        if not isinstance(part, str):
            continue
        needle = f'"{part}"'
        for index in range(start, len(lines)):
            if needle in lines[index]:
                start, found = index, index + 1
                break
    return found


def _dotted(loc: Sequence[Any]) -> str:
    return ".".join(str(part) for part in loc)


def _validation_error(exc: ValidationError, text: Optional[str]) -> ConfigValidationError:
    error = exc.errors()[0]
    loc: Tuple[Any, ...] = tuple(error.get("loc", ()))
    line = _locate(text, loc) if text is not None else None
    return ConfigValidationError(error.get("msg", "invalid value"), line, _dotted(loc))


def parse_run_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigValidationError(exc.msg, exc.lineno) from exc
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise _validation_error(exc, text) from exc


def run_config_from_dict(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise _validation_error(exc, None) from exc


def load_run_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigValidationError(f"cannot read {path}: {exc}") from exc
    return parse_run_config(text)
