"""Report documents written by the CLI subcommands."""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class StartReport(BaseModel):
    seed: Optional[int] = None
    quality: float
    signed_cost: float
    iterations: int
    evaluations: int
    wall_time_s: float
    time_per_iteration_s: float
    termination: str


class RunReport(BaseModel):
    """Outcome of ``optimize``: the best start plus every start's summary."""
    name: str
    basis: str
    n_digits: int
    duration_us: float
    quality: float
    signed_cost: float
    iterations: int
    wall_time_s: float
    time_per_iteration_s: float
    termination: str
    seed: Optional[int] = None
    evaluation_quality: Optional[float] = None  # band average on the denser evaluation grid
    average_power_hz2: Optional[float] = None  # time-averaged nu^2 of the exported shape
    energy_over_h_hz2s: Optional[float] = None  # E/h = sum(nu^2 dt)
    feasible: bool = True
    starts: List[StartReport] = Field(default_factory=list)
    failures: List[Dict[str, str]] = Field(default_factory=list)
    files: List[str] = Field(default_factory=list)


class ProfileReport(BaseModel):
    name: str
    cells: int
    band_average: Optional[float] = None
    files: List[str] = Field(default_factory=list)


class CheckEntry(BaseModel):
    """Worst deviation of one oracle comparison."""
    basis: str
    oracle: str
    n_digits: Optional[int] = None
    instances: int
    max_deviation: float
    tolerance: float
    worst: str = ""
    passed: bool


class GradcheckReport(BaseModel):
    passed: bool
    entries: List[CheckEntry] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)


class BenchEntry(BaseModel):
    path: str  # "PP" or "UR"
    method: str
    control: str
    us_per_1000: float


class BenchReport(BaseModel):
    calls: int
    per_call: bool = False
    entries: List[BenchEntry] = Field(default_factory=list)
    ratios: Dict[str, float] = Field(default_factory=dict)
    targets: Dict[str, bool] = Field(default_factory=dict)

    @property
    def meets_targets(self) -> bool:
        return bool(self.targets) and all(self.targets.values())
