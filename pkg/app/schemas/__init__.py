"""Pydantic schemas for run configurations and reports."""
from .report import BenchEntry, BenchReport, CheckEntry, GradcheckReport, ProfileReport, RunReport, StartReport
from .run_config import RunConfig, load_run_config, parse_run_config, run_config_from_dict

__all__ = [
    "BenchEntry",
    "BenchReport",
    "CheckEntry",
    "GradcheckReport",
    "ProfileReport",
    "RunReport",
    "StartReport",
    "RunConfig",
    "load_run_config",
    "parse_run_config",
    "run_config_from_dict",
]
