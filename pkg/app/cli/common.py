"""Helpers shared by the subcommands."""
import argparse
import json
import logging
from pathlib import Path
from typing import Optional

from pydantic import BaseModel

from app.core.config import get_config
from app.core.errors import ConfigValidationError
from app.schemas.run_config import RunConfig, load_run_config, run_config_from_dict
from app.utils.presets import SCENARIOS, scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CHECK_FAILED = 2


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", metavar="PATH", help="run configuration JSON")
    source.add_argument("--preset", choices=sorted(SCENARIOS), help="built-in run configuration")
    parser.add_argument("--out", metavar="DIR", help="output directory (default from config.json)")


def load_config(args: argparse.Namespace, overrides: Optional[dict] = None) -> RunConfig:
    """RunConfig from --config or --preset with command-line overrides applied."""
    if args.config:
        config = load_run_config(args.config)
    else:
        config = run_config_from_dict(scenario(args.preset))
    if not overrides:
        return config
    data = config.model_dump(exclude_none=True)
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.rpartition(".")
        target = data.setdefault(section, {}) if section else data
        target[key] = value
    try:
        return run_config_from_dict(data)
    except ConfigValidationError as exc:
        raise ConfigValidationError(f"after command-line overrides: {exc}") from exc


def base_dir(args: argparse.Namespace) -> Optional[Path]:
    return Path(args.config).resolve().parent if args.config else None


def output_dir(args: argparse.Namespace, name: str) -> Path:
    root = Path(args.out) if args.out else Path(get_config().out_dir) / name
    root.mkdir(parents=True, exist_ok=True)
    return root


def write_report(report: BaseModel, path: Path) -> Path:
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info("Wrote report to %s", path)
    return path


def print_json(report: BaseModel) -> None:
    print(json.dumps(report.model_dump(), indent=2))
