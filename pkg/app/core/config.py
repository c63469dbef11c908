"""Application configuration loader."""
import json
import logging
import os
from typing import Any, Dict, List

logger = logging.getLogger(__name__)


class Config:
    """Runtime defaults shared by every subcommand."""

    def __init__(self, config_path: str = None):
        if config_path is None:
            config_path = os.path.join(os.path.dirname(__file__), "..", "..", "config.json")

        self.config_path = config_path
        self.data: Dict[str, Any] = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from JSON file."""
        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
            logger.debug(f"Configuration loaded from {self.config_path}")
            return data
        except FileNotFoundError:
            logger.error(f"Config file not found: {self.config_path}")
            raise
        except json.JSONDecodeError as e:
            logger.error(f"Invalid JSON in config file: {e}")
            raise

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value."""
        return self.data.get(key, default)

    @property
    def threads(self) -> int:
        """Worker threads for multistart optimization (0 = auto)."""
        value = int(os.getenv("PULSE_THREADS", self.get("threads", 0)))
        if value <= 0:
            return max(1, os.cpu_count() or 1)
        return value

    @property
    def log_level(self) -> str:
        return os.getenv("PULSE_LOG_LEVEL", self.get("logLevel", "INFO")).upper()

    @property
    def out_dir(self) -> str:
        return os.getenv("PULSE_OUT_DIR", self.get("outDir", "out"))

    @property
    def bench_calls(self) -> int:
        return max(1, int(os.getenv("PULSE_BENCH_CALLS", self.get("benchCalls", 1000))))

    @property
    def gradcheck_instances(self) -> int:
        return max(1, int(os.getenv("PULSE_GRADCHECK_INSTANCES", self.get("gradcheckInstances", 20))))

    @property
    def gradcheck_digits(self) -> List[int]:
        return [int(n) for n in self.get("gradcheckDigits", [1, 10, 100])]

    @property
    def fd_relative_step(self) -> float:
        return float(self.get("fdRelativeStep", 1e-6))

    @property
    def evaluation_density(self) -> int:
        return max(1, int(self.get("evaluationDensity", 4)))

    @property
    def gradcheck_tolerances(self) -> Dict[str, float]:
        raw = self.get("gradcheckTolerances", {})
        return {
            "exponential": float(raw.get("exponential", 1e-10)),
            "finiteDifference": float(raw.get("finiteDifference", 1e-7)),
            "finiteDifferenceAbsolute": float(raw.get("finiteDifferenceAbsolute", 1e-8)),
        }


# Global config instance
config: Config = None


def get_config() -> Config:
    """Get global config instance."""
    global config
    if config is None:
        config = Config()
    return config
