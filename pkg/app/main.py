"""Bloch Pulse Designer - command-line entry point."""
import logging
import sys
import time
from typing import Optional, Sequence

from dotenv import load_dotenv

from app.cli.common import EXIT_INVALID
from app.cli.parser import build_parser
from app.core.config import get_config
from app.core.errors import PulseDesignError

logger = logging.getLogger(__name__)


def configure_logging() -> None:
    logging.basicConfig(
        level=get_config().log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        stream=sys.stderr,
    )
    logging.Formatter.converter = time.localtime


def main(argv: Optional[Sequence[str]] = None) -> int:
    # Load environment variables from .env file
    load_dotenv()
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except PulseDesignError as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
