"""
Command Context Factory

This module contains the factory that selects a configuration profile,
configures logging and maps library errors to process exit codes.
"""

import logging
import os
import sys
from dataclasses import dataclass
from functools import wraps
from typing import Callable, Optional, Type

from dabformer.config import BaseConfig, config
from dabformer.utils.exceptions import ConfigError, DabformerError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s - %(message)s"


@dataclass
class CommandContext:
    """Profile selected for one command invocation"""

    profile: str
    settings: Type[BaseConfig]

    @property
    def progress(self) -> bool:
        return bool(self.settings.PROGRESS) and sys.stderr.isatty()

    @property
    def output_dir(self) -> str:
        return self.settings.OUTPUT_DIR


def create_context(config_name: Optional[str] = None, log_level: Optional[str] = None) -> CommandContext:
    """
    Command context factory.

    Args:
        config_name: Profile name (desk, full, testing); ``DABFORMER_ENV`` by default
        log_level: Overrides the profile's log level

    Returns:
        Configured command context
    """
    if config_name is None:
        config_name = os.environ.get("DABFORMER_ENV", "default")
    if config_name not in config:
        raise ConfigError(f"unknown profile {config_name!r}", details=f"choose from {', '.join(config)}")

    settings = config[config_name]
    configure_logging(log_level or settings.LOG_LEVEL)
    return CommandContext(config_name, settings)


def configure_logging(level: str = "INFO") -> None:
    """Configure root logging once per process"""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.INFO))


def handle_errors(f: Callable[..., int]) -> Callable[..., int]:
    """
    Decorator turning a command into an exit code.

    ``DabformerError`` maps to its ``exit_code``; anything else is logged with
    its traceback and maps to 1.
    """

    @wraps(f)
    def decorated_function(*args, **kwargs) -> int:
        try:
            result = f(*args, **kwargs)
            return 0 if result is None else int(result)
        except DabformerError as e:
            logger.error(f"{type(e).__name__}: {e}")
            return e.exit_code
        except KeyboardInterrupt:
            logger.warning("Interrupted")
            return 130
        except Exception as e:
            logger.error(f"Unexpected error: {e}", exc_info=True)
            return 1

    return decorated_function
