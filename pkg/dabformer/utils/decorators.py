"""
Utility Decorators

This module contains decorators for the command services.
"""

import logging
import time
from functools import wraps

logger = logging.getLogger(__name__)


def log_command(f):
    """
    Decorator to log the start and duration of a command.
    """

    @wraps(f)
    def decorated_function(*args, **kwargs):
        start_time = time.time()
        name = f.__name__.replace("cmd_", "")

        logger.info("=" * 60)
        logger.info(f"Command: {name}")
        logger.info("=" * 60)

        result = f(*args, **kwargs)

        duration = time.time() - start_time
        logger.info(f"Command {name} completed in {duration:.3f}s")

        return result

    return decorated_function
