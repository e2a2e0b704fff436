import time
import logging
import functools
from typing import Callable

from membrane.core.exceptions import BaseSimulationException, EXIT_SOLVER

logger = logging.getLogger(__name__)

CommandHandler = Callable[..., int]


def request_logging(handler: CommandHandler) -> CommandHandler:
    """Log command start/finish information with elapsed time."""

    @functools.wraps(handler)
    def wrapper(args, *extra, **kwargs) -> int:
        start_time = time.time()
        command = getattr(args, "command", handler.__name__)

        logger.info(f"Command: {command} {getattr(args, 'config', '')}")

        exit_code = handler(args, *extra, **kwargs)

        process_time = time.time() - start_time
        logger.info(f"Finished: {command} exit={exit_code} - {process_time:.4f}s")
        return exit_code

    return wrapper


def error_handling(handler: CommandHandler) -> CommandHandler:
    """Translate simulator exceptions into process exit codes."""

    @functools.wraps(handler)
    def wrapper(*args, **kwargs) -> int:
        try:
            return handler(*args, **kwargs)
        except BaseSimulationException as e:
            logger.error(f"{e.__class__.__name__}: {e.detail}")
            return e.exit_code
        except Exception as e:
            logger.error(f"Unhandled exception: {str(e)}", exc_info=True)
            return EXIT_SOLVER

    return wrapper
