"""Error hierarchy and graceful failure handling for pipeline stages.

Every library failure is a ``RomError`` subclass carrying a stable process
exit code, so the command-line surface can map failures to the scripting
contract: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
import sys
from functools import wraps
from typing import Any, Callable, Optional, Sequence

from .logger import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class RomError(Exception):
    """Base exception for AttnROM errors."""

    exit_code = EXIT_UNEXPECTED

    def __init__(self, message: str, stage: Optional[str] = None, original_error: Optional[Exception] = None):
        self.stage = stage
        self.message = message
        self.original_error = original_error
        super().__init__(f"[{stage}] {message}" if stage else message)


class ConfigurationError(RomError):
    """Invalid or unknown configuration; the message names the offending key."""

    exit_code = EXIT_CONFIG


class DataError(RomError):
    """Input data cannot support the requested operation."""

    exit_code = EXIT_DATA


class FormatError(DataError):
    """Binary artifact has a bad magic string, bad counts, or is truncated."""
    pass


class InsufficientDataError(DataError):
    """Not enough snapshots for the requested window, horizon or starts."""
    pass


class ShapeError(RomError, ValueError):
    """Operands have incompatible shapes."""

    exit_code = EXIT_DATA

    def __init__(self, op: str, *shapes: Sequence[int], detail: str = ""):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        shape_text = " vs ".join(str(s) for s in self.shapes)
        message = f"shape mismatch in {op}: {shape_text}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class UnknownOpError(RomError, KeyError):
    """Requested primitive is not registered."""

    exit_code = EXIT_CONFIG

    def __str__(self) -> str:
        return self.message


class NumericalError(RomError):
    """Non-finite values or a failed factorization."""

    exit_code = EXIT_NUMERICAL


def get_user_friendly_error_message(error: Exception, command: str) -> str:
    """Convert an exception to a one-line message for the command line.

    Args:
        error: The exception that occurred
        command: Name of the command that failed

    Returns:
        User-friendly error message
    """
    if isinstance(error, ConfigurationError):
        return f"{command}: configuration error: {error.message}"
    if isinstance(error, FormatError):
        return f"{command}: unreadable artifact: {error.message}"
    if isinstance(error, (DataError, ShapeError)):
        return f"{command}: data error: {error.message}"
    if isinstance(error, NumericalError):
        return f"{command}: numerical failure: {error.message}"
    if isinstance(error, FileNotFoundError):
        return f"{command}: file not found: {error.filename}"
    return f"{command}: unexpected error: {error}"


def exit_code_for(error: BaseException) -> int:
    """Map an exception onto the process exit-code contract."""
    if isinstance(error, RomError):
        return error.exit_code
    if isinstance(error, FileNotFoundError):
        return EXIT_DATA
    return EXIT_UNEXPECTED


def safe_command_execution(command_name: str):
    """Decorator turning a command function into one that returns an exit code.

    The wrapped function returns ``EXIT_OK`` (or its own integer result) on
    success; any exception is logged with its traceback and converted into a
    message on stderr plus the matching exit code.
    """
    def decorator(func: Callable[..., Any]) -> Callable[..., int]:
        @wraps(func)
        def wrapper(*args, **kwargs) -> int:
            try:
                result = func(*args, **kwargs)
                return EXIT_OK if result is None else int(result)
            except Exception as e:
                logger.error(f"[{command_name}] Error during execution: {e}", exc_info=True)
                print(get_user_friendly_error_message(e, command_name), file=sys.stderr)
                return exit_code_for(e)

        return wrapper
    return decorator


class GracefulErrorHandler:
    """Context manager for optional side outputs whose failure must not abort a run."""

    def __init__(self, operation_name: str, on_error: Optional[Callable[[BaseException], None]] = None):
        """Initialize error handler.

        Args:
            operation_name: Name of the operation for logging
            on_error: Optional callback to execute on error (receives exception)
        """
        self.operation_name = operation_name
        self.on_error = on_error
        self.error: Optional[BaseException] = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is not None and issubclass(exc_type, Exception):
            logger.error(
                f"Error in {self.operation_name}: {exc_val}",
                exc_info=(exc_type, exc_val, exc_tb),
            )
            self.error = exc_val

            if self.on_error:
                try:
                    self.on_error(exc_val)
                except Exception as callback_error:
                    logger.error(f"Error in error handler callback: {callback_error}")

            return True

        return False
