import traceback
import logging
from typing import Optional, Callable, Any
from functools import wraps

from config.settings import EXIT_CODES

logger = logging.getLogger(__name__)


class SymbolicControlError(Exception):
    pass


class InvalidInputError(SymbolicControlError):
    pass


class CertificateError(SymbolicControlError):
    pass


class DwellTimeError(SymbolicControlError):
    pass


class BudgetError(SymbolicControlError):
    pass


class ValidationError(SymbolicControlError):
    pass


class LabelMismatchError(SymbolicControlError):
    pass


class UncontrollableStateError(SymbolicControlError):
    pass


class RelationViolationError(SymbolicControlError):
    pass


class ExportError(SymbolicControlError):
    pass


def handle_errors(user_message: str = "Command failed", log_error: bool = True):
    """Turn a command's exceptions into log lines and an exit code."""
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            try:
                return func(*args, **kwargs)
            except (ValidationError, BudgetError, CertificateError,
                    DwellTimeError, InvalidInputError, LabelMismatchError) as e:
                if log_error:
                    logger.error(f"{user_message} in {func.__name__}: {str(e)}")
                print(f"❌ {str(e)}")
                return EXIT_CODES["validation"]
            except UncontrollableStateError as e:
                if log_error:
                    logger.error(f"Uncontrollable start in {func.__name__}: {str(e)}")
                print(f"❌ {str(e)}")
                return EXIT_CODES["empty_controller"]
            except RelationViolationError as e:
                if log_error:
                    logger.error(f"Relation violated in {func.__name__}: {str(e)}")
                print(f"❌ {str(e)}")
                return EXIT_CODES["monitor_violation"]
            except ExportError as e:
                if log_error:
                    logger.error(f"Export error in {func.__name__}: {str(e)}")
                print(f"❌ Export failed: {str(e)}")
                return EXIT_CODES["unexpected"]
            except Exception as e:
                if log_error:
                    logger.error(f"Unexpected error in {func.__name__}: {str(e)}")
                    logger.error(traceback.format_exc())
                print(f"❌ {user_message}. See the log for details.")
                return EXIT_CODES["unexpected"]
        return wrapper
    return decorator


def log_command(action: str, details: Optional[dict] = None):
    log_entry = f"Command: {action}"
    if details:
        log_entry += f" | Details: {details}"
    logger.info(log_entry)
