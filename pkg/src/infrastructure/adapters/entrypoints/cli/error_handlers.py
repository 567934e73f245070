"""
Defines the centralized exception handlers of the command line.

Each handler turns one family of exceptions into the standardized
ErrorResponse document; `handle_exception` picks the handler and writes the
document to stderr. Every error exits with code 1.
"""

import logging
import sys
from typing import Callable, TextIO

from pydantic import ValidationError

from src.domain.models.errors import FragwaveError
from src.infrastructure.adapters.entrypoints.cli.schemas import ErrorDetail, ErrorResponse

logger = logging.getLogger(__name__)

EXIT_ERROR = 1


def validation_exception_handler(exc: ValidationError) -> ErrorResponse:
    """
    Handles errors raised by Pydantic while validating a config.

    Every failing field is reported with its dotted path.
    """
    details = [
        {
            "field": ".".join(str(part) for part in error.get("loc", ())) or "<config>",
            "type": error.get("type"),
            "message": error.get("msg"),
        }
        for error in exc.errors()
    ]
    error_detail = ErrorDetail(
        code="INVALID_CONFIG",
        message="The experiment config is invalid.",
        details=details,
    )
    return ErrorResponse(error=error_detail)


def domain_exception_handler(exc: ValueError) -> ErrorResponse:
    """
    Handles domain rule violations: arguments out of range, invalid measures,
    roots that cannot be bracketed and the like.
    """
    error_detail = ErrorDetail(
        code="DOMAIN_RULE_VIOLATION",
        message=type(exc).__name__,
        details=str(exc),
    )
    return ErrorResponse(error=error_detail)


def io_exception_handler(exc: OSError) -> ErrorResponse:
    """Handles file system failures; the details name the offending path."""
    error_detail = ErrorDetail(
        code="IO_ERROR",
        message=exc.strerror or str(exc),
        details={"path": exc.filename, "errno": exc.errno},
    )
    return ErrorResponse(error=error_detail)


def generic_exception_handler(exc: Exception) -> ErrorResponse:
    """
    Handles any unexpected exception. The traceback goes to the log only.
    """
    logger.exception("Unexpected error")
    error_detail = ErrorDetail(
        code="INTERNAL_ERROR",
        message="An unexpected error occurred.",
        details=f"{type(exc).__name__}: {exc}",
    )
    return ErrorResponse(error=error_detail)


# ValidationError subclasses ValueError, so it must come first.
HANDLERS: list[tuple[type[BaseException], Callable[..., ErrorResponse]]] = [
    (ValidationError, validation_exception_handler),
    (FragwaveError, domain_exception_handler),
    (ValueError, domain_exception_handler),
    (OSError, io_exception_handler),
]


def to_error_response(exc: Exception) -> ErrorResponse:
    for exc_type, handler in HANDLERS:
        if isinstance(exc, exc_type):
            return handler(exc)
    return generic_exception_handler(exc)


def handle_exception(exc: Exception, stream: TextIO | None = None) -> int:
    """
    Writes the error document of exc and returns the exit code.

    Args:
        exc: The exception that ended the command.
        stream: Where to write; stderr when omitted.

    Returns:
        The process exit code for errors.
    """
    response = to_error_response(exc)
    print(response.to_json(), file=stream or sys.stderr)
    return EXIT_ERROR
