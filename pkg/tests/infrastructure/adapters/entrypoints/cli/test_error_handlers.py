"""
Unit tests for the centralized command-line exception handlers.

These tests ensure that each handler catches its target exception and
formats it into the standardized JSON error document.
"""
import io
import json

import pytest
from pydantic import ValidationError

from src.domain.models.errors import DomainRangeError, SimulationCapExceeded
from src.infrastructure.adapters.entrypoints.cli.error_handlers import (
    EXIT_ERROR,
    handle_exception,
    to_error_response,
)
from src.infrastructure.adapters.entrypoints.cli.schemas import ExperimentConfig


@pytest.fixture
def validation_error() -> ValidationError:
    """Provides the ValidationError of a config with zero replicates."""
    try:
        ExperimentConfig.model_validate({
            "kind": "ladder", "measure": {"kind": "uniform_binary"}, "master_seed": 1,
            "p_values": [1.0], "replicates": 0,
        })
    except ValidationError as exc:
        return exc
    raise AssertionError("config should not validate")


def test_validation_errors_keep_field_paths(validation_error: ValidationError):
    """
    Test Case: A ValidationError becomes INVALID_CONFIG with the failing field named.
    """
    response = to_error_response(validation_error)

    assert response.error.code == "INVALID_CONFIG"
    assert response.error.details[0]["field"] == "replicates"
    assert response.error.details[0]["type"] == "greater_than_equal"


def test_domain_errors():
    """
    Test Case: Domain errors become DOMAIN_RULE_VIOLATION named by their class.
    """
    response = to_error_response(DomainRangeError("p", 3.0, "p must not exceed p_bar"))

    assert response.error.code == "DOMAIN_RULE_VIOLATION"
    assert response.error.message == "DomainRangeError"
    assert "p" in response.error.details


def test_plain_value_errors_are_domain_errors():
    """
    Test Case: A plain ValueError from argument checks is reported the same way.
    """
    response = to_error_response(ValueError("FRAGWAVE_WORKERS must be an integer"))
    assert response.error.code == "DOMAIN_RULE_VIOLATION"
    assert response.error.message == "ValueError"


def test_io_errors_name_the_path():
    """
    Test Case: OSError becomes IO_ERROR with the path and errno in the details.
    """
    exc = FileNotFoundError(2, "No such file or directory", "missing.json")
    response = to_error_response(exc)

    assert response.error.code == "IO_ERROR"
    assert response.error.details == {"path": "missing.json", "errno": 2}


def test_unexpected_errors_are_internal():
    """
    Test Case: Anything else becomes INTERNAL_ERROR without a traceback in the document.
    """
    response = to_error_response(KeyError("boom"))

    assert response.error.code == "INTERNAL_ERROR"
    assert response.error.details.startswith("KeyError")


def test_handle_exception_writes_json_and_returns_one():
    """
    Test Case: The error document goes to the given stream and the exit code is 1.
    """
    stream = io.StringIO()

    code = handle_exception(SimulationCapExceeded("cap", {"alive": 11}), stream)
    document = json.loads(stream.getvalue())

    assert code == EXIT_ERROR == 1
    assert document["status"] == "error"
    assert document["error"]["code"] == "DOMAIN_RULE_VIOLATION"
