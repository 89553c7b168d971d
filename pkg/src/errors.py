"""
Error hierarchy shared by every module.
Each error carries the process exit code the CLI reports for it.
"""

from pathlib import Path
from typing import Any, Dict, Optional


class DualStyleError(Exception):
    """Base class for all expected failures."""

    exit_code = 1


class ContractViolation(DualStyleError, ValueError):
    """Bad shapes, out-of-range values, malformed flags."""

    exit_code = 2


class RefusalError(ContractViolation):
    """An operation refuses inputs that are not ready (untrained, empty, unmarked)."""


class NumericFailure(DualStyleError, ArithmeticError):
    """
    A loss or gradient went non-finite.

    Args:
        message: Human readable description
        diagnostics: Step, loss components, parameter set name
        checkpoint: Last checkpoint written before aborting, if any
    """

    exit_code = 3

    def __init__(self, message: str,
                 diagnostics: Optional[Dict[str, Any]] = None,
                 checkpoint: Optional[Path] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
        self.checkpoint = checkpoint

    def __str__(self) -> str:
        text = super().__str__()
        if self.diagnostics:
            text += f" {self.diagnostics}"
        if self.checkpoint:
            text += f" (last checkpoint: {self.checkpoint})"
        return text


class EnvironmentFailure(DualStyleError, OSError):
    """Missing workspace or checkpoint, unwritable paths."""

    exit_code = 4


def require(condition: bool, message: str):
    """Raise ContractViolation unless condition holds."""
    if not condition:
        raise ContractViolation(message)
