# -*- coding: utf-8 -*-
"""
Exception types shared by the library modules and the CLI
"""

from typing import Any, Optional


class OptomechError(Exception):
    """Base class for all errors raised by this package"""


class DomainError(OptomechError, ValueError):
    """An operation was called outside its mathematical domain"""


class ConfigurationError(OptomechError, ValueError):
    """Invalid parameter bundle or run configuration"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConvergenceError(OptomechError, RuntimeError):
    """Numerical non-convergence; carries whatever partial result exists"""

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial
