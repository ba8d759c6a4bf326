"""
Exception types raised across the package.

Every error subclasses the builtin a caller would naturally catch
(``ValueError`` for bad input, ``ArithmeticError`` for numerical breakdown),
so ``except ValueError`` keeps working for code that does not care about
the finer distinction.
"""
from __future__ import annotations

from typing import Any, Optional


class SketchFLError(Exception):
    """Root of the package's exception tree."""


# ── input validation ──────────────────────────────────────────────────────
class InvalidSpec(SketchFLError, ValueError):
    def __init__(self, message: str, field: Optional[str] = None) -> None:
        super().__init__(message)
        self.field = field


class InvalidParam(SketchFLError, ValueError):
    pass


class DimensionMismatch(SketchFLError, ValueError):
    def __init__(self, expected: int, got: int, what: str = "vector") -> None:
        super().__init__(f"{what} has length {got}, expected {expected}")
        self.expected = expected
        self.got = got


class IndexOutOfRange(SketchFLError, IndexError):
    pass


class Unsupported(SketchFLError, ValueError):
    pass


class EmptyClientList(SketchFLError, ValueError):
    pass


class EmptyList(SketchFLError, ValueError):
    pass


class NoLipschitzBound(SketchFLError, ValueError):
    pass


class ConfigError(SketchFLError, ValueError):
    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


# ── theorem hypotheses ────────────────────────────────────────────────────
class GuardViolated(SketchFLError, ValueError):
    """A theorem's hypothesis does not hold; ``value`` carries the bound anyway."""

    def __init__(self, message: str, value: Optional[float] = None) -> None:
        super().__init__(message)
        self.value = value


class HypothesisViolated(SketchFLError, ValueError):
    pass


# ── numerical breakdown ───────────────────────────────────────────────────
class SingularSystem(SketchFLError, ArithmeticError):
    pass


class RankDeficient(SketchFLError, ArithmeticError):
    pass


class NonFinite(SketchFLError, ArithmeticError):
    """Iterates left the finite range; ``partial`` holds whatever was recorded."""

    def __init__(self, message: str, partial: Any = None) -> None:
        super().__init__(message)
        self.partial = partial


class TargetUnreachable(SketchFLError, RuntimeError):
    pass


# ── warnings (logged, never raised) ───────────────────────────────────────
class StepSizeWarning(UserWarning):
    pass


class SingularKernel(UserWarning):
    pass


class UncertifiedSketch(UserWarning):
    pass
