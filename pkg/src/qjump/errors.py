"""Exception hierarchy."""

from __future__ import annotations


class QJumpError(Exception):
    """Base class for all package errors."""


class ArgumentError(QJumpError, ValueError):
    """Invalid argument (shape, sign, dimension)."""


class ModelError(QJumpError, ValueError):
    """Model violates a structural requirement (positivity, normalization)."""


class NumericError(QJumpError, ArithmeticError):
    """Numerical failure (overflow, non-convergence)."""


class RegimeError(QJumpError, ValueError):
    """Operation called outside the parameter regime it supports."""


class InfeasibleTrajectoryError(QJumpError, ValueError):
    """A supplied trajectory contains a jump of zero probability."""


class BoundViolationError(QJumpError, ValueError):
    """Intensity exceeded the declared thinning bound."""
