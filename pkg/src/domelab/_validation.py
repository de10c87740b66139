"""Exceptions and small input-validation helpers shared by all modules."""

import numbers

import numpy as np


class DomelabError(ValueError):
    """Base class for all errors raised by domelab."""


class ResolutionError(DomelabError):
    """A requested scale is finer than the curve or mesh resolves."""


class BudgetError(DomelabError):
    """A computation would exceed its sample or memory budget."""


class GeometryError(DomelabError):
    """Input geometry violates a structural precondition (simplicity, closure, ...)."""


class PartitionError(DomelabError):
    """A partition does not tile its parent or violates its band invariants."""


class ConfigError(DomelabError):
    """A CLI configuration failed schema validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


def check_points(points, name="points", min_rows=1):
    """Return ``points`` as a C-contiguous float64 array of shape (n, 2)."""
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"{name} must have shape (n, 2), got {arr.shape}")
    if len(arr) < min_rows:
        raise GeometryError(f"{name} needs at least {min_rows} rows, got {len(arr)}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} contains non-finite coordinates")
    return arr


def check_point(point, name="point"):
    arr = np.asarray(point, dtype=np.float64).reshape(-1)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} must be a finite planar point")
    return arr


def check_fraction(value, name, low=0.0, high=1.0, closed=False):
    """Validate ``low < value < high`` (or ``<=`` on both ends when ``closed``)."""
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise DomelabError(f"{name} must be a finite real number, got {value!r}")
    ok = low <= value <= high if closed else low < value < high
    if not ok:
        bracket = "[]" if closed else "()"
        raise DomelabError(f"{name} must lie in {bracket[0]}{low}, {high}{bracket[1]}, got {value}")
    return float(value)


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise DomelabError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomelabError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise DomelabError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
