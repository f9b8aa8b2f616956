"""Input validation helpers shared by the public functions and estimators."""

from __future__ import annotations

import numbers

import numpy as np


def check_signal(x, name: str = "x", min_length: int = 1) -> np.ndarray:
    """Return ``x`` as a finite, 1-D float64 array.

    Raises ``ValueError`` for non-1-D input, non-finite values or records
    shorter than ``min_length``.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_length:
        raise ValueError(f"{name} needs at least {min_length} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_odd_length(length, name: str = "length") -> int:
    if not isinstance(length, numbers.Integral) or isinstance(length, bool):
        raise ValueError(f"{name} must be an integer, got {length!r}")
    if length < 1 or length % 2 == 0:
        raise ValueError(f"{name} must be an odd positive integer, got {length}")
    return int(length)


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def wrap_phase(phi):
    """Wrap angles to the half-open interval (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phi, dtype=np.float64), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped
