"""Input coercion helpers for complex points and point batches."""

import numbers

import numpy as np

from .exceptions import DomainError


def parse_complex(value):
    """Parse a scalar given as a number, a ``"a+bj"`` string or a ``[re, im]`` pair."""
    if isinstance(value, numbers.Number):
        return complex(value)
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        re, im = value
        if isinstance(re, numbers.Real) and isinstance(im, numbers.Real):
            return complex(float(re), float(im))
    raise TypeError(f"cannot interpret {value!r} as a complex number")


def as_point(z, n):
    """Return ``z`` as a finite complex vector of shape ``(n,)``."""
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (n,):
        raise DomainError(f"expected a point with {n} complex coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("point has non-finite coordinates")
    return arr


def as_points(z, n):
    """Return ``z`` as a complex array of shape ``(N, n)``.

    A 1-D input is read as N scalar points when ``n == 1`` and as a single
    point otherwise.
    """
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if n == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise DomainError(f"expected points with {n} complex coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("points have non-finite coordinates")
    return arr


def check_count(count, name="count", minimum=1):
    if isinstance(count, float) and count.is_integer():
        count = int(count)
    if not isinstance(count, numbers.Integral) or count < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {count!r}")
    return int(count)
