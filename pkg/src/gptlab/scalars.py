"""Scalar modes shared by every numeric object in the package.

Two modes exist and a single run uses one of them throughout:

* ``"exact"``: numpy ``object`` arrays holding :class:`fractions.Fraction`
  (plain ``int`` entries are tolerated, they mix with fractions losslessly).
* ``"approx"``: ``float64`` arrays; comparisons use the run tolerance ``TOL``.

The mode of an array is read off its dtype, so values never carry a
separate mode tag.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Literal

import numpy as np

Mode = Literal["exact", "approx"]

EXACT: Mode = "exact"
APPROX: Mode = "approx"
TOL = 1e-9


class ModeError(ValueError):
    """Raised when exact and approximate scalars are mixed."""


def parse_scalar(value) -> Fraction:
    """Parse ``"p/q"``, integers, or fractions into an exact ``Fraction``.

    Floats are rejected: an exact run must never silently absorb rounding.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        raise TypeError(f"float literal {value!r} not allowed in exact mode")
    raise TypeError(f"cannot interpret {value!r} as a rational scalar")


def scalar(value, mode: Mode):
    if mode == EXACT:
        return parse_scalar(value)
    if isinstance(value, str):
        return float(Fraction(value))
    return float(value)


def array(values, mode: Mode) -> np.ndarray:
    """Build an array of the given mode from nested sequences."""
    if mode == EXACT:
        raw = np.asarray(values, dtype=object)
        out = np.empty(raw.shape, dtype=object)
        for idx, v in np.ndenumerate(raw):
            out[idx] = parse_scalar(v)
        return out
    if mode == APPROX:
        raw = np.asarray(values, dtype=object)
        out = np.empty(raw.shape, dtype=float)
        for idx, v in np.ndenumerate(raw):
            out[idx] = float(Fraction(v)) if isinstance(v, str) else float(v)
        return out
    raise ModeError(f"unknown mode {mode!r}")


def zeros(shape, mode: Mode) -> np.ndarray:
    if mode == EXACT:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape, dtype=float)


def identity(n: int, mode: Mode) -> np.ndarray:
    out = zeros((n, n), mode)
    for i in range(n):
        out[i, i] = Fraction(1) if mode == EXACT else 1.0
    return out


def mode_of(arr: np.ndarray) -> Mode:
    return EXACT if arr.dtype == object else APPROX


def same_mode(*arrays: np.ndarray) -> Mode:
    modes = {mode_of(a) for a in arrays}
    if len(modes) != 1:
        raise ModeError("scalar modes differ: " + ", ".join(sorted(modes)))
    return modes.pop()


def convert(arr: np.ndarray, mode: Mode) -> np.ndarray:
    """Convert between modes. approx -> exact goes through ``Fraction(float)``,
    which is exact for the binary64 value but rarely what one wants; prefer
    :func:`rationalize` for values known to be simple rationals."""
    if mode_of(arr) == mode:
        return arr
    if mode == APPROX:
        return np.asarray(arr, dtype=float)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = Fraction(float(v))
    return out


def rationalize(arr: np.ndarray, max_denominator: int = 10**6, tol: float = 1e-12) -> np.ndarray:
    """Snap a float array to nearby small-denominator rationals.

    Raises ``ValueError`` if any entry is further than ``tol`` from its
    rational approximation, i.e. the array is not exactly representable.
    """
    out = np.empty(np.shape(arr), dtype=object)
    for idx, v in np.ndenumerate(np.asarray(arr)):
        q = Fraction(float(v)).limit_denominator(max_denominator)
        if abs(float(q) - float(v)) > tol:
            raise ValueError(f"entry {v!r} at {idx} is not a small rational")
        out[idx] = q
    return out


def is_zero(x, tol: float = TOL) -> bool:
    if isinstance(x, (Fraction, int)):
        return x == 0
    return abs(x) <= tol


def allclose(a: np.ndarray, b: np.ndarray, tol: float = TOL) -> bool:
    """Exact equality for object arrays, absolute tolerance otherwise."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        return False
    if a.dtype == object and b.dtype == object:
        return bool(np.all(a == b))
    return bool(np.all(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) <= tol))


def fmt(x) -> str:
    """Serialise a scalar: ``"p/q"`` strings for rationals, repr for floats."""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def fmt_all(values: Iterable) -> list[str]:
    return [fmt(v) for v in values]
