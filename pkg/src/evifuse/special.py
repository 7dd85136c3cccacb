"""Digamma, trigamma and log-gamma for positive real arguments.

All three are computed by shifting the argument upward with the usual
recurrences until it is large enough for an asymptotic (Bernoulli-number)
expansion. Everything is float64 and vectorized over numpy arrays; scalars
in, scalar out.

Accuracy targets (checked against a high-precision oracle in the tests):
    digamma    absolute error <= 1e-12 on [1e-3, 1e6]
    trigamma   absolute error <= 1e-10 on [1e-3, 1e6]
    log_gamma  relative error <= 1e-12 (absolute near its zeros at 1 and 2)
"""

from __future__ import annotations

import numpy as np

__all__ = ["digamma", "trigamma", "log_gamma"]

_SHIFT_THRESHOLD = 10.0
_LGAMMA_THRESHOLD = 12.0
_HALF_LOG_TWO_PI = 0.9189385332046727

# Asymptotic series in t = 1/x^2: psi(x) ~ ln x - 1/(2x) - sum c_n t^n
_DIGAMMA_COEF = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    7.0 / 12.0,
    -3617.0 / 8160.0,
)

# psi'(x) ~ 1/x + 1/(2x^2) + (1/x) * t * (1/6 + t*(-1/30 + ...)), t = 1/x^2
_TRIGAMMA_COEF = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)

# ln Gamma(x) ~ (x-1/2) ln x - x + ln(2 pi)/2 + (1/x)(c1 + t*(c2 + ...)), t = 1/x^2
_LGAMMA_COEF = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    7.0 / 1092.0,
)

_SPLITTER = 134217729.0  # 2**27 + 1, Veltkamp split constant


def _check_positive(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError(f"{name} requires a positive finite argument")


def _as_float_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    return arr, arr.ndim == 0


def _horner(t: np.ndarray, coef) -> np.ndarray:
    acc = np.zeros_like(t)
    for c in reversed(coef):
        acc = t * (c + acc)
    return acc


def _two_prod(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Dekker's exact product: a*b == p + err in exact arithmetic.
    p = a * b
    ca = _SPLITTER * a
    ahi = ca - (ca - a)
    alo = a - ahi
    cb = _SPLITTER * b
    bhi = cb - (cb - b)
    blo = b - bhi
    err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, err


def _recip_square(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """1/x**2 as an unevaluated hi+lo pair, accurate well below one ulp."""
    p, p_err = _two_prod(x, x)
    y = 1.0 / p
    t, t_err = _two_prod(p, y)
    # residual of p*y relative to 1; (1 - t) is exact since t is near 1
    r = ((1.0 - t) - t_err) - p_err * y
    return y, y * r


def digamma(x):
    """psi(x) for x > 0. Raises ValueError for nonpositive or nonfinite input."""
    arr, scalar = _as_float_array(x)
    _check_positive(arr, "digamma")

    z = arr.copy()
    shift = np.zeros_like(z)
    comp = np.zeros_like(z)  # Neumaier compensation, keeps the 1/x term honest
    for _ in range(int(_SHIFT_THRESHOLD)):
        mask = z < _SHIFT_THRESHOLD
        if not mask.any():
            break
        term = np.where(mask, 1.0 / z, 0.0)
        total = shift + term
        comp = comp + np.where(
            np.abs(shift) >= np.abs(term), (shift - total) + term, (term - total) + shift
        )
        shift = total
        z = np.where(mask, z + 1.0, z)

    t = 1.0 / (z * z)
    result = np.log(z) - 0.5 / z - _horner(t, _DIGAMMA_COEF) - (shift + comp)
    return float(result) if scalar else result


def trigamma(x):
    """psi'(x) for x > 0. Raises ValueError for nonpositive or nonfinite input."""
    arr, scalar = _as_float_array(x)
    _check_positive(arr, "trigamma")

    # For tiny x the 1/x^2 recurrence term is ~1e6 while the tolerance is
    # absolute, so that single term is carried as a hi+lo pair.
    tiny = arr < 0.01
    lead_hi, lead_lo = _recip_square(np.where(tiny, arr, 1.0))
    lead_hi = np.where(tiny, lead_hi, 0.0)
    lead_lo = np.where(tiny, lead_lo, 0.0)

    z = np.where(tiny, arr + 1.0, arr)
    rest = np.zeros_like(z)
    for _ in range(int(_SHIFT_THRESHOLD)):
        mask = z < _SHIFT_THRESHOLD
        if not mask.any():
            break
        rest = rest + np.where(mask, 1.0 / (z * z), 0.0)
        z = np.where(mask, z + 1.0, z)

    u = 1.0 / z
    t = u * u
    series = u + 0.5 * t + u * _horner(t, _TRIGAMMA_COEF)
    result = lead_hi + ((rest + series) + lead_lo)
    return float(result) if scalar else result


def log_gamma(x):
    """ln Gamma(x) for x > 0. Raises ValueError for nonpositive or nonfinite input."""
    arr, scalar = _as_float_array(x)
    _check_positive(arr, "log_gamma")

    z = arr.copy()
    prod = np.ones_like(z)
    for _ in range(int(_LGAMMA_THRESHOLD)):
        mask = z < _LGAMMA_THRESHOLD
        if not mask.any():
            break
        prod = np.where(mask, prod * z, prod)
        z = np.where(mask, z + 1.0, z)

    t = 1.0 / (z * z)
    series = (_LGAMMA_COEF[0] + _horner(t, _LGAMMA_COEF[1:])) / z
    stirling = (z - 0.5) * np.log(z) - z + _HALF_LOG_TWO_PI + series
    result = stirling - np.log(prod)
    return float(result) if scalar else result
