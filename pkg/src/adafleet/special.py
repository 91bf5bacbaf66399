"""log-gamma, digamma, trigamma and inverse digamma for positive arguments.

All functions accept scalars or numpy arrays and evaluate elementwise.
Scalars in give Python floats out.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# zeta(2) .. zeta(31)
_ZETA = np.array([
    1.6449340668482264365, 1.2020569031595942854, 1.0823232337111381915,
    1.0369277551433699263, 1.0173430619844491397, 1.0083492773819228268,
    1.0040773561979443394, 1.0020083928260822144, 1.0009945751278180853,
    1.0004941886041194646, 1.0002460865533080483, 1.0001227133475784891,
    1.0000612481350587048, 1.0000305882363070205, 1.0000152822594086519,
    1.0000076371976378998, 1.0000038172932649998, 1.0000019082127165539,
    1.0000009539620338728, 1.0000004769329867878, 1.0000002384505027277,
    1.0000001192199259653, 1.0000000596081890513, 1.0000000298035035147,
    1.0000000149015548284, 1.0000000074507117898, 1.0000000037253340248,
    1.0000000018626597235, 1.0000000009313274324, 1.0000000004656629065,
])
# coefficients (-1)^k zeta(k) / k of the Maclaurin series of lgamma(1 + z)
_LG1P_COEF = np.array([(-1) ** k * z / k for k, z in enumerate(_ZETA, start=2)])

# B_2k / (2k (2k-1)), k = 1..8
_STIRLING = (
    1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0,
    1.0 / 1188.0, -691.0 / 360360.0, 1.0 / 156.0, -3617.0 / 122400.0,
)
# B_2k / (2k), k = 1..7
_DIGAMMA_ASYM = (
    1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0,
    1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0,
)
# B_2k, k = 1..7
_TRIGAMMA_ASYM = (
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
    5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0,
)

_SERIES_RADIUS = 0.2
_STIRLING_MIN = 10.0
_PSI_MIN = 6.0


def _prepare(x):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0)) or np.any(~np.isfinite(arr)):
        raise DomainError("argument must be positive and finite")
    return arr


def _out(arr, x):
    return float(arr) if np.ndim(x) == 0 else arr


def _lgamma1p_series(z):
    # Horner evaluation of sum_k c_k z^k for k = 2..31, then the linear term
    acc = np.zeros_like(z)
    for c in _LG1P_COEF[::-1]:
        acc = (acc + c) * z
    return (acc - EULER_GAMMA) * z


def _lgamma_stirling(x):
    """Shift below-threshold arguments upward, then apply Stirling's series."""
    shift_log = np.zeros_like(x)
    prod = np.ones_like(x)
    y = x.copy()
    for _ in range(int(_STIRLING_MIN)):
        low = y < _STIRLING_MIN
        if not low.any():
            break
        prod = np.where(low, prod * y, prod)
        y = np.where(low, y + 1.0, y)
    shift_log = np.log(prod)
    inv = 1.0 / y
    inv2 = inv * inv
    corr = np.zeros_like(y)
    for c in _STIRLING[::-1]:
        corr = corr * inv2 + c
    corr *= inv
    return (y - 0.5) * np.log(y) - y + _HALF_LOG_2PI + corr - shift_log


def log_gamma(x):
    """Natural log of the gamma function for ``x > 0``.

    Near the zeros at 1 and 2 the Maclaurin series of ``lgamma(1 + z)`` is
    used so the result keeps full relative precision; elsewhere an upward
    shift to ``x >= 10`` precedes Stirling's asymptotic series.
    """
    arr = _prepare(x)
    z1 = arr - 1.0
    z2 = arr - 2.0
    near1 = np.abs(z1) < _SERIES_RADIUS
    near2 = np.abs(z2) < _SERIES_RADIUS
    out = _lgamma_stirling(np.where(near1 | near2, 3.0, arr))
    out = np.where(near1, _lgamma1p_series(np.where(near1, z1, 0.0)), out)
    out = np.where(near2, np.log1p(np.where(near2, z2, 0.0)) + _lgamma1p_series(np.where(near2, z2, 0.0)), out)
    return _out(out, x)


def digamma(x):
    """Derivative of :func:`log_gamma`; recurrence up to ``x >= 6`` then asymptotic series."""
    y = _prepare(x).copy()
    acc = np.zeros_like(y)
    while True:
        low = y < _PSI_MIN
        if not low.any():
            break
        acc = np.where(low, acc - 1.0 / y, acc)
        y = np.where(low, y + 1.0, y)
    inv2 = 1.0 / (y * y)
    tail = np.zeros_like(y)
    for c in _DIGAMMA_ASYM[::-1]:
        tail = tail * inv2 + c
    tail *= inv2
    return _out(acc + np.log(y) - 0.5 / y - tail, x)


def trigamma(x):
    y = _prepare(x).copy()
    acc = np.zeros_like(y)
    while True:
        low = y < _PSI_MIN
        if not low.any():
            break
        acc = np.where(low, acc + 1.0 / (y * y), acc)
        y = np.where(low, y + 1.0, y)
    inv = 1.0 / y
    inv2 = inv * inv
    tail = np.zeros_like(y)
    for c in _TRIGAMMA_ASYM[::-1]:
        tail = tail * inv2 + c
    tail *= inv2 * inv
    return _out(acc + inv + 0.5 * inv2 + tail, x)


def inverse_digamma(y, newton_steps: int = 6):
    """Solve ``digamma(x) = y`` for ``x > 0`` by Newton's method.

    Starting point follows Minka's piecewise approximation, which puts
    Newton inside its quadratic basin for every real ``y``.
    """
    yv = np.asarray(y, dtype=np.float64)
    x = np.where(yv >= -2.22, np.exp(np.minimum(yv, 700.0)) + 0.5, -1.0 / (yv + EULER_GAMMA))
    for _ in range(newton_steps):
        x = x - (digamma(x) - yv) / trigamma(x)
        x = np.maximum(x, 1e-300)
    return _out(x, y)
