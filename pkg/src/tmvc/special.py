"""Log-gamma, digamma and trigamma for positive real arguments.

All three accept a Python float or a numpy array and return the same kind.
Arguments must be finite and strictly positive.
"""
import numpy as np

EULER_GAMMA = 0.57721566490153286061
_HALF_LOG_2PI = 0.91893853320467274178

# B_2, B_4, ..., B_16
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
)

_ASYMPTOTIC_FROM = 10.0
_STIRLING_FROM = 15.0
_N_SERIES = 62


class DomainError(ValueError):
    pass


def _zeta_minus_one(s: int, n_terms: int = 10) -> float:
    """zeta(s) - 1 by Euler-Maclaurin summation; accurate to ~1e-17 for s >= 2."""
    n = n_terms
    head = sum(k ** -float(s) for k in range(2, n))
    tail = n ** (1.0 - s) / (s - 1.0) + 0.5 * n ** -float(s)
    rising = float(s)
    fact = 2.0
    for j, b2j in enumerate(_BERNOULLI, start=1):
        tail += b2j / fact * rising * n ** (-s - 2.0 * j + 1.0)
        rising *= (s + 2 * j - 1) * (s + 2 * j)
        fact *= (2 * j + 1) * (2 * j + 2)
    return head + tail


_ZM1 = np.array([_zeta_minus_one(k) for k in range(2, _N_SERIES)])
# coefficients of z^k, k >= 2, in lnGamma(2+z); for |z| <= 0.5 the terms fall
# like 4^-k, so the series is cut once they drop below 1e-19
_LG2_COEF = np.array([(-1.0) ** k / k for k in range(2, _N_SERIES)]) * _ZM1
_LG2_COEF = _LG2_COEF[np.abs(_LG2_COEF) * 0.5 ** np.arange(2, _N_SERIES) > 1e-19]


def _check(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("argument must be finite and > 0")
    return arr


def _wrap(x, out):
    return float(out) if np.ndim(x) == 0 else out


_LG2_POWERS = np.arange(2, 2 + _LG2_COEF.size, dtype=float)


def _lgamma_near2(z):
    """lnGamma(2+z) for |z| <= 0.5 from the truncated power series."""
    return (1.0 - EULER_GAMMA) * z + np.power.outer(z, _LG2_POWERS) @ _LG2_COEF


def _lgamma_stirling(x):
    inv = 1.0 / x
    inv2 = inv * inv
    series = np.zeros_like(x)
    for k in range(len(_BERNOULLI), 0, -1):
        series = series * inv2 + _BERNOULLI[k - 1] / (2 * k * (2 * k - 1))
    return (x - 0.5) * np.log(x) - x + _HALF_LOG_2PI + series * inv


def log_gamma(x):
    """Natural log of the gamma function."""
    arr = np.atleast_1d(_check(x))
    out = np.empty_like(arr)

    # below 1.5, shift up into [1.5, 2.5) and divide out the extra factors
    small = arr < 0.5
    if small.any():
        xs = arr[small]
        out[small] = _lgamma_near2(xs) - np.log(xs) - np.log1p(xs)

    m1 = (arr >= 0.5) & (arr < 1.5)
    if m1.any():
        z = arr[m1] - 1.0
        out[m1] = _lgamma_near2(z) - np.log1p(z)

    mid = (arr >= 1.5) & (arr < _STIRLING_FROM)
    if mid.any():
        xm = arr[mid]
        shift = np.floor(xm - 1.5)
        base = xm - shift
        offsets = np.arange(int(shift.max()), dtype=float)
        factors = np.where(offsets < shift[:, None], base[:, None] + offsets, 1.0)
        out[mid] = _lgamma_near2(base - 2.0) + np.log(factors.prod(axis=1))

    big = arr >= _STIRLING_FROM
    if big.any():
        out[big] = _lgamma_stirling(arr[big])

    return _wrap(x, out.reshape(np.shape(x)))


def _shift_up(arr, power):
    """Move every argument to >= the asymptotic cutoff.

    Returns (shifted x, sum over the skipped steps of x_i^-power).
    """
    steps = np.maximum(np.ceil(_ASYMPTOTIC_FROM - arr), 0.0)
    n_max = int(steps.max()) if steps.size else 0
    if n_max == 0:
        return arr, np.zeros_like(arr)
    offsets = np.arange(n_max, dtype=float)
    grid = arr[..., None] + offsets
    used = offsets < steps[..., None]
    acc = np.where(used, grid ** -float(power), 0.0).sum(axis=-1)
    return arr + steps, acc


def digamma(x):
    """Logarithmic derivative of the gamma function."""
    arr, acc = _shift_up(_check(x), 1)
    inv2 = 1.0 / (arr * arr)
    series = np.zeros_like(arr)
    for k in range(len(_BERNOULLI), 0, -1):
        series = series * inv2 + _BERNOULLI[k - 1] / (2 * k)
    out = np.log(arr) - 0.5 / arr - series * inv2 - acc
    return _wrap(x, out)


def trigamma(x):
    """Derivative of the digamma function."""
    arr, acc = _shift_up(_check(x), 2)
    inv = 1.0 / arr
    inv2 = inv * inv
    series = np.zeros_like(arr)
    for k in range(len(_BERNOULLI), 0, -1):
        series = series * inv2 + _BERNOULLI[k - 1]
    out = acc + inv + 0.5 * inv2 + series * inv2 * inv
    return _wrap(x, out)


def log_multivariate_beta(alpha) -> float:
    """log B(alpha) = sum lnGamma(alpha_k) - lnGamma(sum alpha) along the last axis."""
    a = np.asarray(alpha, dtype=float)
    return log_gamma(a).sum(axis=-1) - log_gamma(a.sum(axis=-1))


__all__ = ["DomainError", "EULER_GAMMA", "log_gamma", "digamma", "trigamma", "log_multivariate_beta"]
