"""Cylindrical Bessel functions J0, J1 and modified Bessel functions I0, I1.

All functions accept scalars or numpy arrays of real arguments and are
vectorised.  Three evaluation regimes are used:

``J``
    power series for ``|x| <= 8``, Miller backward recurrence (normalised
    with ``J0 + 2 * sum(J_2k) = 1``) for ``8 < |x| <= 25`` and the Hankel
    asymptotic expansion beyond.
``I``
    power series for ``|x| <= 40`` (all terms positive, no cancellation)
    and the large-argument asymptotic expansion of ``exp(-x) I(x)`` beyond.

The ``jinc1``/``iinc1`` helpers return ``2 J1(x)/x`` and ``2 I1(x)/x``;
they are regular at the origin and are what the kernel integrands need.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BesselResult",
    "bessel_j",
    "bessel_i",
    "j0",
    "j1",
    "i0",
    "i1",
    "i0e",
    "i1e",
    "jinc1",
    "iinc1",
]

_EPS = np.finfo(float).eps

J_SERIES_MAX = 8.0
J_MILLER_MAX = 25.0
I_SERIES_MAX = 40.0


@dataclass(frozen=True)
class BesselResult:
    """Value of a modified Bessel function, optionally scaled by ``exp(-|x|)``."""

    value: float | np.ndarray
    scaled: bool = False


def _series(q, nu, sign, max_terms=200):
    """Sum ``sum_m sign^m q^m / (m! (m+nu)!)`` for non-negative ``q``.

    Terms are generated by recurrence and summation stops once every
    element's latest term is below machine precision of its partial sum.
    """
    term = np.ones_like(q)
    total = term.copy()
    for m in range(1, max_terms):
        term = term * (sign * q) / (m * (m + nu))
        total = total + term
        if np.all(np.abs(term) <= _EPS * np.abs(total) * 0.1):
            break
    return total


def _hankel_pq(x, nu):
    """Asymptotic P, Q factors of the Hankel expansion for ``x >= 25``."""
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    eightx = 8.0 * x
    for k in range(1, 60):
        nxt = term * (mu - (2 * k - 1) ** 2) / (k * eightx)
        if np.all(np.abs(nxt) >= np.abs(term)) and k > 2:
            break
        term = nxt
        r = k % 4
        if r == 1:
            q = q + term
        elif r == 2:
            p = p - term
        elif r == 3:
            q = q - term
        else:
            p = p + term
        if np.all(np.abs(term) < 1e-18):
            break
    return p, q


def _j_hankel(x, nu):
    p, q = _hankel_pq(x, nu)
    chi = x - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _j_miller(x):
    """J0 and J1 for moderate positive ``x`` by backward recurrence."""
    start = int(2 * ((np.max(x) + 30.0 + 4.0 * np.sqrt(np.max(x))) // 2)) + 2
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    for k in range(start, 0, -1):
        # j_cur holds J_k, produce J_{k-1}
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm = norm + 2.0 * j_cur
        big = np.abs(j_cur) > 1e200
        if np.any(big):
            scale = np.where(big, 1e-200, 1.0)
            j_cur, j_next, norm = j_cur * scale, j_next * scale, norm * scale
    norm = norm + j_cur
    return j_cur / norm, j_next / norm


def _j_positive(x, order):
    """J_order on non-negative ``x`` (array)."""
    out = np.empty_like(x)
    small = x <= J_SERIES_MAX
    mid = (x > J_SERIES_MAX) & (x <= J_MILLER_MAX)
    large = x > J_MILLER_MAX
    if np.any(small):
        xs = x[small]
        s = _series(0.25 * xs * xs, order, -1.0)
        out[small] = s if order == 0 else 0.5 * xs * s
    if np.any(mid):
        j0m, j1m = _j_miller(x[mid])
        out[mid] = j0m if order == 0 else j1m
    if np.any(large):
        out[large] = _j_hankel(x[large], order)
    return out


def _i_scaled_positive(x, order):
    """``exp(-x) I_order(x)`` on non-negative ``x`` (array)."""
    out = np.empty_like(x)
    small = x <= I_SERIES_MAX
    if np.any(small):
        xs = x[small]
        s = _series(0.25 * xs * xs, order, 1.0)
        if order == 1:
            s = 0.5 * xs * s
        out[small] = s * np.exp(-xs)
    large = ~small
    if np.any(large):
        xl = x[large]
        mu = 4.0 * order * order
        term = np.ones_like(xl)
        total = term.copy()
        for k in range(1, 40):
            term = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * xl)
            total = total + term
            if np.all(np.abs(term) < 1e-18):
                break
        out[large] = total / np.sqrt(2.0 * np.pi * xl)
    return out


def _prepare(x):
    arr = np.asarray(x, dtype=float)
    return arr, np.atleast_1d(np.abs(arr)).astype(float)


def _finish(arr, values):
    values = values.reshape(np.shape(np.atleast_1d(arr)))
    if arr.ndim == 0:
        return float(values[0])
    return values.reshape(arr.shape)


def j0(x):
    arr, ax = _prepare(x)
    return _finish(arr, _j_positive(ax.ravel(), 0))


def j1(x):
    arr, ax = _prepare(x)
    vals = _j_positive(ax.ravel(), 1) * np.sign(np.atleast_1d(arr).ravel())
    return _finish(arr, vals)


def i0e(x):
    arr, ax = _prepare(x)
    return _finish(arr, _i_scaled_positive(ax.ravel(), 0))


def i1e(x):
    arr, ax = _prepare(x)
    vals = _i_scaled_positive(ax.ravel(), 1) * np.sign(np.atleast_1d(arr).ravel())
    return _finish(arr, vals)


def i0(x):
    arr, ax = _prepare(x)
    flat = ax.ravel()
    return _finish(arr, _i_scaled_positive(flat, 0) * np.exp(flat))


def i1(x):
    arr, ax = _prepare(x)
    flat = ax.ravel()
    vals = _i_scaled_positive(flat, 1) * np.exp(flat) * np.sign(np.atleast_1d(arr).ravel())
    return _finish(arr, vals)


def jinc1(x):
    """``2 J1(x) / x`` with the removable singularity at 0 filled in (value 1)."""
    arr, ax = _prepare(x)
    flat = ax.ravel()
    out = np.empty_like(flat)
    small = flat <= J_SERIES_MAX
    if np.any(small):
        out[small] = _series(0.25 * flat[small] ** 2, 1, -1.0)
    if np.any(~small):
        out[~small] = 2.0 * _j_positive(flat[~small], 1) / flat[~small]
    return _finish(arr, out)


def iinc1(x):
    """``2 I1(x) / x`` with the removable singularity at 0 filled in (value 1)."""
    arr, ax = _prepare(x)
    flat = ax.ravel()
    out = np.empty_like(flat)
    small = flat <= I_SERIES_MAX
    if np.any(small):
        out[small] = _series(0.25 * flat[small] ** 2, 1, 1.0)
    if np.any(~small):
        xl = flat[~small]
        out[~small] = 2.0 * _i_scaled_positive(xl, 1) * np.exp(xl) / xl
    return _finish(arr, out)


def bessel_j(order: int, x):
    """Bessel function of the first kind ``J_order(x)`` for order 0 or 1."""
    if order == 0:
        return j0(x)
    if order == 1:
        return j1(x)
    raise ValueError(f"order must be 0 or 1, got {order!r}")


def bessel_i(order: int, x, scaled: bool = False) -> BesselResult:
    """Modified Bessel function ``I_order(x)``, or ``exp(-|x|) I_order(x)`` if scaled."""
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order!r}")
    if scaled:
        value = i0e(x) if order == 0 else i1e(x)
    else:
        value = i0(x) if order == 0 else i1(x)
    return BesselResult(value=value, scaled=scaled)
