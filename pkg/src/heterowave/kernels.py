"""Inverse-Laplace kernels ``F[mu, nu](gamma, tau)`` of the side-mode dynamics.

Each kernel is the inverse Laplace transform

    F[mu, nu](gamma, tau) = L^-1 { exp(gamma/p - gamma/(p + 2i)) p^-mu (p + 2i)^-nu }

and is evaluated from its Bessel-convolution representation.  Writing
``X = 2 sqrt(gamma (tau - z))`` and ``Y = 2 sqrt(gamma z)``, the five kernels
needed by the correlation functions are

    F10 = I0(X0) - gamma * int e^{-2iz} I0(X) jinc1(Y) dz
    F01 = e^{-2i tau} J0(Y0) + gamma * int e^{-2iz} iinc1(X) J0(Y) dz
    F11 = int e^{-2iz} I0(X) J0(Y) dz
    F20 = tau iinc1(X0) - gamma * int e^{-2iz} (tau - z) iinc1(X) jinc1(Y) dz
    F02 = e^{-2i tau} tau jinc1(Y0) + gamma * int e^{-2iz} z iinc1(X) jinc1(Y) dz

with all integrals over ``z in [0, tau]``, ``X0 = Y0 = 2 sqrt(gamma tau)``,
``jinc1(x) = 2 J1(x)/x`` and ``iinc1(x) = 2 I1(x)/x``.  Folding the
``1/sqrt(z)`` and ``1/sqrt(tau - z)`` factors into ``jinc1``/``iinc1`` leaves
integrands that are entire in ``z``, so Gauss-Legendre rules converge
geometrically; the rule order is doubled until two successive estimates agree.

For ``2 sqrt(gamma tau) > SERIES_SWITCH`` the boundary term and the integral
cancel over many digits (``I0(X0)`` dwarfs the result).  There the kernels are
summed instead from the expansion of ``exp(gamma q)`` with
``q = 2i / (p (p + 2i))``:

    F[mu, nu] = sum_k (2i gamma)^k / k! * tau^m / m! * M(k + nu; m + 1; -2i tau),
    m = 2k + mu + nu - 1,

where ``M`` is Kummer's function (``|M| <= 1`` on this argument), so only a
couple of digits are lost to cancellation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import specfun

__all__ = [
    "KernelId",
    "F10",
    "F01",
    "F11",
    "F20",
    "F02",
    "ALL_KERNELS",
    "KernelConvergenceError",
    "KernelValue",
    "KernelGrid",
    "KernelTable",
    "kernel_values",
    "eval_kernel",
    "build_grid",
    "kernel_table",
    "integrate_in_tau",
    "kernel_identity_residuals",
    "write_kernel_dump",
]

DEFAULT_RTOL = 1e-8
GRID_TOL = 1e-6
_MIN_NODES = 24
_MAX_NODES = 3072
_CHUNK = 8192
_ROUNDOFF = 64 * np.finfo(float).eps
SERIES_SWITCH = 12.0


class KernelConvergenceError(RuntimeError):
    """Quadrature for a kernel did not reach the requested tolerance."""

    def __init__(self, message, gamma=None, tau=None):
        super().__init__(message)
        self.gamma = gamma
        self.tau = tau


@dataclass(frozen=True, order=True)
class KernelId:
    mu: int
    nu: int

    def __post_init__(self):
        if (self.mu, self.nu) not in _ALLOWED:
            raise ValueError(
                f"unsupported kernel ({self.mu},{self.nu}); "
                f"allowed: {sorted(_ALLOWED)}"
            )

    @property
    def name(self) -> str:
        return f"F{self.mu}{self.nu}"

    @classmethod
    def parse(cls, text: str) -> "KernelId":
        """Accept ``'F11'``, ``'11'`` or ``'1,1'``."""
        digits = text.strip().upper().lstrip("F").replace(",", "")
        if len(digits) != 2 or not digits.isdigit():
            raise ValueError(f"cannot parse kernel id {text!r}")
        return cls(int(digits[0]), int(digits[1]))

    def __str__(self) -> str:
        return self.name


_ALLOWED = frozenset({(1, 0), (0, 1), (1, 1), (2, 0), (0, 2)})

F10 = KernelId(1, 0)
F01 = KernelId(0, 1)
F11 = KernelId(1, 1)
F20 = KernelId(2, 0)
F02 = KernelId(0, 2)
ALL_KERNELS = (F10, F01, F11, F20, F02)


@dataclass(frozen=True)
class KernelValue:
    kernel: KernelId
    gamma: float
    tau: float
    value: complex


@lru_cache(maxsize=None)
def _gauss_legendre01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _boundary_term(kid: KernelId, g, tau):
    if kid == F11:
        return np.zeros(g.shape, dtype=complex)
    x0 = 2.0 * np.sqrt(g * tau)
    if kid == F10:
        return specfun.i0(x0).astype(complex)
    if kid == F01:
        return np.exp(-2j * tau) * specfun.j0(x0)
    if kid == F20:
        return (tau * specfun.iinc1(x0)).astype(complex)
    return np.exp(-2j * tau) * tau * specfun.jinc1(x0)


def _integrand(kid: KernelId, g, tau, t):
    """Integrand on ``z = tau * t`` (shape ``(P, n)``), already multiplied by ``tau``."""
    g2 = g[:, None]
    tau2 = tau[:, None]
    z = tau2 * t[None, :]
    rest = tau2 - z
    big_x = 2.0 * np.sqrt(g2 * rest)
    big_y = 2.0 * np.sqrt(g2 * z)
    phase = np.exp(-2j * z) * tau2
    if kid == F10:
        return -g2 * phase * specfun.i0(big_x) * specfun.jinc1(big_y)
    if kid == F01:
        return g2 * phase * specfun.iinc1(big_x) * specfun.j0(big_y)
    if kid == F11:
        return phase * specfun.i0(big_x) * specfun.j0(big_y)
    if kid == F20:
        return -g2 * phase * rest * specfun.iinc1(big_x) * specfun.jinc1(big_y)
    return g2 * phase * z * specfun.iinc1(big_x) * specfun.jinc1(big_y)


def _kummer_imag(b, c, tau):
    """``M(b; c; -2i tau)`` for integer ``b >= 0``, ``c > b`` and array ``tau``."""
    z = -2j * tau
    term = np.ones(tau.shape, dtype=complex)
    total = term.copy()
    n = 0
    while True:
        term = term * (b + n) / (c + n) * z / (n + 1)
        total = total + term
        n += 1
        if b + n - 1 == 0 or (n > 2 * np.max(tau) and np.all(np.abs(term) < 1e-18)):
            return total


def _series_chunk(kid, g, tau):
    mu, nu = kid.mu, kid.nu
    m0 = mu + nu - 1
    pre = tau ** m0 / float(np.prod(np.arange(1, m0 + 1)))
    pre = pre.astype(complex)
    total = np.zeros(g.shape, dtype=complex)
    k = 0
    while True:
        m = 2 * k + m0
        term = pre * _kummer_imag(k + nu, m + 1, tau)
        total = total + term
        ratio = 2.0 * g * tau * tau / ((k + 1) * (m + 1) * (m + 2))
        # |M| <= 1, so |pre| bounds every remaining term once the ratio is small
        if np.all(ratio < 0.5) and np.all(np.abs(pre) <= 1e-17 * np.abs(total)):
            return total
        pre = pre * 1j * ratio
        k += 1
        if k > 2000:
            raise KernelConvergenceError(f"{kid.name} series did not converge")


def _quad_chunk(kid, g, tau, rtol):
    n = _MIN_NODES
    t, w = _gauss_legendre01(n)
    f = _integrand(kid, g, tau, t)
    prev = f @ w
    pending = np.arange(g.size)
    result = np.empty(g.size, dtype=complex)
    while True:
        n *= 2
        t, w = _gauss_legendre01(n)
        f = _integrand(kid, g[pending], tau[pending], t)
        cur = f @ w
        scale = np.abs(f) @ w
        # converge relative to the value; the floor is the roundoff level of
        # the cancelling integrand
        floor = _ROUNDOFF * (scale + np.abs(_boundary_term(kid, g[pending], tau[pending])))
        ok = np.abs(cur - prev) <= np.maximum(rtol * np.abs(cur), floor) + 1e-300
        result[pending[ok]] = cur[ok]
        pending = pending[~ok]
        if pending.size == 0:
            return result
        if n >= _MAX_NODES:
            bad = pending[0]
            raise KernelConvergenceError(
                f"{kid.name} quadrature did not converge to rtol={rtol:g} "
                f"with {n} nodes at gamma={g[bad]:.17g}, tau={tau[bad]:.17g}",
                gamma=float(g[bad]),
                tau=float(tau[bad]),
            )
        prev = cur[~ok]


def kernel_values(kid: KernelId, gamma, tau, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Vectorised ``F[kid](gamma, tau)``; arguments broadcast against each other.

    Values are exactly zero for ``tau < 0`` (causality).
    """
    g_arr, tau_arr = np.broadcast_arrays(
        np.asarray(gamma, dtype=float), np.asarray(tau, dtype=float)
    )
    shape = g_arr.shape
    g_flat = np.ravel(g_arr)
    tau_flat = np.ravel(tau_arr)
    if np.any(g_flat < 0) or not np.all(np.isfinite(g_flat)):
        raise ValueError("gamma must be finite and non-negative")
    out = np.zeros(g_flat.size, dtype=complex)
    live = np.flatnonzero(tau_flat >= 0)
    for start in range(0, live.size, _CHUNK):
        idx = live[start:start + _CHUNK]
        g = g_flat[idx]
        tau_c = tau_flat[idx]
        big = 2.0 * np.sqrt(g * tau_c) > SERIES_SWITCH
        quad = ~big
        out[idx[quad]] = _boundary_term(kid, g[quad], tau_c[quad])
        active = quad & (tau_c > 0)
        if np.any(active):
            out[idx[active]] += _quad_chunk(kid, g[active], tau_c[active], rtol)
        if np.any(big):
            out[idx[big]] = _series_chunk(kid, g[big], tau_c[big])
    return out.reshape(shape)


def eval_kernel(kid: KernelId, gamma: float, tau: float, rtol: float = DEFAULT_RTOL) -> complex:
    """Single kernel value ``F[kid](gamma, tau)``."""
    return complex(kernel_values(kid, gamma, tau, rtol)[()])


def integrate_in_tau(kid: KernelId, gamma: float, tau: float, rtol: float = DEFAULT_RTOL) -> complex:
    """``int_0^tau F[kid](gamma, s) ds`` by Gauss-Legendre with order doubling."""
    if tau <= 0:
        return 0j
    n = 16
    prev = None
    while n <= 1024:
        t, w = _gauss_legendre01(n)
        vals = kernel_values(kid, gamma, tau * t, rtol)
        cur = tau * (vals @ w)
        if prev is not None and abs(cur - prev) <= rtol * tau * (np.abs(vals) @ w) + 1e-300:
            return complex(cur)
        prev = cur
        n *= 2
    raise KernelConvergenceError(
        f"tau-integral of {kid.name} did not converge at gamma={gamma}, tau={tau}",
        gamma=gamma,
        tau=tau,
    )


@dataclass(frozen=True)
class KernelGrid:
    """Tabulated kernel values on a rectangular ``(gamma, tau)`` mesh.

    Calling the grid interpolates real and imaginary parts separately with a
    tensor-product spline of degree ``min(interpolation_order, n - 1)`` per axis;
    queries that land on a node return the stored node value.  The quintic
    default keeps mid-cell errors near 1e-7 on an 11 x 11 mesh of the unit square,
    where bicubic splines leave about 2e-5.
    """

    kernel: KernelId
    gammas: np.ndarray
    taus: np.ndarray
    values: np.ndarray
    interpolation_order: int = 5
    _splines: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.values.shape != (self.gammas.size, self.taus.size):
            raise ValueError("values must have shape (len(gammas), len(taus))")
        if self.gammas.size > 1 and self.taus.size > 1:
            kx = min(self.interpolation_order, self.gammas.size - 1)
            ky = min(self.interpolation_order, self.taus.size - 1)
            re = RectBivariateSpline(self.gammas, self.taus, self.values.real, kx=kx, ky=ky)
            im = RectBivariateSpline(self.gammas, self.taus, self.values.imag, kx=kx, ky=ky)
            object.__setattr__(self, "_splines", (re, im))

    def _node_index(self, axis, q):
        i = np.searchsorted(axis, q)
        i = np.clip(i, 0, axis.size - 1)
        return i, axis[i] == q

    def __call__(self, gamma, tau):
        g, t = np.broadcast_arrays(np.asarray(gamma, float), np.asarray(tau, float))
        if not self._splines:
            gi, gh = self._node_index(self.gammas, g)
            ti, th = self._node_index(self.taus, t)
            if not np.all(gh & th):
                raise ValueError("grid has a single row or column; only node lookups are possible")
            return self.values[gi, ti]
        re, im = self._splines
        out = re.ev(g, t) + 1j * im.ev(g, t)
        gi, gh = self._node_index(self.gammas, g)
        ti, th = self._node_index(self.taus, t)
        hit = gh & th
        if np.any(hit):
            out = np.where(hit, self.values[gi, ti], out)
        return out[()] if out.ndim == 0 else out


def build_grid(
    kid: KernelId,
    gammas: Sequence[float],
    taus: Sequence[float],
    rtol: float = DEFAULT_RTOL,
    interpolation_order: int = 5,
) -> KernelGrid:
    gammas = np.asarray(gammas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if gammas.ndim != 1 or taus.ndim != 1:
        raise ValueError("gammas and taus must be 1-D")
    if np.any(np.diff(gammas) <= 0) or np.any(np.diff(taus) <= 0):
        raise ValueError("gammas and taus must be strictly increasing")
    if gammas.size and gammas[0] < 0:
        raise ValueError("gammas must be non-negative")
    gg, tt = np.meshgrid(gammas, taus, indexing="ij")
    try:
        values = kernel_values(kid, gg, tt, rtol)
    except KernelConvergenceError as exc:
        raise KernelConvergenceError(
            f"grid node (gamma={exc.gamma}, tau={exc.tau}) failed: {exc}",
            gamma=exc.gamma,
            tau=exc.tau,
        ) from exc
    return KernelGrid(kid, gammas, taus, values, interpolation_order)


@dataclass(frozen=True)
class KernelTable:
    """Chebyshev interpolant of ``gamma -> F[kid](gamma, tau)`` on ``[0, gamma_max]``
    at one fixed ``tau``."""

    kernel: KernelId
    tau: float
    gamma_max: float
    coeffs: np.ndarray

    def __call__(self, gamma):
        g = np.asarray(gamma, dtype=float)
        if self.gamma_max == 0.0:
            return np.full(g.shape, self.coeffs[0], dtype=complex)
        x = 2.0 * np.clip(g, 0.0, self.gamma_max) / self.gamma_max - 1.0
        return np.polynomial.chebyshev.chebval(x, self.coeffs)


def _cheb_coeffs(values):
    n = values.size
    k = np.arange(n)
    theta = np.pi * (k + 0.5) / n
    c = (2.0 / n) * (np.cos(np.outer(k, theta)) @ values)
    c[0] *= 0.5
    return c


def kernel_table(
    kid: KernelId,
    tau: float,
    gamma_max: float,
    rtol: float = DEFAULT_RTOL,
    tail_tol: float = 1e-13,
) -> KernelTable:
    """Build a :class:`KernelTable`, doubling the degree until the Chebyshev tail
    drops below ``tail_tol`` relative to the largest coefficient."""
    if gamma_max < 0:
        raise ValueError("gamma_max must be non-negative")
    if gamma_max == 0.0:
        return KernelTable(kid, tau, 0.0, np.array([eval_kernel(kid, 0.0, tau, rtol)]))
    n = 16
    while True:
        theta = np.pi * (np.arange(n) + 0.5) / n
        g = 0.5 * gamma_max * (1.0 + np.cos(theta))
        c = _cheb_coeffs(kernel_values(kid, g, tau, rtol))
        peak = np.max(np.abs(c))
        if peak == 0.0 or np.max(np.abs(c[-4:])) <= tail_tol * peak + 1e-300:
            cut = np.flatnonzero(np.abs(c) > 0.1 * tail_tol * peak)
            keep = cut[-1] + 1 if cut.size else 1
            return KernelTable(kid, float(tau), float(gamma_max), c[:keep])
        if n >= 1024:
            raise KernelConvergenceError(
                f"Chebyshev table for {kid.name} at tau={tau} did not resolve", tau=tau
            )
        n *= 2


def kernel_identity_residuals(
    gamma: float, taus: Iterable[float], rtol: float = DEFAULT_RTOL
) -> np.ndarray:
    """Scaled max-norm residuals of the three kernel identities

    (i)   F10 - F01 = 2i F11
    (ii)  F20(gamma, tau) = int_0^tau F10(gamma, s) ds
    (iii) F11(gamma, tau) = int_0^tau F01(gamma, s) ds

    over ``taus``.  Each residual is divided by ``max(1, |terms|)`` so the
    numbers stay meaningful when the kernels grow like ``exp(2 sqrt(gamma tau))``.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    res = np.zeros(3)
    for tau in taus:
        f10 = eval_kernel(F10, gamma, tau, rtol)
        f01 = eval_kernel(F01, gamma, tau, rtol)
        f11 = eval_kernel(F11, gamma, tau, rtol)
        f20 = eval_kernel(F20, gamma, tau, rtol)
        int10 = integrate_in_tau(F10, gamma, tau, rtol)
        int01 = integrate_in_tau(F01, gamma, tau, rtol)
        r1 = abs(f10 - f01 - 2j * f11) / max(1.0, abs(f10), abs(f01))
        r2 = abs(f20 - int10) / max(1.0, abs(f20))
        r3 = abs(f11 - int01) / max(1.0, abs(f11))
        res = np.maximum(res, [r1, r2, r3])
    return res


def write_kernel_dump(path, records: Iterable[KernelValue]) -> None:
    """CSV with columns ``kernel_id, gamma, tau, re, im``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kernel_id", "gamma", "tau", "re", "im"])
        for rec in records:
            writer.writerow([
                rec.kernel.name,
                f"{rec.gamma:.12g}",
                f"{rec.tau:.12g}",
                f"{rec.value.real:.12g}",
                f"{rec.value.imag:.12g}",
            ])
