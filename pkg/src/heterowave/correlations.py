"""Side-mode correlation functions and the observables built from them.

Every ``xi'`` integral in the closed-form correlators is rewritten in the gain
variable ``u = gamma(xi', 0)`` (``du = Gamma phi^2 dxi'``), e.g.

    G++(x1, x2) = M(x1, x2) [ int_0^tau F10(g1, s) F10*(g2, s) ds
                              + int_0^{g(min)} F11(g1 - u) F11*(g2 - u) du ]
    G--(x1, x2) = M(x1, x2) int_0^{g(min)} F11*(g1 - u) F11(g2 - u) du
    s+-(x1, x2) = -M(x1, x2) [ Theta(x2 - x1) F11(g2 - g1)
                              + int_0^{g(min)} F11(g2 - u) F20*(g1 - u) du ]

with ``g_i = gamma(x_i, 0)`` and ``M = Gamma phi(x1) phi(x2)``.  At fixed
``tau`` the kernels are functions of one scalar, so they are tabulated once
per ``tau`` (:class:`~heterowave.kernels.KernelTable`) and the ``u``
integrals use Gauss-Legendre panels between consecutive mesh gains, making
their accuracy independent of the ``xi`` mesh.

Observables integrate over the mesh with the trapezoidal rule.  The
cross-correlator jumps across ``x1 = x2``; pointwise it follows the
``Theta(0) = 1`` convention, while the double integrals use the mean of the
two one-sided limits on the diagonal (second-order accurate).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .condensate import Profile, SimConfig, gamma_cum, phi

__all__ = [
    "SideMode",
    "GridKind",
    "CorrelationGrid",
    "CorrelationSet",
    "CoherenceCurve",
    "CoherenceLength",
    "TimeSeries",
    "Correlator",
    "g1_matrix",
    "sigma_cross",
    "density",
    "g1_tilde",
    "g2_tilde",
    "coherence_length",
    "cauchy_schwarz_map",
    "squeezing_series",
    "witness_series",
    "populations",
]

log = logging.getLogger(__name__)

# relative population floor below which volume averages are undefined
POPULATION_FLOOR = 1e-30
_PANEL_NODES = 4


class SideMode(str, Enum):
    PLUS = "plus"
    MINUS = "minus"

    @classmethod
    def parse(cls, text) -> "SideMode":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        aliases = {"+": "plus", "p": "plus", "-": "minus", "m": "minus"}
        return cls(aliases.get(key, key))


class GridKind(str, Enum):
    G1_PLUS = "G1Plus"
    G1_MINUS = "G1Minus"
    SIGMA_CROSS = "SigmaCross"


@dataclass(frozen=True)
class CorrelationGrid:
    xi: np.ndarray
    values: np.ndarray
    kind: GridKind
    tau: float


@dataclass(frozen=True)
class CorrelationSet:
    """All second-moment correlators of the two side modes at one ``tau``.

    ``sigma_lower_diag`` holds the ``x2 -> x1^-`` limit of the cross
    correlator on the diagonal (the photon-exchange term switched off).
    """

    tau: float
    xi: np.ndarray
    weights: np.ndarray
    g1_plus: np.ndarray
    g1_minus: np.ndarray
    sigma: np.ndarray
    sigma_lower_diag: np.ndarray

    def grid(self, kind: GridKind) -> CorrelationGrid:
        kind = GridKind(kind)
        values = {
            GridKind.G1_PLUS: self.g1_plus,
            GridKind.G1_MINUS: self.g1_minus,
            GridKind.SIGMA_CROSS: self.sigma,
        }[kind]
        return CorrelationGrid(self.xi, values, kind, self.tau)

    def g1(self, mode) -> np.ndarray:
        return self.g1_plus if SideMode.parse(mode) is SideMode.PLUS else self.g1_minus

    def density(self, mode) -> np.ndarray:
        return np.maximum(np.real(np.diag(self.g1(mode))), 0.0)

    def population(self, mode) -> float:
        return float(self.weights @ self.density(mode))

    def _double(self, matrix):
        return self.weights @ matrix @ self.weights

    def sigma_for_quadrature(self) -> np.ndarray:
        s = self.sigma.copy()
        idx = np.arange(s.shape[0])
        s[idx, idx] = 0.5 * (self.sigma[idx, idx] + self.sigma_lower_diag)
        return s

    def sigma_abs2_for_quadrature(self) -> np.ndarray:
        a = np.abs(self.sigma) ** 2
        idx = np.arange(a.shape[0])
        a[idx, idx] = 0.5 * (a[idx, idx] + np.abs(self.sigma_lower_diag) ** 2)
        return a

    def normal_variance_difference(self) -> float:
        """``<:(Delta R-)^2:>`` for ``R- = N+ - N-`` (Wick factorisation)."""
        return float(
            self._double(np.abs(self.g1_plus) ** 2)
            + self._double(np.abs(self.g1_minus) ** 2)
            - 2.0 * self._double(self.sigma_abs2_for_quadrature())
        )

    def plus_autocorrelation_integral(self) -> float:
        return float(self._double(np.abs(self.g1_plus) ** 2))

    def squeezing(self) -> float:
        total = self.population(SideMode.PLUS) + self.population(SideMode.MINUS)
        if total <= 0.0:
            return 1.0
        return 1.0 + self.normal_variance_difference() / total

    def witness(self) -> float:
        """Separability witness from the quadrature variances (negative means entangled)."""
        plus = np.real(self._double(self.g1_plus))
        minus = np.real(self._double(self.g1_minus))
        cross = np.real(self._double(self.sigma_for_quadrature()))
        return float(4.0 * (plus + minus + 2.0 * cross))


@dataclass(frozen=True)
class CoherenceCurve:
    """Volume-averaged coherence ``g~(order)`` versus separation.

    ``defined`` flags samples whose normaliser is above the population floor;
    ``side`` is ``"left"`` for samples approached from ``dxi < 0`` and
    ``"right"`` otherwise (the ``dxi = 0`` point of a cross curve appears once
    per side).
    """

    delta_xi: np.ndarray
    values: np.ndarray
    tau: float
    mode_pair: tuple
    order: int
    defined: np.ndarray
    side: np.ndarray
    big_lambda: float = float("nan")


@dataclass(frozen=True)
class CoherenceLength:
    value: float
    capped: bool

    def __float__(self):
        return self.value


@dataclass
class TimeSeries:
    tau: np.ndarray
    squeezing: np.ndarray = field(default=None)
    witness: np.ndarray = field(default=None)
    populations_plus: np.ndarray = field(default=None)
    populations_minus: np.ndarray = field(default=None)


def _trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


class Correlator:
    """Closed-form correlators for one configuration, cached per ``tau``."""

    def __init__(self, cfg: SimConfig, profile: Profile | None = None,
                 panel_nodes: int = _PANEL_NODES, sigma_sign: float = 1.0):
        # sigma_sign = -1 is a mutation hook for the verification suite
        self.sigma_sign = float(sigma_sign)
        self.cfg = cfg
        self.profile = profile if profile is not None else Profile.thomas_fermi(cfg)
        self.xi = cfg.xi
        self.h = cfg.h
        self.weights = _trapezoid_weights(cfg.n_xi, self.h)
        self.phi = np.asarray(phi(self.profile, cfg, self.xi))
        self.gain = np.asarray(gamma_cum(self.profile, cfg, self.xi, 0.0))
        self.gain_max = float(self.gain[-1])
        self.coupling = cfg.gamma_coeff * np.outer(self.phi, self.phi)
        t, w = np.polynomial.legendre.leggauss(panel_nodes)
        lo, hi = self.gain[:-1, None], self.gain[1:, None]
        self._u = 0.5 * (hi - lo) * (t[None, :] + 1.0) + lo
        self._uw = 0.5 * (hi - lo) * w[None, :]
        self._cache: dict[float, CorrelationSet] = {}

    # -- kernel pieces -----------------------------------------------------
    def _shifted(self, table):
        """``table(gain[a] - u[c])`` for every mesh point ``a`` and panel node ``c``."""
        n = self.gain.size
        arg = self.gain[:, None, None] - self._u[None, :, :]
        return table(np.maximum(arg, 0.0)).reshape(n, -1)

    def _laser_term(self, tau):
        """``int_0^tau F10(g_a, s) F10*(g_b, s) ds`` as an ``n x n`` matrix."""
        tol = self.cfg.quad_tol
        n_s, prev = 16, None
        while True:
            t, w = np.polynomial.legendre.leggauss(n_s)
            s = 0.5 * tau * (t + 1.0)
            ws = 0.5 * tau * w
            f = kernels.kernel_values(kernels.F10, self.gain[:, None], s[None, :], tol)
            diag = (np.abs(f) ** 2) @ ws
            if prev is not None and np.max(np.abs(diag - prev)) <= tol * np.max(diag):
                return (f * ws) @ f.conj().T
            if n_s >= 1024:
                raise kernels.KernelConvergenceError(f"laser-term time integral unresolved at tau={tau}")
            prev = diag
            n_s *= 2

    def correlations(self, tau: float) -> CorrelationSet:
        tau = float(tau)
        if tau < 0:
            raise ValueError("tau must be non-negative")
        if tau in self._cache:
            return self._cache[tau]
        n = self.xi.size
        if tau == 0.0:
            z = np.zeros((n, n), dtype=complex)
            out = CorrelationSet(tau, self.xi, self.weights, z, z.copy(), z.copy(), np.zeros(n, complex))
            self._cache[tau] = out
            return out
        tol = self.cfg.quad_tol
        t11 = kernels.kernel_table(kernels.F11, tau, self.gain_max, tol)
        t20 = kernels.kernel_table(kernels.F20, tau, self.gain_max, tol)
        a11 = self._shifted(t11)
        a20 = self._shifted(t20)
        uw = self._uw.ravel()
        m = self._u.shape[1]

        pump = np.zeros((n, n), dtype=complex)   # sum_c w A11[a,c] A11*[b,c]
        cross = np.zeros((n, n), dtype=complex)  # sum_c w A11[b,c] A20*[a,c]
        for a in range(1, n):
            c = a * m  # panels below mesh point a
            wa11 = uw[:c] * a11[a, :c]
            pump[a, a:] = a11[a:, :c].conj() @ wa11
            cross[a, a:] = a11[a:, :c] @ (uw[:c] * a20[a, :c].conj())
            cross[a + 1:, a] = a20[a + 1:, :c].conj() @ wa11
        iu = np.triu_indices(n, 1)
        pump[(iu[1], iu[0])] = pump[iu].conj()

        laser = self._laser_term(tau)
        g1_plus = self.coupling * (laser + pump)
        g1_minus = self.coupling * pump.conj()

        jump = t11(np.maximum(self.gain[None, :] - self.gain[:, None], 0.0))
        jump = np.triu(jump)  # Theta(x2 - x1) with Theta(0) = 1
        sigma = -self.sigma_sign * self.coupling * (jump + cross)
        diag = np.arange(n)
        lower = -self.sigma_sign * self.coupling[diag, diag] * cross[diag, diag]

        out = CorrelationSet(tau, self.xi, self.weights, g1_plus, g1_minus, sigma, lower)
        self._cache[tau] = out
        return out

    # -- public operations -----------------------------------------------
    def g1_matrix(self, mode, tau) -> CorrelationGrid:
        kind = GridKind.G1_PLUS if SideMode.parse(mode) is SideMode.PLUS else GridKind.G1_MINUS
        return self.correlations(tau).grid(kind)

    def sigma_cross(self, tau) -> CorrelationGrid:
        return self.correlations(tau).grid(GridKind.SIGMA_CROSS)

    def density(self, mode, tau) -> np.ndarray:
        return self.correlations(tau).density(mode)

    def shift_indices(self, delta_xis: Sequence[float]) -> np.ndarray:
        """Mesh shifts ``k`` with ``k h`` nearest to each requested separation."""
        k = np.rint(np.asarray(delta_xis, dtype=float) / self.h).astype(int)
        if np.any(np.abs(k) >= self.xi.size):
            raise ValueError("|delta_xi| must be smaller than Lambda")
        return k

    def _diagonal(self, k):
        n = self.xi.size
        i = np.arange(max(0, -k), min(n, n - k))
        w = _trapezoid_weights(i.size, self.h) if i.size > 1 else np.zeros(i.size)
        return i, i + k, w

    def _floor(self):
        return POPULATION_FLOOR * float(self.cfg.atom_count) ** 2

    def g1_tilde(self, mode, tau, delta_xis) -> CoherenceCurve:
        mode = SideMode.parse(mode)
        cs = self.correlations(tau)
        g = cs.g1(mode)
        dens = cs.density(mode)
        ks = self.shift_indices(delta_xis)
        vals = np.full(ks.size, np.nan)
        ok = np.zeros(ks.size, dtype=bool)
        for j, k in enumerate(ks):
            i1, i2, w = self._diagonal(k)
            norm = w @ (dens[i1] * dens[i2])
            if norm <= self._floor():
                continue
            num = w @ np.abs(g[i1, i2])
            den = w @ np.sqrt(dens[i1] * dens[i2])
            vals[j] = num / den
            ok[j] = True
        side = np.where(ks < 0, "left", "right")
        return CoherenceCurve(ks * self.h, vals, float(tau), (mode, mode), 1, ok, side,
                              self.cfg.big_lambda)

    def g2_tilde(self, pair, tau, delta_xis) -> CoherenceCurve:
        m1, m2 = (SideMode.parse(p) for p in pair)
        cs = self.correlations(tau)
        d1, d2 = cs.density(m1), cs.density(m2)
        ks = self.shift_indices(delta_xis)
        cross_pair = m1 is not m2
        if cross_pair:
            if m1 is not SideMode.PLUS:
                raise ValueError("cross pair must be ordered (plus, minus)")
            rho = cs.sigma
        else:
            rho = cs.g1(m1)
        rows = []
        for k in ks:
            if cross_pair and k == 0:
                rows.append((0, "left", cs.sigma_lower_diag))
                rows.append((0, "right", None))
            else:
                rows.append((k, "left" if k < 0 else "right", None))
        vals = np.full(len(rows), np.nan)
        ok = np.zeros(len(rows), dtype=bool)
        for j, (k, _, diag_override) in enumerate(rows):
            i1, i2, w = self._diagonal(k)
            norm = w @ (d1[i1] * d2[i2])
            if norm <= self._floor():
                continue
            r = rho[i1, i2] if diag_override is None else diag_override[i1]
            vals[j] = 1.0 + (w @ np.abs(r) ** 2) / norm
            ok[j] = True
        dx = np.array([r[0] for r in rows]) * self.h
        side = np.array([r[1] for r in rows])
        return CoherenceCurve(dx, vals, float(tau), (m1, m2), 2, ok, side, self.cfg.big_lambda)

    def cauchy_schwarz_map(self, tau) -> np.ndarray:
        cs = self.correlations(tau)
        n_plus = cs.density(SideMode.PLUS)
        n_minus = cs.density(SideMode.MINUS)
        prod = np.outer(n_plus, n_minus)
        cross2 = prod + np.abs(cs.sigma) ** 2
        # G2++(x1, x1) = 2 n+^2 and G2--(x2, x2) = 2 n-^2 for a Gaussian state
        return cross2 ** 2 - 4.0 * prod ** 2

    def time_series(self, taus) -> TimeSeries:
        taus = np.asarray(taus, dtype=float)
        if np.any(taus < 0) or np.any(np.diff(taus) < 0):
            raise ValueError("taus must be sorted and non-negative")
        s, e, npl, nmi = [], [], [], []
        for tau in taus:
            cs = self.correlations(tau)
            s.append(cs.squeezing())
            e.append(cs.witness())
            npl.append(cs.population(SideMode.PLUS))
            nmi.append(cs.population(SideMode.MINUS))
        return TimeSeries(taus, np.array(s), np.array(e), np.array(npl), np.array(nmi))


def coherence_length(curve: CoherenceCurve) -> CoherenceLength:
    """Smallest positive separation where a first-order curve falls to ``1/e``.

    Linear interpolation between the bracketing samples; if the curve never
    crosses, the result is the largest sampled separation (at most ``Lambda``)
    with ``capped=True``.
    """
    if curve.order != 1:
        raise ValueError("coherence length needs a first-order curve")
    mask = (curve.delta_xi >= 0) & curve.defined
    if np.count_nonzero(mask) < 8:
        raise ValueError("need at least 8 defined samples with delta_xi >= 0")
    x = curve.delta_xi[mask]
    y = curve.values[mask]
    order = np.argsort(x)
    x, y = x[order], y[order]
    level = np.exp(-1.0)
    below = np.flatnonzero(y <= level)
    below = below[below > 0]
    if below.size == 0:
        cap = x[-1] if not np.isfinite(curve.big_lambda) else min(x[-1], curve.big_lambda)
        return CoherenceLength(float(cap), True)
    j = below[0]
    x0, x1, y0, y1 = x[j - 1], x[j], y[j - 1], y[j]
    return CoherenceLength(float(x0 + (y0 - level) * (x1 - x0) / (y0 - y1)), False)


# Functional wrappers ------------------------------------------------------

def g1_matrix(mode, tau, cfg, profile=None) -> CorrelationGrid:
    return Correlator(cfg, profile).g1_matrix(mode, tau)


def sigma_cross(tau, cfg, profile=None) -> CorrelationGrid:
    return Correlator(cfg, profile).sigma_cross(tau)


def density(mode, tau, cfg, profile=None) -> np.ndarray:
    return Correlator(cfg, profile).density(mode, tau)


def g1_tilde(mode, tau, delta_xis, cfg, profile=None) -> CoherenceCurve:
    return Correlator(cfg, profile).g1_tilde(mode, tau, delta_xis)


def g2_tilde(pair, tau, delta_xis, cfg, profile=None) -> CoherenceCurve:
    return Correlator(cfg, profile).g2_tilde(pair, tau, delta_xis)


def cauchy_schwarz_map(tau, cfg, profile=None) -> np.ndarray:
    return Correlator(cfg, profile).cauchy_schwarz_map(tau)


def squeezing_series(taus, cfg, profile=None) -> TimeSeries:
    ts = Correlator(cfg, profile).time_series(taus)
    return TimeSeries(ts.tau, squeezing=ts.squeezing)


def witness_series(taus, cfg, profile=None) -> TimeSeries:
    ts = Correlator(cfg, profile).time_series(taus)
    return TimeSeries(ts.tau, witness=ts.witness)


def populations(taus, cfg, profile=None) -> TimeSeries:
    ts = Correlator(cfg, profile).time_series(taus)
    return TimeSeries(ts.tau, populations_plus=ts.populations_plus,
                      populations_minus=ts.populations_minus)
