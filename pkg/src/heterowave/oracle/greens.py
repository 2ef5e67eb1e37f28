"""Method-of-lines Green's-kernel integrator for the side-mode equations of motion.

With the optical field adiabatically eliminated,
``e(xi) = e(0) - (i kappa / chi) int_0^xi phi (a + b)``, the fields
``a = psi_+^dagger`` and ``b = psi_-'`` obey

    da/dtau =  i kappa phi e(0, tau) + Gamma phi int_0^xi phi (a + b)
    db/dtau = -i kappa phi e(0, tau) - Gamma phi int_0^xi phi (a + b) - 2 i b

The integral is discretised with a cumulative trapezoid on the mesh and the
resulting linear system is stepped with classical RK4.  Columns of the state
are responses to discrete delta inputs ``a(xi_j, 0)`` and ``b(xi_j, 0)``
plus one column for an impulse on the optical boundary channel; by time
invariance the latter, sampled at every step, gives the response to
``e(0, tau')`` for all ``tau'``.  Nothing here uses the closed-form kernels.

Vacuum inputs: ``<b0 b0^dagger> = <a0^dagger a0> = delta`` (discretely
``1/w_j``), ``<e e^dagger> = delta(tau - tau') / chi`` and
``kappa^2 / chi = Gamma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..condensate import Profile, SimConfig, phi

__all__ = [
    "OracleInstabilityError",
    "KernelState",
    "OracleCorrelators",
    "cumulative_trapezoid_matrix",
    "evolve_kernels",
    "default_steps",
    "correlators_from_kernels",
    "commutator_residual",
    "quadrature_witness",
    "manley_rowe_report",
]


class OracleInstabilityError(RuntimeError):
    pass


def cumulative_trapezoid_matrix(weights_h: float, n: int) -> np.ndarray:
    """``T`` with ``(T f)_i = int_0^{xi_i} f`` by the trapezoidal rule."""
    t = np.tril(np.full((n, n), weights_h), -1)
    t[:, 0] = 0.5 * weights_h
    t[np.arange(n), np.arange(n)] = 0.5 * weights_h
    t[0, 0] = 0.0
    return t


def default_steps(cfg: SimConfig, tau: float) -> int:
    """Even step count with ``Gamma N dtau <= 0.01`` and ``dtau <= 0.01``."""
    dt = 0.01 / max(1.0, cfg.gain_product)
    n = max(2, math.ceil(tau / dt))
    return n + (n % 2)


@dataclass(frozen=True)
class KernelState:
    """Green's kernels at ``tau``.

    ``k_xy[i, j]`` is the response of field ``x`` at ``xi_i`` to a unit delta
    input of ``y`` at ``xi_j`` (``p`` = ``psi_+^dagger``, ``m`` = ``psi_-'``),
    i.e. the discrete matrix divided by the quadrature weight ``w_j``.
    ``e_kernel_p[:, k]`` / ``e_kernel_m[:, k]`` are the responses, per unit
    ``kappa``, to an optical impulse a time ``s_nodes[k]`` earlier.
    """

    xi: np.ndarray
    weights: np.ndarray
    tau: float
    k_pp: np.ndarray
    k_pm: np.ndarray
    k_mp: np.ndarray
    k_mm: np.ndarray
    e_kernel_p: np.ndarray
    e_kernel_m: np.ndarray
    s_nodes: np.ndarray
    gamma_coeff: float
    phi: np.ndarray

    @property
    def s_weights(self) -> np.ndarray:
        """Composite Simpson weights on ``s_nodes`` (even interval count)."""
        m = self.s_nodes.size - 1
        if m == 0:
            return np.zeros(1)
        ds = self.s_nodes[1] - self.s_nodes[0]
        w = np.ones(m + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * ds / 3.0

    def optical_gram(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """``Gamma int_0^tau left(s) right(s)^H ds`` for two response arrays."""
        return self.gamma_coeff * (left * self.s_weights) @ right.conj().T


def _generator(cfg: SimConfig, profile: Profile):
    n = cfg.n_xi
    ph = np.asarray(phi(profile, cfg, cfg.xi))
    cum = cfg.gamma_coeff * ph[:, None] * cumulative_trapezoid_matrix(cfg.h, n) * ph[None, :]
    phase = -2j * np.ones(n)

    def rhs(y):
        a, b = y[:n], y[n:]
        drive = cum @ (a + b)
        return np.concatenate([drive, -drive + phase[:, None] * b])

    return rhs, ph


def _rk4(rhs, y, dt):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve_kernels(cfg: SimConfig, profile: Profile | None = None, tau_end: float = 0.0,
                   n_steps: int | None = None) -> KernelState:
    """Integrate the Green's kernels from 0 to ``tau_end`` with ``n_steps`` RK4 steps."""
    if tau_end < 0:
        raise ValueError("tau_end must be non-negative")
    profile = profile if profile is not None else Profile.thomas_fermi(cfg)
    n = cfg.n_xi
    w = np.full(n, cfg.h)
    w[0] = w[-1] = 0.5 * cfg.h
    if n_steps is None:
        n_steps = default_steps(cfg, tau_end) if tau_end > 0 else 0
    if tau_end > 0 and (n_steps < 2 or n_steps % 2):
        raise ValueError("n_steps must be even and at least 2")
    rhs, ph = _generator(cfg, profile)

    y = np.zeros((2 * n, 2 * n + 1), dtype=complex)
    y[np.arange(2 * n), np.arange(2 * n)] = 1.0
    y[:n, -1] = 1j * ph
    y[n:, -1] = -1j * ph
    optical = [y[:, -1].copy()]

    dt = tau_end / n_steps if n_steps else 0.0
    # kernels grow like I0(2 sqrt(gamma tau)) <= exp(Gamma N + tau); log-space bound with margin
    log_bound = 2.0 * (cfg.gain_product + tau_end) + 10.0
    for _ in range(n_steps):
        y = _rk4(rhs, y, dt)
        norm = np.max(np.abs(y))
        if not np.isfinite(norm) or math.log(max(norm, 1e-300)) > log_bound:
            raise OracleInstabilityError(
                f"kernel norm {norm:.3e} exceeds bound exp({log_bound:.1f}); reduce dtau")
        optical.append(y[:, -1].copy())

    optical = np.array(optical).T  # (2n, n_steps+1), column k is time s_k
    mat = y[:, :2 * n] / np.concatenate([w, w])[None, :]
    return KernelState(
        xi=cfg.xi, weights=w, tau=float(tau_end),
        k_pp=mat[:n, :n], k_pm=mat[:n, n:], k_mp=mat[n:, :n], k_mm=mat[n:, n:],
        e_kernel_p=optical[:n], e_kernel_m=optical[n:],
        s_nodes=np.linspace(0.0, tau_end, n_steps + 1),
        gamma_coeff=cfg.gamma_coeff,
        phi=ph,
    )


class _Fields:
    """Output fields as linear forms over the vacuum input modes.

    Input modes are ``psi_+(xi_j, 0)``, ``psi_-'(xi_j, 0)`` and the optical
    channel at each stepper node.  ``alpha[f]`` holds the coefficients of
    the annihilators and ``beta[f]`` of the creators, one row per mesh point;
    ``metric`` is the vacuum norm ``<c c^dagger>`` of each input mode.
    """

    def __init__(self, state: KernelState):
        w = state.weights
        n = w.size
        ns = state.s_nodes.size
        app = state.k_pp * w[None, :]
        apm = state.k_pm * w[None, :]
        bmp = state.k_mp * w[None, :]
        bmm = state.k_mm * w[None, :]
        rp, rm = state.e_kernel_p, state.e_kernel_m
        z = np.zeros((n, n), dtype=complex)
        ze = np.zeros((n, ns), dtype=complex)
        # a = psi_+^dag: creator part on psi_+(0), annihilator part on psi_-'(0) and e
        a_alpha = np.hstack([z, apm, rp])
        a_beta = np.hstack([app, z, ze])
        b_alpha = np.hstack([z, bmm, rm])
        b_beta = np.hstack([bmp, z, ze])
        self.alpha = {
            "a": a_alpha, "adag": a_beta.conj(), "b": b_alpha, "bdag": b_beta.conj(),
        }
        self.beta = {
            "a": a_beta, "adag": a_alpha.conj(), "b": b_beta, "bdag": b_alpha.conj(),
        }
        self.metric = np.concatenate([1.0 / w, 1.0 / w, state.gamma_coeff * state.s_weights])
        self.weights = w

    def moment(self, x: str, y: str) -> np.ndarray:
        """``<X_i Y_k>`` for all mesh pairs."""
        return (self.alpha[x] * self.metric) @ self.beta[y].T

    def self_cell(self, x: str, y: str) -> np.ndarray:
        """Diagonal contribution of the input delta sitting on the output node."""
        n = self.weights.size
        idx = np.arange(n)
        out = np.zeros(n, dtype=complex)
        for block in (0, n):
            out += self.alpha[x][idx, block + idx] * self.metric[block + idx] * self.beta[y][idx, block + idx]
        return out

    def continuum_moment(self, x: str, y: str) -> np.ndarray:
        """``moment`` with the diagonal self-cell term doubled.

        The cumulative trapezoid gives an input at the output node weight
        ``h/2``, so its square enters with ``h/4`` where the trapezoid of the
        continuum product needs ``h/2``.  Off-diagonal entries are already
        trapezoid sums.  For the cross-correlator the same doubling turns the
        discrete ``Theta(0) = 1/2`` into the ``Theta(0) = 1`` convention.
        """
        m = self.moment(x, y)
        idx = np.arange(m.shape[0])
        m[idx, idx] += self.self_cell(x, y)
        return m

    def integrated(self, coeffs: dict):
        """Linear form ``sum_f c_f int X_f dxi`` as an (alpha, beta) pair."""
        al = sum(c * (self.weights @ self.alpha[f]) for f, c in coeffs.items())
        be = sum(c * (self.weights @ self.beta[f]) for f, c in coeffs.items())
        return al, be

    def pair(self, x, y) -> complex:
        return complex(np.sum(x[0] * self.metric * y[1]))


@dataclass(frozen=True)
class OracleCorrelators:
    """All second moments assembled from a :class:`KernelState`.

    Besides the three correlators with closed forms, the moments expected to
    vanish (same-mode anomalous and cross-mode normal) are returned so the
    reduced Wick formulae can be checked rather than assumed.
    """

    xi: np.ndarray
    weights: np.ndarray
    tau: float
    g1_plus: np.ndarray   # <psi+^dag(1) psi+(2)>
    g1_minus: np.ndarray  # <psi-'^dag(1) psi-'(2)>
    sigma: np.ndarray     # <psi+(1) psi-'(2)>
    anomalous_plus: np.ndarray   # <psi+(1) psi+(2)>
    anomalous_minus: np.ndarray  # <psi-'(1) psi-'(2)>
    normal_cross: np.ndarray     # <psi+^dag(1) psi-'(2)>

    def normal_variance_difference(self) -> float:
        """``<:(Delta R-)^2:>`` from the full Gaussian moment set."""
        w = self.weights

        def dbl(m):
            return float(w @ (np.abs(m) ** 2) @ w)

        return (dbl(self.g1_plus) + dbl(self.anomalous_plus) + dbl(self.g1_minus)
                + dbl(self.anomalous_minus) - 2.0 * dbl(self.normal_cross) - 2.0 * dbl(self.sigma))

    def squeezing(self) -> float:
        w = self.weights
        total = float(w @ np.real(np.diag(self.g1_plus)) + w @ np.real(np.diag(self.g1_minus)))
        return 1.0 + self.normal_variance_difference() / total if total > 0 else 1.0


def correlators_from_kernels(state: KernelState) -> OracleCorrelators:
    """Vacuum-input correlators from the Green's kernels."""
    f = _Fields(state)
    # psi_+ = a^dag, psi_+^dag = a, psi_-' = b
    sigma = f.continuum_moment("adag", "b")
    n = sigma.shape[0]
    if n >= 3:
        # Theta(0) = 1 is the xi2 -> xi1^+ limit; sigma / (phi1 phi2) is smooth on
        # the upper branch, so extrapolate along it (the discrete self-loop biases
        # the node itself by O(h))
        ph = state.phi
        i = np.flatnonzero((ph[:-2] > 0) & (ph[1:-1] > 0) & (ph[2:] > 0))
        r1 = sigma[i, i + 1] / (ph[i] * ph[i + 1])
        r2 = sigma[i, i + 2] / (ph[i] * ph[i + 2])
        sigma[i, i] = (2.0 * r1 - r2) * ph[i] ** 2
    return OracleCorrelators(
        state.xi, state.weights, state.tau,
        g1_plus=f.continuum_moment("a", "adag"),
        g1_minus=f.continuum_moment("bdag", "b"),
        sigma=sigma,
        anomalous_plus=f.moment("adag", "adag"),
        anomalous_minus=f.moment("b", "b"),
        normal_cross=f.moment("a", "b"),
    )


def commutator_residual(state: KernelState) -> float:
    """Max deviation of ``[a_i, a_k^dagger]`` and ``[b_i, b_k^dagger]`` from ``-/+ delta/w``.

    ``a = psi_+^dagger`` so its commutator is ``-delta``; the optical channel
    must be included for the identity to hold at ``tau > 0``.  The residual
    is scaled by ``1/w`` (the size of the discrete delta).
    """
    f = _Fields(state)
    w = state.weights
    target = np.diag(1.0 / w)
    ca = f.moment("a", "adag") - f.moment("adag", "a").T
    cb = f.moment("b", "bdag") - f.moment("bdag", "b").T
    scale = np.max(1.0 / w)
    return float(max(np.max(np.abs(ca + target)), np.max(np.abs(cb - target))) / scale)


def quadrature_witness(state: KernelState) -> float:
    """Separability witness from the quadrature operators themselves.

    ``A_j = int (psi_j + psi_j^dag)`` and ``B_j = i int (psi_j - psi_j^dag)``;
    variances and commutators are computed directly from the linear forms.
    """
    f = _Fields(state)
    a_sum = f.integrated({"adag": 1, "a": 1, "b": 1, "bdag": 1})
    b_diff = f.integrated({"adag": 1j, "a": -1j, "b": -1j, "bdag": 1j})
    var_a = f.pair(a_sum, a_sum).real
    var_b = f.pair(b_diff, b_diff).real
    c = 0.0
    for psi, dag in (("adag", "a"), ("b", "bdag")):
        qa = f.integrated({psi: 1, dag: 1})
        qb = f.integrated({psi: 1j, dag: -1j})
        c += abs(f.pair(qa, qb) - f.pair(qb, qa))
    return float(var_a + var_b - c)


def manley_rowe_report(cfg: SimConfig, profile: Profile | None, tau: float, dtau: float = 1e-3) -> dict:
    """Compare ``d/dtau [N+ - N-]`` with the endfire photon flux at ``xi = Lambda``.

    Reported only; the flux ``chi <e^dag e>(Lambda)`` follows from the
    eliminated optical field ``e(Lambda) = e(0) - (i kappa/chi) int phi (a+b)``.
    """
    profile = profile if profile is not None else Profile.thomas_fermi(cfg)

    def pops(t):
        c = correlators_from_kernels(evolve_kernels(cfg, profile, t))
        w = c.weights
        return float(w @ np.real(np.diag(c.g1_plus)) - w @ np.real(np.diag(c.g1_minus)))

    lo, hi = max(tau - dtau, 0.0), tau + dtau
    rate = (pops(hi) - pops(lo)) / (hi - lo)
    state = evolve_kernels(cfg, profile, tau)
    f = _Fields(state)
    ph = np.asarray(phi(profile, cfg, cfg.xi))
    w = state.weights
    # (kappa/chi)^2 chi <C C^dag> with C = int phi (a + b) gives Gamma <C C^dag>;
    # the e(0) vacuum part carries no photons and the cross term vanishes
    coeff_beta = (w * ph) @ (f.beta["a"] + f.beta["b"])
    flux = cfg.gamma_coeff * float(np.sum(np.abs(coeff_beta) ** 2 * f.metric))
    return {"tau": tau, "population_rate": rate, "photon_flux": flux,
            "relative_difference": abs(rate - flux) / max(abs(flux), 1e-300)}
