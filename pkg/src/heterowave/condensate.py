"""Condensate profile, cumulative gain and dimensionless configuration.

Lengths are measured in ``xi = k_l z`` and times in ``tau = 2 omega_r t``.  The
dimensionless wavefunction is normalised so that ``int_0^Lambda phi^2 dxi = N``;
the cumulative gain between two points is

    gamma(xi_hi, xi_lo) = Gamma * int_{xi_lo}^{xi_hi} phi^2,

so the full-condensate gain is ``Gamma N`` and ``Gamma N`` is the only gain
parameter the correlators depend on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.constants import hbar, atomic_mass

__all__ = [
    "Regime",
    "PhysicalParams",
    "SimConfig",
    "Profile",
    "REFERENCE_PARAMS",
    "RB87_MASS",
    "phi",
    "gamma_cum",
    "from_physical",
    "preset",
    "load_config_file",
    "ConfigError",
]

RB87_MASS = 86.909180527 * atomic_mass


class Regime(str, Enum):
    WP = "WP"
    SP = "SP"

    @classmethod
    def from_gain(cls, gain_product: float) -> "Regime":
        return cls.WP if gain_product <= 10.0 else cls.SP


@dataclass(frozen=True)
class PhysicalParams:
    atom_count: int
    length: float  # m
    laser_wavenumber: float  # 1/m
    atom_mass: float = RB87_MASS  # kg
    gain_product: float = 1.0

    def __post_init__(self):
        for name in ("atom_count", "length", "laser_wavenumber", "atom_mass", "gain_product"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")

    @property
    def recoil_frequency(self) -> float:
        """omega_r = hbar k_l^2 / (2 M) in rad/s."""
        return hbar * self.laser_wavenumber ** 2 / (2.0 * self.atom_mass)

    @property
    def seconds_per_tau(self) -> float:
        return 1.0 / (2.0 * self.recoil_frequency)

    @property
    def meters_per_xi(self) -> float:
        return 1.0 / self.laser_wavenumber


REFERENCE_PARAMS = PhysicalParams(
    atom_count=1_000_000, length=130e-6, laser_wavenumber=8.05e6, gain_product=1.0
)


@dataclass(frozen=True)
class SimConfig:
    big_lambda: float
    gamma_coeff: float
    atom_count: int
    n_xi: int = 201
    tau_values: tuple = ()
    quad_tol: float = 1e-8
    regime_label: Regime = Regime.WP

    def __post_init__(self):
        if not self.big_lambda > 0:
            raise ValueError("big_lambda must be positive")
        if not self.gamma_coeff > 0:
            raise ValueError("gamma_coeff must be positive")
        if self.atom_count <= 0:
            raise ValueError("atom_count must be positive")
        if self.n_xi < 3:
            raise ValueError("n_xi must be at least 3")
        taus = tuple(float(t) for t in self.tau_values)
        if any(t < 0 for t in taus) or list(taus) != sorted(taus):
            raise ValueError("tau_values must be non-negative and sorted")
        object.__setattr__(self, "tau_values", taus)
        object.__setattr__(self, "regime_label", Regime(self.regime_label))

    @property
    def gain_product(self) -> float:
        return self.gamma_coeff * self.atom_count

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(0.0, self.big_lambda, self.n_xi)

    @property
    def h(self) -> float:
        return self.big_lambda / (self.n_xi - 1)

    def with_mesh(self, n_xi: int) -> "SimConfig":
        return replace(self, n_xi=n_xi)


@dataclass(frozen=True)
class Profile:
    """Condensate wavefunction on ``[0, Lambda]`` (zero outside).

    ``shape`` is ``"thomas-fermi"`` or ``"custom"``; custom profiles carry a
    sample table ``(xi, phi)`` which is rescaled on construction so
    ``int phi^2 = atom_count``.
    """

    big_lambda: float
    atom_count: int
    shape: str = "thomas-fermi"
    samples: tuple | None = None
    _cum: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.shape == "thomas-fermi":
            return
        if self.shape != "custom" or self.samples is None:
            raise ValueError("custom profiles need a (xi, phi) sample table")
        xs, ps = (np.asarray(a, dtype=float) for a in self.samples)
        if xs.ndim != 1 or xs.shape != ps.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise ValueError("sample table must be two increasing 1-D arrays of equal length")
        dens = ps ** 2
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
        scale = self.atom_count / cum[-1]
        object.__setattr__(self, "samples", (xs, ps * math.sqrt(scale)))
        object.__setattr__(self, "_cum", (xs, dens * scale, cum * scale))

    @classmethod
    def thomas_fermi(cls, cfg: SimConfig) -> "Profile":
        return cls(cfg.big_lambda, cfg.atom_count)

    @property
    def norm(self) -> float:
        if self.shape == "thomas-fermi":
            return float(self.atom_count)
        return float(self._cum[2][-1])

    def density(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.shape == "thomas-fermi":
            lam = self.big_lambda
            inside = (xi >= 0) & (xi <= lam)
            return np.where(inside, 6.0 * self.atom_count * (lam * xi - xi * xi) / lam ** 3, 0.0)
        xs, dens, _ = self._cum
        return np.interp(xi, xs, dens, left=0.0, right=0.0)

    def cumulative(self, xi):
        """``int_0^xi phi^2`` with ``xi`` clamped to the support."""
        lam = self.big_lambda
        x = np.clip(np.asarray(xi, dtype=float), 0.0, lam)
        if self.shape == "thomas-fermi":
            return 6.0 * self.atom_count * (lam * x * x / 2.0 - x ** 3 / 3.0) / lam ** 3
        xs, dens, cum = self._cum
        # exact integral of the piecewise-linear density
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
        dx = x - xs[i]
        slope = (dens[i + 1] - dens[i]) / (xs[i + 1] - xs[i])
        return cum[i] + dens[i] * dx + 0.5 * slope * dx * dx


def phi(profile: Profile, cfg: SimConfig, xi):
    """Condensate wavefunction value(s); zero outside ``[0, Lambda]``."""
    out = np.sqrt(np.maximum(profile.density(xi), 0.0))
    return float(out) if np.ndim(out) == 0 else out


def gamma_cum(profile: Profile, cfg: SimConfig, xi_hi, xi_lo):
    """Cumulative gain ``Gamma * int_{xi_lo}^{xi_hi} phi^2`` (arguments clamped)."""
    out = cfg.gamma_coeff * (profile.cumulative(xi_hi) - profile.cumulative(xi_lo))
    return float(out) if np.ndim(out) == 0 else out


def from_physical(p: PhysicalParams, mesh: int = 201, taus: Sequence[float] = (),
                  quad_tol: float = 1e-8) -> SimConfig:
    """Dimensionless configuration for physical parameters ``p``."""
    if mesh < 3:
        raise ValueError("mesh must be at least 3")
    return SimConfig(
        big_lambda=p.laser_wavenumber * p.length,
        gamma_coeff=p.gain_product / p.atom_count,
        atom_count=p.atom_count,
        n_xi=mesh,
        tau_values=tuple(sorted(taus)),
        quad_tol=quad_tol,
        regime_label=Regime.from_gain(p.gain_product),
    )


def preset(regime: str) -> PhysicalParams:
    """Physical parameters of the weak-pulse (``wp``) or strong-pulse (``sp``) runs."""
    key = regime.strip().lower()
    if key == "wp":
        return replace(REFERENCE_PARAMS, gain_product=1.0)
    if key == "sp":
        return replace(REFERENCE_PARAMS, gain_product=100.0)
    raise ValueError(f"unknown regime {regime!r}; expected 'wp' or 'sp'")


_CONFIG_KEYS = {
    "atom_count": int,
    "length_m": float,
    "laser_wavenumber_per_m": float,
    "gamma_n": float,
    "n_xi": int,
    "tau_list": lambda v: tuple(float(t) for t in v.split(",") if t.strip()),
    "quad_tol": float,
}


class ConfigError(ValueError):
    pass


def load_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment.

    Returns a dict of typed values.  Unknown keys and malformed lines raise
    :class:`ConfigError` naming the offending line.
    """
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return values
