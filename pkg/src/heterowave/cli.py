"""Command-line front end: figure-ready CSV data and the verification suite.

Every command writes CSV files (``#`` metadata lines, one header line,
12 significant digits) plus a ``manifest.json`` listing them.

Exit codes: 0 success, 1 invalid input, 2 verification failure,
3 numerical non-convergence.
"""
from __future__ import annotations

import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import click
import numpy as np

from . import __version__, kernels
from .condensate import (ConfigError, PhysicalParams, Profile, Regime, SimConfig,
                         load_config_file, preset)
from .correlations import Correlator, SideMode, coherence_length
from .oracle.greens import OracleInstabilityError
from .oracle.laplace import LaplaceConvergenceError

log = logging.getLogger("heterowave")

EXIT_OK, EXIT_INPUT, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3

FIGURE_TAUS = {"wp": (1.025, 4.025), "sp": (0.03025, 0.12075)}
SERIES_GAMMA_N_TAU = tuple(np.round(np.linspace(0.0, 6.0, 25), 10))


class VerificationFailed(click.ClickException):
    exit_code = EXIT_VERIFY


@dataclass
class RunManifest:
    command: str
    arguments: dict
    config: dict
    physical: dict
    tool_version: str = __version__
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, default=str) + "\n")
        return path


@dataclass(frozen=True)
class Run:
    cfg: SimConfig
    physical: PhysicalParams
    regime: str
    out_dir: Path
    delta_points: int


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, str):
        return value
    return format(float(value), ".12g")


def write_csv(path: Path, header, rows, meta: dict) -> Path:
    with open(path, "w", newline="\n") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}: {value}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _metadata(run: Run, **extra) -> dict:
    cfg = run.cfg
    meta = {
        "regime": run.regime.upper(),
        "gamma_n": _fmt(cfg.gain_product),
        "Lambda": _fmt(cfg.big_lambda),
        "n_xi": cfg.n_xi,
        "quad_tol": _fmt(cfg.quad_tol),
        "version": __version__,
    }
    meta.update({k: _fmt(v) if isinstance(v, float) else v for k, v in extra.items()})
    return meta


def _parse_taus(text):
    if text is None:
        return None
    try:
        taus = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise click.BadParameter(f"expected a comma-separated list of numbers, got {text!r}",
                                 param_hint="--tau") from None
    if not taus:
        raise click.BadParameter("empty list", param_hint="--tau")
    if any(t < 0 or not math.isfinite(t) for t in taus):
        raise click.BadParameter("tau values must be finite and non-negative", param_hint="--tau")
    return tuple(sorted(taus))


def build_run(regime, gamma_n, big_lambda, n_xi, tau, delta_points, out_dir, quad_tol,
              config_path, default_taus=(), default_mesh=201) -> Run:
    """Assemble the run configuration with flag > file > preset precedence."""
    phys = preset(regime)
    file_values = load_config_file(config_path) if config_path else {}
    updates = {}
    for key, attr in (("atom_count", "atom_count"), ("length_m", "length"),
                      ("laser_wavenumber_per_m", "laser_wavenumber"), ("gamma_n", "gain_product")):
        if key in file_values:
            updates[attr] = file_values[key]
    if gamma_n is not None:
        updates["gain_product"] = gamma_n
    try:
        phys = replace(phys, **updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    mesh = n_xi if n_xi is not None else file_values.get("n_xi", default_mesh)
    taus = _parse_taus(tau)
    if taus is None:
        taus = tuple(sorted(file_values.get("tau_list", ()))) or tuple(default_taus)
    tol = quad_tol if quad_tol is not None else file_values.get("quad_tol", kernels.DEFAULT_RTOL)
    lam = big_lambda if big_lambda is not None else phys.laser_wavenumber * phys.length
    if not tol > 0:
        raise click.BadParameter("must be positive", param_hint="--quad-tol")
    if delta_points < 8:
        raise click.BadParameter("need at least 8 points", param_hint="--delta-xi-points")
    cfg = SimConfig(
        big_lambda=lam,
        gamma_coeff=phys.gain_product / phys.atom_count,
        atom_count=phys.atom_count,
        n_xi=mesh,
        tau_values=taus,
        quad_tol=tol,
        regime_label=Regime.from_gain(phys.gain_product),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return Run(cfg, phys, regime.lower(), out, delta_points)


def _delta_grid(cfg: SimConfig, points: int) -> np.ndarray:
    """Evenly strided mesh multiples, symmetric about zero, keeping at least two overlap nodes."""
    kmax = cfg.n_xi - 2
    half = max((points - 1) // 2, 1)
    stride = max(kmax // half, 1)
    half = min(half, kmax // stride)
    return np.arange(-half, half + 1) * stride * cfg.h


def common_options(func):
    options = [
        click.option("--regime", type=click.Choice(["wp", "sp"], case_sensitive=False), default="wp",
                     show_default=True, help="Parameter preset (Gamma N = 1 or 100)."),
        click.option("--gamma-n", type=float, default=None, help="Override the gain Gamma N."),
        click.option("--lambda", "big_lambda", type=float, default=None,
                     help="Override the dimensionless condensate length Lambda = k_l L."),
        click.option("--n-xi", type=click.IntRange(min=3), default=None, help="Mesh size on [0, Lambda]."),
        click.option("--tau", default=None, help="Comma-separated list of dimensionless times."),
        click.option("--delta-xi-points", "delta_points", type=int, default=101, show_default=True,
                     help="Number of separations sampled for coherence curves."),
        click.option("--out-dir", type=click.Path(file_okay=False), default="heterowave-out",
                     show_default=True),
        click.option("--quad-tol", type=float, default=None, help="Relative quadrature tolerance."),
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="key = value configuration file."),
    ]
    for opt in reversed(options):
        func = opt(func)
    return func


def _finish(ctx, run: Run, outputs, start):
    manifest = RunManifest(
        command=ctx.command_path,
        arguments={k: v for k, v in ctx.params.items()},
        config=asdict(run.cfg),
        physical=asdict(run.physical),
        wall_time=round(time.perf_counter() - start, 3),
        outputs=[str(p) for p in outputs],
    )
    manifest.write(run.out_dir)
    for p in outputs:
        click.echo(str(p))


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True)
def cli(verbose):
    """Correlations of counter-propagating side modes in superradiant Rayleigh scattering."""
    logging.basicConfig(level=logging.WARNING - 10 * verbose, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@common_options
@click.option("--mode", type=click.Choice(["plus", "minus", "both"]), default="both", show_default=True)
@click.pass_context
def coherence(ctx, regime, gamma_n, big_lambda, n_xi, tau, delta_points, out_dir, quad_tol,
              config_path, mode):
    """First-order coherence curves and coherence lengths."""
    start = time.perf_counter()
    run = build_run(regime, gamma_n, big_lambda, n_xi, tau, delta_points, out_dir, quad_tol,
                    config_path, FIGURE_TAUS[regime.lower()])
    corr = Correlator(run.cfg)
    dx = _delta_grid(run.cfg, run.delta_points)
    modes = [SideMode.PLUS, SideMode.MINUS] if mode == "both" else [SideMode.parse(mode)]
    outputs, summary = [], []
    for m in modes:
        for t in run.cfg.tau_values:
            curve = corr.g1_tilde(m, t, dx)
            rows = [(x, v if ok else float("nan")) for x, v, ok in zip(curve.delta_xi, curve.values, curve.defined)]
            path = run.out_dir / f"g1_{m.value}_tau{t:.6g}.csv"
            outputs.append(write_csv(path, ("delta_xi", "g1_tilde"), rows,
                                     _metadata(run, mode=m.value, tau=t)))
            if np.count_nonzero(curve.defined & (curve.delta_xi >= 0)) >= 8:
                lam = coherence_length(curve)
                summary.append((m.value, t, lam.value / run.cfg.big_lambda, lam.capped))
            else:
                summary.append((m.value, t, float("nan"), False))
    outputs.append(write_csv(run.out_dir / "coherence_lengths.csv",
                             ("mode", "tau", "lambda_over_Lambda", "capped"), summary, _metadata(run)))
    _finish(ctx, run, outputs, start)


@cli.command()
@common_options
@click.pass_context
def crosscorr(ctx, regime, gamma_n, big_lambda, n_xi, tau, delta_points, out_dir, quad_tol, config_path):
    """Normalised density cross-correlation between the two side modes."""
    start = time.perf_counter()
    run = build_run(regime, gamma_n, big_lambda, n_xi, tau, delta_points, out_dir, quad_tol,
                    config_path, FIGURE_TAUS[regime.lower()])
    corr = Correlator(run.cfg)
    dx = _delta_grid(run.cfg, run.delta_points)
    outputs = []
    for t in run.cfg.tau_values:
        curve = corr.g2_tilde((SideMode.PLUS, SideMode.MINUS), t, dx)
        rows = [(x, v if ok else float("nan"), s)
                for x, v, ok, s in zip(curve.delta_xi, curve.values, curve.defined, curve.side)]
        path = run.out_dir / f"g2_cross_tau{t:.6g}.csv"
        outputs.append(write_csv(path, ("delta_xi", "g2_cross", "side"), rows, _metadata(run, tau=t)))
    _finish(ctx, run, outputs, start)


@cli.command()
@common_options
@click.option("--gamma-n-tau", "gnt", type=float, default=3.0, show_default=True,
              help="Gamma N tau of the Cauchy-Schwarz map.")
@click.pass_context
def nonclassical(ctx, regime, gamma_n, big_lambda, n_xi, tau, delta_points, out_dir, quad_tol,
                 config_path, gnt):
    """Cauchy-Schwarz map plus squeezing and separability-witness time series."""
    start = time.perf_counter()
    if gnt < 0:
        raise click.BadParameter("must be non-negative", param_hint="--gamma-n-tau")
    run = build_run(regime, gamma_n, big_lambda, n_xi, tau, delta_points, out_dir, quad_tol, config_path)
    outputs = []
    corr = Correlator(run.cfg)
    t_map = gnt / run.cfg.gain_product
    vmap = corr.cauchy_schwarz_map(t_map)
    xi = run.cfg.xi
    rows = ((xi[i], xi[j], vmap[i, j]) for i in range(xi.size) for j in range(xi.size))
    outputs.append(write_csv(run.out_dir / "cauchy_schwarz_map.csv", ("xi1", "xi2", "V"), rows,
                             _metadata(run, tau=t_map, gamma_n_tau=gnt)))
    for label in ("wp", "sp"):
        if label == run.regime:
            series_run = run
        else:
            series_run = build_run(label, None, big_lambda, n_xi, None, delta_points, out_dir,
                                   quad_tol, config_path)
        cfg = series_run.cfg
        if tau is not None and label == run.regime:
            taus = np.asarray(cfg.tau_values)
        else:
            taus = np.asarray(SERIES_GAMMA_N_TAU) / cfg.gain_product
        ts = Correlator(cfg).time_series(taus)
        rows = zip(ts.tau, ts.tau * cfg.gain_product, ts.squeezing, ts.witness,
                   ts.populations_plus, ts.populations_minus)
        outputs.append(write_csv(run.out_dir / f"series_{label}.csv",
                                 ("tau", "gamma_n_tau", "S", "E", "N_plus", "N_minus"), rows,
                                 _metadata(series_run)))
    _finish(ctx, run, outputs, start)


@cli.command()
@common_options
@click.option("--quick", is_flag=True, help="Kernel-level checks only.")
@click.option("--mutate-sigma", is_flag=True, hidden=True, help="Flip the sign of sigma (self-test).")
@click.pass_context
def verify(ctx, regime, gamma_n, big_lambda, n_xi, tau, delta_points, out_dir, quad_tol, config_path,
           quick, mutate_sigma):
    """Cross-check the closed forms against both oracles."""
    from .verify import run_verification

    start = time.perf_counter()
    run = build_run(regime, gamma_n, big_lambda, n_xi, tau, delta_points, out_dir, quad_tol,
                    config_path, (1.025,), default_mesh=101)
    check_tau = run.cfg.tau_values[-1] if run.cfg.tau_values else 1.025
    report = run_verification(run.cfg, quick=quick, tau=check_tau,
                              sigma_sign=-1.0 if mutate_sigma else 1.0)
    path = run.out_dir / "verify_report.tsv"
    report.write(path)
    _finish(ctx, run, [path], start)
    failed = [c.name for c in report.checks if not c.passed]
    if failed:
        raise VerificationFailed("failed checks: " + ", ".join(failed))


_NUMERIC_ERRORS = (kernels.KernelConvergenceError, LaplaceConvergenceError, OracleInstabilityError)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="heterowave", standalone_mode=False)
    except VerificationFailed as exc:
        exc.show()
        return EXIT_VERIFY
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_INPUT
    except click.ClickException as exc:
        exc.show()
        return EXIT_INPUT
    except _NUMERIC_ERRORS as exc:
        click.echo(f"error: numerical non-convergence: {exc}", err=True)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INPUT
    return EXIT_OK


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
