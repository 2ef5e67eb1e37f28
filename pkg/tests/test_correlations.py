import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heterowave.condensate import SimConfig, from_physical, preset
from heterowave.correlations import (CoherenceCurve, Correlator, SideMode, coherence_length,
                                     populations, squeezing_series, witness_series)
from heterowave.oracle import greens

from conftest import SP_TIMES, WP_TIMES

MODES = (SideMode.PLUS, SideMode.MINUS)


def delta_sweep(cfg, count=41):
    half = (count - 1) // 2
    stride = max((cfg.n_xi - 3) // half, 1)
    return np.arange(-half, half + 1) * stride * cfg.h


def test_zero_time_is_zero(wp_corr):
    cs = wp_corr.correlations(0.0)
    for m in (cs.g1_plus, cs.g1_minus, cs.sigma):
        assert not np.any(m)
    assert cs.squeezing() == 1.0
    assert cs.witness() == 0.0
    assert not np.any(wp_corr.cauchy_schwarz_map(0.0))
    assert populations([0.0], wp_corr.cfg).populations_plus[0] == 0.0


def test_zero_time_curve_undefined(wp_corr):
    curve = wp_corr.g1_tilde("plus", 0.0, [0.0, 10 * wp_corr.h])
    assert not curve.defined.any()
    assert np.all(np.isnan(curve.values))


def test_minus_mode_vanishes_without_gain():
    cfg = SimConfig(1046.5, 1e-30, 1_000_000, n_xi=31)
    cs = Correlator(cfg).correlations(1.0)
    assert np.max(np.abs(cs.g1_minus)) < 1e-50


@pytest.mark.parametrize("regime, taus", [("wp", WP_TIMES), ("sp", SP_TIMES)])
def test_hermitian_and_positive(regime, taus, wp_corr, sp_corr, rng):
    corr = wp_corr if regime == "wp" else sp_corr
    for tau in taus:
        cs = corr.correlations(tau)
        for g in (cs.g1_plus, cs.g1_minus):
            scale = np.max(np.abs(g))
            assert np.max(np.abs(g - g.conj().T)) <= 1e-10 * scale
            assert np.all(np.real(np.diag(g)) >= 0)
            for _ in range(20):
                c = rng.normal(size=g.shape[0]) + 1j * rng.normal(size=g.shape[0])
                c /= np.linalg.norm(c)
                assert np.real(c.conj() @ g @ c) >= -1e-9 * scale


def test_density_edges_and_ordering(wp_corr):
    for mode in MODES:
        d = wp_corr.density(mode, 4.025)
        assert d[0] == 0.0 and d[-1] == 0.0
    cs = wp_corr.correlations(4.025)
    assert cs.population("plus") > cs.population("minus")


def test_populations_monotone(sp_cfg):
    taus = np.linspace(0.0, 0.06, 7)
    ts = populations(taus, sp_cfg)
    assert np.all(np.diff(ts.populations_plus) > 0)
    assert np.all(np.diff(ts.populations_minus) > 0)


def test_wp_populations_grow(wp_corr):
    a = wp_corr.correlations(1.025).population("plus")
    b = wp_corr.correlations(4.025).population("plus")
    assert b > a > 0


def test_sigma_causal_asymmetry():
    # tiny gain: the exchange term dominates the integral term
    cfg = SimConfig(1046.5, 1e-9, 1_000_000, n_xi=41)
    cs = Correlator(cfg).correlations(1.0)
    upper = np.abs(cs.sigma[np.triu_indices(41, 1)])
    lower = np.abs(cs.sigma[np.tril_indices(41, -1)])
    inner = upper > 0
    assert np.max(lower) < 1e-3 * np.median(upper[inner])


@pytest.mark.parametrize("regime, taus", [("wp", WP_TIMES), ("sp", SP_TIMES)])
def test_normalised_coherence_at_zero(regime, taus, wp_corr, sp_corr):
    corr = wp_corr if regime == "wp" else sp_corr
    for tau in taus:
        for mode in MODES:
            assert abs(corr.g1_tilde(mode, tau, [0.0]).values[0] - 1.0) <= 1e-12
            assert abs(corr.g2_tilde((mode, mode), tau, [0.0]).values[0] - 2.0) <= 1e-6


def test_g1_symmetric_in_separation(wp_corr):
    dx = delta_sweep(wp_corr.cfg)
    curve = wp_corr.g1_tilde("minus", 1.025, dx)
    assert np.allclose(curve.values, curve.values[::-1], rtol=1e-12)


def test_g2_at_least_one(wp_corr, sp_corr):
    for corr, taus in ((wp_corr, WP_TIMES), (sp_corr, SP_TIMES)):
        dx = delta_sweep(corr.cfg)
        for tau in taus:
            for pair in ((SideMode.PLUS, SideMode.PLUS), (SideMode.MINUS, SideMode.MINUS),
                         (SideMode.PLUS, SideMode.MINUS)):
                v = corr.g2_tilde(pair, tau, dx).values
                assert np.nanmin(v) >= 1.0


def test_g2_consistent_with_shared_grid(wp_corr):
    cs = wp_corr.correlations(1.025)
    g = cs.g1_plus
    d = cs.density("plus")
    k = 12
    h = wp_corr.h
    i = np.arange(0, wp_corr.xi.size - k)
    w = np.full(i.size, h)
    w[0] = w[-1] = h / 2
    expected = 1 + (w @ np.abs(g[i, i + k]) ** 2) / (w @ (d[i] * d[i + k]))
    assert wp_corr.g2_tilde(("plus", "plus"), 1.025, [k * h]).values[0] == pytest.approx(expected, rel=1e-13)


def test_cross_pair_has_two_sided_zero(wp_corr):
    curve = wp_corr.g2_tilde(("plus", "minus"), 1.025, [0.0])
    assert list(curve.side) == ["left", "right"]
    assert curve.values[1] > curve.values[0] > 1
    with pytest.raises(ValueError):
        wp_corr.g2_tilde(("minus", "plus"), 1.025, [0.0])


def test_separation_must_fit(wp_corr):
    with pytest.raises(ValueError):
        wp_corr.g1_tilde("plus", 1.0, [wp_corr.cfg.big_lambda * 1.01])


def test_cauchy_schwarz_classical_side_at_small_time(sp_corr):
    tau = 0.005
    cs = sp_corr.correlations(tau)
    v = sp_corr.cauchy_schwarz_map(tau)
    lower = np.tril(np.ones(v.shape, dtype=bool), -1)
    prod = np.outer(cs.density("plus"), cs.density("minus"))
    ok = lower & (np.abs(cs.sigma) ** 2 < 1e-3 * prod)
    assert ok.any()
    assert np.all(v[ok] <= 0)


def test_synthetic_exponential_coherence_length():
    lam0 = 300.0
    dx = np.linspace(0.0, 1000.0, 101)
    curve = CoherenceCurve(dx, np.exp(-dx / lam0), 1.0, (SideMode.PLUS,) * 2, 1,
                           np.ones(dx.size, bool), np.array(["right"] * dx.size), 1046.5)
    res = coherence_length(curve)
    assert not res.capped
    assert abs(res.value - lam0) <= dx[1] - dx[0]


def test_constant_curve_flagged():
    dx = np.linspace(0.0, 1000.0, 51)
    curve = CoherenceCurve(dx, np.ones(dx.size), 1.0, (SideMode.PLUS,) * 2, 1,
                           np.ones(dx.size, bool), np.array(["right"] * dx.size), 1046.5)
    res = coherence_length(curve)
    assert res.capped and res.value <= 1046.5


def test_coherence_length_needs_samples():
    dx = np.linspace(0.0, 1.0, 5)
    curve = CoherenceCurve(dx, np.ones(5), 1.0, (SideMode.PLUS,) * 2, 1, np.ones(5, bool),
                           np.array(["right"] * 5))
    with pytest.raises(ValueError):
        coherence_length(curve)


@settings(max_examples=25, deadline=None)
@given(st.floats(10.0, 900.0))
def test_exponential_length_property(lam0):
    dx = np.linspace(0.0, 1000.0, 201)
    curve = CoherenceCurve(dx, np.exp(-dx / lam0), 1.0, (SideMode.MINUS,) * 2, 1,
                           np.ones(dx.size, bool), np.array(["right"] * dx.size), 1046.5)
    assert abs(coherence_length(curve).value - lam0) <= dx[1]


def test_series_wrappers(wp_cfg):
    taus = [0.0, 0.5, 1.0]
    s = squeezing_series(taus, wp_cfg)
    e = witness_series(taus, wp_cfg)
    assert s.squeezing[0] == 1.0 and e.witness[0] == 0.0
    with pytest.raises(ValueError):
        squeezing_series([1.0, 0.5], wp_cfg)


def test_wick_reductions_match_oracle(wp_cfg):
    # variance numerator and witness cross-checked against the full kernel moments
    st_ = greens.evolve_kernels(wp_cfg, None, 1.025)
    oc = greens.correlators_from_kernels(st_)
    cs = Correlator(wp_cfg).correlations(1.025)
    assert cs.witness() == pytest.approx(greens.quadrature_witness(st_), rel=1e-3)
    # the oracle evaluates the diagonal pointwise, so compare at the O(h) level
    assert cs.normal_variance_difference() == pytest.approx(oc.normal_variance_difference(), rel=5e-2)


def test_mesh_convergence_of_observables():
    for label, tau in (("wp", 1.025), ("sp", 0.03)):
        vals = []
        for n in (101, 201):
            cs = Correlator(from_physical(preset(label), n)).correlations(tau)
            vals.append((cs.squeezing() - 1.0, cs.witness()))
        (s1, e1), (s2, e2) = vals
        assert abs(s1 - s2) <= 1e-2 * abs(s2)
        assert abs(e1 - e2) <= 1e-2 * abs(e2)
