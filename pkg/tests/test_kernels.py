import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heterowave import kernels
from heterowave.kernels import ALL_KERNELS, F01, F02, F10, F11, F20, KernelId

# Frozen from a 40-digit double-series inversion of the Laplace image
# exp(g/p - g/(p+2i)) p^-mu (p+2i)^-nu, summed term by term with mpmath.hyp1f1.
FROZEN = [
    (F10, 1.0, 1.0, 1.490315715469639334950 + 0.761896440035568510885j),
    (F11, 1.0, 1.0, 0.699484430046781618242 - 0.532437760353877571336j),
    (F20, 1.0, 2.0, 3.450150945509945014252 + 1.583458837153551067076j),
    (F02, 0.5, 3.0, 0.847638342581675684808 + 0.536436572104432183750j),
    (F01, 0.5, 3.0, 0.124965235780759768618 - 0.476258623519376443262j),
]


@pytest.mark.parametrize("kid, g, t, expected", FROZEN)
def test_frozen_reference_values(kid, g, t, expected):
    assert abs(kernels.eval_kernel(kid, g, t) - expected) < 1e-10


def test_only_five_pairs_constructible():
    assert {(k.mu, k.nu) for k in ALL_KERNELS} == {(1, 0), (0, 1), (1, 1), (2, 0), (0, 2)}
    for bad in ((0, 0), (2, 1), (1, 2), (3, 0)):
        with pytest.raises(ValueError):
            KernelId(*bad)
    assert KernelId.parse("F11") == F11


@pytest.mark.parametrize("g", [0.0, 0.7, 50.0])
def test_initial_values(g):
    t = 1e-9
    assert kernels.eval_kernel(F10, g, t) == pytest.approx(1.0, abs=1e-6)
    assert kernels.eval_kernel(F01, g, t) == pytest.approx(1.0, abs=1e-6)
    for kid in (F11, F20, F02):
        assert abs(kernels.eval_kernel(kid, g, t)) < 1e-6


@pytest.mark.parametrize("z", [0.3, 1.0, 2.5, 4.9])
def test_zero_gain_limits(z):
    assert kernels.eval_kernel(F11, 0.0, z) == pytest.approx((1 - np.exp(-2j * z)) / 2j, abs=1e-13)
    assert kernels.eval_kernel(F02, 0.0, z) == pytest.approx(z * np.exp(-2j * z), abs=1e-13)
    assert kernels.eval_kernel(F10, 0.0, z) == pytest.approx(1.0, abs=1e-13)
    assert kernels.eval_kernel(F20, 0.0, z) == pytest.approx(z, abs=1e-13)


def test_causality_exact_zero():
    g = np.array([0.0, 1.0, 100.0])
    for kid in ALL_KERNELS:
        v = kernels.kernel_values(kid, g, -0.5)
        assert np.all(v == 0)


def test_finite_on_declared_range():
    g, t = np.meshgrid(np.linspace(0, 200, 9), np.linspace(0, 10, 9))
    for kid in ALL_KERNELS:
        assert np.all(np.isfinite(kernels.kernel_values(kid, g, t)))


@pytest.mark.parametrize("g, taus, tol", [
    (0.0, [0.5, 1.0], 1e-8),
    (1.0, [0.5, 1.0, 2.0, 4.0], 1e-6),
    (100.0, [0.03, 0.12], 1e-5),
])
def test_identity_residuals(g, taus, tol):
    assert np.all(kernels.kernel_identity_residuals(g, taus) <= tol)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 100.0), st.floats(0.0, 5.0))
def test_identities_random(g, t):
    assert np.all(kernels.kernel_identity_residuals(g, [t]) <= 1e-6)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(ALL_KERNELS), st.floats(0.0, 20.0), st.floats(0.01, 4.0))
def test_continuity_in_tau(kid, g, t):
    h = 1e-7
    a = kernels.eval_kernel(kid, g, t)
    b = kernels.eval_kernel(kid, g, t + h)
    assert abs(a - b) <= 1e-4 * max(1.0, abs(a))


def test_vectorised_matches_scalar():
    g = np.array([0.0, 0.3, 7.0, 90.0])
    t = np.array([0.1, 1.0, 0.05, 0.12])
    for kid in ALL_KERNELS:
        vec = kernels.kernel_values(kid, g, t)
        sca = [kernels.eval_kernel(kid, a, b) for a, b in zip(g, t)]
        assert np.allclose(vec, sca, rtol=1e-12, atol=1e-14)


def test_negative_gain_rejected():
    with pytest.raises(ValueError):
        kernels.eval_kernel(F10, -1.0, 1.0)


def test_single_node_grid():
    grid = kernels.build_grid(F11, [0.0], [0.0])
    assert grid(0.0, 0.0) == 0


def test_two_by_two_grid_reproduces_nodes():
    grid = kernels.build_grid(F10, [0.0, 1.0], [0.5, 1.0])
    for i, g in enumerate(grid.gammas):
        for j, t in enumerate(grid.taus):
            assert grid(g, t) == grid.values[i, j]
            assert grid.values[i, j] == kernels.eval_kernel(F10, g, t)


def test_grid_interpolation_accuracy():
    ax = np.linspace(0.0, 1.0, 11)
    grid = kernels.build_grid(F10, ax, ax)
    mids = 0.5 * (ax[1:] + ax[:-1])
    gg, tt = np.meshgrid(mids, mids, indexing="ij")
    err = np.max(np.abs(grid(gg, tt) - kernels.kernel_values(F10, gg, tt)))
    assert err <= 1e-6


def test_grid_rejects_unsorted():
    with pytest.raises(ValueError):
        kernels.build_grid(F10, [1.0, 0.0], [0.5])


def test_kernel_table_matches_direct():
    table = kernels.kernel_table(F11, 1.025, 1.0)
    g = np.linspace(0.0, 1.0, 37)
    assert np.max(np.abs(table(g) - kernels.kernel_values(F11, g, 1.025))) < 1e-9


def test_kernel_dump(tmp_path):
    recs = [kernels.KernelValue(k, 1.0, 1.0, kernels.eval_kernel(k, 1.0, 1.0)) for k in ALL_KERNELS]
    path = tmp_path / "dump.csv"
    kernels.write_kernel_dump(path, recs)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["kernel_id", "gamma", "tau", "re", "im"]
    assert len(rows) == 6
    assert complex(float(rows[1][3]), float(rows[1][4])) == pytest.approx(recs[0].value, abs=1e-11)


def test_bicubic_still_available():
    ax = np.linspace(0.0, 1.0, 5)
    grid = kernels.build_grid(F10, ax, ax, interpolation_order=3)
    assert grid.interpolation_order == 3
    assert grid(0.5, 0.5) == kernels.eval_kernel(F10, 0.5, 0.5)
