import numpy as np
import pytest

from memres.errors import ConfigurationError
from memres.esn import EsnConfig, build_esn, simulate_esn
from memres.signals import SignalConfig, TimeGrid, generate_input

from conftest import constant


@pytest.fixture(scope="module")
def esn():
    return build_esn(EsnConfig())


@pytest.fixture(scope="module")
def drive():
    return generate_input(SignalConfig(TimeGrid.span(200.0, 0.05), seed=0))


def test_sparse_construction(esn):
    W = esn.W
    assert W.shape == (780, 780)
    assert W.nnz == 7800
    np.testing.assert_array_equal(np.diff(W.indptr), 10)
    vals = np.unique(np.abs(W.data))
    assert vals.size == 1
    assert abs(esn.spectral_radius() - 0.95) < 1e-6
    assert np.all(np.abs(esn.r_b) <= 0.2) and np.all(np.abs(esn.r_i) <= 0.1)
    assert np.ptp(esn.r_b) > 0.3 and np.ptp(esn.r_i) > 0.15


def test_determinism_and_seed_dependence():
    a, b = build_esn(EsnConfig(size=60, fanout=5, seed=4)), build_esn(EsnConfig(size=60, fanout=5, seed=4))
    assert (a.W != b.W).nnz == 0
    np.testing.assert_array_equal(a.r_b, b.r_b)
    assert a.to_csv_string() == b.to_csv_string()
    c = build_esn(EsnConfig(size=60, fanout=5, seed=5))
    assert (a.W != c.W).nnz > 0


def test_zero_bias_scale():
    r = build_esn(EsnConfig(size=50, fanout=4, bias_scale=0.0))
    np.testing.assert_array_equal(r.r_b, 0.0)


@pytest.mark.parametrize("kw", [dict(spectral_radius=1.0), dict(spectral_radius=0.0), dict(fanout=0),
                                dict(size=5, fanout=6), dict(dt=0.0), dict(bias_scale=-1.0)])
def test_invalid_config(kw):
    with pytest.raises(ConfigurationError):
        EsnConfig(**kw)


def test_zero_input_zero_bias_is_fixed_point():
    r = build_esn(EsnConfig(size=100, fanout=10, bias_scale=0.0))
    x = simulate_esn(r, constant(TimeGrid.span(20, 0.05), 0.0)).values
    assert np.all(x == 0.0)


def test_bounded(esn, drive):
    x = simulate_esn(esn, drive.scaled(20.0)).values
    assert np.max(np.abs(x)) <= 1.0 + 0.05


def test_sub_stepping_and_interpolated_grids(drive):
    r = build_esn(EsnConfig(size=80, fanout=8, dt=0.025))
    fine = simulate_esn(r, drive).values
    r2 = build_esn(EsnConfig(size=80, fanout=8, dt=0.03))
    odd = simulate_esn(r2, drive).values
    assert fine.shape == odd.shape == (drive.grid.n_steps, 80)
    assert np.sqrt(np.mean((fine - odd) ** 2)) < 5e-3


def _echo_distance(seed, drive):
    r = build_esn(EsnConfig(seed=seed))
    x0 = np.random.default_rng(seed).uniform(-1, 1, r.size)
    a = simulate_esn(r, drive).values
    b = simulate_esn(r, drive, x0=x0).values
    return np.linalg.norm(a - b, axis=1)


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_echo_state_convergence(seed, drive):
    d = _echo_distance(seed, drive)
    g = drive.grid
    assert np.all(np.diff(d) <= 1e-12)
    assert d[g.index(150.0)] < 1e-6
    # roughly geometric decay between t=50 and t=150
    assert d[g.index(150.0)] < 1e-4 * d[g.index(50.0)]


@pytest.mark.xfail(strict=True, reason="unit-scale initial differences decay at about e^-0.15t, so t=50 leaves ~1e-3")
def test_echo_state_within_fifty_seconds(drive):
    d = _echo_distance(0, drive)
    assert d[drive.grid.index(50.0)] < 1e-6
