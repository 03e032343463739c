import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from memres.graph import triangular_lattice
from memres.memristor import (
    MemristorParams,
    integrate_sources,
    lattice_weights,
    make_isolated,
    make_lattice_network,
    make_opposed_pair,
    make_single,
    make_solver,
    simulate_network,
    volterra_oracle,
    volterra_terms,
)
from memres.signals import SignalConfig, TimeGrid, Trajectory, generate_input

from conftest import constant

P = MemristorParams(3.0, 3.0, 0.8)


def test_params_validation_and_derived_values():
    assert P.R_on == pytest.approx(0.2)
    assert P.resistance(1.0) == pytest.approx(0.2)
    for kw in (dict(alpha=0), dict(beta=-1), dict(chi=1.0), dict(chi=-0.1)):
        with pytest.raises(ValueError):
            MemristorParams(**kw)
    with pytest.raises(ValueError):
        MemristorParams(chi=0.5, R_off=1.0, R_on=0.2)
    assert MemristorParams(chi=0.5, R_off=2.0, R_on=1.0).chi == 0.5
    assert P.contraction_bound() == pytest.approx(0.2**2 * 9 / 0.8)
    assert math.isinf(MemristorParams(chi=0.0).contraction_bound())


def test_zero_drive_decay_is_euler_exponential():
    g = TimeGrid.span(2.0, 0.02)
    eta = simulate_network(make_single(P), constant(g, 0.0), eta0=[0.9]).values[:, 0]
    k = np.arange(g.n_steps)
    np.testing.assert_allclose(eta, 0.9 * (1 - 3.0 * 0.02) ** k, rtol=1e-12)
    fine = simulate_network(make_single(P), constant(g, 0.0), dt_internal=1e-4, eta0=[0.9]).values[:, 0]
    np.testing.assert_allclose(fine, 0.9 * np.exp(-3.0 * g.times), rtol=1e-3)


def test_constant_drive_steady_state():
    g = TimeGrid.span(20.0, 0.05)
    eta = simulate_network(make_single(P), constant(g, 0.9)).values[-1, 0]
    expected = (1 - math.sqrt(0.68)) / 1.6
    assert expected == pytest.approx(0.10961, abs=1e-5)
    assert eta == pytest.approx(expected, abs=1e-4)


def test_pair_swaps_under_sign_flip(short_input):
    pair = make_opposed_pair(P)
    a = simulate_network(pair, short_input).values
    b = simulate_network(pair, short_input.scaled(-1.0)).values
    np.testing.assert_array_equal(a[:, ::-1], b)
    assert np.max(np.abs(a.sum(axis=1) - b.sum(axis=1))) < 1e-10
    assert pair.n_edges == 2 and pair.omega.is_identity


def test_pair_zero_drive_decays_together():
    g = TimeGrid.span(3, 0.05)
    x = simulate_network(make_opposed_pair(P), constant(g, 0.0), eta0=[0.4, 0.4]).values
    np.testing.assert_array_equal(x[:, 0], x[:, 1])


def test_lattice_weights():
    net = make_lattice_network(17, 17, P, (400, 400))
    v = net.v
    assert v.size == 800
    np.testing.assert_allclose(v[:400], np.linspace(0.1, 1.0, 400))
    np.testing.assert_allclose(v[400:], np.linspace(-1.0, -0.1, 400))
    v5 = make_lattice_network(5, 5, P).v
    assert v5.size == 56 and v5.min() == -1.0 and v5.max() == 1.0
    assert np.all(np.abs(v5) >= 0.1 - 1e-15)
    allpos = lattice_weights(56, 0)
    assert allpos.min() == 0.1 and allpos.max() == 1.0 and np.all(allpos > 0)
    with pytest.raises(ValueError):
        make_lattice_network(5, 5, P, (30, 30))


def test_network_shape_checks():
    with pytest.raises(ValueError):
        make_isolated(P, [])
    net = make_lattice_network(3, 3, P)
    assert net.to_config()["graph"]["n_edges"] == 16


@pytest.mark.parametrize("rows,cols", [(2, 2), (3, 4), (5, 5)])
def test_solvers_agree(rows, cols):
    net = make_lattice_network(rows, cols, P)
    rng = np.random.default_rng(rows * cols)
    dense, nodal = make_solver(net, "dense"), make_solver(net, "nodal")
    for _ in range(5):
        eta = rng.uniform(0, 1, net.n_edges)
        s = rng.standard_normal(net.n_edges)
        ref = np.linalg.solve(np.eye(net.n_edges) - 0.8 * net.omega.matrix @ np.diag(eta), net.omega.matrix @ s)
        np.testing.assert_allclose(dense(eta, s), ref, atol=1e-12)
        np.testing.assert_allclose(nodal(eta, s), ref, atol=1e-12)


def test_isolated_solver():
    net = make_isolated(P, [1.0, -1.0, 0.5])
    solve = make_solver(net)
    eta = np.array([0.2, 0.5, 0.9])
    s = np.array([1.0, 2.0, -1.0])
    np.testing.assert_allclose(solve(eta, s), s / (1 - 0.8 * eta))
    with pytest.raises(ValueError):
        make_solver(net, "bogus")


@given(st.floats(0.5, 50.0), st.integers(0, 2**32))
def test_states_stay_in_unit_interval(scale, seed):
    g = TimeGrid.span(20.0, 0.05)
    u = generate_input(SignalConfig(g, seed=seed)).scaled(scale)
    x = simulate_network(make_lattice_network(3, 3, P), u).values
    assert x.min() >= 0.0 and x.max() <= 1.0


def test_euler_first_order_convergence(short_input):
    net = make_lattice_network(3, 3, P)
    u = Trajectory(short_input.grid, short_input.values)
    ref = simulate_network(net, u, dt_internal=0.00125).values
    err = [np.sqrt(np.mean((simulate_network(net, u, dt_internal=h).values - ref) ** 2)) for h in (0.02, 0.01)]
    # against a reference at h/16 the expected ratio is (0.02 - 0.00125) / (0.01 - 0.00125) ~ 2.14
    assert err[0] < 1e-3
    assert 1.8 < err[0] / err[1] < 2.5


def _bounded_drive(net, seconds, seed=3):
    g = TimeGrid.span(seconds, 0.05)
    s = generate_input(SignalConfig(g, seed=seed))
    scale = 0.99 * net.params.contraction_bound() / (np.linalg.norm(net.v) * np.max(np.abs(s.values)))
    return s.scaled(scale)


@pytest.mark.parametrize("rows,cols", [(2, 2), (3, 3), (5, 5)])
def test_contraction_under_bound(rows, cols):
    net = make_lattice_network(rows, cols, P)
    u = _bounded_drive(net, 20.0)
    e0 = np.random.default_rng(4).uniform(0, 1, net.n_edges)
    d = np.linalg.norm(simulate_network(net, u).values - simulate_network(net, u, eta0=e0).values, axis=1)
    assert np.all(np.diff(d) <= 1e-15)
    assert d[u.grid.index(20.0 / 3.0)] < 1e-6


@pytest.mark.parametrize("rows,cols", [(2, 2), (3, 3), (5, 5), (9, 9)])
def test_state_separation_at_first_step(rows, cols):
    net = make_lattice_network(rows, cols, P)
    g = TimeGrid.span(0.04, 0.02)
    eta0 = np.full(net.n_edges, 0.5)
    a = integrate_sources(net, lambda t: np.outer(np.ones(len(t)), net.v), g, eta0=eta0)
    b = integrate_sources(net, lambda t: np.outer(np.ones(len(t)), 1.1 * net.v), g, eta0=eta0)
    assert np.linalg.norm(net.omega.matrix @ (0.1 * net.v)) > 0
    assert np.linalg.norm(a[1] - b[1]) > 0


# -- Volterra oracle ------------------------------------------------------------------


def _small_positive(seconds=60.0, dt=0.001, seed=0, amp=0.2):
    g = TimeGrid.span(seconds, dt)
    s = generate_input(SignalConfig(g, seed=seed))
    return Trajectory(g, 0.5 * amp * (1.0 + np.tanh(s.values)))


def test_first_order_oracle_with_no_nonlinearity():
    p = MemristorParams(3.0, 3.0, 0.0)
    u = _small_positive(30.0, 0.01)
    h1 = volterra_oracle(p, u, order=1).values[:, 0]
    h2 = volterra_oracle(p, u, order=2).values[:, 0]
    np.testing.assert_array_equal(h1, h2)
    errs = []
    for dt in (0.01, 0.005):
        eta = simulate_network(make_single(p), u, dt_internal=dt).values[:, 0]
        errs.append(np.max(np.abs(eta - h1)))
    assert errs[0] < 5e-4 and 1.6 < errs[0] / errs[1] < 2.4
    euler = volterra_oracle(p, u, order=1, scheme="euler").values[:, 0]
    sim = simulate_network(make_single(p), u, dt_internal=0.01).values[:, 0]
    np.testing.assert_allclose(sim, euler, atol=1e-13)


def test_second_order_term_is_quadratic():
    u = _small_positive(20.0, 0.01)
    _, h2 = volterra_terms(P, u)
    _, h2_half = volterra_terms(P, u.scaled(0.5))
    np.testing.assert_allclose(h2_half, 0.25 * h2, rtol=1e-12, atol=1e-300)


def test_oracle_order_checks():
    with pytest.raises(ValueError):
        volterra_oracle(P, _small_positive(1, 0.01), order=3)
    with pytest.raises(ValueError):
        volterra_terms(P, _small_positive(1, 0.01), scheme="rk4")


def test_second_order_discrepancy_scaling():
    p = MemristorParams(3.0, 3.0, 0.1)
    u = _small_positive(60.0, 0.001)

    def rms(v):
        sim = simulate_network(make_single(p), v, dt_internal=0.001).values[:, 0]
        ref = volterra_oracle(p, v, 2, scheme="euler").values[:, 0]
        return np.sqrt(np.mean((sim - ref) ** 2))

    full, half = rms(u), rms(u.scaled(0.5))
    # the remainder starts at third order in u: bounded by C chi^2 and at least a factor 4 per halving
    assert full < 0.1**2 * 0.2**3
    assert full / half >= 4.0
