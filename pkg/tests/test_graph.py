import numpy as np
import pytest
from hypothesis import given, strategies as st

from memres.errors import NumericalError
from memres.graph import (
    CircuitGraph,
    Isolated,
    cycle_projector,
    lattice_edge_count,
    triangular_lattice,
)


@pytest.mark.parametrize("rows,cols,E", [(5, 5, 56), (17, 17, 800), (2, 2, 5), (3, 4, 23)])
def test_lattice_edge_counts(rows, cols, E):
    g = triangular_lattice(rows, cols)
    assert g.n_edges == E == lattice_edge_count(rows, cols)
    assert g.n_nodes == rows * cols
    assert g.n_components == 1


def test_lattice_edge_order():
    g = triangular_lattice(2, 3)
    assert g.edges == ((0, 1), (1, 2), (3, 4), (4, 5),  # horizontals
                       (0, 3), (1, 4), (2, 5),          # verticals
                       (0, 4), (1, 5))                  # diagonals


@pytest.mark.parametrize("rows,cols", [(1, 5), (5, 1), (0, 0)])
def test_lattice_too_small(rows, cols):
    with pytest.raises(ValueError):
        triangular_lattice(rows, cols)


def test_isolated_device_projector_is_identity():
    P = cycle_projector(Isolated(1))
    np.testing.assert_array_equal(P.matrix, [[1.0]])
    assert cycle_projector(Isolated(2)).is_identity


def test_open_edge_has_no_cycle():
    # a bare edge between two nodes carries no loop current
    P = cycle_projector(CircuitGraph(2, ((0, 1),)))
    assert P.matrix.shape == (1, 1) and abs(P.matrix[0, 0]) < 1e-12


def test_triangle_projector():
    P = cycle_projector(CircuitGraph(3, ((0, 1), (1, 2), (2, 0))))
    np.testing.assert_allclose(P.matrix, np.full((3, 3), 1 / 3), atol=1e-12)


def test_5x5_rank():
    P = cycle_projector(triangular_lattice(5, 5))
    c = P.check()
    assert c["rank"] == 56 - 25 + 1 == 32
    assert c["trace"] == pytest.approx(32, abs=1e-8)


@pytest.mark.parametrize("n", [2, 3, 5, 9, 17])
def test_projector_invariants_on_lattices(n):
    g = triangular_lattice(n, n)
    P = cycle_projector(g)
    c = P.check()
    M = P.matrix
    assert np.linalg.norm(M @ M - M) < 1e-10
    assert np.linalg.norm(M - M.T) < 1e-10
    assert c["eigen_deviation"] < 1e-8
    assert c["rank"] == g.cycle_rank
    assert c["trace"] == pytest.approx(g.cycle_rank, abs=1e-8)


def test_projector_annihilates_gradients():
    g = triangular_lattice(4, 6)
    M = cycle_projector(g).matrix
    A = g.incidence()
    p = np.random.default_rng(0).standard_normal(g.n_nodes)
    assert np.linalg.norm(M @ (A.T @ p)) < 1e-10


def test_cycle_currents_obey_kirchhoff():
    g = triangular_lattice(4, 4)
    M = cycle_projector(g).matrix
    s = np.random.default_rng(1).standard_normal(g.n_edges)
    assert np.linalg.norm(g.incidence() @ (M @ s)) < 1e-10


def test_disconnected_graph_rank():
    # two triangles sharing no node
    g = CircuitGraph(6, ((0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)))
    assert g.n_components == 2
    assert cycle_projector(g).check()["rank"] == 2


def test_graph_validation():
    with pytest.raises(ValueError):
        CircuitGraph(3, ((0, 0),))
    with pytest.raises(ValueError):
        CircuitGraph(3, ((0, 3),))
    with pytest.raises(ValueError):
        CircuitGraph(3, ())
    with pytest.raises(ValueError):
        Isolated(0)


def test_edgelist_round_trip():
    g = triangular_lattice(3, 3)
    text = g.to_edgelist()
    assert text.startswith("nodes=9\n")
    assert CircuitGraph.from_edgelist(text) == g
    with pytest.raises(ValueError):
        CircuitGraph.from_edgelist("0 1\n")


def test_ambiguous_rank_raises(monkeypatch):
    import memres.graph as gm

    real_svd = np.linalg.svd

    def fake_svd(a):
        U, s, Vt = real_svd(a)
        s = s.copy()
        s[-1] = s[0] * 1e-10
        return U, s, Vt

    monkeypatch.setattr(gm.np.linalg, "svd", fake_svd)
    with pytest.raises(NumericalError) as info:
        cycle_projector(triangular_lattice(3, 3))
    assert info.value.singular_values is not None


@given(st.integers(2, 6), st.integers(2, 6), st.randoms(use_true_random=False))
def test_projector_orientation_covariance(rows, cols, rnd):
    """Flipping an edge flips the sign of its row and column only."""
    g = triangular_lattice(rows, cols)
    flip = [rnd.random() < 0.5 for _ in g.edges]
    edges = tuple((b, a) if f else (a, b) for (a, b), f in zip(g.edges, flip))
    S = np.diag([-1.0 if f else 1.0 for f in flip])
    P = cycle_projector(g).matrix
    Q = cycle_projector(CircuitGraph(g.n_nodes, edges)).matrix
    np.testing.assert_allclose(Q, S @ P @ S, atol=1e-10)
