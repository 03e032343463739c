"""Circuit graphs and the cycle-space projector.

Edges carry a memristor in series with a voltage generator.  Currents that
obey Kirchhoff's current law live in the null space of the node-edge
incidence matrix ``A``; ``Omega = I - A^T (A A^T)^+ A`` projects onto it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NumericalError

PINV_RTOL = 1e-12
# singular values between PINV_RTOL and this are treated as an ambiguous rank
AMBIGUOUS_RTOL = 1e-8


@dataclass(frozen=True)
class CircuitGraph:
    n_nodes: int
    edges: tuple  # ((tail, head), ...); orientation tail -> head

    def __post_init__(self):
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) < 1:
            raise ValueError("a circuit graph needs at least one edge")
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            if not (0 <= a < self.n_nodes and 0 <= b < self.n_nodes):
                raise ValueError(f"edge ({a}, {b}) references a node outside 0..{self.n_nodes - 1}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def incidence(self) -> np.ndarray:
        """Full node-edge incidence: +1 at the tail, -1 at the head."""
        A = np.zeros((self.n_nodes, self.n_edges))
        idx = np.arange(self.n_edges)
        e = np.array(self.edges)
        A[e[:, 0], idx] = 1.0
        A[e[:, 1], idx] = -1.0
        return A

    @cached_property
    def components(self) -> np.ndarray:
        """Component label per node (union-find)."""
        parent = list(range(self.n_nodes))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for a, b in self.edges:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = np.array([find(i) for i in range(self.n_nodes)])
        _, labels = np.unique(roots, return_inverse=True)
        return labels

    @property
    def n_components(self) -> int:
        return int(self.components.max()) + 1

    @property
    def cycle_rank(self) -> int:
        return self.n_edges - self.n_nodes + self.n_components

    def grounded_nodes(self) -> np.ndarray:
        """The highest-numbered node of each component, used as reference."""
        ground = np.zeros(self.n_nodes, dtype=bool)
        for c in range(self.n_components):
            ground[np.flatnonzero(self.components == c).max()] = True
        return ground

    def reduced_incidence(self) -> np.ndarray:
        return self.incidence()[~self.grounded_nodes()]

    # -- edge-list text format -------------------------------------------

    def to_edgelist(self) -> str:
        lines = [f"nodes={self.n_nodes}"] + [f"{a} {b}" for a, b in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str) -> "CircuitGraph":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines or not lines[0].startswith("nodes="):
            raise ValueError("edge list must start with a 'nodes=<n>' header")
        n = int(lines[0].split("=", 1)[1])
        edges = [tuple(int(x) for x in ln.split()) for ln in lines[1:]]
        return cls(n, tuple(edges))


@dataclass(frozen=True)
class Isolated:
    """``k`` memristors, each closed by its own generator; ``Omega = I``."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need at least one isolated device")

    @property
    def n_edges(self) -> int:
        return self.k


@dataclass(frozen=True, eq=False)
class CycleProjector:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(self.dim)))

    def check(self, tol: float = 1e-10) -> dict:
        """Residuals of the projector invariants."""
        M = self.matrix
        eig = np.linalg.eigvalsh(0.5 * (M + M.T))
        return {
            "idempotence": float(np.linalg.norm(M @ M - M)),
            "symmetry": float(np.linalg.norm(M - M.T)),
            "eigen_deviation": float(np.max(np.minimum(np.abs(eig), np.abs(eig - 1.0)))),
            "rank": int(np.sum(eig > 0.5)),
            "trace": float(np.trace(M)),
        }


def triangular_lattice(rows: int, cols: int) -> CircuitGraph:
    """Square grid with one diagonal per cell.

    Node ``(r, c)`` has index ``r*cols + c`` with rows counted upward.  Edges come
    in three blocks, each row-major: horizontals ``(r,c)->(r,c+1)``, verticals
    ``(r,c)->(r+1,c)``, diagonals ``(r,c)->(r+1,c+1)``.
    """
    if rows < 2 or cols < 2:
        raise ValueError(f"lattice needs rows, cols >= 2, got {rows}x{cols}")
    node = lambda r, c: r * cols + c  # noqa: E731
    edges = [(node(r, c), node(r, c + 1)) for r in range(rows) for c in range(cols - 1)]
    edges += [(node(r, c), node(r + 1, c)) for r in range(rows - 1) for c in range(cols)]
    edges += [(node(r, c), node(r + 1, c + 1)) for r in range(rows - 1) for c in range(cols - 1)]
    return CircuitGraph(rows * cols, tuple(edges))


def lattice_edge_count(rows: int, cols: int) -> int:
    return rows * (cols - 1) + cols * (rows - 1) + (rows - 1) * (cols - 1)


def cycle_projector(g) -> CycleProjector:
    """Orthogonal projector onto the cycle space of ``g``.

    ``Isolated`` motifs return the identity (each device sits in its own loop).
    """
    if isinstance(g, Isolated):
        return CycleProjector(np.eye(g.k))
    A = g.reduced_incidence()
    gram = A @ A.T
    U, s, Vt = np.linalg.svd(gram)
    smax = s[0] if s.size else 0.0
    rel = s / smax if smax > 0 else s
    ambiguous = (rel > PINV_RTOL) & (rel < AMBIGUOUS_RTOL)
    if np.any(ambiguous):
        raise NumericalError(
            "incidence Gram matrix is numerically rank deficient beyond tolerance",
            singular_values=s,
        )
    keep = rel > PINV_RTOL
    pinv = (Vt[keep].T / s[keep]) @ U[:, keep].T
    omega = np.eye(g.n_edges) - A.T @ pinv @ A
    omega = 0.5 * (omega + omega.T)
    return CycleProjector(omega)
