"""Two-layer hybrid reservoirs.

A surface reservoir is driven by the input; its trajectories ``x_s`` feed the
deep layer through a fixed coupling ``s_d = C x_s``.  The output stacks the
surface channels and then the deep channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .lrc import LrcBank, design_bank, simulate_exact
from .memristor import (
    DT_INTERNAL,
    MemristorNetwork,
    MemristorParams,
    make_isolated,
    make_opposed_pair,
    simulate_network,
    simulate_sources,
)
from .signals import Trajectory

DEEP_PARAMS = MemristorParams(alpha=3.0, beta=3.0, chi=0.8)


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """``C`` with one row per deep source and one column per surface trajectory."""

    matrix: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.matrix, dtype=float)
        if C.ndim != 2 or not np.all(np.isfinite(C)):
            raise ValueError("coupling matrix must be a finite 2-D array")
        object.__setattr__(self, "matrix", C)

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True, eq=False)
class DeepReservoir:
    kind: str  # "mem_to_lrc" or "lrc_to_mem"
    surface: LrcBank | MemristorNetwork
    deep: LrcBank | MemristorNetwork
    coupling: CouplingMatrix
    spec: dict = field(default_factory=dict)

    @property
    def n_surface(self) -> int:
        return self.coupling.shape[1]

    @property
    def n_deep(self) -> int:
        if isinstance(self.deep, LrcBank):
            # every surface trajectory drives its own copy of the bank
            return self.n_surface * self.deep.n_channels
        return self.deep.n_edges

    @property
    def n_channels(self) -> int:
        return self.n_surface + self.n_deep


def _lrc(cfg) -> LrcBank:
    if isinstance(cfg, LrcBank):
        return cfg
    gamma, delta_omega, N = cfg
    return design_bank(gamma, delta_omega, int(N))


def build_mem_to_lrc(pair: MemristorNetwork, lrc_cfg=(0.4, 0.4, 10)) -> DeepReservoir:
    """Each memristor trajectory drives an independent LRC bank.

    ``C`` has a row per deep channel (``q`` and ``qdot`` of every subcircuit),
    selecting the memristor that drives it.
    """
    if pair.n_edges != 2:
        raise ValueError(f"surface layer must have 2 trajectories, got {pair.n_edges}")
    bank = _lrc(lrc_cfg)
    per = bank.n_channels
    C = np.zeros((2 * per, 2))
    C[:per, 0] = 1.0
    C[per:, 1] = 1.0
    spec = {"surface": pair.to_config(), "deep_lrc": {"N": bank.size}}
    return DeepReservoir("mem_to_lrc", pair, bank, CouplingMatrix(C), spec)


def sum_difference_coupling(M: int) -> np.ndarray:
    """Rows ``+(e_i+e_j), -(e_i+e_j), +(e_i-e_j), -(e_i-e_j)`` for every ``i < j``."""
    rows = []
    for i, j in combinations(range(M), 2):
        s = np.zeros(M)
        s[i] = s[j] = 1.0
        d = np.zeros(M)
        d[i], d[j] = 1.0, -1.0
        rows += [s, -s, d, -d]
    return np.array(rows).reshape(-1, M)


def build_lrc_to_mem(lrc_cfg=(0.4, 0.4, 10), params: MemristorParams = DEEP_PARAMS) -> DeepReservoir:
    """LRC surface with isolated memristors on every sum and difference of its trajectories."""
    bank = _lrc(lrc_cfg)
    M = bank.n_channels
    C = sum_difference_coupling(M)
    deep = make_isolated(params, np.ones(C.shape[0]))
    deep.spec["motif"] = "sum_difference_pairs"
    spec = {"surface_lrc": {"N": bank.size}, "deep": deep.to_config()}
    return DeepReservoir("lrc_to_mem", bank, deep, CouplingMatrix(C), spec)


def simulate_deep(d: DeepReservoir, u: Trajectory, dt_internal: float = DT_INTERNAL,
                  solver: str = "auto") -> Trajectory:
    """Surface channels followed by deep channels on ``u``'s grid.

    The output buffer is allocated once and each layer writes into its block,
    which matters for the larger sum/difference reservoirs.
    """
    n = u.grid.n_steps
    out = np.empty((n, d.n_channels))
    ns = d.n_surface
    if d.kind == "mem_to_lrc":
        surf = simulate_network(d.surface, u, dt_internal, solver=solver)
        out[:, :ns] = surf.values
        per = d.deep.n_channels
        for i in range(ns):
            drive = Trajectory(u.grid, surf.values[:, i:i + 1], u.burn_in.copy(), u.seed)
            out[:, ns + i * per: ns + (i + 1) * per] = simulate_exact(d.deep, drive).values
    elif d.kind == "lrc_to_mem":
        surf = simulate_exact(d.surface, u)
        out[:, :ns] = surf.values
        del surf
        drive = Trajectory(u.grid, out[:, :ns], u.burn_in.copy(), u.seed)
        simulate_sources(d.deep, drive, d.coupling.matrix, dt_internal, solver=solver,
                         out=out[:, ns:])
    else:
        raise ValueError(f"unknown deep reservoir kind {d.kind!r}")
    meta = {"reservoir": d.kind, "n_surface": ns, "n_deep": d.n_deep}
    return Trajectory(u.grid, out, u.burn_in.copy(), u.seed, meta)


def paired_mem_to_lrc(params: MemristorParams = DEEP_PARAMS, lrc_cfg=(0.4, 0.4, 10)) -> DeepReservoir:
    return build_mem_to_lrc(make_opposed_pair(params), lrc_cfg)


def trajectory_count(N: int) -> int:
    """Channels of the sum/difference hybrid on an ``N``-subcircuit surface: ``8N^2 - 2N``."""
    M = 2 * N
    return 2 * M * (M - 1) + M
