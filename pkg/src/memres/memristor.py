"""Memristor devices and networks.

Each edge holds a memristor with ``R(eta) = R_off (1 - chi eta)`` in series with
a voltage generator ``s_e = v_e u(t)``.  The internal states follow

    eta' = -alpha eta + (1/beta) (I - chi Omega H)^{-1} Omega s,   H = diag(eta)

and are integrated by forward Euler with ``eta`` clipped to ``[0, 1]`` after
each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve, solveh_banded
from scipy.signal import lfilter

from .errors import NumericalError
from .graph import CircuitGraph, CycleProjector, Isolated, cycle_projector, triangular_lattice
from .lrc import modal_drive
from .signals import TimeGrid, Trajectory

DT_INTERNAL = 0.02
_CHUNK = 4096


@dataclass(frozen=True)
class MemristorParams:
    alpha: float = 3.0
    beta: float = 3.0
    chi: float = 0.8
    R_off: float = 1.0
    R_on: float | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0 <= self.chi < 1:
            raise ValueError(f"chi must lie in [0, 1), got {self.chi}")
        if self.R_on is None:
            object.__setattr__(self, "R_on", self.R_off * (1.0 - self.chi))
        if self.R_on > self.R_off or self.R_on < 0:
            raise ValueError(f"need 0 <= R_on <= R_off, got R_on={self.R_on}, R_off={self.R_off}")
        if abs((self.R_off - self.R_on) / self.R_off - self.chi) > 1e-12:
            raise ValueError("chi is inconsistent with R_off and R_on")

    def resistance(self, eta):
        return self.R_off * (1.0 - self.chi * np.asarray(eta))

    def contraction_bound(self, C1: float = 1.0) -> float:
        """Largest source norm ``||Omega s||_2`` for which the Euler map contracts."""
        if self.chi == 0:
            return math.inf
        return (1.0 - self.chi) ** 2 * self.alpha * self.beta / (self.chi * C1)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "chi": self.chi,
                "R_off": self.R_off, "R_on": self.R_on}


@dataclass(frozen=True, eq=False)
class MemristorNetwork:
    topology: CircuitGraph | Isolated
    omega: CycleProjector
    params: MemristorParams
    v: np.ndarray
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        object.__setattr__(self, "v", v)
        E = self.topology.n_edges
        if self.omega.dim != E or v.size != E:
            raise ValueError(
                f"projector dimension {self.omega.dim}, edge count {E} and "
                f"{v.size} drive weights must agree"
            )

    @property
    def n_edges(self) -> int:
        return self.topology.n_edges

    @property
    def isolated(self) -> bool:
        return isinstance(self.topology, Isolated)

    def to_config(self) -> dict:
        if self.isolated:
            graph = {"isolated": self.topology.k}
        else:
            graph = {"n_nodes": self.topology.n_nodes, "n_edges": self.n_edges}
        return {"graph": graph, "params": self.params.to_dict(), **self.spec}


def make_isolated(params: MemristorParams, weights) -> MemristorNetwork:
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    top = Isolated(weights.size)
    return MemristorNetwork(top, cycle_projector(top), params, weights, {"motif": "isolated"})


def make_single(params: MemristorParams) -> MemristorNetwork:
    net = make_isolated(params, [1.0])
    net.spec["motif"] = "single"
    return net


def make_opposed_pair(params: MemristorParams) -> MemristorNetwork:
    """Two isolated devices driven by ``+u`` and ``-u``."""
    net = make_isolated(params, [1.0, -1.0])
    net.spec["motif"] = "opposed_pair"
    return net


def lattice_weights(n_pos: int, n_neg: int, low: float = 0.1, high: float = 1.0) -> np.ndarray:
    """``n_pos`` weights evenly spaced on ``[low, high]`` then ``n_neg`` on ``[-high, -low]``."""
    pos = np.linspace(low, high, n_pos) if n_pos else np.empty(0)
    neg = np.linspace(-high, -low, n_neg) if n_neg else np.empty(0)
    return np.concatenate([pos, neg])


def make_lattice_network(rows: int, cols: int, params: MemristorParams,
                         weight_spec=None) -> MemristorNetwork:
    g = triangular_lattice(rows, cols)
    E = g.n_edges
    if weight_spec is None:
        weight_spec = (E - E // 2, E // 2)
    n_pos, n_neg = (int(x) for x in weight_spec)
    if n_pos < 0 or n_neg < 0 or n_pos + n_neg != E:
        raise ValueError(f"weight counts {weight_spec} do not add up to {E} edges")
    spec = {"motif": "lattice", "rows": rows, "cols": cols, "weight_spec": [n_pos, n_neg]}
    return MemristorNetwork(g, cycle_projector(g), params, lattice_weights(n_pos, n_neg), spec)


# -- current solvers ------------------------------------------------------------


class _IsolatedSolver:
    def __init__(self, chi):
        self.chi = chi

    def __call__(self, eta, s):
        return s / (1.0 - self.chi * eta)


class _DenseSolver:
    """``(I - chi Omega H)^{-1} Omega s`` by LU at every step."""

    def __init__(self, omega, chi):
        self.omega = omega
        self.chi = chi
        self.eye = np.eye(omega.shape[0])

    def __call__(self, eta, s):
        M = self.eye - self.chi * self.omega * eta[None, :]
        try:
            lu = lu_factor(M, check_finite=False)
        except LinAlgError as exc:  # pragma: no cover - guarded by chi < 1
            raise NumericalError("singular current matrix") from exc
        return lu_solve(lu, self.omega @ s, check_finite=False)


class _NodalSolver:
    """Same currents via nodal analysis on the weighted Laplacian.

    With edge resistances ``1 - chi eta`` and series sources ``s``, the node
    potentials solve ``A G A^T p = A G s`` and the currents are
    ``G (s - A^T p)``; this equals the cycle-projector expression.
    """

    def __init__(self, graph: CircuitGraph, chi):
        self.chi = chi
        ground = graph.grounded_nodes()
        red = -np.ones(graph.n_nodes, dtype=int)
        red[~ground] = np.arange(np.count_nonzero(~ground))
        self.m = int(np.count_nonzero(~ground))
        e = np.array(graph.edges)
        self.tail, self.head = e[:, 0], e[:, 1]
        tr, hr = red[self.tail], red[self.head]
        self.t_ok, self.h_ok = tr >= 0, hr >= 0
        self.tr, self.hr = tr[self.t_ok], hr[self.h_ok]
        both = self.t_ok & self.h_ok
        self.both = both
        lo = np.minimum(tr[both], hr[both])
        hi = np.maximum(tr[both], hr[both])
        self.bw = int(np.max(hi - lo)) if both.any() else 0
        rows = self.bw + 1
        m = self.m
        diag_t = self.bw * m + self.tr
        diag_h = self.bw * m + self.hr
        off = (self.bw - (hi - lo)) * m + hi
        self.flat = np.concatenate([diag_t, diag_h, off])
        self.size = rows * m
        self.shape = (rows, m)
        self.red = red

    def __call__(self, eta, s):
        g = 1.0 / (1.0 - self.chi * eta)
        w = np.concatenate([g[self.t_ok], g[self.h_ok], -g[self.both]])
        ab = np.bincount(self.flat, weights=w, minlength=self.size).reshape(self.shape)
        gs = g * s
        rhs = (np.bincount(self.tr, weights=gs[self.t_ok], minlength=self.m)
               - np.bincount(self.hr, weights=gs[self.h_ok], minlength=self.m))
        try:
            p = solveh_banded(ab, rhs, check_finite=False)
        except LinAlgError as exc:
            raise NumericalError("nodal Laplacian is not positive definite") from exc
        pf = np.zeros(self.red.size)
        pf[self.red >= 0] = p
        return g * (s - (pf[self.tail] - pf[self.head]))


def make_solver(net: MemristorNetwork, solver: str = "auto"):
    chi = net.params.chi
    if solver == "auto":
        solver = "isolated" if net.isolated else "nodal"
    if solver == "isolated":
        if not (net.isolated or net.omega.is_identity):
            raise ValueError("isolated solver requires Omega = I")
        return _IsolatedSolver(chi)
    if solver == "dense":
        return _DenseSolver(net.omega.matrix, chi)
    if solver == "nodal":
        if net.isolated:
            return _IsolatedSolver(chi)
        return _NodalSolver(net.topology, chi)
    raise ValueError(f"unknown solver {solver!r}")


# -- integration ----------------------------------------------------------------


def _interp_rows(times, grid: TimeGrid, values: np.ndarray) -> np.ndarray:
    """Linear interpolation of the rows of ``values`` (sampled on ``grid``) at ``times``."""
    p = (times - grid.t0) / grid.dt
    k = np.clip(np.floor(p).astype(int), 0, grid.n_steps - 2) if grid.n_steps > 1 else np.zeros(len(p), int)
    f = (p - k)[:, None]
    if grid.n_steps == 1:
        return np.repeat(values[:1], len(times), axis=0)
    return values[k] * (1.0 - f) + values[k + 1] * f


def integrate_sources(net: MemristorNetwork, source_fn, out_grid: TimeGrid,
                      dt_internal: float = DT_INTERNAL, eta0=None, solver: str = "auto",
                      record=None, out=None) -> np.ndarray:
    """Forward-Euler integration with sources given by ``source_fn(times) -> (n, E)``.

    Returns ``eta`` on ``out_grid`` (linear interpolation of the internal grid),
    written into ``out`` when a buffer of shape ``(n_steps, E)`` is supplied.
    ``record``, if given, is called with the internal ``(j, eta_j)`` before each step.
    """
    E = net.n_edges
    p = net.params
    h = float(dt_internal)
    if not h > 0:
        raise ValueError("dt_internal must be positive")
    step_solve = make_solver(net, solver)
    n_int = int(math.ceil(out_grid.duration / h - 1e-9))
    t0 = out_grid.t0
    pos = (out_grid.times - t0) / h
    jk = np.floor(pos + 1e-9).astype(int)
    frac = pos - jk
    frac[np.abs(frac) < 1e-9] = 0.0
    last = jk >= n_int
    jk[last] = max(n_int - 1, 0)
    frac[last] = 1.0 if n_int > 0 else 0.0

    eta = np.zeros(E) if eta0 is None else np.clip(np.asarray(eta0, dtype=float).copy(), 0.0, 1.0)
    if eta.shape != (E,):
        raise ValueError(f"initial state must have {E} entries")
    if out is None:
        out = np.empty((out_grid.n_steps, E))
    elif out.shape != (out_grid.n_steps, E):
        raise ValueError(f"output buffer has shape {out.shape}, expected {(out_grid.n_steps, E)}")
    if n_int == 0:
        out[:] = eta
        return out
    decay = 1.0 - h * p.alpha
    gain = h / p.beta
    for j0 in range(0, n_int, _CHUNK):
        j1 = min(j0 + _CHUNK, n_int)
        S = np.asarray(source_fn(t0 + h * np.arange(j0, j1)), dtype=float)
        buf = np.empty((j1 - j0 + 1, E))
        buf[0] = eta
        for i in range(j1 - j0):
            if record is not None:
                record(j0 + i, eta)
            x = step_solve(eta, S[i])
            eta = decay * eta + gain * x
            np.clip(eta, 0.0, 1.0, out=eta)
            if not np.all(np.isfinite(eta)):
                raise NumericalError("non-finite memristor state", step=j0 + i)
            buf[i + 1] = eta
        sel = (jk >= j0) & (jk < j1)
        if np.any(sel):
            loc = jk[sel] - j0
            f = frac[sel][:, None]
            out[sel] = buf[loc] * (1.0 - f) + buf[loc + 1] * f
    return out


def simulate_network(net: MemristorNetwork, u: Trajectory, dt_internal: float = DT_INTERNAL,
                     eta0=None, solver: str = "auto") -> Trajectory:
    """Drive every edge with ``v_e u(t)``; returns ``eta_1..eta_E`` on ``u``'s grid.

    ``u`` is linearly interpolated onto the internal Euler grid.
    """
    if u.n_channels != 1:
        raise ValueError(f"network takes a single-channel input, got {u.n_channels}")
    x = u.values

    def sources(times):
        return _interp_rows(times, u.grid, x) * net.v[None, :]

    eta = integrate_sources(net, sources, u.grid, dt_internal, eta0, solver)
    return Trajectory(u.grid, eta, u.burn_in.copy(), u.seed, {"reservoir": "memristor", **net.spec})


def simulate_sources(net: MemristorNetwork, drive: Trajectory, coupling: np.ndarray,
                     dt_internal: float = DT_INTERNAL, eta0=None, solver: str = "auto",
                     out=None) -> Trajectory:
    """Drive edge ``e`` with ``(coupling @ drive(t))_e``; used for deep layers."""
    coupling = np.asarray(coupling, dtype=float)
    if coupling.shape != (net.n_edges, drive.n_channels):
        raise ValueError(
            f"coupling shape {coupling.shape} does not match {net.n_edges} edges x "
            f"{drive.n_channels} drive channels"
        )
    x = drive.values
    ct = np.ascontiguousarray(coupling.T)

    def sources(times):
        return _interp_rows(times, drive.grid, x) @ ct

    eta = integrate_sources(net, sources, drive.grid, dt_internal, eta0, solver, out=out)
    return Trajectory(drive.grid, eta, drive.burn_in.copy(), drive.seed, {"reservoir": "memristor"})


# -- Volterra expansion of a single device ----------------------------------------------


def volterra_terms(params: MemristorParams, u: Trajectory, scheme: str = "exact"):
    """First- and second-order Volterra terms of an isolated device.

    ``scheme="exact"`` evaluates the continuous kernels (exponential integrator,
    input linear between samples).  ``scheme="euler"`` evaluates the discrete
    kernels of the forward-Euler map on ``u``'s own grid, so that comparisons
    against an Euler run at that step isolate the truncation error.
    """
    if u.n_channels != 1:
        raise ValueError("Volterra oracle takes a single-channel input")
    x = u.values[:, 0]
    h = u.grid.dt
    a, b, chi = params.alpha, params.beta, params.chi
    if scheme == "exact":
        h1 = modal_drive(-a, x, h).real / b
        h2 = chi / b * modal_drive(-a, x * h1, h).real
    elif scheme == "euler":
        rho = 1.0 - a * h
        h1 = lfilter([0.0, h / b], [1.0, -rho], x)
        h2 = lfilter([0.0, h * chi / b], [1.0, -rho], x * h1)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return h1, h2


def volterra_oracle(params: MemristorParams, u: Trajectory, order: int = 2,
                    scheme: str = "exact") -> Trajectory:
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    h1, h2 = volterra_terms(params, u, scheme)
    eta = h1 if order == 1 else h1 + h2
    return Trajectory(u.grid, eta, u.burn_in.copy(), u.seed, {"oracle": f"volterra{order}", "scheme": scheme})
