"""Continuous-time echo state network baseline.

    x' = -leak x + tanh(W x + r_b + r_i u(t))

with a sparse ``W`` of constant row fanout, integrated by forward Euler.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, NumericalError
from .signals import Trajectory, rng_for


@dataclass(frozen=True)
class EsnConfig:
    size: int = 780
    fanout: int = 10
    spectral_radius: float = 0.95
    bias_scale: float = 0.2
    input_scale: float = 0.1
    dt: float = 0.05
    seed: int = 0
    leak: float = 1.0

    def __post_init__(self):
        if self.size < 1:
            raise ConfigurationError(f"size must be positive, got {self.size}")
        if not 1 <= self.fanout <= self.size:
            raise ConfigurationError(f"fanout must lie in [1, size], got {self.fanout}")
        if not 0 < self.spectral_radius < 1:
            raise ConfigurationError(f"spectral_radius must lie in (0, 1), got {self.spectral_radius}")
        if self.bias_scale < 0 or self.input_scale < 0:
            raise ConfigurationError("bias_scale and input_scale must be non-negative")
        if not self.dt > 0 or not self.leak > 0:
            raise ConfigurationError("dt and leak must be positive")


@dataclass(frozen=True, eq=False)
class EsnReservoir:
    config: EsnConfig
    W: sp.csr_matrix
    r_b: np.ndarray
    r_i: np.ndarray

    @property
    def size(self) -> int:
        return self.config.size

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.W.toarray()))))

    def to_csv_string(self) -> str:
        """Nonzeros of ``W`` as ``row, col, value`` followed by the two vectors."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "row", "col", "value"])
        coo = self.W.tocoo()
        for i, j, v in zip(coo.row, coo.col, coo.data):
            w.writerow(["W", int(i), int(j), repr(float(v))])
        for i, v in enumerate(self.r_b):
            w.writerow(["r_b", i, "", repr(float(v))])
        for i, v in enumerate(self.r_i):
            w.writerow(["r_i", i, "", repr(float(v))])
        return buf.getvalue()


def build_esn(cfg: EsnConfig) -> EsnReservoir:
    rng = rng_for(cfg.seed)
    n, m = cfg.size, cfg.fanout
    cols = np.stack([rng.choice(n, size=m, replace=False) for _ in range(n)])
    signs = rng.choice(np.array([-1.0, 1.0]), size=(n, m))
    W = sp.csr_matrix((signs.ravel(), cols.ravel(), np.arange(0, n * m + 1, m)), shape=(n, n))
    W.sort_indices()
    try:
        rho = float(np.max(np.abs(np.linalg.eigvals(W.toarray()))))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigenvalue computation failed while scaling the ESN") from exc
    if rho == 0.0:
        raise NumericalError("coupling matrix is nilpotent; cannot rescale its spectral radius")
    W = W * (cfg.spectral_radius / rho)
    r_b = cfg.bias_scale * rng.uniform(-1.0, 1.0, n)
    r_i = cfg.input_scale * rng.uniform(-1.0, 1.0, n)
    return EsnReservoir(cfg, W.tocsr(), r_b, r_i)


def simulate_esn(res: EsnReservoir, u: Trajectory, x0=None) -> Trajectory:
    """Forward Euler at the reservoir's ``dt``.

    When ``dt`` differs from the signal spacing, ``u`` is linearly
    interpolated and the state is sampled back onto the signal grid.
    """
    if u.n_channels != 1:
        raise ValueError(f"ESN takes a single-channel input, got {u.n_channels}")
    cfg = res.config
    h = cfg.dt
    grid = u.grid
    ratio = grid.dt / h
    n = res.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"initial state must have {n} entries")
    W, r_b, r_i = res.W, res.r_b, res.r_i
    out = np.empty((grid.n_steps, n))
    if abs(ratio - round(ratio)) < 1e-9:
        sub = int(round(ratio))
        uv = u.values[:, 0]
        out[0] = x
        for k in range(grid.n_steps - 1):
            for j in range(sub):
                uj = uv[k] + (uv[k + 1] - uv[k]) * (j / sub)
                x = x + h * (-cfg.leak * x + np.tanh(W @ x + r_b + r_i * uj))
            out[k + 1] = x
    else:
        n_int = int(np.ceil(grid.duration / h - 1e-9))
        t_int = grid.t0 + h * np.arange(n_int + 1)
        u_int = np.interp(t_int, grid.times, u.values[:, 0])
        states = np.empty((n_int + 1, n))
        states[0] = x
        for j in range(n_int):
            x = x + h * (-cfg.leak * x + np.tanh(W @ x + r_b + r_i * u_int[j]))
            states[j + 1] = x
        for c in range(n):
            out[:, c] = np.interp(grid.times, t_int, states[:, c])
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite ESN state")
    return Trajectory(grid, out, u.burn_in.copy(), u.seed, {"reservoir": "esn", "size": n})
