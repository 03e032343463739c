"""Driving signals and target trajectories.

The input is Gaussian white noise smoothed by a double-exponential window,
``u(t) = int exp(-a|t - s|) xi(s) ds``, which gives zero mean and
autocovariance ``D (tau + 1/a) exp(-a tau)``.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigurationError


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be an integer >= 1, got {self.n_steps}")

    @classmethod
    def span(cls, t_end: float, dt: float, t0: float = 0.0) -> "TimeGrid":
        """Grid covering ``[t0, t_end]`` inclusive."""
        n = int(round((t_end - t0) / dt)) + 1
        return cls(t0=t0, dt=dt, n_steps=n)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_steps) * self.dt

    @property
    def duration(self) -> float:
        return (self.n_steps - 1) * self.dt

    @property
    def t_end(self) -> float:
        return self.t0 + self.duration

    def steps(self, tau: float) -> int:
        """Number of samples closest to a lag ``tau``."""
        return int(round(tau / self.dt))

    def index(self, t: float) -> int:
        return int(round((t - self.t0) / self.dt))

    def window_mask(self, window) -> np.ndarray:
        """Boolean mask of samples with ``t_a <= t <= t_b``."""
        t_a, t_b = window
        k = np.arange(self.n_steps)
        ka = int(np.ceil((t_a - self.t0) / self.dt - 1e-9))
        kb = int(np.floor((t_b - self.t0) / self.dt + 1e-9))
        return (k >= ka) & (k <= kb)


@dataclass
class Trajectory:
    """Uniformly sampled multichannel time series.

    ``values`` has shape ``(n_steps, channels)``.  ``burn_in`` flags samples
    whose value depends on history before ``t0`` (e.g. delayed targets).
    """

    grid: TimeGrid
    values: np.ndarray
    burn_in: np.ndarray | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.n_steps:
            raise ValueError(
                f"values shape {v.shape} does not match grid with {self.grid.n_steps} samples"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("trajectory values must be finite")
        self.values = v
        if self.burn_in is None:
            self.burn_in = np.zeros(self.grid.n_steps, dtype=bool)
        else:
            self.burn_in = np.asarray(self.burn_in, dtype=bool)
            if self.burn_in.shape != (self.grid.n_steps,):
                raise ValueError("burn_in mask must have one entry per sample")

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def channel(self, i: int = 0) -> np.ndarray:
        return self.values[:, i]

    def scaled(self, factor: float) -> "Trajectory":
        return Trajectory(self.grid, self.values * factor, self.burn_in.copy(), self.seed, dict(self.meta))

    def hstack(self, *others: "Trajectory") -> "Trajectory":
        for o in others:
            if o.grid != self.grid:
                raise ValueError("cannot stack trajectories on different grids")
        mask = self.burn_in.copy()
        for o in others:
            mask |= o.burn_in
        vals = np.hstack([self.values] + [o.values for o in others])
        return Trajectory(self.grid, vals, mask, self.seed, dict(self.meta))

    # -- serialization ---------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_string())

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"ch{i}" for i in range(self.n_channels)] + ["burn_in"])
        for t, row, b in zip(self.times, self.values, self.burn_in):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in row] + [int(b)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if header[0] != "t" or header[-1] != "burn_in":
            raise ValueError(f"unexpected trajectory CSV header: {header}")
        data = np.array([[float(x) for x in r[:-1]] for r in body])
        t = data[:, 0]
        dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
        grid = TimeGrid(float(t[0]), dt, len(t))
        burn = np.array([int(r[-1]) for r in body], dtype=bool)
        return cls(grid, data[:, 1:], burn)

    _MAGIC = b"MRTJ"
    _HEADER = struct.Struct("<4sHddqqBQ")

    def to_bytes(self) -> bytes:
        """Little-endian binary form: header, float64 values (row-major), mask bytes."""
        has_seed = self.seed is not None
        head = self._HEADER.pack(
            self._MAGIC, 1, self.grid.t0, self.grid.dt, self.grid.n_steps,
            self.n_channels, int(has_seed), int(self.seed) & (2**64 - 1) if has_seed else 0,
        )
        vals = np.ascontiguousarray(self.values, dtype="<f8").tobytes()
        return head + vals + self.burn_in.astype(np.uint8).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Trajectory":
        hs = cls._HEADER.size
        if len(blob) < hs or blob[:4] != cls._MAGIC:
            raise ValueError("not a trajectory blob")
        magic, version, t0, dt, n, c, has_seed, seed = cls._HEADER.unpack(blob[:hs])
        nv = n * c * 8
        if version != 1 or len(blob) != hs + nv + n:
            raise ValueError("trajectory blob has an unsupported version or a truncated body")
        vals = np.frombuffer(blob[hs:hs + nv], dtype="<f8").reshape(n, c)
        burn = np.frombuffer(blob[hs + nv:hs + nv + n], dtype=np.uint8).astype(bool)
        return cls(TimeGrid(t0, dt, n), vals.copy(), burn, seed if has_seed else None)

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix == ".csv":
            self.to_csv(path)
        else:
            path.write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Trajectory":
        path = Path(path)
        if path.suffix == ".csv":
            return cls.from_csv(path)
        return cls.from_bytes(path.read_bytes())


@dataclass(frozen=True)
class SignalConfig:
    """Parameters of the smoothed-noise input.

    ``D`` is the white-noise intensity and ``a`` the inverse smoothing time.
    With ``D = a = 1`` the signal has unit variance.
    """

    grid: TimeGrid
    D: float = 1.0
    a: float = 1.0
    seed: int = 0
    zero_noise: bool = False

    def __post_init__(self):
        if not self.D > 0:
            raise ConfigurationError(f"noise intensity D must be positive, got {self.D}")
        if not self.a > 0:
            raise ConfigurationError(f"smoothing rate a must be positive, got {self.a}")


def rng_for(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) for an explicit 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def generate_input(cfg: SignalConfig) -> Trajectory:
    """Smoothed Gaussian noise on ``cfg.grid``.

    Causal and anticausal exponential recursions are run over white
    increments of variance ``D*dt``; padding of ``12/a`` on either side
    puts both passes in their stationary regime.
    """
    grid = cfg.grid
    if not isinstance(grid, TimeGrid):
        raise ConfigurationError("signal grid must be a TimeGrid")
    if cfg.zero_noise:
        return Trajectory(grid, np.zeros(grid.n_steps), seed=cfg.seed, meta={"zero_noise": True})
    dt = grid.dt
    pad = int(np.ceil(12.0 / (cfg.a * dt)))
    n = grid.n_steps + 2 * pad
    w = rng_for(cfg.seed).standard_normal(n) * np.sqrt(cfg.D * dt)
    rho = np.exp(-cfg.a * dt)
    fwd = lfilter([1.0], [1.0, -rho], w)
    bwd = lfilter([1.0], [1.0, -rho], w[::-1])[::-1]
    # the sample at lag zero is counted by both passes
    u = (fwd + bwd - w)[pad:pad + grid.n_steps]
    return Trajectory(grid, u, seed=cfg.seed, meta={"D": cfg.D, "a": cfg.a})


def theoretical_autocovariance(tau, D: float = 1.0, a: float = 1.0):
    tau = np.abs(np.asarray(tau, dtype=float))
    return D * (tau + 1.0 / a) * np.exp(-a * tau)


def sample_autocovariance(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased sample autocovariance for lags ``0..max_lag``."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = len(x)
    return np.array([np.dot(x[:n - k], x[k:]) / n for k in range(max_lag + 1)])


def _single_channel(u: Trajectory) -> np.ndarray:
    if u.n_channels != 1:
        raise ValueError(f"expected a single-channel input, got {u.n_channels} channels")
    return u.values[:, 0]


def _shift(x: np.ndarray, s: int) -> np.ndarray:
    out = np.zeros_like(x)
    if s == 0:
        out[:] = x
    else:
        out[s:] = x[:-s]
    return out


def _shift_mask(mask: np.ndarray, s: int) -> np.ndarray:
    out = np.ones_like(mask)
    if s == 0:
        out[:] = mask
    else:
        out[s:] = mask[:-s]
    return out


def _lag_steps(u: Trajectory, tau: float) -> int:
    if tau < 0:
        raise ValueError(f"delay must be non-negative, got {tau}")
    if tau > u.grid.duration:
        raise ValueError(f"delay {tau} exceeds trajectory duration {u.grid.duration}")
    return u.grid.steps(tau)


def delayed_target(u: Trajectory, tau: float) -> Trajectory:
    """``z(t) = u(t - tau)``, with the delay snapped to the nearest sample."""
    x = _single_channel(u)
    s = _lag_steps(u, tau)
    return Trajectory(u.grid, _shift(x, s), _shift_mask(u.burn_in, s), u.seed, {"tau": s * u.grid.dt})


def product_target(u: Trajectory, tau1: float, tau2: float) -> Trajectory:
    """``z(t) = u(t - tau1) u(t - tau2)``."""
    x = _single_channel(u)
    s1, s2 = _lag_steps(u, tau1), _lag_steps(u, tau2)
    z = _shift(x, s1) * _shift(x, s2)
    mask = _shift_mask(u.burn_in, s1) | _shift_mask(u.burn_in, s2)
    return Trajectory(u.grid, z, mask, u.seed, {"tau1": s1 * u.grid.dt, "tau2": s2 * u.grid.dt})


# -- quadratic filtering task ------------------------------------------------

FILTER_SUPPORT = 10.0


def linear_filter_kernel(tau):
    tau = np.asarray(tau, dtype=float)
    return np.exp(-0.5 * tau) * np.cos(2.0 * tau)


def quadratic_filter_kernel(tau1, tau2):
    tau1 = np.asarray(tau1, dtype=float)
    tau2 = np.asarray(tau2, dtype=float)
    return -np.exp(-0.3 * (tau1 + tau2)) * np.cos(2.0 * (tau1 - tau2))


def hat_weights(kernel, dt: float, support: float, order: int = 8) -> np.ndarray:
    """Weights ``w_j`` with ``int_0^L K(s) f(t - s) ds = sum_j w_j f(t - j dt)``.

    Exact for ``f`` linear between samples; each cell is integrated with
    Gauss-Legendre nodes against the two hat functions it carries.
    """
    J = int(round(support / dt))
    x, gw = np.polynomial.legendre.leggauss(order)
    frac = 0.5 * (x + 1.0)                       # position inside a cell, in [0, 1]
    left = np.arange(J)[:, None] * dt
    s = left + frac[None, :] * dt
    k = kernel(s) * (0.5 * dt) * gw[None, :]
    w = np.zeros(J + 1)
    w[:-1] += np.sum(k * (1.0 - frac), axis=1)
    w[1:] += np.sum(k * frac, axis=1)
    return w


def _causal_fir(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return np.convolve(x, taps)[: len(x)]


def filter_target(u: Trajectory, support: float = FILTER_SUPPORT) -> Trajectory:
    """Linear plus quadratic filter of the input over a history of ``support``.

    The quadratic kernel ``-exp(-0.3(t1+t2)) cos(2(t1-t2))`` splits into
    ``-(c(t1)c(t2) + s(t1)s(t2))`` with ``c, s = exp(-0.3t) cos/sin(2t)``,
    so the double integral is ``-(Cu)^2 - (Su)^2`` for the two single filters.
    """
    x = _single_channel(u)
    dt = u.grid.dt
    w1 = hat_weights(linear_filter_kernel, dt, support)
    wc = hat_weights(lambda s: np.exp(-0.3 * s) * np.cos(2.0 * s), dt, support)
    ws = hat_weights(lambda s: np.exp(-0.3 * s) * np.sin(2.0 * s), dt, support)
    lin = _causal_fir(x, w1)
    cu = _causal_fir(x, wc)
    su = _causal_fir(x, ws)
    z = lin - (cu * cu + su * su)
    J = len(w1) - 1
    mask = _causal_fir(u.burn_in.astype(float), np.ones(J + 1)) > 0
    mask[:J] = True
    return Trajectory(u.grid, z, mask, u.seed, {"task": "quadratic_filter"})
