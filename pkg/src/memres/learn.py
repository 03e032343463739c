"""Ridge readouts, memory functions and total capacities.

All fits append a constant channel and solve ``(X^T X + k I) w = X^T z`` over
a training window; the constant channel is penalized like the others.
Capacity is ``1 - nmse`` with ``nmse = MSE / <z^2>``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericalError, UndefinedCapacityError
from .signals import Trajectory, delayed_target, product_target

RIDGE_K = 1e-4
TRAIN_WINDOW = (100.0, 4000.0)
TEST_WINDOW = (4000.0, 5000.0)


@dataclass
class ReadoutFit:
    weights: np.ndarray
    nmse: float
    capacity: float
    gen_nmse: float | None = None
    k: float = RIDGE_K
    train_window: tuple = TRAIN_WINDOW
    n_samples: int = 0
    intercept: bool = True

    def predict(self, X) -> np.ndarray:
        x = _values(X)
        if self.intercept:
            return x @ self.weights[:-1] + self.weights[-1]
        return x @ self.weights

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = [float(w) for w in self.weights]
        d["train_window"] = list(self.train_window)
        d["penalized_constant"] = True
        return d


@dataclass
class CapacityReport:
    kind: str
    epsilon: float
    tau_eps: float
    tau_star: float
    e_int: float
    e_fit: float = 0.0
    flag: str | None = None
    evaluations: dict = field(default_factory=dict)

    @property
    def e_tot(self) -> float:
        return math.hypot(self.e_int, self.e_fit)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "epsilon": self.epsilon, "tau_eps": self.tau_eps,
            "tau_star": self.tau_star, "e_int": self.e_int, "e_fit": self.e_fit,
            "e_tot": self.e_tot, "flag": self.flag,
        }


def _values(X) -> np.ndarray:
    if isinstance(X, Trajectory):
        return X.values
    x = np.asarray(X, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _target_values(z) -> np.ndarray:
    if isinstance(z, Trajectory):
        if z.n_channels != 1:
            raise ValueError("targets must be single-channel")
        return z.values[:, 0]
    return np.asarray(z, dtype=float).ravel()


def _sample_range(X, window, burn=None):
    """Contiguous sample range ``[ka, kb)`` of the window minus burn-in."""
    if isinstance(X, Trajectory):
        mask = X.grid.window_mask(window) & ~X.burn_in
    else:
        # bare arrays: the window is given in sample indices
        n = _values(X).shape[0]
        idx = np.arange(n)
        mask = (idx >= window[0]) & (idx <= window[1])
    if burn is not None:
        mask &= ~burn
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError(f"window {window} contains no usable samples")
    if idx[-1] - idx[0] + 1 != idx.size:
        return idx
    return slice(int(idx[0]), int(idx[-1]) + 1)


class GramReadout:
    """Ridge normal equations factored once for a fixed reservoir and window.

    Fitting a new target costs one ``X^T z`` product, so scans over many
    delays share the factorization.
    """

    def __init__(self, X, window=TRAIN_WINDOW, k: float = RIDGE_K, intercept: bool = True,
                 rows=None):
        self.X = X
        self.window = tuple(window)
        self.k = float(k)
        self.intercept = intercept
        x = _values(X)
        if not np.all(np.isfinite(x)):
            raise ValueError("reservoir trajectories must be finite")
        self.rows = _sample_range(X, window) if rows is None else rows
        xw = x[self.rows]
        self.n = xw.shape[0]
        G = xw.T @ xw
        if intercept:
            s = xw.sum(axis=0)
            G = np.block([[G, s[:, None]], [s[None, :], np.array([[float(self.n)]])]])
        self.gram = G
        self._factor(G)

    def _factor(self, G):
        A = G + self.k * np.eye(G.shape[0])
        try:
            self.cho = cho_factor(A, lower=False, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("ridge normal matrix is not positive definite") from exc

    @classmethod
    def from_gram(cls, X, gram, rows, window, k=RIDGE_K, intercept=True) -> "GramReadout":
        obj = cls.__new__(cls)
        obj.X, obj.window, obj.k, obj.intercept = X, tuple(window), float(k), intercept
        obj.rows = rows
        obj.n = (rows.stop - rows.start) if isinstance(rows, slice) else len(rows)
        obj.gram = gram
        obj._factor(gram)
        return obj

    @property
    def n_features(self) -> int:
        return self.gram.shape[0]

    def _rhs(self, zw):
        xw = _values(self.X)[self.rows]
        b = xw.T @ zw
        if self.intercept:
            b = np.append(b, zw.sum())
        return b

    def fit(self, z) -> ReadoutFit:
        zv = _target_values(z)
        if not np.all(np.isfinite(zv)):
            raise ValueError("target must be finite")
        burn = z.burn_in if isinstance(z, Trajectory) else None
        if burn is not None:
            rows = _sample_range(self.X, self.window, burn)
            if not _same_rows(rows, self.rows):
                return GramReadout(self.X, self.window, self.k, self.intercept, rows=rows).fit(z)
        zw = zv[self.rows]
        return self.fit_moments(self._rhs(zw), float(zw @ zw))

    def fit_moments(self, b, zz: float) -> ReadoutFit:
        """Fit from the cross moments ``b = [X 1]^T z`` and ``zz = z^T z``."""
        if zz == 0.0:
            raise UndefinedCapacityError("target has zero mean square on the training window")
        w = cho_solve(self.cho, b, check_finite=False)
        sse = zz - 2.0 * float(w @ b) + float(w @ self.gram @ w)
        nmse = max(sse, 0.0) / zz
        return ReadoutFit(w, nmse, 1.0 - nmse, None, self.k, self.window, self.n, self.intercept)

    def capacity(self, z) -> float:
        return self.fit(z).capacity


def _same_rows(a, b) -> bool:
    def as_index(r):
        return np.arange(r.start, r.stop) if isinstance(r, slice) else np.asarray(r)
    if isinstance(a, slice) and isinstance(b, slice):
        return (a.start, a.stop) == (b.start, b.stop)
    return np.array_equal(as_index(a), as_index(b))


def ridge_fit(X, z, k: float = RIDGE_K, train_window=TRAIN_WINDOW, intercept: bool = True) -> ReadoutFit:
    return GramReadout(X, train_window, k, intercept).fit(z)


def generalization_nmse(fit: ReadoutFit, X, z, test_window=TEST_WINDOW) -> float:
    """Mean squared test error over the test-window mean square of ``z``.

    Unlike the training ``nmse`` this is not bounded by one.
    """
    zv = _target_values(z)
    burn = z.burn_in if isinstance(z, Trajectory) else None
    rows = _sample_range(X, test_window, burn)
    zw = zv[rows]
    if not np.all(np.isfinite(zw)) or not np.all(np.isfinite(_values(X)[rows])):
        raise ValueError("test data must be finite")
    zz = float(np.mean(zw * zw))
    if zz == 0.0:
        raise UndefinedCapacityError("target has zero mean square on the test window")
    resid = zw - fit.predict(_values(X)[rows])
    return float(np.mean(resid * resid)) / zz


def fit_and_test(X, z, k=RIDGE_K, train_window=TRAIN_WINDOW, test_window=TEST_WINDOW) -> ReadoutFit:
    fit = ridge_fit(X, z, k, train_window)
    fit.gen_nmse = generalization_nmse(fit, X, z, test_window)
    return fit


# -- memory functions -----------------------------------------------------------


class CapacityProbe:
    """Memory functions of one reservoir run, sharing a factored readout."""

    def __init__(self, X, u: Trajectory, train_window=TRAIN_WINDOW, k: float = RIDGE_K,
                 readout: GramReadout | None = None):
        self.readout = readout if readout is not None else GramReadout(X, train_window, k)
        self.u = u
        self._m = {}
        self._m2 = {}

    def linear(self, tau: float) -> float:
        key = self.u.grid.steps(tau)
        if key not in self._m:
            self._m[key] = self.readout.capacity(delayed_target(self.u, tau))
        return self._m[key]

    def quadratic(self, tau1: float, tau2: float) -> float:
        s1, s2 = sorted((self.u.grid.steps(tau1), self.u.grid.steps(tau2)))
        key = (s1, s2)
        if key not in self._m2:
            dt = self.u.grid.dt
            self._m2[key] = self.readout.capacity(product_target(self.u, s1 * dt, s2 * dt))
        return self._m2[key]

    def equal_time(self, tau: float) -> float:
        return self.quadratic(tau, tau)


def memory_function(X, u: Trajectory, tau: float, k: float = RIDGE_K,
                    train_window=TRAIN_WINDOW) -> float:
    """``m(tau)``: capacity for ``u(t - tau)``."""
    if isinstance(X, CapacityProbe):
        return X.linear(tau)
    readout = X if isinstance(X, GramReadout) else GramReadout(X, train_window, k)
    return readout.capacity(delayed_target(u, tau))


def quadratic_memory_function(X, u: Trajectory, tau1: float, tau2: float, k: float = RIDGE_K,
                              train_window=TRAIN_WINDOW) -> float:
    """``m2(tau1, tau2)``: capacity for ``u(t - tau1) u(t - tau2)``."""
    if isinstance(X, CapacityProbe):
        return X.quadratic(tau1, tau2)
    readout = X if isinstance(X, GramReadout) else GramReadout(X, train_window, k)
    return readout.capacity(product_target(u, tau1, tau2))


def argmax_equal_time(probe: CapacityProbe, tau_max: float = 10.0, spacing: float = 0.25):
    """Grid search for the diagonal maximum of ``m2``; ties go to the smaller delay."""
    taus = np.arange(0.0, tau_max + 0.5 * spacing, spacing)
    vals = np.array([probe.equal_time(t) for t in taus])
    i = int(np.argmax(vals))
    return float(taus[i]), float(vals[i]), taus, vals


# -- total capacities --------------------------------------------------------------


def threshold_crossing(fn, level: float, tol: float = 1.0, start: float = 16.0,
                       tau_max: float = 4096.0):
    """Bisect for the delay where ``fn`` falls to ``level``.

    Returns ``(estimate, flag)``; the estimate is the midpoint of the final
    bracket, whose width is at most ``tol``.
    """
    if not fn(0.0) > level:
        return 0.0, "below_threshold_at_zero"
    lo, hi = 0.0, float(start)
    while fn(hi) > level:
        lo, hi = hi, 2.0 * hi
        if hi > tau_max:
            return lo, "no_crossing_before_tau_max"
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) > level:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), None


def _memory_callable(source, u, train_window, k, kind):
    if callable(source) and not isinstance(source, (Trajectory, CapacityProbe, GramReadout)):
        return source
    if isinstance(source, CapacityProbe):
        probe = source
    else:
        readout = source if isinstance(source, GramReadout) else GramReadout(source, train_window, k)
        probe = CapacityProbe(None, u, readout=readout)
    return probe.linear if kind == "linear" else probe.quadratic


def linear_capacity(X, u: Trajectory | None = None, epsilon: float = 0.1, tol: float = 1.0,
                    k: float = RIDGE_K, train_window=TRAIN_WINDOW, start: float = 16.0) -> CapacityReport:
    """Delay at which ``m(tau)`` drops below ``1 - epsilon``.

    ``X`` may be a reservoir trajectory, a ``CapacityProbe`` or a plain callable
    ``tau -> m(tau)``.
    """
    m = _memory_callable(X, u, train_window, k, "linear")
    tau, flag = threshold_crossing(m, 1.0 - epsilon, tol, start)
    return CapacityReport("linear", epsilon, tau, tau, e_int=float(tol), flag=flag)


CELL = 0.5


def quadratic_capacity(X, u: Trajectory | None = None, epsilon: float = 0.1,
                       T_train: float | None = None, k: float = RIDGE_K,
                       train_window=TRAIN_WINDOW, cell: float = CELL,
                       diag_tol: float = 0.25, start: float = 4.0) -> CapacityReport:
    """Area of ``{(tau1, tau2): m2 > 1 - epsilon}``.

    A diagonal bisection gives ``tau*``; the indicator is then summed over
    cells of side ``cell`` (evaluated at cell centres) covering ``[0, 2 tau*]^2``.
    ``T_train`` shortens the training window to ``[t_a, t_a + T_train]``.
    ``X`` may also be a callable ``(tau1, tau2) -> m2``.
    """
    if T_train is not None:
        train_window = (train_window[0], train_window[0] + T_train)
    m2 = _memory_callable(X, u, train_window, k, "quadratic")
    level = 1.0 - epsilon
    tau_star, flag = threshold_crossing(lambda t: m2(t, t), level, diag_tol, start)
    if tau_star == 0.0:
        return CapacityReport("quadratic", epsilon, 0.0, 0.0, 0.0, flag=flag or "zero_tau_star")
    n_cells = int(math.ceil(2.0 * tau_star / cell - 1e-9))
    centres = (np.arange(n_cells) + 0.5) * cell
    grid = np.zeros((n_cells, n_cells))
    for i in range(n_cells):
        for j in range(i, n_cells):
            grid[i, j] = grid[j, i] = m2(centres[i], centres[j])
    area = float(np.count_nonzero(grid > level)) * cell * cell
    e_int = 2.0 * cell**2 * math.sqrt(area)
    report = CapacityReport("quadratic", epsilon, area, tau_star, e_int, flag=flag)
    report.evaluations = {"centres": centres, "m2": grid}
    return report


def finite_size_extrapolate(points):
    """Quadratic least-squares fit of capacity against ``1/T``; returns ``(intercept, e_fit)``.

    ``e_fit`` is the standard error of the intercept from the residual-scaled
    covariance; with exactly three points there are no residual degrees of
    freedom and ``e_fit`` is ``nan``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (1/T, capacity) pairs")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size < 3:
        raise ValueError("need at least three distinct training lengths")
    V = np.vander(x, 3, increasing=True)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    dof = len(x) - 3
    if dof == 0:
        return float(coef[0]), float("nan")
    resid = y - V @ coef
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(V.T @ V)
    return float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0)))


def linear_fit_r2(x, y):
    """Slope, intercept and coefficient of determination of a straight-line fit."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def nested_readouts(X, t_start: float, t_ends, k: float = RIDGE_K):
    """Readouts for windows ``[t_start, t_end]`` sharing one pass over the data."""
    t_ends = sorted(t_ends)
    x = _values(X)
    grid = X.grid
    ka = grid.index(t_start)
    readouts = {}
    gram = None
    prev = ka
    for te in t_ends:
        kb = grid.index(te) + 1
        blk = x[prev:kb]
        G = blk.T @ blk
        s = blk.sum(axis=0)
        inc = np.block([[G, s[:, None]], [s[None, :], np.array([[float(kb - prev)]])]])
        gram = inc if gram is None else gram + inc
        prev = kb
        readouts[te] = GramReadout.from_gram(X, gram.copy(), slice(ka, kb), (t_start, te), k)
    return readouts


class NestedCapacityProbe:
    """Quadratic memory function for several training lengths at once.

    Training windows are ``[t_start, t_start + T]``; the cross moments of each
    target are accumulated block by block so every length costs one data pass.
    """

    def __init__(self, X, u: Trajectory, T_values, t_start: float = TRAIN_WINDOW[0],
                 k: float = RIDGE_K):
        self.T_values = sorted(float(T) for T in T_values)
        self.u = u
        self.X = X
        self.readouts = nested_readouts(X, t_start, [t_start + T for T in self.T_values], k)
        self._bounds = [r.rows.stop for r in self.readouts.values()]
        self._start = next(iter(self.readouts.values())).rows.start
        self._cache = {}

    def quadratic(self, tau1: float, tau2: float) -> np.ndarray:
        s1, s2 = sorted((self.u.grid.steps(tau1), self.u.grid.steps(tau2)))
        if (s1, s2) in self._cache:
            return self._cache[(s1, s2)]
        dt = self.u.grid.dt
        z = product_target(self.u, s1 * dt, s2 * dt)
        zv = z.values[:, 0]
        readouts = list(self.readouts.values())
        if np.any(z.burn_in[self._start:self._bounds[-1]]):
            caps = np.array([r.capacity(z) for r in readouts])
        else:
            x = _values(self.X)
            b = np.zeros(readouts[0].n_features)
            zz = 0.0
            prev = self._start
            caps = np.empty(len(readouts))
            for i, (r, stop) in enumerate(zip(readouts, self._bounds)):
                zb = zv[prev:stop]
                b[:-1] += x[prev:stop].T @ zb
                b[-1] += zb.sum()
                zz += float(zb @ zb)
                caps[i] = r.fit_moments(b.copy(), zz).capacity
                prev = stop
        self._cache[(s1, s2)] = caps
        return caps


def finite_size_capacity(X, u: Trajectory, epsilon: float = 0.1, T_values=(1000, 1500, 2000, 3000, 3900),
                         t_start: float = TRAIN_WINDOW[0], k: float = RIDGE_K, **kw) -> CapacityReport:
    """Quadratic capacity extrapolated to an infinite training length.

    Each ``T`` gives a finite-length estimate; a quadratic in ``1/T`` is fitted
    and its intercept reported, with ``e_int`` evaluated at that intercept.
    """
    probe = NestedCapacityProbe(X, u, T_values, t_start, k)
    per_T = []
    for i, T in enumerate(probe.T_values):
        rep = quadratic_capacity(lambda a, b, i=i: probe.quadratic(a, b)[i], epsilon=epsilon, **kw)
        per_T.append((T, rep))
    tau_inf, e_fit = finite_size_extrapolate([(1.0 / T, r.tau_eps) for T, r in per_T])
    cell = kw.get("cell", CELL)
    e_int = 2.0 * cell**2 * math.sqrt(max(tau_inf, 0.0))
    report = CapacityReport("quadratic", epsilon, tau_inf, per_T[-1][1].tau_star, e_int, e_fit)
    report.evaluations = {"T": [T for T, _ in per_T], "tau_eps": [r.tau_eps for _, r in per_T],
                          "tau_star": [r.tau_star for _, r in per_T]}
    return report
