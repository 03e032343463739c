"""Banks of independent series LRC subcircuits.

Each subcircuit obeys ``l q'' + r q' + q/c = s(t)`` with eigenvalues
``-gamma +/- i omega``.  Trajectories are computed from the modal variable
``f(t) = int_0^t exp(lambda_+ (t - s)) u(s) ds`` which is advanced exactly
between samples under a piecewise-linear input.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .signals import Trajectory


@dataclass(frozen=True, eq=False)
class LrcBank:
    l: np.ndarray
    r: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        l, r, c = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (self.l, self.r, self.c))
        if not (l.shape == r.shape == c.shape):
            raise ValueError("l, r, c must have the same length")
        if np.any(l <= 0) or np.any(c <= 0) or np.any(r < 0):
            raise ValueError("need l, c > 0 and r >= 0")
        if np.any(1.0 / (l * c) <= r**2 / (4 * l**2)):
            raise ValueError("bank contains critically or over-damped subcircuits")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "c", c)

    @property
    def size(self) -> int:
        return self.l.size

    @property
    def n_channels(self) -> int:
        return 2 * self.size

    @property
    def gamma(self) -> np.ndarray:
        return self.r / (2 * self.l)

    @property
    def omega(self) -> np.ndarray:
        return np.sqrt(1.0 / (self.l * self.c) - self.gamma**2)

    @property
    def eigenvalues(self) -> np.ndarray:
        """``lambda_+`` per subcircuit (the conjugate is ``lambda_-``)."""
        return -self.gamma + 1j * self.omega

    def state_matrix(self, n: int) -> np.ndarray:
        l, r, c = self.l[n], self.r[n], self.c[n]
        return np.array([[0.0, 1.0], [-1.0 / (l * c), -r / l]])

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "l", "r", "c", "re_lambda", "im_lambda"])
        for n, (l, r, c, lam) in enumerate(zip(self.l, self.r, self.c, self.eigenvalues), start=1):
            w.writerow([n] + [repr(float(x)) for x in (l, r, c, lam.real, lam.imag)])
        return buf.getvalue()


def design_bank(gamma: float, delta_omega: float, N: int) -> LrcBank:
    """Bank with eigenvalue comb ``-gamma +/- i n delta_omega``, ``n = 1..N``.

    Uses ``l = 1``, ``r = 2 gamma`` and ``c_n = 1 / (n^2 dw^2 + gamma^2)``.
    """
    if not (gamma > 0 and delta_omega > 0):
        raise ValueError("gamma and delta_omega must be positive")
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    n = np.arange(1, int(N) + 1)
    c = 1.0 / (n**2 * delta_omega**2 + gamma**2)
    return LrcBank(np.ones(N), np.full(N, 2.0 * gamma), c)


def _step_coefficients(lam: complex, h: float):
    """``f_{k+1} = E f_k + b0 u_{k+1} + b1 u_k`` for linear ``u`` on the step."""
    z = lam * h
    E = np.exp(z)
    phi = h * np.expm1(z) / z                 # int_0^h e^{lam(h-s)} ds
    psi = h * h * (np.expm1(z) - z) / z**2    # int_0^h e^{lam(h-s)} s ds
    b0 = psi / h
    return E, b0, phi - b0


def modal_drive(lam: complex, u: np.ndarray, h: float, f0: complex = 0.0) -> np.ndarray:
    """``f(t_k)`` for one eigenvalue, starting from ``f(t_0) = f0``."""
    E, b0, b1 = _step_coefficients(lam, h)
    u = np.asarray(u, dtype=float)
    zi = np.array([f0 - b0 * u[0]], dtype=complex)
    f, _ = lfilter(np.array([b0, b1]), np.array([1.0, -E]), u.astype(complex), zi=zi)
    return f


def _state_to_modal(bank: LrcBank, q0, qdot0) -> np.ndarray:
    l, g, w = bank.l, bank.gamma, bank.omega
    b = l * w * np.asarray(q0, dtype=float)
    a = (l * w * np.asarray(qdot0, dtype=float) + g * b) / w
    return a + 1j * b


def simulate_exact(bank: LrcBank, u: Trajectory, initial_state=None) -> Trajectory:
    """Drive every subcircuit with ``s = u(t)``.

    Returns ``2N`` channels ordered ``q_1..q_N, qdot_1..qdot_N``.
    ``initial_state`` is an optional ``(q0, qdot0)`` pair; default is rest.
    """
    if u.n_channels != 1:
        raise ValueError(f"LRC bank takes a single-channel drive, got {u.n_channels}")
    N = bank.size
    if initial_state is None:
        f0 = np.zeros(N, dtype=complex)
    else:
        q0, qd0 = (np.broadcast_to(np.asarray(x, dtype=float), (N,)) for x in initial_state)
        f0 = _state_to_modal(bank, q0, qd0)
    x = u.values[:, 0]
    h = u.grid.dt
    out = np.empty((u.grid.n_steps, 2 * N))
    lams = bank.eigenvalues
    for n in range(N):
        f = modal_drive(lams[n], x, h, f0[n])
        scale = 1.0 / (bank.l[n] * bank.omega[n])
        out[:, n] = f.imag * scale
        out[:, N + n] = (lams[n] * f).imag * scale
    return Trajectory(u.grid, out, u.burn_in.copy(), u.seed, {"reservoir": "lrc", "N": N})


@dataclass(frozen=True, eq=False)
class KernelWeights:
    w_q: np.ndarray
    w_qdot: np.ndarray
    w_const: float = 0.0

    @classmethod
    def from_readout(cls, weights: np.ndarray, N: int) -> "KernelWeights":
        """Split a readout vector ``[q_1..q_N, qdot_1..qdot_N, const]``."""
        weights = np.asarray(weights, dtype=float)
        return cls(weights[:N], weights[N:2 * N], float(weights[2 * N]))


def kernel_from_weights(bank: LrcBank, w: KernelWeights, tau_grid) -> np.ndarray:
    """Linear kernel ``K(tau)`` of a readout on an LRC bank."""
    tau_in = np.asarray(tau_grid, dtype=float)
    tau = tau_in.ravel()
    w_q = np.asarray(w.w_q, dtype=float)
    w_qd = np.asarray(w.w_qdot, dtype=float)
    if not (np.all(np.isfinite(w_q)) and np.all(np.isfinite(w_qd))):
        raise ValueError("kernel weights must be finite")
    if w_q.size != bank.size or w_qd.size != bank.size:
        raise ValueError("weight vectors must have one entry per subcircuit")
    g, om, l = bank.gamma, bank.omega, bank.l
    ph = tau[:, None] * om[None, :]
    s, c = np.sin(ph), np.cos(ph)
    terms = (w_q * s + w_qd * (om * c - g * s)) / (l * om)
    return np.sum(np.exp(-tau[:, None] * g) * terms, axis=1).reshape(tau_in.shape)


def kernel_csv_string(tau, K) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "K"])
    for t, k in zip(tau, K):
        w.writerow([repr(float(t)), repr(float(k))])
    return buf.getvalue()
