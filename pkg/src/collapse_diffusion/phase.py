"""Classical phase-space diffusion of the stationary wave packet.

Once the packet has reached its stationary shape, its mean position X and
mean momentum P follow

    dX = (P/m) dt + sqrt(hbar/m) dB,    dP = sqrt(2D) dB,

driven by the same three-dimensional Brownian motion. The rest-frame
kinetic energy E' = P.P / 2m then obeys dE' = (3D/m) dt + (sqrt(2D)/m) P.dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stochastic import RngStream


@dataclass(frozen=True)
class PhaseState:
    X: np.ndarray
    P: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.P))):
            raise ValueError("phase state must be finite")


@dataclass(frozen=True)
class RestEnergy:
    E_prime: float
    t_prime: float


def phase_step(state: PhaseState, D, m, dt, dW, hbar=1.0) -> PhaseState:
    """One Euler step; the same increment ``dW`` moves X and P."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    dW = np.asarray(dW, dtype=float)
    X = state.X + state.P / m * dt + math.sqrt(hbar / m) * dW
    P = state.P + math.sqrt(2 * D) * dW
    return PhaseState(X, P, state.t + dt)


def rest_energy_step(state: PhaseState, D, m, dt, dW) -> float:
    """Energy increment over one step, evaluated at the step-start momentum."""
    P = np.asarray(state.P, dtype=float)
    return 3 * D / m * dt + math.sqrt(2 * D) / m * float(np.dot(P, dW))


def kinetic_energy(P, m):
    P = np.asarray(P, dtype=float)
    return np.sum(P * P, axis=-1) / (2 * m)


def xp_covariance(D, m, t, hbar=1.0, dt=0.0):
    """Cov[X_i(t), P_i(t)] from a fixed start.

    Continuous time gives D t^2/m + sqrt(2 D hbar/m) t; the Euler scheme,
    which moves X with the step-start momentum, replaces t^2 by t (t - dt).
    """
    return D * t * (t - dt) / m + math.sqrt(2 * D * hbar / m) * t


def simulate_ensemble(D, m, dt, n_steps, n_paths, seed=0, X0=None, P0=None, hbar=1.0,
                      record_every=None, first_id=0, chunk=2048):
    """Ensemble of phase-space paths, stream (seed, first_id + i) for path i.

    Returns a dict with final ``X``, ``P`` (n_paths, 3), the accumulated
    rest-frame energy ``E_acc`` (sum of rest_energy_step increments) and,
    if ``record_every`` is set, per-time ensemble ``moments`` rows with
    MOMENT_COLUMNS (variances and covariances averaged over components).
    """
    X_out = np.empty((n_paths, 3))
    P_out = np.empty((n_paths, 3))
    E_out = np.empty(n_paths)
    n_rec = n_steps // record_every + 1 if record_every else 0
    # running sums per record: X, P, X^2, P^2, XP (per component) and E
    sums = np.zeros((n_rec, 5, 3))
    e_sum = np.zeros(n_rec)
    sq_dt = math.sqrt(dt)
    a, b = math.sqrt(hbar / m), math.sqrt(2 * D)

    def accumulate(r, X, P):
        sums[r] += (X.sum(0), P.sum(0), (X * X).sum(0), (P * P).sum(0), (X * P).sum(0))
        e_sum[r] += kinetic_energy(P, m).sum()

    for start in range(0, n_paths, chunk):
        stop = min(start + chunk, n_paths)
        nc = stop - start
        noise = np.empty((nc, n_steps, 3))
        for i in range(start, stop):
            noise[i - start] = RngStream(seed, first_id + i).generator().standard_normal(
                (n_steps, 3))
        X = np.zeros((nc, 3)) if X0 is None else np.array(np.broadcast_to(X0, (nc, 3)), float)
        P = np.zeros((nc, 3)) if P0 is None else np.array(np.broadcast_to(P0, (nc, 3)), float)
        E = kinetic_energy(P, m)
        if record_every:
            accumulate(0, X, P)
        for k in range(n_steps):
            dW = sq_dt * noise[:, k, :]
            E = E + 3 * D / m * dt + b / m * np.sum(P * dW, axis=1)
            X = X + P / m * dt + a * dW
            P = P + b * dW
            if record_every and (k + 1) % record_every == 0:
                accumulate((k + 1) // record_every, X, P)
        X_out[start:stop], P_out[start:stop], E_out[start:stop] = X, P, E

    out = {"X": X_out, "P": P_out, "E_acc": E_out}
    if record_every:
        n = n_paths
        mx, mp = sums[:, 0] / n, sums[:, 1] / n
        var_p = (sums[:, 3] - n * mp ** 2) / (n - 1)
        cov = (sums[:, 4] - n * mx * mp) / (n - 1)
        t = dt * record_every * np.arange(n_rec)
        out["moments"] = np.column_stack(
            [t, mp.mean(1), var_p.mean(1), cov.mean(1), e_sum / n])
    return out


MOMENT_COLUMNS = ("t", "mean_P", "var_P", "cov_XP", "mean_E")
