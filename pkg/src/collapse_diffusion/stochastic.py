"""Random streams, Brownian increments and SDE stepping schemes.

Every trajectory owns its own Philox stream keyed by ``(seed, stream_id)``.
Philox is counter-based, so streams with different ids are independent and
no trajectory's draws depend on how many other trajectories were simulated
or in which order. Gaussian variates come from numpy's ziggurat sampler
(``Generator.standard_normal``); bit-exactness therefore holds for a fixed
numpy version.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v <= _U64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


@dataclass
class SdePath:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values)
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


class NonFiniteStateError(FloatingPointError):
    def __init__(self, step):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


def max_workers() -> int:
    """Thread cap from COLLAPSE_DIFFUSION_THREADS (default 1)."""
    raw = os.environ.get("COLLAPSE_DIFFUSION_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map, threaded up to ``max_workers()``. Results never depend on
    the thread count since each item carries its own stream."""
    items = list(items)
    n = min(max_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def brownian_increments(stream: RngStream, n: int, dt: float, shape=()) -> np.ndarray:
    """``n`` i.i.d. N(0, dt) increments (each of the given trailing shape)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    return np.sqrt(dt) * stream.generator().standard_normal((n, *shape))


def ensemble_normals(seed: int, n_paths: int, shape, first_id: int = 0) -> np.ndarray:
    """Standard normals of shape ``(n_paths, *shape)``, row i drawn from
    stream ``(seed, first_id + i)``."""
    shape = tuple(np.atleast_1d(shape)) if shape != () else ()
    out = np.empty((n_paths, *shape))
    for i in range(n_paths):
        out[i] = RngStream(seed, first_id + i).generator().standard_normal(shape)
    return out


def euler_maruyama(drift, diffusion, x0, dt: float, n: int, stream: RngStream,
                   t0: float = 0.0) -> SdePath:
    """Explicit Euler-Maruyama for dX = a(X,t) dt + b(X,t) dW.

    ``diffusion`` returns either a vector of the state's shape (diagonal
    noise, one Brownian motion per component) or a scalar.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.array(x0, dtype=float)
    dW = brownian_increments(stream, n, dt, x.shape)
    times = t0 + dt * np.arange(n + 1)
    values = np.empty((n + 1, *x.shape))
    values[0] = x
    for k in range(n):
        t = times[k]
        x = x + drift(x, t) * dt + diffusion(x, t) * dW[k]
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(k + 1)
        values[k + 1] = x
    return SdePath(times, values)


def full_truncation_step(state, drift_const, kappa, sqrt_diffusion_coeff, dt, dW):
    """One full-truncation Euler step of dX = (a - kappa X) dt + s sqrt(X) dW.

    Drift and diffusion are evaluated at max(X, 0); the returned state is
    clipped at zero so chained steps always see a non-negative input.
    Works elementwise on arrays.
    """
    xp = np.maximum(state, 0.0)
    nxt = xp + (drift_const - kappa * xp) * dt + sqrt_diffusion_coeff * np.sqrt(xp) * dW
    return np.maximum(nxt, 0.0)


def gamma_poisson_ncx2_sample(df, noncentrality, gen, size=None):
    """Noncentral chi-square variate via its Poisson mixture of gammas.

    N ~ Poisson(nc / 2), then Gamma(df/2 + N, scale 2). ``gen`` is an
    RngStream or a numpy Generator.
    """
    if isinstance(gen, RngStream):
        gen = gen.generator()
    nc = np.asarray(noncentrality, dtype=float)
    if np.any(nc < 0):
        raise ValueError("noncentrality must be non-negative")
    if size is None:
        size = nc.shape
    n = gen.poisson(nc / 2, size=size)
    return gen.gamma(df / 2 + n, 2.0, size=size)
