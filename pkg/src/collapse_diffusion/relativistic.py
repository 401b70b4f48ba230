"""Energy diffusion of an ultra-relativistic particle seen from the cosmological frame.

In the rest frame the mean energy grows at rate 3D/m. Lorentz transforming
the energy increment (dE = gamma dE' + c gamma dP'), switching to
cosmological time through dt = gamma dt' with dB_t = gamma^(1/2) dB_t', and
using E = gamma m c^2 gives

    dE = (3D/m - kappa E) dt + sqrt(2 D E / m) dB_t,

a square-root (CIR) diffusion where kappa is the constant Hubble rate. Only
this end product is simulated; the two time utilities below cover the
proper-time to cosmological-time conversion and its noise estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytics import CirParams
from .stochastic import (
    RngStream,
    SdePath,
    full_truncation_step,
    gamma_poisson_ncx2_sample,
)
from .units import SI, DomainError, PhysicalConstants

SCHEMES = ("truncation", "exact")
# stream ids for the brute-force oracle live in the upper half of the id space
ORACLE_STREAM_OFFSET = 1 << 63


@dataclass
class EnergyPath(SdePath):
    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0):
            raise ValueError("energy path went negative")

    @property
    def E(self):
        return self.values


def _check_scheme(scheme):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def _exact_jump(E, cir: CirParams, gen, size=None):
    if math.isinf(cir.alpha):
        return cir.beta * np.asarray(E, dtype=float)
    a = cir.alpha
    nc = 2 * a * cir.beta * np.asarray(E, dtype=float)
    return gamma_poisson_ncx2_sample(6, nc, gen, size=size) / (2 * a)


def exact_transition_sample(E0, params: CirParams, gen, size=None):
    """Draw E_t given E0 from the exact transition law.

    2 alpha E_t is noncentral chi-square with 6 degrees of freedom and
    noncentrality 2 alpha beta E0.
    """
    if not E0 > 0:
        raise DomainError("E0 must be positive")
    if isinstance(gen, RngStream):
        gen = gen.generator()
    if params.t == 0:
        return np.full(size, float(E0)) if size is not None else float(E0)
    return _exact_jump(E0, params, gen, size)


def simulate_energy(E0, D, m, kappa, t_max, dt, stream: RngStream,
                    scheme="truncation") -> EnergyPath:
    """One energy path on the grid 0, dt, 2dt, ..., t_max."""
    _check_scheme(scheme)
    if not E0 > 0:
        raise DomainError("E0 must be positive")
    if not dt > 0:
        raise DomainError("dt must be positive")
    n = max(1, int(round(t_max / dt)))
    dt = t_max / n
    times = dt * np.arange(n + 1)
    E = np.empty(n + 1)
    E[0] = E0
    gen = stream.generator()
    d_over_m = D / m
    if scheme == "truncation":
        z = gen.standard_normal(n)
        _truncation_loop(E, z, d_over_m, kappa, dt)
    else:
        step = CirParams(d_over_m, kappa, dt)
        for k in range(n):
            E[k + 1] = _exact_jump(E[k], step, gen)
    return EnergyPath(times, E)


def _truncation_loop(E, z, d_over_m, kappa, dt):
    # E[..., 0] holds the start value; z has one standard normal per step
    drift = 3 * d_over_m
    s = math.sqrt(2 * d_over_m)
    sdt = math.sqrt(dt)
    for k in range(z.shape[-1]):
        E[..., k + 1] = full_truncation_step(E[..., k], drift, kappa, s, dt, sdt * z[..., k])


def terminal_energies(E0, D, m, kappa, t_max, n_paths, seed=0, scheme="exact",
                      dt=None, first_id=0):
    """Terminal energies of ``n_paths`` independent trajectories.

    Path i uses stream (seed, first_id + i), so every entry equals the last
    point of ``simulate_energy`` run on that stream. The exact scheme jumps
    straight to t_max when ``dt`` is None.
    """
    _check_scheme(scheme)
    out = np.empty(n_paths)
    if scheme == "exact" and dt is None:
        cir = CirParams(D / m, kappa, t_max)
        for i in range(n_paths):
            gen = RngStream(seed, first_id + i).generator()
            out[i] = exact_transition_sample(E0, cir, gen)
        return out
    if dt is None:
        raise ValueError("truncation scheme needs a time step")
    n = max(1, int(round(t_max / dt)))
    if scheme == "exact":
        for i in range(n_paths):
            path = simulate_energy(E0, D, m, kappa, t_max, dt, RngStream(seed, first_id + i),
                                   "exact")
            out[i] = path.E[-1]
        return out
    chunk = 4096
    for start in range(0, n_paths, chunk):
        stop = min(start + chunk, n_paths)
        z = np.empty((stop - start, n))
        for j in range(start, stop):
            z[j - start] = RngStream(seed, first_id + j).generator().standard_normal(n)
        E = np.empty((stop - start, n + 1))
        E[:, 0] = E0
        _truncation_loop(E, z, D / m, kappa, t_max / n)
        out[start:stop] = E[:, -1]
    return out


def besq6_walk_energies(E0, dtm, n_paths, seed=0, n_steps=16):
    """Oracle for kappa = 0: energies from a brute-force six-dimensional walk.

    With kappa = 0, Y = 2 m E / D is a squared Bessel process of dimension 6,
    i.e. the squared norm of a 6-d Brownian motion. The walk starts at radius
    sqrt(2 E0 / dtm) and runs for unit time (D t / m = dtm); returns E = Y dtm / 2.
    """
    r0 = math.sqrt(2 * E0 / dtm)
    h = math.sqrt(1.0 / n_steps)
    Y = np.empty(n_paths)
    for i in range(n_paths):
        gen = RngStream(seed, ORACLE_STREAM_OFFSET + i).generator()
        pos = np.zeros(6)
        pos[0] = r0
        for step in gen.standard_normal((n_steps, 6)):
            pos += h * step
        Y[i] = pos @ pos
    return Y * dtm / 2


# --- proper time to cosmological time -------------------------------------------

def _gamma_path(gamma_path):
    t_prime, gamma = (np.asarray(a, dtype=float) for a in gamma_path)
    if t_prime.shape != gamma.shape or t_prime.ndim != 1 or len(t_prime) < 2:
        raise DomainError("gamma path needs matching 1-d arrays of length >= 2")
    if np.any(np.diff(t_prime) <= 0):
        raise DomainError("rest-frame times must be strictly increasing")
    if np.any(gamma < 1):
        raise DomainError("Lorentz factor must be >= 1")
    return t_prime, gamma


def cosmo_time_of_proper(gamma_path) -> float:
    """Cosmological time elapsed, the integral of gamma over rest-frame time."""
    t_prime, gamma = _gamma_path(gamma_path)
    return float(np.trapezoid(gamma, t_prime))


def time_estimate_stddev(gamma_path, m, consts: PhysicalConstants = SI) -> float:
    """Standard deviation of the dropped Ito term in the time conversion,
    sqrt(hbar/(m c^2) * integral of gamma^2 over rest-frame time). SI units."""
    t_prime, gamma = _gamma_path(gamma_path)
    return math.sqrt(consts.hbar / (m * consts.c ** 2) * np.trapezoid(gamma ** 2, t_prime))


# --- Feller condition -------------------------------------------------------------

@dataclass(frozen=True)
class GenericCir:
    """dz = kappa (theta - z) dt + sqrt(sigma2 z) dB."""
    kappa: float
    theta: float
    sigma2: float

    @property
    def drift_const(self):
        return self.kappa * self.theta


def feller_check(params):
    """Whether 2 kappa theta >= sigma^2 (origin inaccessible), with both sides.

    For the collapse energy process 2 kappa theta = 6 D/m against
    sigma^2 = 2 D/m, so the check always passes.
    """
    if isinstance(params, CirParams):
        lhs = 6 * params.d_over_m
    else:
        lhs = 2 * params.drift_const
    rhs = params.sigma2
    ok = bool(lhs >= rhs)
    return ok, {"two_kappa_theta": lhs, "sigma2": rhs, "origin_inaccessible": ok}
