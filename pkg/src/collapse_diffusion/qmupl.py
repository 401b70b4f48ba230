"""One-dimensional stochastic Schrodinger equation with universal position localization.

    d psi = [-(i/hbar) H dt - (D/hbar^2)(x - <x>)^2 dt + (sqrt(2D)/hbar)(x - <x>) dB] psi

The equation separates per Cartesian component, so a single component is
simulated. Units: hbar = m = 1 by default, leaving D as the only scale;
then sigma_inf = (8D)^(-1/4) and t_loc = D^(-1/2).

Stepping is a Strang splitting: spectral kinetic half step, the Ito
collapse factor exp{-2(D/hbar^2)(x-<x>)^2 dt + (sqrt(2D)/hbar)(x-<x>) dW},
kinetic half step, renormalization. The extra -(D/hbar^2)(x-<x>)^2 dt in
the exponent is the Ito correction that makes the factor agree with the
equation to first order in dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .stochastic import RngStream, parallel_map

# fraction of the half-width the packet centre may wander before re-centring
RECENTER_FRACTION = 0.25


class StepSizeError(RuntimeError):
    pass


class NotConvergedError(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True)
class QmuplConfig:
    D: float = 1.0
    m: float = 1.0
    dt: float = 1e-3
    n_grid: int = 2048
    t_max: float = 20.0
    hbar: float = 1.0
    # half-width of the periodic box in units of sigma_inf
    box_sigmas: float = 40.0
    # largest accepted expected norm change 4 D var_x dt / hbar^2 per step
    collapse_tol: float = 0.1

    def __post_init__(self):
        if self.D < 0 or not self.m > 0 or not self.dt > 0 or not self.hbar > 0:
            raise ValueError("need D >= 0, m > 0, dt > 0, hbar > 0")
        if self.n_grid < 16 or self.n_grid & (self.n_grid - 1):
            raise ValueError("n_grid must be a power of two >= 16")

    @property
    def sigma_inf(self):
        if self.D == 0:
            return math.inf
        return (self.hbar ** 3 / (8 * self.D * self.m)) ** 0.25

    @property
    def t_loc(self):
        if self.D == 0:
            return math.inf
        return math.sqrt(self.m * self.hbar / self.D)

    def half_width(self, packet_width=None):
        if packet_width is None:
            packet_width = self.sigma_inf
        return self.box_sigmas * packet_width


@dataclass
class WaveFunction:
    amplitudes: np.ndarray
    x_min: float
    dx: float

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(len(self.amplitudes))

    @property
    def norm(self):
        return math.sqrt(float(np.sum(np.abs(self.amplitudes) ** 2)) * self.dx)

    def normalized(self):
        return WaveFunction(self.amplitudes / self.norm, self.x_min, self.dx)

    def shifted(self, cells: int):
        """Same physical state on a box moved by ``cells`` grid points."""
        return WaveFunction(np.roll(self.amplitudes, -cells), self.x_min + cells * self.dx,
                            self.dx)


def gaussian_packet(n_grid, half_width, width, center=0.0, momentum=0.0,
                    curvature=0.0, hbar=1.0):
    """Normalized Gaussian with |psi|^2 standard deviation ``width``.

    ``curvature`` multiplies i/(4 width^2) in the exponent; 1 gives the
    stationary (1 - i) structure.
    """
    dx = 2 * half_width / n_grid
    x_min = center - half_width
    x = x_min + dx * np.arange(n_grid)
    y = x - center
    amp = np.exp(-(1 - 1j * curvature) * y ** 2 / (4 * width ** 2) + 1j * momentum * x / hbar)
    return WaveFunction(amp, x_min, dx).normalized()


def steady_state_packet(cfg: QmuplConfig, center=0.0, momentum=0.0, n_grid=None):
    return gaussian_packet(n_grid or cfg.n_grid, cfg.half_width(), cfg.sigma_inf, center,
                           momentum, curvature=1.0, hbar=cfg.hbar)


def _kinetic_phase(psi: WaveFunction, cfg: QmuplConfig, tau):
    k = 2 * np.pi * np.fft.fftfreq(len(psi.amplitudes), psi.dx)
    return np.exp(-1j * cfg.hbar * k ** 2 * tau / (2 * cfg.m))


def _mean_x(amp, x, dx):
    return float(np.sum(x * np.abs(amp) ** 2) * dx)


def qmupl_step(psi: WaveFunction, cfg: QmuplConfig, dW: float, _phase=None) -> WaveFunction:
    """Advance a normalized wave function by one step ``cfg.dt`` with
    Brownian increment ``dW``."""
    phase = _kinetic_phase(psi, cfg, cfg.dt / 2) if _phase is None else _phase
    x = psi.x
    mean = _mean_x(psi.amplitudes, x, psi.dx)

    c = cfg.D / cfg.hbar ** 2
    # expected relative norm change of the collapse factor is 4 c var_x dt
    var = float(np.sum((x - mean) ** 2 * np.abs(psi.amplitudes) ** 2) * psi.dx)
    if 4 * c * var * cfg.dt > cfg.collapse_tol:
        raise StepSizeError(
            f"4 D var_x dt / hbar^2 = {4 * c * var * cfg.dt:.3g} exceeds "
            f"{cfg.collapse_tol}; reduce dt")
    amp = np.fft.ifft(np.fft.fft(psi.amplitudes) * phase)
    y = x - mean
    amp = amp * np.exp(-2 * c * y ** 2 * cfg.dt + math.sqrt(2 * cfg.D) / cfg.hbar * y * dW)
    collapse_norm2 = float(np.sum(np.abs(amp) ** 2) * psi.dx)
    amp = np.fft.ifft(np.fft.fft(amp) * phase)
    norm2 = float(np.sum(np.abs(amp) ** 2) * psi.dx)
    # the kinetic propagator is unitary: any drift beyond round-off is a bug
    if abs(norm2 / collapse_norm2 - 1) > 1e-6:
        raise StepSizeError("kinetic step did not conserve the norm")
    return WaveFunction(amp / math.sqrt(norm2), psi.x_min, psi.dx)


def free_step(psi: WaveFunction, cfg: QmuplConfig) -> WaveFunction:
    """Exact free evolution over ``cfg.dt`` (no collapse)."""
    amp = np.fft.ifft(np.fft.fft(psi.amplitudes) * _kinetic_phase(psi, cfg, cfg.dt))
    return WaveFunction(amp, psi.x_min, psi.dx)


@dataclass(frozen=True)
class Observables:
    mean_x: float
    mean_p: float
    var_x: float
    curvature_ratio: float


def momentum_moments(psi: WaveFunction, hbar=1.0):
    """(<p>, <p^2>) from the discrete Fourier transform."""
    k = 2 * np.pi * np.fft.fftfreq(len(psi.amplitudes), psi.dx)
    w = np.abs(np.fft.fft(psi.amplitudes)) ** 2
    w /= w.sum()
    p = hbar * k
    return float(np.sum(p * w)), float(np.sum(p ** 2 * w))


def curvature_ratio(psi: WaveFunction, window_sd=3.0, floor=1e-12):
    """Quadratic coefficient of the phase over that of -log|psi| near the peak.

    Equals 1 for the stationary packet exp(-(1 - i)(x - <x>)^2 / (4 sigma^2)).
    Points with |psi|^2 below ``floor`` are excluded from the fit.
    """
    x = psi.x
    rho = np.abs(psi.amplitudes) ** 2
    w = rho / rho.sum()
    mean = float(np.sum(x * w))
    sd = math.sqrt(float(np.sum((x - mean) ** 2 * w)))
    sel = (np.abs(x - mean) <= window_sd * sd) & (rho >= floor)
    if sel.sum() < 5:
        return math.nan
    y = x[sel] - mean
    amp = psi.amplitudes[sel]
    phase = np.unwrap(np.angle(amp))
    a_phase = np.polyfit(y, phase, 2)[0]
    a_amp = np.polyfit(y, -np.log(np.abs(amp)), 2)[0]
    return float(a_phase / a_amp)


def observables(psi: WaveFunction, hbar=1.0) -> Observables:
    x = psi.x
    rho = np.abs(psi.amplitudes) ** 2 * psi.dx
    rho /= rho.sum()
    mean_x = float(np.sum(x * rho))
    var_x = float(np.sum((x - mean_x) ** 2 * rho))
    mean_p, _ = momentum_moments(psi, hbar)
    return Observables(mean_x, mean_p, var_x, curvature_ratio(psi))


def recenter(psi: WaveFunction, fraction=RECENTER_FRACTION) -> WaveFunction:
    """Roll the periodic box back over the packet once its centre has wandered
    more than ``fraction`` of the half-width from the box middle."""
    n = len(psi.amplitudes)
    half = n * psi.dx / 2
    mid = psi.x_min + half
    mean = _mean_x(psi.amplitudes, psi.x, psi.dx)
    if abs(mean - mid) <= fraction * half:
        return psi
    return psi.shifted(int(round((mean - mid) / psi.dx)))


TRACE_COLUMNS = ("t", "var_x", "curvature_ratio", "mean_x", "mean_p")


def evolve(cfg: QmuplConfig, stream: RngStream, init_width=None, t_max=None,
           record_every=10, until_converged=False, rel_tol=1e-3, psi0=None):
    """Integrate from a real Gaussian of width ``init_width`` (default
    3 sigma_inf). Returns (final WaveFunction, trace array with
    TRACE_COLUMNS).

    With ``until_converged`` the run stops once var_x has changed by less
    than ``rel_tol`` (relative) over the last t_loc, and raises
    NotConvergedError if that has not happened by 20 t_loc.
    """
    sigma = cfg.sigma_inf
    if init_width is None:
        init_width = 3 * sigma
    if psi0 is None:
        half = cfg.half_width(max(sigma, init_width / 3) if math.isfinite(sigma) else init_width)
        psi = gaussian_packet(cfg.n_grid, half, init_width, hbar=cfg.hbar)
    else:
        psi = psi0
    if t_max is None:
        t_max = 20 * cfg.t_loc if until_converged else cfg.t_max
    n_steps = int(round(t_max / cfg.dt))
    window = max(1, int(round(cfg.t_loc / (cfg.dt * record_every)))) if until_converged else 0

    gen = stream.generator()
    phase = _kinetic_phase(psi, cfg, cfg.dt / 2)
    sqdt = math.sqrt(cfg.dt)
    block = 4096
    rows = []

    def record(step):
        ob = observables(psi, cfg.hbar)
        rows.append((step * cfg.dt, ob.var_x, ob.curvature_ratio, ob.mean_x, ob.mean_p))

    record(0)
    z = None
    for step in range(n_steps):
        if step % block == 0:
            z = gen.standard_normal(block)
        psi = qmupl_step(psi, cfg, sqdt * z[step % block], _phase=phase)
        psi = recenter(psi)
        if (step + 1) % record_every == 0:
            record(step + 1)
            if until_converged and len(rows) > window:
                v_now, v_then = rows[-1][1], rows[-1 - window][1]
                if abs(v_now - v_then) < rel_tol * v_now:
                    return psi, np.array(rows)
    trace = np.array(rows)
    if until_converged:
        raise NotConvergedError("var_x did not settle within 20 t_loc", trace)
    return psi, trace


def run_to_steady_state(cfg: QmuplConfig, stream: RngStream, init_width=None,
                        record_every=10):
    """Trace (t, var_x, curvature_ratio, mean_x, mean_p) up to settling."""
    _, trace = evolve(cfg, stream, init_width, record_every=record_every,
                      until_converged=True)
    return trace


def settling_time(trace, sigma_inf, tol=0.05):
    """Time after which var_x stays within ``tol`` (relative) of sigma_inf^2.

    The width overshoots below sigma_inf on the way in, so the first
    crossing into the band is not used. Returns inf if the last record is
    still outside.
    """
    r = np.abs(trace[:, 1] / sigma_inf ** 2 - 1)
    outside = np.nonzero(r >= tol)[0]
    if len(outside) == 0:
        return float(trace[0, 0])
    if outside[-1] == len(trace) - 1:
        return math.inf
    return float(trace[outside[-1] + 1, 0])


def ensemble(cfg: QmuplConfig, seeds, **kwargs):
    """Independent runs, one stream per seed; returns a list of traces."""
    return parallel_map(lambda s: evolve(cfg, RngStream(s, 0), **kwargs)[1], list(seeds))


def with_dt(cfg: QmuplConfig, dt):
    return replace(cfg, dt=dt)
