"""Closed-form laws of the energy diffusion dE = (3D/m - kappa E) dt + sqrt(2DE/m) dB.

The transition density is a scaled noncentral chi-square with six degrees
of freedom:

    p_t(E | E0) = (alpha/beta) (E/E0) exp(-alpha (E + beta E0)) I2(2 alpha sqrt(beta E E0))

with beta = exp(-kappa t) and alpha = (kappa m / D) / (1 - beta). It is
always evaluated in log space through the exponentially scaled Bessel
function, since alpha * E0 can be as large as 1e17 for physical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .units import DomainError

# small-kappa*t switch to the analytic kappa -> 0 limit of alpha
KT_SERIES_LIMIT = 1e-8
# series / asymptotic crossover for the scaled Bessel function
BESSEL_SWITCH = 30.0
_SERIES_TERMS = 90
_ASYMP_TERMS = 40


@dataclass(frozen=True)
class CirParams:
    """Energy diffusion parameters at elapsed time ``t``.

    ``d_over_m`` is D/m (energy per unit time) and ``kappa`` the Hubble
    rate. Energies are in whatever unit d_over_m * t is expressed in.
    """

    d_over_m: float
    kappa: float
    t: float

    def __post_init__(self):
        if self.d_over_m < 0 or self.kappa < 0 or self.t < 0:
            raise DomainError("d_over_m, kappa and t must be non-negative")

    @classmethod
    def from_physical(cls, D, m, kappa, t):
        if not m > 0:
            raise DomainError("mass must be positive")
        return cls(D / m, kappa, t)

    @classmethod
    def from_groups(cls, dtm, kappa_t):
        """Time measured in units of t: D t / m = ``dtm``, kappa t = ``kappa_t``."""
        return cls(dtm, kappa_t, 1.0)

    @property
    def theta(self):
        return 3 * self.d_over_m / self.kappa if self.kappa > 0 else math.inf

    @property
    def sigma2(self):
        return 2 * self.d_over_m

    @property
    def omega(self):
        return self.kappa / self.d_over_m if self.d_over_m > 0 else math.inf

    @property
    def beta(self):
        return math.exp(-self.kappa * self.t)

    @property
    def dtm(self):
        return self.d_over_m * self.t

    @property
    def alpha(self):
        kt = self.kappa * self.t
        if self.d_over_m == 0 or self.t == 0:
            return math.inf
        if kt < KT_SERIES_LIMIT:
            return 1.0 / (self.d_over_m * self.t)
        return self.omega / -math.expm1(-kt)

    # aliases matching the parameter names used elsewhere
    alpha_cir = alpha


# --- scaled Bessel function ---------------------------------------------------

def _i2e_series(x):
    h = (x / 2) ** 2
    term = h / 2.0
    total = term.copy()
    for k in range(_SERIES_TERMS):
        term = term * h / ((k + 1) * (k + 3))
        total += term
    return total * np.exp(-x)


def _i2e_asymptotic(x):
    # e^-x I_nu(x) ~ (2 pi x)^-1/2 sum_k (-1)^k a_k(nu) / x^k, 4 nu^2 = 16
    term = np.ones_like(x)
    total = term.copy()
    for k in range(1, _ASYMP_TERMS + 1):
        term = -term * (16 - (2 * k - 1) ** 2) / (8 * k * x)
        total += term
    return total / np.sqrt(2 * np.pi * x)


def bessel_i2_scaled(x):
    """exp(-x) * I2(x) for x >= 0, relative error below 1e-12."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("bessel_i2_scaled needs x >= 0")
    out = np.empty_like(x)
    small = x <= BESSEL_SWITCH
    out[small] = _i2e_series(x[small])
    out[~small] = _i2e_asymptotic(x[~small])
    return out if out.ndim else float(out)


# --- transition law -----------------------------------------------------------

def transition_log_density(E, E0, cir: CirParams):
    E = np.asarray(E, dtype=float)
    if not E0 > 0:
        raise DomainError("E0 must be positive")
    if np.any(E < 0):
        raise DomainError("energies must be non-negative")
    a, b = cir.alpha, cir.beta
    if math.isinf(a):
        raise DomainError("transition density is a point mass at t = 0 or D = 0")
    if b == 0.0:
        return stationary_log_density(E, a)
    bE0 = b * E0
    with np.errstate(divide="ignore"):
        z = 2 * a * np.sqrt(bE0 * E)
        logp = (math.log(a) + np.log(E / bE0)
                - a * (np.sqrt(E) - math.sqrt(bE0)) ** 2
                + np.log(bessel_i2_scaled(z)))
    return np.where(E > 0, logp, -np.inf)


def transition_density(E, E0, cir: CirParams):
    """Density of E at time ``cir.t`` given E0 at time 0."""
    out = np.exp(transition_log_density(E, E0, cir))
    return out if out.ndim else float(out)


def transition_moments(E0, cir: CirParams):
    """(mean, variance) of the transition law."""
    a, b = cir.alpha, cir.beta
    return b * E0 + 3 / a, 2 * b * E0 / a + 3 / a ** 2


def asymptotic_density(E, E0, D, m, t, normalize=True):
    """Large-Bessel-argument, kappa t << 1 form of the transition density.

    The shape is sqrt(m/(4 pi D t)) (E^3/E0^5)^(1/4) exp(-(m/(D t)) (sqrt E - sqrt E0)^2);
    with ``normalize`` the result is rescaled to unit trapezoid mass on ``E``.
    """
    E = np.asarray(E, dtype=float)
    if not t > 0:
        raise DomainError("t must be positive")
    a = m / (D * t)
    with np.errstate(divide="ignore"):
        logp = (0.5 * math.log(a / (4 * math.pi)) + 0.75 * np.log(E) - 1.25 * math.log(E0)
                - a * (np.sqrt(E) - math.sqrt(E0)) ** 2)
    p = np.exp(logp)
    if normalize:
        p = p / np.trapezoid(p, E)
    return p


def stationary_log_density(E, omega):
    E = np.asarray(E, dtype=float)
    if not omega > 0:
        raise DomainError("omega must be positive")
    with np.errstate(divide="ignore"):
        return 3 * math.log(omega) - math.log(2) + 2 * np.log(E) - omega * E


def stationary_density(E, omega):
    """Long-time law 0.5 omega^3 E^2 exp(-omega E), a Gamma(3, rate omega)."""
    out = np.exp(stationary_log_density(E, omega))
    return out if out.ndim else float(out)


# --- tabulated densities ------------------------------------------------------

@dataclass
class DensityGrid:
    energies: np.ndarray
    density: np.ndarray
    log_density: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.energies) <= 0):
            raise ValueError("energies must be strictly increasing")
        if np.any(self.density < 0):
            raise ValueError("density must be non-negative")

    @property
    def mass(self):
        return float(np.trapezoid(self.density, self.energies))

    def cdf(self):
        """Callable CDF from cumulative trapezoid quadrature of the table."""
        c = cumulative_trapezoid(self.density, self.energies, initial=0.0)
        e = self.energies

        def F(x):
            return np.interp(x, e, c, left=0.0, right=c[-1])

        return F

    def interp(self, x):
        return np.interp(x, self.energies, self.density, left=0.0, right=0.0)


def _bulk_bounds(E0, cir, quantile_span, n_probe=40001):
    mean, var = transition_moments(E0, cir)
    sd = math.sqrt(var)
    lo = max(0.0, mean - 40 * sd)
    hi = mean + 40 * sd
    e = np.linspace(lo, hi, n_probe)
    c = cumulative_trapezoid(transition_density(e, E0, cir), e, initial=0.0)
    c /= c[-1]
    q_lo, q_hi = quantile_span
    i_lo = max(int(np.searchsorted(c, q_lo)) - 1, 0)
    i_hi = min(int(np.searchsorted(c, q_hi)) + 1, n_probe - 1)
    return e[i_lo], e[i_hi]


def density_grid(E0, cir: CirParams, quantile_span=(1e-8, 1 - 1e-8), n=8001,
                 kind="transition"):
    """Tabulate a density on a uniform grid spanning the requested quantiles.

    ``kind`` selects "transition", "asymptotic" (kappa t << 1 form) or
    "stationary" (Gamma(3) law with rate omega).
    """
    q_lo, q_hi = quantile_span
    if not 0 < q_lo < q_hi < 1:
        raise DomainError("quantile_span must lie inside (0, 1)")
    if kind == "stationary":
        omega = cir.omega
        from scipy.stats import gamma
        lo, hi = gamma.ppf([q_lo, q_hi], 3, scale=1 / omega)
        e = np.linspace(lo, hi, n)
        logp = stationary_log_density(e, omega)
        return DensityGrid(e, np.exp(logp), logp)
    lo, hi = _bulk_bounds(E0, cir, quantile_span)
    e = np.linspace(lo, hi, n)
    if kind == "transition":
        logp = transition_log_density(e, E0, cir)
        return DensityGrid(e, np.exp(logp), logp)
    if kind == "asymptotic":
        p = asymptotic_density(e, E0, cir.d_over_m, 1.0, cir.t)
        with np.errstate(divide="ignore"):
            return DensityGrid(e, p, np.log(p))
    raise ValueError(f"unknown density kind {kind!r}")


def transition_cdf(E0, cir: CirParams, n=40001):
    """Quadrature CDF of the transition law over the bulk [1e-12, 1 - 1e-12]."""
    return density_grid(E0, cir, (1e-12, 1 - 1e-12), n=n).cdf()
