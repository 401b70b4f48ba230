"""Physical constants, collapse parameters and derived scalar quantities.

This is the only module that handles SI magnitudes. Everything downstream
works in dimensionless variables (hbar = m = 1 for the wave-packet
simulations, energies in units of E0 for the energy diffusion).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import scipy.constants as sc


class DomainError(ValueError):
    """Raised when a physical quantity is outside its domain of definition."""


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = sc.hbar
    c: float = sc.c
    nucleon_mass: float = sc.m_p

    def __post_init__(self):
        for name in ("hbar", "c", "nucleon_mass"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")


SI = PhysicalConstants()


@dataclass(frozen=True)
class CslParams:
    """Collapse rate ``lambda0`` (1/s, per nucleon) and localization
    parameter ``alpha_csl`` (1/m^2). The rate scales with mass squared."""

    lambda0: float = 1e-16
    alpha_csl: float = 1e14
    mass_exponent: int = field(default=2, init=False)

    def __post_init__(self):
        if self.lambda0 < 0:
            raise DomainError("lambda0 must be non-negative")
        if not self.alpha_csl > 0:
            raise DomainError("alpha_csl must be positive")

    @classmethod
    def from_length(cls, lambda0: float, inv_sqrt_alpha: float) -> "CslParams":
        return cls(lambda0=lambda0, alpha_csl=inv_sqrt_alpha ** -2)

    @classmethod
    def from_product(cls, lambda_alpha: float, alpha_csl: float = 1e14) -> "CslParams":
        """Fix the combination lambda*alpha and leave alpha as a free knob.

        Most observable consequences (energy gain, D) depend only on the
        product, so alpha can be made as large as the localized-packet
        approximation requires without changing them.
        """
        return cls(lambda0=lambda_alpha / alpha_csl, alpha_csl=alpha_csl)

    @property
    def lambda_alpha(self) -> float:
        return self.lambda0 * self.alpha_csl


GRW = CslParams(lambda0=1e-16, alpha_csl=1e14)
# upper bound on lambda*alpha from large-molecule diffraction
CUB = CslParams.from_product(1e8)


@dataclass(frozen=True)
class ParticleSpecies:
    name: str
    mass: float

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError(f"mass of {self.name!r} must be positive")


EV = sc.e / sc.c ** 2  # 1 eV/c^2 in kg

DEFAULT_SPECIES = (
    ParticleSpecies("neutrino (0.1 eV/c^2)", 0.1 * EV),
    ParticleSpecies("electron", sc.m_e),
    ParticleSpecies("proton", sc.m_p),
    ParticleSpecies("Fe nucleus", 55.9349 * sc.atomic_mass),
    ParticleSpecies("10,000u cluster", 1e4 * sc.atomic_mass),
)


@dataclass(frozen=True)
class DerivedParams:
    lambda_m: float
    D: float
    sigma_inf: float
    t_loc: float


@dataclass(frozen=True)
class CosmologyParams:
    hubble: float = 0.0

    def __post_init__(self):
        if self.hubble < 0:
            raise DomainError("hubble rate must be non-negative")


def _check_mass(m):
    if not m > 0:
        raise DomainError(f"mass must be positive, got {m!r}")


def lambda_of_mass(params: CslParams, consts: PhysicalConstants, m: float) -> float:
    """Collapse rate for a particle of mass ``m`` (quadratic mass scaling)."""
    _check_mass(m)
    return params.lambda0 * (m / consts.nucleon_mass) ** params.mass_exponent


def diffusion_coefficient(params: CslParams, consts: PhysicalConstants, m: float) -> float:
    """D = lambda(m) * alpha * hbar^2 / 4, in J^2 s / m^2."""
    return lambda_of_mass(params, consts, m) * params.alpha_csl * consts.hbar ** 2 / 4


def steady_state_width(D: float, m: float, consts: PhysicalConstants = SI) -> float:
    """Width of the stationary wave packet, (hbar^3 / (8 D m))^(1/4)."""
    _check_mass(m)
    if not D > 0:
        raise DomainError("no steady state without collapse (D must be > 0)")
    return (consts.hbar ** 3 / (8 * D * m)) ** 0.25


def localization_time(D: float, m: float, consts: PhysicalConstants = SI) -> float:
    """Order-of-magnitude time sqrt(m hbar / D) to reach the steady state."""
    _check_mass(m)
    if not D > 0:
        raise DomainError("localization time diverges for D = 0")
    return math.sqrt(m * consts.hbar / D)


def derived(params: CslParams, consts: PhysicalConstants, m: float) -> DerivedParams:
    D = diffusion_coefficient(params, consts, m)
    return DerivedParams(
        lambda_m=lambda_of_mass(params, consts, m),
        D=D,
        sigma_inf=steady_state_width(D, m, consts),
        t_loc=localization_time(D, m, consts),
    )


TABLE1_HEADER = ("name", "sigma_inf_m", "t_loc_s")


def table1(species, params: CslParams = GRW, consts: PhysicalConstants = SI):
    """Rows of (name, sigma_inf [m], t_loc [s]) using the mass-scaled rate."""
    rows = []
    for sp in species:
        d = derived(params, consts, sp.mass)
        rows.append((sp.name, d.sigma_inf, d.t_loc))
    return rows


def format_length(x: float) -> str:
    for unit, scale in (("km", 1e3), ("m", 1.0), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6)):
        if x >= scale:
            return f"{_sig2(x / scale)}{unit}"
    return f"{_sig2(x / 1e-9)}nm"


def format_duration(t: float) -> str:
    for unit, scale in (("yrs", 365.25 * 86400), ("days", 86400.0), ("hrs", 3600.0),
                        ("mins", 60.0)):
        if t >= scale:
            return f"{_sig2(t / scale)}{unit}"
    return f"{_sig2(t)}s"


def _sig2(x: float) -> str:
    return f"{float(f'{x:.2g}'):g}"


def dimensionless_groups(D: float, m: float, hubble: float, t: float, E0: float = 1.0):
    """Parameters of the energy transition law.

    Returns ``(omega, alpha_cir, beta, dt_over_m)`` with the energy-valued
    quantities expressed in units of ``E0`` (omega and alpha_cir are
    multiplied by E0, dt_over_m is divided by it).
    """
    _check_mass(m)
    if not D > 0:
        raise DomainError("D must be positive")
    if t < 0:
        raise DomainError("t must be non-negative")
    if hubble < 0:
        raise DomainError("hubble must be non-negative")
    kt = hubble * t
    if t == 0 and hubble == 0:
        raise DomainError("alpha_cir undefined for t = 0 without expansion")
    omega = hubble * m / D
    beta = math.exp(-kt)
    if t == 0:
        alpha = math.inf
    elif kt < 1e-8:
        alpha = m / (D * t)
    else:
        alpha = omega / -math.expm1(-kt)
    return omega * E0, alpha * E0, beta, D * t / m / E0


def energy_gain_estimate(params: CslParams, consts: PhysicalConstants, m: float,
                         t: float) -> float:
    """D t / m expressed in units of the rest energy m c^2.

    With quadratic mass scaling of the rate this ratio does not depend on m.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    D = diffusion_coefficient(params, consts, m)
    return D * t / m / (m * consts.c ** 2)


# Orders of magnitude quoted alongside the GRW and CUB estimates (t ~ 1e17 s).
QUOTED_DT_OVER_M = {"grw": 1e-15, "cub": 1e-5}
UNIVERSE_AGE_S = 1e17


# --- parameter files --------------------------------------------------------

PARAM_KEYS = {"lambda0", "inv_sqrt_alpha", "hubble", "species"}
SPECIES_KEYS = {"name", "mass_kg"}


@dataclass(frozen=True)
class ParamFile:
    csl: CslParams
    cosmology: CosmologyParams
    species: tuple


def parse_params(data: dict) -> ParamFile:
    unknown = set(data) - PARAM_KEYS
    if unknown:
        raise DomainError(f"unknown parameter keys: {sorted(unknown)}")
    species = []
    for entry in data.get("species", []):
        bad = set(entry) - SPECIES_KEYS
        if bad or "mass_kg" not in entry or "name" not in entry:
            raise DomainError(f"species entry must have exactly {sorted(SPECIES_KEYS)}")
        species.append(ParticleSpecies(str(entry["name"]), float(entry["mass_kg"])))
    lambda0 = float(data.get("lambda0", GRW.lambda0))
    inv_sqrt_alpha = float(data.get("inv_sqrt_alpha", 1e-7))
    if not inv_sqrt_alpha > 0:
        raise DomainError("inv_sqrt_alpha must be positive")
    return ParamFile(
        csl=CslParams.from_length(lambda0, inv_sqrt_alpha),
        cosmology=CosmologyParams(float(data.get("hubble", 0.0))),
        species=tuple(species) if species else DEFAULT_SPECIES,
    )


def load_params(path) -> ParamFile:
    with open(Path(path)) as fh:
        return parse_params(json.load(fh))
