"""Batch diafiltration plant: flux law, parameterizations, dynamics.

The retentate holds two solutes. Solute 1 is fully retained by the
membrane, solute 2 passes freely. The manipulated input ``u`` is the ratio
of fresh-water inflow to permeate outflow. Volume is not a state: it
follows from solute-1 mass conservation, ``c1 * V = c1_0 * V0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import ConfigError, InvalidFactor


@dataclass(frozen=True)
class GammaParams:
    """Phenomenological flux parameters.

    gamma1 is the flux scale [L/h], gamma2 the limiting concentration
    scale [g/L], gamma3 the dimensionless exponent on c2.
    """

    gamma1: float
    gamma2: float
    gamma3: float

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 1 and self.gamma3 >= 0):
            raise ValueError(f"invalid flux parameters {self}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.gamma1, self.gamma2, self.gamma3)

    def to_p(self) -> "PParams":
        return gamma_to_p(self)


@dataclass(frozen=True)
class PParams:
    """Flux parameters in the estimation form, linear in the data.

    q_p = p1 - p2 ln c1 - p3 ln c2, all three in L/h.
    """

    p1: float
    p2: float
    p3: float

    def __post_init__(self):
        if not (self.p2 > 0 and self.p3 >= 0):
            raise ValueError(f"invalid estimation parameters {self}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p1, self.p2, self.p3)

    def to_gamma(self) -> GammaParams:
        return p_to_gamma(self)


NOMINAL_GAMMA = GammaParams(3.0, 1000.0, 0.1)


def gamma_to_p(g: GammaParams) -> PParams:
    return PParams(g.gamma1 * math.log(g.gamma2), g.gamma1, g.gamma1 * g.gamma3)


def p_to_gamma(p: PParams) -> GammaParams:
    return GammaParams(p.p2, math.exp(p.p1 / p.p2), p.p3 / p.p2)


@dataclass(frozen=True)
class ProcessState:
    """Concentrations [g/L] and elapsed batch time [h]."""

    c1: float
    c2: float
    t: float = 0.0

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError(f"concentrations must be positive, got {self}")

    def volume(self, cfg: "PlantConfig") -> float:
        """Retentate volume [L] implied by solute-1 conservation."""
        return cfg.solute_mass / self.c1


@dataclass(frozen=True)
class PlantConfig:
    """Operating targets, vessel data and sampling for one batch.

    Ts is the control sampling period and meas_period the permeate-flux
    measurement period, both in hours; sigma bounds the flux noise [L/h].
    """

    c1_0: float = 50.0
    c2_0: float = 50.0
    c1_f: float = 150.0
    c2_f: float = 0.05
    V0: float = 20.0
    sigma: float = 1e-2
    Ts: float = 0.1
    meas_period: float = 1.0 / 60.0
    gamma_lower: tuple[float, float, float] = field(default=(2.7, 900.0, 0.09))
    gamma_upper: tuple[float, float, float] = field(default=(3.3, 1100.0, 0.11))

    def __post_init__(self):
        if self.c1_f < self.c1_0 or self.c2_f > self.c2_0:
            raise ConfigError("targets must concentrate solute 1 and wash out solute 2")
        if min(self.c1_0, self.c2_0, self.c1_f, self.c2_f, self.V0) <= 0:
            raise ConfigError("concentrations and volume must be positive")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.Ts <= 0 or self.meas_period <= 0:
            raise ConfigError("sampling periods must be positive")
        ratio = self.Ts / self.meas_period
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError("Ts must be a positive integer multiple of meas_period")
        if any(lo > hi for lo, hi in zip(self.gamma_lower, self.gamma_upper)):
            raise ConfigError("prior box lower bound exceeds upper bound")
        # fail early on an invalid prior box
        GammaParams(*self.gamma_lower), GammaParams(*self.gamma_upper)

    @property
    def solute_mass(self) -> float:
        """Retained solute mass c1_0 * V0 [g]."""
        return self.c1_0 * self.V0

    @property
    def target_ratio(self) -> float:
        return self.c1_f / self.c2_f

    @property
    def meas_per_sample(self) -> int:
        return int(round(self.Ts / self.meas_period))

    @property
    def prior_mid(self) -> GammaParams:
        return GammaParams(*((lo + hi) / 2 for lo, hi in zip(self.gamma_lower, self.gamma_upper)))

    def initial_state(self) -> ProcessState:
        return ProcessState(self.c1_0, self.c2_0, 0.0)

    def with_(self, **changes) -> "PlantConfig":
        return replace(self, **changes)


def permeate_flux(state: ProcessState, p: GammaParams) -> float:
    """Permeate flow [L/h]; negative values are returned as computed."""
    return p.gamma1 * (math.log(p.gamma2) - math.log(state.c1) - p.gamma3 * math.log(state.c2))


def rhs(state: ProcessState, u: float, p: GammaParams, cfg: PlantConfig) -> tuple[float, float]:
    """Time derivatives (dc1/dt, dc2/dt) in g/L/h."""
    k = state.c1 * permeate_flux(state, p) / cfg.solute_mass
    return (state.c1 * k * (1.0 - u), -state.c2 * k * u)


def vector_field(u: float, p: GammaParams, cfg: PlantConfig):
    """Float-only version of :func:`rhs` for the integrator's inner loop."""
    g1 = p.gamma1
    lg2 = math.log(p.gamma2)
    g3 = p.gamma3
    inv_m = 1.0 / cfg.solute_mass
    log = math.log
    a = 1.0 - u

    def f(c1, c2):
        k = c1 * g1 * (lg2 - log(c1) - g3 * log(c2)) * inv_m
        return c1 * k * a, -c2 * k * u

    return f


def apply_dilution(state: ProcessState, factor: float) -> ProcessState:
    """Instantaneous water addition dividing both concentrations by ``factor``."""
    if not factor >= 1.0:
        raise InvalidFactor(f"dilution factor must be >= 1, got {factor}")
    if factor == 1.0:
        return state
    return ProcessState(state.c1 / factor, state.c2 / factor, state.t)
