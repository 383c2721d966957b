"""Arc times by quadrature instead of ODE integration.

Under a constant input u != 1 the plant path is algebraic,
d ln c2 / d ln c1 = -u / (1 - u), so the flux is linear in z = ln c1
along an arc, q = a + b z, and

    dt = M e^(-z) dz / ((1 - u) q(z)),    M = c1_0 V0.

Arc endpoints (switching surface, target ratio) are closed-form too. For
u = 1 c1 is frozen and ln c2 obeys a linear ODE with an exact solution.
This makes a full policy solve cost a few dozen function evaluations,
which is what the shrinking-horizon projections and scenario leaves need.
The ODE integrator stays the reference for the plant itself.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import RatioUnreachable, WrongInitialArc
from .model import GammaParams, PlantConfig, ProcessState, apply_dilution
from .policy import (SWITCH_TOL, FeedbackRule, NominalSolution, Policy,
                     at_target, singular_control, switching_value)
from .integrate import Trajectory

GL_NODES = 16


@lru_cache(maxsize=None)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _integrate(a: float, b: float, z0: float, z1: float) -> float:
    """Integral of e^-z / (a + b z) over [z0, z1].

    Composite Gauss-Legendre; panels shrink toward the pole z = -a/b so
    each panel stays well inside its convergence ellipse.
    """
    if z1 == z0:
        return 0.0
    sign = 1.0
    if z1 < z0:
        z0, z1, sign = z1, z0, -1.0
    pole = -a / b if b != 0 else math.inf
    if z0 <= pole <= z1:
        raise RatioUnreachable("flux vanishes inside the arc")
    x, w = _gauss(GL_NODES)
    total = 0.0
    lo = z0
    while lo < z1:
        if pole > z1:
            width = (pole - lo) / 3.0      # hi stays >= 2 widths from the pole
        elif math.isfinite(pole):
            width = 0.5 * (lo - pole)
        else:
            width = 1.0
        hi = min(z1, lo + min(width, 1.0))
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        z = mid + half * x
        total += half * float(np.dot(w, np.exp(-z) / (a + b * z)))
        lo = hi
    return sign * total


def _arc_coefficients(c1a, c2a, u, p):
    """q = a + b z along the constant-u path through (c1a, c2a)."""
    k = u / (1.0 - u)
    g1, g2, g3 = p.as_tuple()
    # ln c2 = ln c2a - k (z - ln c1a)
    a = g1 * (math.log(g2) - g3 * (math.log(c2a) + k * math.log(c1a)))
    b = g1 * (g3 * k - 1.0)
    return a, b, k


def arc_time(c1a: float, c2a: float, c1b: float, u: float, p: GammaParams,
             cfg: PlantConfig) -> float:
    """Time for c1 to go from c1a to c1b under constant u != 1."""
    a, b, _ = _arc_coefficients(c1a, c2a, u, p)
    za, zb = math.log(c1a), math.log(c1b)
    if a + b * za <= 0 or a + b * zb <= 0:
        raise RatioUnreachable("flux is not positive along the arc")
    return cfg.solute_mass * _integrate(a, b, za, zb) / (1.0 - u)


def to_ratio(state: ProcessState, u: float, p: GammaParams, cfg: PlantConfig) -> ProcessState:
    """State where c1/c2 reaches the target under constant ``u``."""
    lnR = math.log(cfg.target_ratio)
    if math.log(state.c1) - math.log(state.c2) >= lnR:
        return state
    if abs(u - 1.0) < 1e-12:
        return _ratio_at_unit_input(state, p, cfg)
    if u > 1.0:
        raise RatioUnreachable("dilution-dominant input never reaches the ratio")
    k = u / (1.0 - u)
    z = (lnR + math.log(state.c2) + k * math.log(state.c1)) / (1.0 + k)
    c1 = math.exp(z)
    c2 = math.exp(z - lnR)
    dt = arc_time(state.c1, state.c2, c1, u, p, cfg)
    return ProcessState(c1, c2, state.t + dt)


def _ratio_at_unit_input(state, p, cfg):
    # c1 frozen; y = ln c2 obeys dy/dt = -(c1/M) (A - p3 y)
    c1 = state.c1
    g1, g2, g3 = p.as_tuple()
    A = g1 * (math.log(g2) - math.log(c1))
    p3 = g1 * g3
    y0 = math.log(state.c2)
    y1 = math.log(c1 / cfg.target_ratio)
    r = c1 / cfg.solute_mass
    w0, w1 = A - p3 * y0, A - p3 * y1
    if w0 <= 0 or w1 <= 0:
        raise RatioUnreachable("flux is not positive along the arc")
    if p3 == 0:
        dt = (y0 - y1) / (r * A)
    else:
        dt = math.log(w1 / w0) / (p3 * r)
    return ProcessState(c1, math.exp(y1), state.t + dt)


def to_switch(state: ProcessState, p_plant: GammaParams, p_rule: GammaParams,
              cfg: PlantConfig) -> ProcessState:
    """Pure filtration until S(x, p_rule) = 0, or until the ratio if sooner."""
    c2 = state.c2
    z = math.log(p_rule.gamma2) - p_rule.gamma3 * math.log(c2) - p_rule.gamma3 - 1.0
    z_ratio = math.log(cfg.target_ratio * c2)
    c1 = math.exp(min(z, z_ratio))
    if c1 <= state.c1:
        return state
    dt = arc_time(state.c1, c2, c1, 0.0, p_plant, cfg)
    return ProcessState(c1, c2, state.t + dt)


def follow_end(p_true: GammaParams, follow: Union[FeedbackRule, Policy], cfg: PlantConfig,
               state: ProcessState) -> tuple[ProcessState, ProcessState]:
    """Switching state and ratio-event state of ``p_true`` under a feedback rule."""
    if not isinstance(follow, FeedbackRule):
        raise TypeError("quadrature planning only handles feedback rules")
    x = state
    if at_target(x, cfg):
        return x, x
    if switching_value(x, follow.params) > SWITCH_TOL:
        x = to_switch(x, p_true, follow.params, cfg)
    return x, to_ratio(x, follow.u_s, p_true, cfg)


def batch_time(p_true: GammaParams, follow: FeedbackRule, cfg: PlantConfig,
               state: ProcessState) -> float:
    return follow_end(p_true, follow, cfg, state)[1].t


def solve_nominal(p: GammaParams, cfg: PlantConfig, state=None, *,
                  strict: bool = True) -> NominalSolution:
    """Policy for known ``p`` computed by quadrature; no trajectory."""
    x = cfg.initial_state() if state is None else state
    u_s = singular_control(p)
    if at_target(x, cfg):
        return NominalSolution(Policy(p, x.t, x.t, x.t, u_s), Trajectory(), x, x, x, 1.0)
    if switching_value(x, p) <= SWITCH_TOL and strict:
        raise WrongInitialArc(f"S(x0, p) = {switching_value(x, p):.6g} <= 0")
    x1, x2 = follow_end(p, FeedbackRule(p, u_s), cfg, x)
    factor = x2.c1 / cfg.c1_f
    return NominalSolution(Policy(p, x1.t, x2.t, x2.t, u_s), Trajectory(), x1, x2,
                           apply_dilution(x2, factor), factor)
