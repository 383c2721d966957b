"""Pontryagin-parameterized minimum-time policy for the diafiltration batch.

The optimal input sequence is pure filtration (u=0) while the switching
function is positive, the singular level u_s that keeps it at zero, and a
terminal impulse of water once c1/c2 hits the target ratio. Because the
dilution is instantaneous the batch ends at the singular-to-impulse
switch, tf = t2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .errors import (EventNotBracketed, OutOfHorizon, RatioUnreachable,
                     SingularDenominator, WrongInitialArc)
from .integrate import ArcResult, StopCondition, Trajectory, integrate_arc
from .model import (GammaParams, PlantConfig, ProcessState, apply_dilution,
                    rhs)

# S above this counts as "still filtering"; guards against re-entering
# the first arc on round-off after an event stop
SWITCH_TOL = 1e-9
TARGET_TOL = 1e-9


def switching_value(state: ProcessState, p: GammaParams) -> float:
    """Switching function S(x, p) [L/h]; zero on the singular arc."""
    return p.gamma1 * (math.log(p.gamma2) - math.log(state.c1)
                       - p.gamma3 * math.log(state.c2) - p.gamma3 - 1.0)


def singular_control(p: GammaParams) -> float:
    return 1.0 / (1.0 + p.gamma3)


def singular_control_numeric(S: Callable[[ProcessState, GammaParams], float],
                             state: ProcessState, p: GammaParams,
                             cfg: PlantConfig, rel_step: float = 1e-6) -> float:
    """Singular input from dS/dt = 0 for an input-affine plant.

    Returns -(grad S . f0) / (grad S . fu) with grad S taken by central
    differences. The plant is affine in u, so f0 = rhs(u=0) and
    fu = rhs(u=1) - rhs(u=0).
    """
    h1 = rel_step * state.c1
    h2 = rel_step * state.c2
    dS1 = (S(ProcessState(state.c1 + h1, state.c2, state.t), p)
           - S(ProcessState(state.c1 - h1, state.c2, state.t), p)) / (2 * h1)
    dS2 = (S(ProcessState(state.c1, state.c2 + h2, state.t), p)
           - S(ProcessState(state.c1, state.c2 - h2, state.t), p)) / (2 * h2)
    f0 = rhs(state, 0.0, p, cfg)
    f1 = rhs(state, 1.0, p, cfg)
    fu = (f1[0] - f0[0], f1[1] - f0[1])
    num = dS1 * f0[0] + dS2 * f0[1]
    den = dS1 * fu[0] + dS2 * fu[1]
    if abs(den) < 1e-12 * abs(num) or den == 0.0:
        raise SingularDenominator(f"grad S . fu = {den} at {state}")
    return -num / den


@dataclass(frozen=True)
class Policy:
    """pi = (p, t1, t2, tf) plus the singular level; times are absolute [h]."""

    params: GammaParams
    t1: float
    t2: float
    tf: float
    u_s: float

    def __post_init__(self):
        if not (self.t1 <= self.t2 <= self.tf):
            raise ValueError(f"switching times out of order: {self}")

    def to_json(self) -> dict:
        return {"gamma1": self.params.gamma1, "gamma2": self.params.gamma2,
                "gamma3": self.params.gamma3, "t1_h": self.t1, "t2_h": self.t2,
                "tf_h": self.tf, "u_s": self.u_s}

    @classmethod
    def from_json(cls, d: dict) -> "Policy":
        return cls(GammaParams(d["gamma1"], d["gamma2"], d["gamma3"]),
                   d["t1_h"], d["t2_h"], d["tf_h"], d["u_s"])


@dataclass(frozen=True)
class Impulse:
    """Terminal pure-dilution action (u = infinity) at time ``t``."""

    t: float
    kind: str = "dilution"


@dataclass(frozen=True)
class FeedbackRule:
    """State-feedback form of the optimal law for a parameter estimate.

    Filter while S(x, params) > 0, then hold ``u_s``; dilute at the
    target ratio.
    """

    params: GammaParams
    u_s: float

    @classmethod
    def for_params(cls, p: GammaParams) -> "FeedbackRule":
        return cls(p, singular_control(p))

    def input_at(self, state: ProcessState) -> float:
        return 0.0 if switching_value(state, self.params) > SWITCH_TOL else self.u_s


@dataclass
class NominalSolution:
    policy: Policy
    trajectory: Trajectory
    state_t1: ProcessState
    state_t2: ProcessState
    final_state: ProcessState
    dilution_factor: float


def at_target(state: ProcessState, cfg: PlantConfig) -> bool:
    return (abs(state.c1 - cfg.c1_f) <= TARGET_TOL * cfg.c1_f
            and abs(state.c2 - cfg.c2_f) <= TARGET_TOL * cfg.c2_f)


def _s_event(p: GammaParams) -> StopCondition:
    return StopCondition.event(lambda s: switching_value(s, p), -1, "switch")


def _singular_to_ratio(state, u_s, p_plant, cfg, **kw) -> ArcResult:
    try:
        return integrate_arc(state, u_s, p_plant, cfg, StopCondition.ratio(cfg.target_ratio), **kw)
    except EventNotBracketed as exc:
        raise RatioUnreachable(str(exc)) from exc


def solve_nominal(p: GammaParams, cfg: PlantConfig, state: Optional[ProcessState] = None,
                  *, strict: bool = True, **integ) -> NominalSolution:
    """Optimal policy for known parameters ``p`` from ``state``.

    With ``strict=False`` a non-positive switching function at the start
    means "switch now" (t1 = state.t) instead of raising, which is what the
    shrinking-horizon re-solves need once the batch is under way.
    """
    x = cfg.initial_state() if state is None else state
    traj = Trajectory()
    if at_target(x, cfg):
        pol = Policy(p, x.t, x.t, x.t, singular_control(p))
        return NominalSolution(pol, traj, x, x, x, 1.0)
    u_s = singular_control(p)
    if switching_value(x, p) > SWITCH_TOL:
        arc1 = integrate_arc(x, 0.0, p, cfg, _s_event(p), **integ)
        x1 = arc1.state
        traj.extend(arc1.trajectory)
    elif strict:
        raise WrongInitialArc(f"S(x0, p) = {switching_value(x, p):.6g} <= 0")
    else:
        x1 = x
    arc2 = _singular_to_ratio(x1, u_s, p, cfg, **integ)
    traj.extend(arc2.trajectory)
    x2 = arc2.state
    factor = x2.c1 / cfg.c1_f
    xf = apply_dilution(x2, factor)
    return NominalSolution(Policy(p, x1.t, x2.t, x2.t, u_s), traj, x1, x2, xf, factor)


def policy_input(t: float, pi: Policy) -> float:
    """Finite input of the policy at time ``t``; closed on the left at t1."""
    if t > pi.tf + 1e-12 or t < 0:
        raise OutOfHorizon(f"t={t} outside [0, {pi.tf}]")
    return 0.0 if t < pi.t1 else pi.u_s


def terminal_impulse(pi: Policy) -> Impulse:
    return Impulse(pi.tf)


def simulate_follow(p_true: GammaParams, follow: Union[Policy, FeedbackRule],
                    cfg: PlantConfig, state: Optional[ProcessState] = None,
                    **integ) -> tuple[ProcessState, ProcessState, Trajectory]:
    """Run the plant with ``p_true`` under a policy or feedback rule.

    A :class:`Policy` switches on the clock at its t1; a
    :class:`FeedbackRule` switches when its own switching function hits
    zero. Either way the singular arc ends on the parameter-free ratio
    event, so the terminal concentrations are met for any ``p_true``.
    Returns (state at the ratio event, final diluted state, trajectory).
    """
    x = cfg.initial_state() if state is None else state
    traj = Trajectory()
    ratio = StopCondition.ratio(cfg.target_ratio)
    if at_target(x, cfg):
        return x, x, traj
    if isinstance(follow, Policy):
        first = StopCondition.until(follow.t1) if follow.t1 > x.t else None
    else:
        first = _s_event(follow.params) if follow.input_at(x) == 0.0 else None
    if first is not None:
        arc = integrate_arc(x, 0.0, p_true, cfg, [first, ratio], **integ)
        traj.extend(arc.trajectory)
        x = arc.state
    if arc_ended(x, cfg):
        x2 = x
    else:
        arc = _singular_to_ratio(x, follow.u_s, p_true, cfg, **integ)
        traj.extend(arc.trajectory)
        x2 = arc.state
    return x2, apply_dilution(x2, x2.c1 / cfg.c1_f), traj


def arc_ended(state: ProcessState, cfg: PlantConfig) -> bool:
    return math.log(state.c1) - math.log(state.c2) >= math.log(cfg.target_ratio)


def batch_time(p_true: GammaParams, follow: Union[Policy, FeedbackRule], cfg: PlantConfig,
               state: Optional[ProcessState] = None, **integ) -> float:
    """Terminal time J [h] of the plant ``p_true`` under ``follow``."""
    x2, _, _ = simulate_follow(p_true, follow, cfg, state, **integ)
    return x2.t
