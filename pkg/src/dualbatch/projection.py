"""Projection of a parameter box onto the policy: [t1], [t2], [tf], [u_s]."""

from __future__ import annotations

from dataclasses import dataclass

from .estimation import GammaBox
from .model import PlantConfig, ProcessState
from . import quadrature
from .policy import solve_nominal

PREDICT_RTOL = 1e-8

INTERVALS_HEADER = ["t_h", "t1_lo", "t1_hi", "t2_lo", "t2_hi", "tf_lo", "tf_hi", "us_lo", "us_hi"]


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def diam(self) -> float:
        return self.hi - self.lo

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= v <= self.hi + tol

    def subset_of(self, other: "Interval", tol: float = 0.0) -> bool:
        return other.lo - tol <= self.lo and self.hi <= other.hi + tol


@dataclass(frozen=True)
class SwitchIntervals:
    t1: Interval
    t2: Interval
    tf: Interval
    u_s: Interval

    def __getitem__(self, name: str) -> Interval:
        return getattr(self, name)

    def row(self, t: float) -> list:
        return [t, self.t1.lo, self.t1.hi, self.t2.lo, self.t2.hi,
                self.tf.lo, self.tf.hi, self.u_s.lo, self.u_s.hi]


def project_us(gbox: GammaBox) -> Interval:
    # u_s = 1/(1+gamma3) is decreasing, so the endpoints map exactly
    return Interval(1.0 / (1.0 + gbox.upper[2]), 1.0 / (1.0 + gbox.lower[2]))


def project_switch_times(gbox: GammaBox, state: ProcessState, cfg: PlantConfig,
                         method: str = "quadrature", rtol: float = PREDICT_RTOL) -> SwitchIntervals:
    """Corner-plus-midpoint sweep of the optimal switching times.

    Solves the policy from ``state`` for the 8 corners and the midpoint
    and takes componentwise extremes. This is a sampling heuristic, not a
    validated enclosure. A corner whose switching function is already
    non-positive switches now, so t1 = state.t for it. ``method="ode"``
    integrates each solve instead of using the quadrature planner.
    """
    t1s, t2s = [], []
    for g in gbox.corners() + [gbox.mid()]:
        if method == "quadrature":
            pol = quadrature.solve_nominal(g, cfg, state, strict=False).policy
        else:
            pol = solve_nominal(g, cfg, state, strict=False, rtol=rtol, sample=False).policy
        t1s.append(pol.t1)
        t2s.append(pol.t2)
    t2 = Interval(min(t2s), max(t2s))
    return SwitchIntervals(Interval(min(t1s), max(t1s)), t2, t2, project_us(gbox))
