"""Guaranteed (set-membership) estimation of the flux parameters.

The flux is linear in p = (p1, p2, p3), so every measurement with noise
bounded by sigma cuts the feasible set with two half-spaces and the set
stays a polytope. Its interval hull comes from six LPs; bounds on the
phenomenological parameters gamma2 = exp(p1/p2) and gamma3 = p3/p2 are
linear-fractional programs.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NoiseOutOfBound
from .lp import LPResult, lp_solve
from .model import GammaParams, PlantConfig, ProcessState, permeate_flux

# outward rounding applied to every computed bound
BOUND_MARGIN = 1e-10
FRACTIONAL_TOL = 1e-13
PRUNE_LIMIT = 512

_UNIT = np.eye(3)
# objective label -> (numerator, denominator) for the fractional gamma bounds
_RATIOS = {"logg2": (_UNIT[0], _UNIT[1]), "g3": (_UNIT[2], _UNIT[1])}


@dataclass(frozen=True)
class Measurement:
    t: float
    qp_meas: float
    c1: float
    c2: float


def regressor(c1: float, c2: float) -> np.ndarray:
    """Row phi with q_p = phi . p."""
    return np.array([1.0, -math.log(c1), -math.log(c2)])


def simulate_measurement(p_true: GammaParams, state: ProcessState, noise: float,
                         sigma: float) -> Measurement:
    if abs(noise) > sigma:
        raise NoiseOutOfBound(f"|{noise}| > sigma={sigma}")
    return Measurement(state.t, permeate_flux(state, p_true) + noise, state.c1, state.c2)


def uniform_noise(rng: np.random.Generator, sigma: float, size=None):
    """Noise uniform on [-sigma, sigma]."""
    return rng.uniform(-sigma, sigma, size)


class ParamPolytope:
    """Feasible parameter set {p : A p <= b} in p-space.

    The first six rows are three pairs of opposite prior faces, which the
    LP solver uses for its cold start. Instances are treated as immutable.
    """

    N_PRIOR = 6

    def __init__(self, A: np.ndarray, b: np.ndarray, sigma: float):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.A.flags.writeable = False
        self.b.flags.writeable = False
        self.sigma = float(sigma)

    @classmethod
    def from_gamma_box(cls, lower: Sequence[float], upper: Sequence[float],
                       sigma: float) -> "ParamPolytope":
        """Exact image of a gamma-box: each gamma bound is a plane in p-space.

        gamma1 = p2, ln gamma2 = p1/p2 and gamma3 = p3/p2 with p2 > 0, so
        ln gamma2 >= L  <=>  L p2 - p1 <= 0, and likewise for the others.
        """
        (g1l, g2l, g3l), (g1u, g2u, g3u) = lower, upper
        A = [[0, -1, 0], [0, 1, 0],
             [-1, math.log(g2l), 0], [1, -math.log(g2u), 0],
             [0, g3l, -1], [0, -g3u, 1]]
        b = [-g1l, g1u, 0, 0, 0, 0]
        return cls(np.array(A, float), np.array(b, float), sigma)

    @classmethod
    def from_p_box(cls, lower: Sequence[float], upper: Sequence[float],
                   sigma: float) -> "ParamPolytope":
        A, b = [], []
        for j in range(3):
            A += [-_UNIT[j], _UNIT[j]]
            b += [-lower[j], upper[j]]
        return cls(np.array(A), np.array(b, float), sigma)

    @classmethod
    def prior(cls, cfg: PlantConfig) -> "ParamPolytope":
        return cls.from_gamma_box(cfg.gamma_lower, cfg.gamma_upper, cfg.sigma)

    def __len__(self):
        return len(self.b)

    def with_halfspaces(self, A_new, b_new) -> "ParamPolytope":
        A_new = np.atleast_2d(np.asarray(A_new, float))
        if A_new.size == 0:
            return self
        return ParamPolytope(np.vstack([self.A, A_new]),
                             np.concatenate([self.b, np.atleast_1d(b_new)]), self.sigma)

    def contains(self, p: Sequence[float], tol: float = 0.0) -> bool:
        return bool((self.A @ np.asarray(p, float) <= self.b + tol).all())


def measurement_halfspaces(ms: Iterable[Measurement], sigma: float):
    """Rows for |phi . p - y| <= sigma per measurement."""
    rows, rhs = [], []
    for m in ms:
        phi = regressor(m.c1, m.c2)
        rows += [phi, -phi]
        rhs += [m.qp_meas + sigma, sigma - m.qp_meas]
    return np.array(rows).reshape(-1, 3), np.array(rhs)


def add_measurement(poly: ParamPolytope, m: Measurement) -> ParamPolytope:
    return poly.with_halfspaces(*measurement_halfspaces([m], poly.sigma))


def add_measurements(poly: ParamPolytope, ms: Iterable[Measurement]) -> ParamPolytope:
    return poly.with_halfspaces(*measurement_halfspaces(ms, poly.sigma))


@dataclass(frozen=True)
class GammaBox:
    lower: tuple
    upper: tuple

    def mid(self) -> GammaParams:
        return GammaParams(*((lo + hi) / 2 for lo, hi in zip(self.lower, self.upper)))

    def diam(self) -> tuple:
        return tuple(hi - lo for lo, hi in zip(self.lower, self.upper))

    def corners(self) -> list[GammaParams]:
        """All 8 corners, lexicographic with the lower end first."""
        return [GammaParams(*c) for c in itertools.product(*zip(self.lower, self.upper))]

    def lower_corner(self) -> GammaParams:
        return GammaParams(*self.lower)

    def upper_corner(self) -> GammaParams:
        return GammaParams(*self.upper)

    def contains(self, g: GammaParams, tol: float = 0.0) -> bool:
        return all(lo - tol <= v <= hi + tol
                   for v, lo, hi in zip(g.as_tuple(), self.lower, self.upper))

    def is_point(self) -> bool:
        return all(lo == hi for lo, hi in zip(self.lower, self.upper))


@dataclass(frozen=True)
class ParamBox:
    """Interval hull in p-space, with an optional gamma-space mirror."""

    lower: tuple
    upper: tuple
    gamma: Optional[GammaBox] = None

    def mid(self) -> tuple:
        return tuple((lo + hi) / 2 for lo, hi in zip(self.lower, self.upper))

    def diam(self) -> tuple:
        return tuple(hi - lo for lo, hi in zip(self.lower, self.upper))

    def contains(self, p: Sequence[float], tol: float = 0.0) -> bool:
        return all(lo - tol <= v <= hi + tol for v, lo, hi in zip(p, self.lower, self.upper))

    def subset_of(self, other: "ParamBox", tol: float = 0.0) -> bool:
        return all(ol - tol <= lo and hi <= ou + tol for lo, hi, ol, ou in
                   zip(self.lower, self.upper, other.lower, other.upper))


def _lp(obj, poly, sense, warm, key) -> LPResult:
    res = lp_solve(obj, poly, sense, basis=None if warm is None else warm.get(key))
    if warm is not None:
        warm[key] = res.basis
    return res


def bound_p(poly: ParamPolytope, warm: Optional[dict] = None) -> ParamBox:
    """Exact interval hull of the polytope (six LPs).

    ``warm`` maps objective labels to previous optimal bases and is updated
    in place.
    """
    lo, hi = [], []
    for j in range(3):
        lo.append(_lp(_UNIT[j], poly, "min", warm, ("p", j, "min")).value)
        hi.append(_lp(_UNIT[j], poly, "max", warm, ("p", j, "max")).value)
    return ParamBox(tuple(lo), tuple(hi))


def fractional_bound(poly: ParamPolytope, num, den, sense: str, *, method: str = "dinkelbach",
                     warm: Optional[dict] = None, key=None, tol: float = 1e-9,
                     bracket: Optional[tuple] = None) -> float:
    """Extreme of (num . p)/(den . p) over the polytope, den . p > 0 on it.

    ``dinkelbach`` iterates r <- ratio at argmax (num - r den) . p and is
    exact up to round-off. ``bisection`` searches r on LP feasibility of
    (num - r den) . p >= 0 (resp. <= 0) to absolute tolerance ``tol``.
    """
    num = np.asarray(num, float)
    den = np.asarray(den, float)
    if method == "bisection":
        return _fractional_bisection(poly, num, den, sense, tol, bracket)
    if method != "dinkelbach":
        raise ValueError(f"unknown method {method!r}")
    key = key or ("frac", tuple(num), tuple(den), sense)
    start = _lp(num - den, poly, sense, warm, key + ("start",))
    x = start.x
    r = float(num @ x / (den @ x))
    for _ in range(100):
        res = _lp(num - r * den, poly, sense, warm, key)
        gap = res.value
        if (sense == "max" and gap <= FRACTIONAL_TOL) or (sense == "min" and gap >= -FRACTIONAL_TOL):
            return r
        x = res.x
        r_new = float(num @ x / (den @ x))
        if r_new == r:
            return r
        r = r_new
    raise RuntimeError("fractional bound did not converge")


def _fractional_bisection(poly, num, den, sense, tol, bracket):
    if bracket is None:
        box = bound_p(poly)
        # the extreme ratio of the hull corners brackets the polytope's
        corners = [np.array(c) for c in itertools.product(*zip(box.lower, box.upper))]
        ratios = [float(num @ c / (den @ c)) for c in corners]
        bracket = (min(ratios), max(ratios))
    lo, hi = bracket

    def achievable(r):
        # is there p in the polytope with ratio beyond r
        if sense == "max":
            return lp_solve(num - r * den, poly, "max").value >= 0.0
        return lp_solve(num - r * den, poly, "min").value <= 0.0

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if achievable(mid) == (sense == "max"):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bound_gamma(poly: ParamPolytope, warm: Optional[dict] = None, *,
                method: str = "dinkelbach") -> GammaBox:
    """Gamma-space box enclosing the polytope's image."""
    g1 = (_lp(_UNIT[1], poly, "min", warm, ("p", 1, "min")).value,
          _lp(_UNIT[1], poly, "max", warm, ("p", 1, "max")).value)
    out = {}
    for name, (num, den) in _RATIOS.items():
        out[name] = tuple(fractional_bound(poly, num, den, s, method=method, warm=warm,
                                           key=("frac", name, s)) for s in ("min", "max"))
    lg2 = out["logg2"]
    return GammaBox((g1[0], math.exp(lg2[0]), out["g3"][0]),
                    (g1[1], math.exp(lg2[1]), out["g3"][1]))


def _widen(v, sign):
    return v + sign * BOUND_MARGIN * (1.0 + abs(v))


def _nest(new_lo, new_hi, old_lo, old_hi):
    lo = tuple(max(_widen(n, -1), o) for n, o in zip(new_lo, old_lo))
    hi = tuple(min(_widen(n, +1), o) for n, o in zip(new_hi, old_hi))
    return lo, hi


def prior_boxes(cfg: PlantConfig) -> tuple[ParamBox, GammaBox]:
    """Hulls of the prior image, computed from the gamma corners."""
    gbox = GammaBox(tuple(cfg.gamma_lower), tuple(cfg.gamma_upper))
    ps = np.array([g.to_p().as_tuple() for g in gbox.corners()])
    return ParamBox(tuple(ps.min(0)), tuple(ps.max(0)), gbox), gbox


def prune(poly: ParamPolytope, box: ParamBox) -> ParamPolytope:
    """Drop measurement rows satisfied on all corners of ``box``.

    ``box`` encloses the polytope, so such rows are redundant.
    """
    A, b = poly.A, poly.b
    lo, hi = np.array(box.lower), np.array(box.upper)
    worst = np.maximum(A * lo, A * hi).sum(axis=1)
    keep = worst > b
    keep[: ParamPolytope.N_PRIOR] = True
    return ParamPolytope(A[keep], b[keep], poly.sigma)


class Estimator:
    """Sequential set-membership estimator for one batch run.

    Keeps the polytope, warm-start bases, and nested p- and gamma-boxes.
    Every reported box lies inside the previous one.
    """

    def __init__(self, cfg: PlantConfig, poly: Optional[ParamPolytope] = None,
                 prune_limit: int = PRUNE_LIMIT):
        self.cfg = cfg
        self.poly = ParamPolytope.prior(cfg) if poly is None else poly
        self.prune_limit = prune_limit
        self.warm: dict = {}
        self.pbox, self.gbox = prior_boxes(cfg)
        if poly is not None:
            self._recompute()

    def copy(self) -> "Estimator":
        other = object.__new__(Estimator)
        other.cfg, other.poly, other.prune_limit = self.cfg, self.poly, self.prune_limit
        other.warm = dict(self.warm)
        other.pbox, other.gbox = self.pbox, self.gbox
        return other

    def _recompute(self):
        pb = bound_p(self.poly, self.warm)
        gb = bound_gamma(self.poly, self.warm)
        plo, phi = _nest(pb.lower, pb.upper, self.pbox.lower, self.pbox.upper)
        glo, ghi = _nest(gb.lower, gb.upper, self.gbox.lower, self.gbox.upper)
        self.gbox = GammaBox(glo, ghi)
        self.pbox = ParamBox(plo, phi, self.gbox)

    def update(self, measurements: Sequence[Measurement]) -> ParamBox:
        if measurements:
            self.poly = add_measurements(self.poly, measurements)
            self._recompute()
            if len(self.poly) > self.prune_limit:
                self.poly = prune(self.poly, self.pbox)
                self.warm.clear()
        return self.pbox

    def update_halfspaces(self, A_new, b_new) -> ParamBox:
        self.poly = self.poly.with_halfspaces(A_new, b_new)
        self._recompute()
        return self.pbox


BOUNDS_HEADER = ["t_h", "p1_lo", "p1_hi", "p2_lo", "p2_hi", "p3_lo", "p3_hi",
                 "g1_lo", "g1_hi", "g2_lo", "g2_hi", "g3_lo", "g3_hi"]


def bounds_row(t: float, box: ParamBox) -> list:
    row = [t]
    for lo, hi in zip(box.lower, box.upper):
        row += [lo, hi]
    for lo, hi in zip(box.gamma.lower, box.gamma.upper):
        row += [lo, hi]
    return row


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    return buf.getvalue()


def read_measurements_csv(text: str) -> list[Measurement]:
    """Parse ``t_h,qp_Lh,c1_gL,c2_gL`` rows (extra columns ignored)."""
    reader = csv.DictReader(io.StringIO(text))
    return [Measurement(float(r["t_h"]), float(r["qp_Lh"]), float(r["c1_gL"]), float(r["c2_gL"]))
            for r in reader]
