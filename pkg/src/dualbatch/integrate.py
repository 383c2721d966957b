"""Event-detecting Dormand-Prince 5(4) integration of a single control arc.

The plant has two states, so the stepper is written out component-wise on
plain floats; numpy would cost more than it saves at this size.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .errors import EventNotBracketed, StepFailure
from .model import GammaParams, PlantConfig, ProcessState, vector_field

# Dormand-Prince tableau
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

# continuous extension, y(t0 + th*h) = y0 + h * sum_i K_i * sum_j P[i][j] th**(j+1)
P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

EVENT_TIME_TOL = 1e-12
DEFAULT_TIME_CAP = 100.0


@dataclass(frozen=True)
class StopCondition:
    """When to end an arc.

    ``duration`` stops after ``value`` hours, ``until`` at absolute time
    ``value``. ``event`` stops once ``func(state)`` reaches the side of zero
    given by ``direction`` (-1: g <= 0, +1: g >= 0). ``ratio`` stops once
    c1/c2 >= ``value``.
    """

    kind: str
    value: float = 0.0
    func: Optional[Callable[[ProcessState], float]] = None
    direction: int = -1
    label: str = ""

    @classmethod
    def duration(cls, hours: float) -> "StopCondition":
        return cls("duration", float(hours), label="duration")

    @classmethod
    def until(cls, t: float) -> "StopCondition":
        return cls("until", float(t), label="until")

    @classmethod
    def event(cls, func, direction: int = -1, label: str = "event") -> "StopCondition":
        return cls("event", 0.0, func, direction, label)

    @classmethod
    def ratio(cls, target: float) -> "StopCondition":
        return cls("ratio", float(target), direction=+1, label="ratio")

    def value_at(self, state: ProcessState) -> float:
        if self.kind == "ratio":
            return math.log(state.c1) - math.log(state.c2) - math.log(self.value)
        if self.kind == "event":
            return self.func(state)
        raise TypeError(f"{self.kind} stop has no event function")


@dataclass
class Trajectory:
    """States on the measurement grid, plus the input and flux there."""

    t: list = field(default_factory=list)
    c1: list = field(default_factory=list)
    c2: list = field(default_factory=list)
    u: list = field(default_factory=list)
    qp: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def append(self, t, c1, c2, u, qp):
        self.t.append(t)
        self.c1.append(c1)
        self.c2.append(c2)
        self.u.append(u)
        self.qp.append(qp)

    def extend(self, other: "Trajectory"):
        self.t += other.t
        self.c1 += other.c1
        self.c2 += other.c2
        self.u += other.u
        self.qp += other.qp

    def states(self) -> list[ProcessState]:
        return [ProcessState(a, b, t) for t, a, b in zip(self.t, self.c1, self.c2)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_h", "c1_gL", "c2_gL", "u", "qp_Lh"])
        for row in zip(self.t, self.c1, self.c2, self.u, self.qp):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


@dataclass
class ArcResult:
    state: ProcessState
    trajectory: Trajectory
    stop: Optional[StopCondition]
    n_steps: int = 0


def _event_function(stop: StopCondition):
    if stop.kind == "ratio":
        lr = math.log(stop.value)
        log = math.log
        return lambda c1, c2, t: log(c1) - log(c2) - lr
    func = stop.func
    return lambda c1, c2, t: func(ProcessState(c1, c2, t))


def _reached(g: float, direction: int) -> bool:
    return g <= 0.0 if direction < 0 else g >= 0.0


def integrate_arc(
    state: ProcessState,
    u: float,
    p: GammaParams,
    cfg: PlantConfig,
    stop: Union[StopCondition, Sequence[StopCondition]],
    h_max: Optional[float] = None,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    time_cap: float = DEFAULT_TIME_CAP,
    sample: bool = True,
) -> ArcResult:
    """Integrate the plant under constant input ``u`` until a stop fires.

    With several stops the earliest wins; ties go to the first listed.
    Events are localized by bisection on the dense output to 1e-12 h.
    Trajectory samples lie on the absolute grid ``j * cfg.meas_period``
    inside (state.t, t_stop].
    """
    stops = [stop] if isinstance(stop, StopCondition) else list(stop)
    t0 = state.t
    t_end = math.inf
    end_stop = None
    events = []
    for s in stops:
        if s.kind == "duration" or s.kind == "until":
            te = t0 + s.value if s.kind == "duration" else s.value
            if te < t_end:
                t_end, end_stop = te, s
        else:
            events.append((s, _event_function(s)))
    capped = t_end == math.inf
    if capped:
        t_end = t0 + time_cap

    f = vector_field(u, p, cfg)
    g1, lg2, g3 = p.gamma1, math.log(p.gamma2), p.gamma3
    log = math.log
    traj = Trajectory()
    dt = cfg.meas_period
    tick = math.floor(t0 / dt + 1e-9) + 1

    def record(t, c1, c2):
        traj.append(t, c1, c2, u, g1 * (lg2 - log(c1) - g3 * log(c2)))

    y1, y2 = state.c1, state.c2
    t = t0

    # events already satisfied at the start fire immediately
    for s, g in events:
        if _reached(g(y1, y2, t), s.direction):
            return ArcResult(state, traj, s, 0)
    if t_end <= t0:
        return ArcResult(state, traj, end_stop, 0)

    prev = [g(y1, y2, t) for _, g in events]
    k1a, k1b = f(y1, y2)
    hmax = math.inf if h_max is None else h_max

    # initial step (Hairer, Norsett & Wanner, II.4)
    sc1, sc2 = atol + rtol * abs(y1), atol + rtol * abs(y2)
    d0 = math.hypot(y1 / sc1, y2 / sc2) / math.sqrt(2)
    d1 = math.hypot(k1a / sc1, k1b / sc2) / math.sqrt(2)
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    try:
        fa, fb = f(y1 + h * k1a, y2 + h * k1b)
        d2 = math.hypot((fa - k1a) / sc1, (fb - k1b) / sc2) / math.sqrt(2) / h
    except ValueError:
        d2 = 0.0
    h1 = 1e-6 * max(h, 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** 0.2
    h = min(100 * h, h1, hmax, t_end - t)

    n_steps = 0
    while True:
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepFailure(f"step size underflow at t={t}")
        last = False
        if t + h >= t_end or t_end - (t + h) < 1e-10 * h:
            h = t_end - t
            last = True
        try:
            k2a, k2b = f(y1 + h * A21 * k1a, y2 + h * A21 * k1b)
            k3a, k3b = f(y1 + h * (A31 * k1a + A32 * k2a), y2 + h * (A31 * k1b + A32 * k2b))
            k4a, k4b = f(y1 + h * (A41 * k1a + A42 * k2a + A43 * k3a),
                         y2 + h * (A41 * k1b + A42 * k2b + A43 * k3b))
            k5a, k5b = f(y1 + h * (A51 * k1a + A52 * k2a + A53 * k3a + A54 * k4a),
                         y2 + h * (A51 * k1b + A52 * k2b + A53 * k3b + A54 * k4b))
            k6a, k6b = f(y1 + h * (A61 * k1a + A62 * k2a + A63 * k3a + A64 * k4a + A65 * k5a),
                         y2 + h * (A61 * k1b + A62 * k2b + A63 * k3b + A64 * k4b + A65 * k5b))
            n1 = y1 + h * (B1 * k1a + B3 * k3a + B4 * k4a + B5 * k5a + B6 * k6a)
            n2 = y2 + h * (B1 * k1b + B3 * k3b + B4 * k4b + B5 * k5b + B6 * k6b)
            k7a, k7b = f(n1, n2)
        except ValueError:
            # logarithm left its domain: the trial step was far too long
            h *= 0.25
            continue
        e1 = h * (E1 * k1a + E3 * k3a + E4 * k4a + E5 * k5a + E6 * k6a + E7 * k7a)
        e2 = h * (E1 * k1b + E3 * k3b + E4 * k4b + E5 * k5b + E6 * k6b + E7 * k7b)
        s1 = atol + rtol * max(abs(y1), abs(n1))
        s2 = atol + rtol * max(abs(y2), abs(n2))
        err = math.sqrt(((e1 / s1) ** 2 + (e2 / s2) ** 2) / 2)
        if err > 1.0 or n1 <= 0 or n2 <= 0:
            h *= max(0.2, 0.9 * err ** -0.2) if err > 1.0 else 0.25
            continue

        n_steps += 1
        ks = ((k1a, k1b), (k2a, k2b), (k3a, k3b), (k4a, k4b), (k5a, k5b), (k6a, k6b), (k7a, k7b))
        ta, ya1, ya2, hh = t, y1, y2, h

        def dense(theta, ta=ta, ya1=ya1, ya2=ya2, hh=hh, ks=ks):
            w = [theta * (r[0] + theta * (r[1] + theta * (r[2] + theta * r[3]))) for r in P]
            return (ya1 + hh * sum(wi * k[0] for wi, k in zip(w, ks)),
                    ya2 + hh * sum(wi * k[1] for wi, k in zip(w, ks)))

        tb = t_end if last else t + h
        # earliest event inside this step
        hit = None
        for idx, (s, g) in enumerate(events):
            gb = g(n1, n2, tb)
            if _reached(gb, s.direction) and not _reached(prev[idx], s.direction):
                lo, hi = 0.0, 1.0
                while (hi - lo) * hh > EVENT_TIME_TOL:
                    mid = 0.5 * (lo + hi)
                    c1m, c2m = dense(mid)
                    if _reached(g(c1m, c2m, ta + mid * hh), s.direction):
                        hi = mid
                    else:
                        lo = mid
                if hit is None or hi < hit[0]:
                    hit = (hi, s)
            prev[idx] = gb

        if hit is not None:
            theta, s = hit
            te = ta + theta * hh
            c1e, c2e = dense(theta)
            if sample:
                while tick * dt <= te + 1e-10:
                    tt = tick * dt
                    if abs(tt - te) <= 1e-10:
                        record(tt, c1e, c2e)
                    else:
                        record(tt, *dense((tt - ta) / hh))
                    tick += 1
            return ArcResult(ProcessState(c1e, c2e, te), traj, s, n_steps)

        if sample:
            while tick * dt <= tb + 1e-10:
                tt = tick * dt
                if abs(tt - tb) <= 1e-10:
                    record(tt, n1, n2)
                else:
                    record(tt, *dense((tt - ta) / hh))
                tick += 1

        t, y1, y2 = tb, n1, n2
        k1a, k1b = k7a, k7b
        if last:
            if capped:
                raise EventNotBracketed(
                    f"no stop event within {time_cap} h (u={u}, from t={t0})")
            return ArcResult(ProcessState(y1, y2, t), traj, end_stop, n_steps)
        fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h = min(h * fac, hmax)
