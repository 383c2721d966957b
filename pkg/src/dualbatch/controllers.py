"""Closed-loop controllers and the real-time loop that drives them.

Three controllers share one plant-advance routine:

* nominal: the optimal law for the prior midpoint, never updated;
* adaptive: the law re-solved from the current parameter box, either
  certainty-equivalent (``ce``) or by minimizing the spread of predicted
  batch times over the box corners (``varmin``);
* dual: a scenario tree whose first ``Nr`` inputs are free and whose leaves
  follow the optimal law from the box each branch predicts it will have
  learned. Probing emerges when learning shrinks the spread of the leaf
  costs.

Every sample is a feedback program, not a constant input. The filtration
arc ends on the estimate's switching function and the batch ends on the
parameter-free ratio event, so terminal concentrations hold whatever the
estimate.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import quadrature
from .errors import (DualBatchError, Infeasible, InvalidFactor, RatioUnreachable,
                     TreeTooLarge)
from .estimation import (BOUNDS_HEADER, Estimator, GammaBox, Measurement,
                         bounds_row, uniform_noise)
from .integrate import StopCondition, Trajectory, integrate_arc
from .model import GammaParams, PlantConfig, ProcessState, apply_dilution
from .policy import (SWITCH_TOL, FeedbackRule, Policy,
                     simulate_follow, switching_value)
from .projection import (INTERVALS_HEADER, PREDICT_RTOL, project_switch_times,
                         project_us)

PLANT_RTOL = 1e-10
C1_TOL = 0.1
C2_TOL = 1e-4
TIE_TOL = 1e-10
MAX_SCENARIOS = 10_000
# what a scenario's batch time is compared against in the spread objective
REFERENCES = ("regret", "nominal", "scenario")


@dataclass(frozen=True)
class ControllerConfig:
    kind: str = "adaptive"
    Nr: int = 1
    eps: float = 0.1
    adaptive_mode: str = "ce"
    candidate_inputs: tuple = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25)
    branching: str = "joint3"
    reference: str = "regret"

    def __post_init__(self):
        if self.kind not in ("nominal", "adaptive", "dual", "optimal"):
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.Nr < 1 or self.eps <= 0:
            raise ValueError("Nr must be >= 1 and eps > 0")
        if self.adaptive_mode not in ("ce", "varmin"):
            raise ValueError(f"unknown adaptive mode {self.adaptive_mode!r}")
        if self.reference not in REFERENCES:
            raise ValueError(f"unknown reference {self.reference!r}")
        if self.branching not in ("joint3", "full3m"):
            raise ValueError(f"unknown branching {self.branching!r}")
        if any(not 0.0 <= u <= 2.0 for u in self.candidate_inputs):
            raise ValueError("candidate inputs must lie in [0, 2]")
        if self.kind == "dual" and not self.candidate_inputs:
            raise ValueError("the dual controller needs candidate inputs")


@dataclass(frozen=True)
class Action:
    """What the plant receives for one sample.

    By default the feedback rule runs. ``forced_u`` holds a constant input
    for the whole sample instead. ``switch_time`` replaces the feedback
    switch with a clock switch to ``rule.u_s``.
    """

    rule: FeedbackRule
    forced_u: Optional[float] = None
    switch_time: Optional[float] = None

    def input_at(self, state: ProcessState) -> float:
        if self.forced_u is not None:
            return self.forced_u
        if self.switch_time is not None:
            return 0.0 if state.t < self.switch_time else self.rule.u_s
        return self.rule.input_at(state)

    @property
    def label(self) -> str:
        if self.forced_u is not None:
            return f"u={self.forced_u:g}"
        if self.switch_time is not None:
            return f"switch@{self.switch_time:.6f}"
        return "policy"


@dataclass
class SampleStep:
    state: ProcessState
    trajectory: Trajectory
    done: bool
    switched_at: Optional[float] = None
    final_state: Optional[ProcessState] = None


def advance(state: ProcessState, action: Action, p_plant: GammaParams, cfg: PlantConfig,
            t_end: float, *, rtol: float = PLANT_RTOL, sample: bool = True) -> SampleStep:
    """Run the plant ``p_plant`` under ``action`` until ``t_end`` or the batch ends."""
    ratio = StopCondition.ratio(cfg.target_ratio)
    until = StopCondition.until(t_end)
    traj = Trajectory()
    kw = dict(rtol=rtol, sample=sample)
    x = state
    switched = None
    segments = []
    if action.forced_u is not None:
        segments.append((action.forced_u, []))
    elif action.switch_time is not None:
        if action.switch_time > x.t:
            segments.append((0.0, [StopCondition.until(min(action.switch_time, t_end))]))
        segments.append((action.rule.u_s, []))
    else:
        rule = action.rule
        if switching_value(x, rule.params) > SWITCH_TOL:
            segments.append((0.0, [StopCondition.event(
                lambda s: switching_value(s, rule.params), -1, "switch")]))
        segments.append((rule.u_s, []))
    for u, extra in segments:
        if x.t >= t_end:
            break
        if u > 0 and switched is None and action.forced_u is None:
            switched = x.t
        arc = integrate_arc(x, u, p_plant, cfg, [until, ratio] + extra, **kw)
        traj.extend(arc.trajectory)
        x = arc.state
        if arc.stop is ratio:
            return SampleStep(x, traj, True, switched, _finish(x, cfg))
    return SampleStep(x, traj, False, switched)


def _finish(x: ProcessState, cfg: PlantConfig) -> ProcessState:
    # the ratio only grows under finite inputs, so a ratio hit below the
    # target c1 cannot be repaired; report the undiluted state
    if x.c1 < cfg.c1_f:
        return x
    return apply_dilution(x, x.c1 / cfg.c1_f)


def measurements_from(traj: Trajectory, noise: Sequence[float]) -> list[Measurement]:
    return [Measurement(t, q + e, c1, c2)
            for t, c1, c2, q, e in zip(traj.t, traj.c1, traj.c2, traj.qp, noise)]


def predicted_measurements(traj: Trajectory) -> list[Measurement]:
    """Noise-free predicted measurements; the sigma margin on both sides
    comes from the half-space construction."""
    return [Measurement(t, q, c1, c2) for t, c1, c2, q in zip(traj.t, traj.c1, traj.c2, traj.qp)]


def _next_boundary(state: ProcessState, cfg: PlantConfig) -> float:
    n = cfg.meas_per_sample
    k = math.floor(state.t / (n * cfg.meas_period) + 1e-9)
    return (k + 1) * n * cfg.meas_period


# ---------------------------------------------------------------- nominal

def nominal_step(state: ProcessState, cfg: PlantConfig) -> Action:
    return Action(FeedbackRule.for_params(cfg.prior_mid))


# --------------------------------------------------------------- adaptive

def adaptive_step(state: ProcessState, box: GammaBox, cfg: PlantConfig,
                  ccfg: ControllerConfig = ControllerConfig()) -> Action:
    ce = Action(FeedbackRule.for_params(box.mid()))
    if ccfg.adaptive_mode == "ce" or box.is_point():
        return ce
    return _varmin_action(state, box, cfg, ce, ccfg.reference)


def spread(costs: Sequence[float], ref_cost: float) -> float:
    return sum((c - ref_cost) ** 2 for c in costs)


def minimize_scalar(obj: Callable[[float], float], t_lo: float, t_hi: float, *,
                    grid: int = 17, tol: float = 1e-4) -> tuple[float, float]:
    """Minimize ``obj`` on [t_lo, t_hi].

    A coarse grid locates the basin, golden-section search refines it. The
    objective can have kinks where the arc structure changes, hence the grid.
    """
    if t_hi - t_lo <= tol:
        return t_lo, obj(t_lo)
    taus = np.linspace(t_lo, t_hi, grid)
    vals = [obj(t) for t in taus]
    i = int(np.argmin(vals))
    a, b = taus[max(i - 1, 0)], taus[min(i + 1, grid - 1)]
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = obj(c), obj(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = obj(d)
    best = min([(vals[i], taus[i]), (fc, c), (fd, d)])
    return float(best[1]), float(best[0])


def _varmin_action(state, box, cfg, ce, reference):
    """Clock switch time and singular level minimizing the corner spread."""
    scenarios = box.corners() + [box.mid()]
    mid_pol = quadrature.solve_nominal(box.mid(), cfg, state, strict=False).policy
    u_ce = ce.rule.u_s
    if reference == "regret":
        refs = [quadrature.solve_nominal(p, cfg, state, strict=False).policy.tf
                for p in scenarios]
    else:
        refs = [mid_pol.tf] * len(scenarios)

    def costs(tau, u):
        tau = max(tau, state.t)
        pol = Policy(ce.rule.params, tau, tau, tau, u)
        out = []
        for p in scenarios:
            try:
                x2 = simulate_follow(p, pol, cfg, state, rtol=PREDICT_RTOL, sample=False)[1]
                out.append(x2.t)
            except (InvalidFactor, RatioUnreachable):
                # switched too early: the ratio comes before c1 reaches its target
                out.append(math.inf)
        return out

    def obj(tau, u=u_ce):
        c = costs(tau, u)
        if math.inf in c:
            return math.inf
        if reference == "scenario":
            return spread(c, c[-1])
        return sum((ci - r) ** 2 for ci, r in zip(c, refs))

    sweep = project_switch_times(box, state, cfg)
    base = obj(mid_pol.t1)
    lo = max(state.t, sweep.t1.lo)
    tau, val = minimize_scalar(obj, lo, max(lo, sweep.t1.hi))
    now = obj(state.t)
    if now < val - TIE_TOL:
        tau, val = state.t, now
    u_best = u_ce
    us = project_us(box)
    for u in np.linspace(us.lo, us.hi, 5):
        v = obj(tau, float(u))
        if v < val - TIE_TOL:
            val, u_best = v, float(u)
    if val >= base - TIE_TOL:
        return ce
    return Action(FeedbackRule(ce.rule.params, u_best), switch_time=tau)


# ------------------------------------------------------------------- dual

def realizations(box: GammaBox, branching: str) -> tuple[list[GammaParams], int]:
    """Parameter points a node branches into, and the index of the midpoint."""
    if branching == "joint3":
        return [box.lower_corner(), box.mid(), box.upper_corner()], 1
    mids = box.mid().as_tuple()
    levels = [(lo, m, hi) for lo, m, hi in zip(box.lower, mids, box.upper)]
    return [GammaParams(*c) for c in itertools.product(*levels)], 13


def predicted_update(state: ProcessState, action: Action, p_real: GammaParams,
                     est: Estimator, cfg: PlantConfig, *, rtol: float = PREDICT_RTOL):
    """Predict one sample under ``p_real`` and the box it would leave behind.

    Returns (sample step, estimator copy after the predicted measurements).
    A box corner can lie outside the polytope, and its noise-free outputs
    may then contradict past data; such a branch is predicted to learn
    nothing and keeps the current box.
    """
    step = advance(state, action, p_real, cfg, _next_boundary(state, cfg), rtol=rtol)
    if est.gbox.is_point():
        return step, est
    new = est.copy()
    try:
        new.update(predicted_measurements(step.trajectory))
    except Infeasible:
        new = est
    return step, new


@dataclass
class TreeNode:
    stage: int
    parent: Optional[int]
    realization: GammaParams
    action: Action
    state: ProcessState
    box: GammaBox
    history: tuple
    done: bool = False
    cost: Optional[float] = None
    ref: Optional[float] = None


@dataclass
class ScenarioTree:
    nodes: list
    Nr: int
    branching: str
    objective: float = math.nan

    @property
    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.stage == self.Nr - 1]

    @property
    def n_scenarios(self) -> int:
        return len(self.leaves)

    def check_nonanticipativity(self) -> bool:
        """Nodes with the same parent (same history) carry the same input."""
        groups: dict = {}
        for n in self.nodes:
            groups.setdefault(n.parent, set()).add(n.action)
        return all(len(acts) == 1 for acts in groups.values())

    def decision_groups(self) -> int:
        return len({n.parent for n in self.nodes})


def scenario_count(Nr: int, branching: str) -> int:
    return (3 if branching == "joint3" else 27) ** Nr


def _leaf_cost(node: TreeNode, cfg: PlantConfig) -> float:
    """Batch time of the leaf's plant under the law for its predicted box;
    infinite when the branch overshoots the dilution and misses the target."""
    x = node.state
    if not node.done:
        try:
            x = quadrature.follow_end(node.realization, FeedbackRule.for_params(node.box.mid()),
                                      cfg, x)[1]
        except RatioUnreachable:
            return math.inf
    return x.t if x.c1 >= cfg.c1_f else math.inf


def _expand(parent_idx, parent_state, est, action, stage, history, parent_box, cfg, branching, nodes):
    reals, _ = realizations(parent_box, branching)
    out = []
    for r_idx, r in enumerate(reals):
        step, new = predicted_update(parent_state, action, r, est, cfg)
        node = TreeNode(stage, parent_idx, r, action, step.state, new.gbox,
                        history + ((action.label, r_idx),), step.done)
        nodes.append(node)
        out.append((len(nodes) - 1, new))
    return out


class _References:
    """Reference batch times for leaves, cached per realization.

    ``regret``: each realization's own optimal batch time from the decision
    state, so every term is a squared regret. ``nominal``: the optimal batch
    time of the box midpoint, shared by all leaves. ``scenario``: the
    mid-path leaf of the same assignment (returns None here).
    """

    def __init__(self, mode: str, state: ProcessState, box: GammaBox, cfg: PlantConfig):
        self.mode, self.state, self.cfg = mode, state, cfg
        self.cache: dict = {}
        if mode == "nominal":
            self.value = self._optimal(box.mid())

    def _optimal(self, p: GammaParams) -> float:
        key = p.as_tuple()
        if key not in self.cache:
            try:
                self.cache[key] = quadrature.solve_nominal(p, self.cfg, self.state,
                                                           strict=False).policy.tf
            except (RatioUnreachable, InvalidFactor):
                self.cache[key] = math.nan
        return self.cache[key]

    def __call__(self, node: TreeNode) -> Optional[float]:
        if self.mode == "regret":
            return self._optimal(node.realization)
        if self.mode == "nominal":
            return self.value
        return None


def _sq(cost: float, ref: float) -> float:
    if math.isinf(cost) or math.isnan(ref):
        return math.inf
    return (cost - ref) ** 2


def _objective(leaves: Sequence[TreeNode], mid_cost: Optional[float] = None) -> float:
    return sum(_sq(n.cost, mid_cost if n.ref is None else n.ref) for n in leaves)


def build_tree(state: ProcessState, est: Estimator, inputs: Sequence[Action], Nr: int,
               branching: str, cfg: PlantConfig, reference: str = "regret") -> ScenarioTree:
    """Tree for a fixed input assignment.

    ``inputs[0]`` is the root's action; for Nr=2, ``inputs[1:]`` holds one
    action per stage-0 node, in branch order. Leaf costs and references are
    filled in and the objective is the squared spread of the leaf costs.
    """
    n_s = scenario_count(Nr, branching)
    if n_s > MAX_SCENARIOS:
        raise TreeTooLarge(f"{n_s} scenarios")
    if Nr > 2:
        raise ValueError("robust horizons beyond 2 stages are not supported")
    refs = _References(reference, state, est.gbox, cfg)
    nodes: list = []
    first = _expand(None, state, est, inputs[0], 0, (), est.gbox, cfg, branching, nodes)
    if Nr == 2:
        for j, (idx, e) in enumerate(first):
            n = nodes[idx]
            _expand(idx, n.state, e, inputs[1 + j], 1, n.history, n.box, cfg, branching, nodes)
    tree = ScenarioTree(nodes, Nr, branching)
    for n in tree.leaves:
        n.cost = _leaf_cost(n, cfg)
        n.ref = refs(n)
    _, mid = realizations(est.gbox, branching)
    # leaves are stored branch by branch, so the mid path sits at mid*(width+1)
    mid_leaf = tree.leaves[mid * (len(first) + 1) if Nr == 2 else mid]
    tree.objective = _objective(tree.leaves, mid_leaf.cost)
    return tree


@dataclass
class DualDecision:
    action: Action
    objective: float
    objectives: dict
    tree: Optional[ScenarioTree] = None


def dual_step(state: ProcessState, est: Estimator, cfg: PlantConfig,
              ccfg: ControllerConfig) -> DualDecision:
    """Pick the first-stage input minimizing the leaf-cost spread.

    Candidates are the certainty-equivalent program followed by the
    constant inputs of ``ccfg``; ties go to the earlier candidate, so the
    certainty-equivalent program wins unless a probe strictly improves.
    """
    if scenario_count(ccfg.Nr, ccfg.branching) > MAX_SCENARIOS:
        raise TreeTooLarge(f"{scenario_count(ccfg.Nr, ccfg.branching)} scenarios")
    if ccfg.Nr > 2:
        raise ValueError("robust horizons beyond 2 stages are not supported")
    ce = Action(FeedbackRule.for_params(est.gbox.mid()))
    if est.gbox.is_point():
        return DualDecision(ce, 0.0, {ce.label: 0.0})
    actions = [ce] + [Action(ce.rule, forced_u=float(u)) for u in ccfg.candidate_inputs]

    if ccfg.Nr == 1:
        trees = [build_tree(state, est, [a], 1, ccfg.branching, cfg, ccfg.reference)
                 for a in actions]
        objectives = {a.label: t.objective for a, t in zip(actions, trees)}
        best = _argmin([t.objective for t in trees])
        return DualDecision(actions[best], trees[best].objective, objectives, trees[best])
    return _dual_two_stage(state, est, cfg, ccfg, actions)


def _argmin(values: Sequence[float]) -> int:
    best = 0
    for i, v in enumerate(values):
        if v < values[best] - TIE_TOL:
            best = i
    return best


def _dual_two_stage(state, est, cfg, ccfg, actions):
    """Nr=2: one shared root input, then one input per stage-0 node.

    Given the root input the stage-1 groups only interact through a
    mid-path reference, so each group is optimized on its own (with the
    mid group's action enumerated when the reference is ``scenario``).
    """
    refs = _References(ccfg.reference, state, est.gbox, cfg)
    _, mid = realizations(est.gbox, ccfg.branching)
    objectives = {}
    best = None
    for i0, a0 in enumerate(actions):
        nodes: list = []
        first = _expand(None, state, est, a0, 0, (), est.gbox, cfg, ccfg.branching, nodes)
        children = []   # children[j][a] = leaves of branch j under stage-1 action a
        for idx, e in first:
            n = nodes[idx]
            kids = []
            for a1 in actions:
                sub: list = []
                _expand(idx, n.state, e, a1, 1, n.history, n.box, cfg, ccfg.branching, sub)
                for leaf in sub:
                    leaf.cost = _leaf_cost(leaf, cfg)
                    leaf.ref = refs(leaf)
                kids.append(sub)
            children.append(kids)
        anchors = range(len(actions)) if ccfg.reference == "scenario" else [None]
        best0 = None
        for a_mid in anchors:
            mid_cost = None if a_mid is None else children[mid][a_mid][mid].cost
            choice, total = [], 0.0
            for j in range(len(first)):
                opts = [a_mid] if j == mid and a_mid is not None else list(range(len(actions)))
                vals = [_objective(children[j][a], mid_cost) for a in opts]
                pick = _argmin(vals)
                choice.append(opts[pick])
                total += vals[pick]
            if best0 is None or total < best0[0] - TIE_TOL:
                best0 = (total, choice)
        objectives[a0.label] = best0[0]
        if best is None or best0[0] < best[0] - TIE_TOL:
            tree_nodes = list(nodes)
            for j in range(len(first)):
                tree_nodes.extend(children[j][best0[1][j]])
            best = (best0[0], i0, ScenarioTree(tree_nodes, 2, ccfg.branching, best0[0]))
    return DualDecision(actions[best[1]], best[0], objectives, best[2])


# ------------------------------------------------------- real-time loop

@dataclass
class BatchResult:
    controller: str
    p_true: GammaParams
    tf: float
    final_state: ProcessState
    residuals: tuple
    trajectory: Trajectory
    inputs: list = field(default_factory=list)
    bounds: list = field(default_factory=list)
    intervals: list = field(default_factory=list)
    solve_times: list = field(default_factory=list)
    n_resolves: int = 0
    n_skips: int = 0
    t_switch: Optional[float] = None
    ok: bool = True
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "controller": self.controller,
            "p_true": list(self.p_true.as_tuple()),
            "tf_h": self.tf,
            "final_state": {"c1": self.final_state.c1, "c2": self.final_state.c2,
                            "t": self.final_state.t},
            "residuals": list(self.residuals),
            "t_switch_h": self.t_switch,
            "n_resolves": self.n_resolves,
            "n_skips": self.n_skips,
            "solve_times_s": self.solve_times,
            "inputs": [{"t_h": t, "u": u, "action": lab} for t, u, lab in self.inputs],
            "ok": self.ok,
            "error": self.error,
        }

    def bounds_header(self):
        return BOUNDS_HEADER

    def intervals_header(self):
        return INTERVALS_HEADER


def terminal_ok(state: ProcessState, cfg: PlantConfig) -> bool:
    return abs(state.c1 - cfg.c1_f) <= C1_TOL and abs(state.c2 - cfg.c2_f) <= C2_TOL


def run_algorithm1(p_true: GammaParams, cfg: PlantConfig, ccfg: ControllerConfig,
                   rng: Optional[np.random.Generator] = None, *,
                   max_samples: int = 10_000) -> BatchResult:
    """Real-time loop: apply, measure, bound, project, re-solve when useful.

    For each phase t_i in (t1, t2, tf) the loop runs while
    t <= mid([t_i]) - Ts and re-solves only if diam([t_i]) >= eps. Once
    the phases are exhausted the last program is held until the ratio
    event ends the batch. ``nominal`` and ``optimal`` never re-solve and
    skip estimation.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    x = cfg.initial_state()
    kind = ccfg.kind
    if kind == "optimal":
        action = Action(FeedbackRule.for_params(p_true))
    else:
        action = nominal_step(x, cfg)
    learning = kind in ("adaptive", "dual")
    est = Estimator(cfg) if learning else None
    res = BatchResult(kind, p_true, math.nan, x, (math.nan, math.nan), Trajectory())
    n = cfg.meas_per_sample
    k = 0
    done = False
    final = x

    def sample_once():
        nonlocal x, k, done, final, action
        t_end = (k + 1) * n * cfg.meas_period
        res.inputs.append((x.t, action.input_at(x), action.label))
        step = advance(x, action, p_true, cfg, t_end)
        if step.switched_at is not None and res.t_switch is None:
            res.t_switch = step.switched_at
        res.trajectory.extend(step.trajectory)
        if est is not None:
            noise = uniform_noise(rng, cfg.sigma, len(step.trajectory))
            est.update(measurements_from(step.trajectory, noise))
            res.bounds.append(bounds_row(step.state.t, est.pbox))
        x = step.state
        k += 1
        if action.forced_u is not None:
            # a probe covers one sample; the rest of the profile is the policy
            action = Action(action.rule)
        if step.done:
            done, final = True, step.final_state

    if learning:
        intervals = project_switch_times(est.gbox, x, cfg)
        res.intervals.append(intervals.row(x.t))
        for phase in ("t1", "t2", "tf"):
            while not done and k < max_samples and x.t <= intervals[phase].mid - cfg.Ts + 1e-9:
                if intervals[phase].diam >= ccfg.eps:
                    t0 = time.perf_counter()
                    action = _decide(kind, x, est, cfg, ccfg)
                    res.solve_times.append(time.perf_counter() - t0)
                    res.n_resolves += 1
                else:
                    res.n_skips += 1
                sample_once()
                if not done:
                    intervals = project_switch_times(est.gbox, x, cfg)
                    res.intervals.append(intervals.row(x.t))
    while not done and k < max_samples:
        sample_once()
    if not done:
        raise DualBatchError(f"batch did not finish within {max_samples} samples")
    res.tf = final.t
    res.final_state = final
    res.residuals = (abs(final.c1 - cfg.c1_f), abs(final.c2 - cfg.c2_f))
    res.ok = terminal_ok(final, cfg)
    return res


def _decide(kind, x, est, cfg, ccfg) -> Action:
    if kind == "adaptive":
        return adaptive_step(x, est.gbox, cfg, ccfg)
    return dual_step(x, est, cfg, ccfg).action
