"""Monte-Carlo comparison of the controllers over a grid of true parameters."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .controllers import BatchResult, ControllerConfig, run_algorithm1
from .errors import DualBatchError, EmptySample
from .estimation import prior_boxes
from .model import GammaParams, PlantConfig

log = logging.getLogger(__name__)

CONTROLLERS = ("optimal", "nominal", "adaptive", "dual")
RUNS_HEADER = ["g1", "g2", "g3", "controller", "tf_h", "regret_pct", "ok"]


@dataclass(frozen=True)
class ExperimentSpec:
    grid: int = 10
    controllers: tuple = CONTROLLERS
    seed: int = 0
    plant: PlantConfig = field(default_factory=PlantConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    workers: int = 1
    truths: Optional[tuple] = None

    def __post_init__(self):
        if self.grid < 1:
            raise ValueError("grid needs at least one point per dimension")
        bad = set(self.controllers) - set(CONTROLLERS)
        if bad or not self.controllers:
            raise ValueError(f"unknown controllers {sorted(bad)}")

    def grid_points(self) -> list[GammaParams]:
        """Uniform grid over the prior box, endpoints included, C order."""
        if self.truths is not None:
            return [GammaParams(*g) for g in self.truths]
        lo, hi = self.plant.gamma_lower, self.plant.gamma_upper
        if self.grid == 1:
            axes = [[(a + b) / 2] for a, b in zip(lo, hi)]
        else:
            axes = [np.linspace(a, b, self.grid).tolist() for a, b in zip(lo, hi)]
        return [GammaParams(*g) for g in itertools.product(*axes)]


def noise_rng(seed: int, index: int) -> np.random.Generator:
    # one stream per truth, shared by all controllers on that truth
    return np.random.default_rng([seed, index])


def run_closed_loop(p_true: GammaParams, kind: str, cfg: PlantConfig,
                    ccfg: Optional[ControllerConfig] = None, *, seed: int = 0,
                    index: int = 0) -> BatchResult:
    ccfg = replace(ccfg or ControllerConfig(), kind=kind)
    return run_algorithm1(p_true, cfg, ccfg, noise_rng(seed, index))


@dataclass
class RunRecord:
    index: int
    gamma: tuple
    controller: str
    tf: float
    regret_pct: float
    ok: bool
    mean_solve_time: float = 0.0
    error: Optional[str] = None
    containment_violations: int = 0
    nesting_violations: int = 0


def bound_audit(rows: Sequence[Sequence[float]], p_true: GammaParams,
                cfg: PlantConfig) -> tuple[int, int]:
    """Count samples whose p-box misses the truth, and samples whose box is
    not inside the previous one (the prior hull for the first)."""
    p = p_true.to_p().as_tuple()
    prev_lo, prev_hi = prior_boxes(cfg)[0].lower, prior_boxes(cfg)[0].upper
    missed = unnested = 0
    for row in rows:
        lo, hi = row[1:7:2], row[2:7:2]
        missed += not all(a <= v <= b for v, a, b in zip(p, lo, hi))
        unnested += not all(pl <= a and b <= ph for a, b, pl, ph in zip(lo, hi, prev_lo, prev_hi))
        prev_lo, prev_hi = lo, hi
    return missed, unnested


def _run_truth(args) -> list[RunRecord]:
    index, g, spec = args
    p = GammaParams(*g)
    out = []
    try:
        ref = run_closed_loop(p, "optimal", spec.plant, spec.controller, seed=spec.seed,
                              index=index).tf
    except DualBatchError as exc:
        return [RunRecord(index, g, c, float("nan"), float("nan"), False, error=str(exc))
                for c in spec.controllers]
    for kind in spec.controllers:
        try:
            r = run_closed_loop(p, kind, spec.plant, spec.controller, seed=spec.seed,
                                index=index)
        except DualBatchError as exc:
            log.warning("run %d (%s) failed: %s", index, kind, exc)
            out.append(RunRecord(index, g, kind, float("nan"), float("nan"), False,
                                 error=f"{type(exc).__name__}: {exc}"))
            continue
        regret = 0.0 if kind == "optimal" else 100.0 * (r.tf - ref) / ref
        st = float(np.mean(r.solve_times)) if r.solve_times else 0.0
        missed, unnested = bound_audit(r.bounds, p, spec.plant)
        out.append(RunRecord(index, g, kind, r.tf, regret, r.ok, st,
                             None if r.ok else "terminal residual out of tolerance",
                             missed, unnested))
    return out


@dataclass
class ControllerStats:
    n: int
    median: float
    q25: float
    q75: float
    whisker_lo: float
    whisker_hi: float
    outliers: list
    mean_solve_time: float = 0.0

    @property
    def iqr(self) -> float:
        return self.q75 - self.q25


@dataclass
class StatsSummary:
    controllers: dict
    n_runs: int = 0
    failures: list = field(default_factory=list)

    def __getitem__(self, kind: str) -> ControllerStats:
        return self.controllers[kind]

    def to_json(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "n_failed": len(self.failures),
            "failures": self.failures,
            "controllers": {k: {**vars(s), "iqr": s.iqr} for k, s in self.controllers.items()},
        }


def box_stats(values: Sequence[float], solve_time: float = 0.0) -> ControllerStats:
    """Box-plot statistics: linear-interpolation quartiles, Tukey whiskers."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise EmptySample("no successful runs")
    q25, med, q75 = np.percentile(v, [25, 50, 75])
    iqr = q75 - q25
    inside = v[(v >= q25 - 1.5 * iqr) & (v <= q75 + 1.5 * iqr)]
    outliers = v[(v < q25 - 1.5 * iqr) | (v > q75 + 1.5 * iqr)]
    return ControllerStats(int(v.size), float(med), float(q25), float(q75),
                           float(inside.min()), float(inside.max()),
                           outliers.tolist(), solve_time)


def summarize(records: Sequence[RunRecord], field_name: str = "tf") -> StatsSummary:
    """Per-controller statistics of batch time (or ``regret_pct``)."""
    kinds = list(dict.fromkeys(r.controller for r in records))
    out = {}
    for k in kinds:
        ok = [r for r in records if r.controller == k and r.ok]
        times = [r.mean_solve_time for r in ok]
        out[k] = box_stats([getattr(r, field_name) for r in ok],
                           float(np.mean(times)) if times else 0.0)
    failures = [{"index": r.index, "gamma": list(r.gamma), "controller": r.controller,
                 "error": r.error} for r in records if not r.ok]
    return StatsSummary(out, len(records), failures)


@dataclass
class MonteCarloResult:
    records: list
    summary: StatsSummary

    def runs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RUNS_HEADER)
        for r in self.records:
            w.writerow([repr(r.gamma[0]), repr(r.gamma[1]), repr(r.gamma[2]), r.controller,
                        repr(r.tf), repr(r.regret_pct), int(r.ok)])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary.to_json(), indent=2)

    def regret_summary(self) -> StatsSummary:
        return summarize(self.records, "regret_pct")

    def by_controller(self, kind: str, attr: str = "tf") -> list:
        return [getattr(r, attr) for r in self.records if r.controller == kind]


def monte_carlo(spec: ExperimentSpec) -> MonteCarloResult:
    """Run every grid truth under every requested controller.

    Failed runs are kept with ok=0 so the caller can report them.
    """
    jobs = [(i, g.as_tuple(), spec) for i, g in enumerate(spec.grid_points())]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            chunks = list(pool.map(_run_truth, jobs, chunksize=4))
    else:
        chunks = [_run_truth(j) for j in jobs]
    order = {k: i for i, k in enumerate(spec.controllers)}
    records = sorted(itertools.chain.from_iterable(chunks),
                     key=lambda r: (r.index, order[r.controller]))
    ok = [r for r in records if r.ok]
    summary = summarize(ok) if ok else StatsSummary({}, 0)
    summary.n_runs = len(records)
    summary.failures = [{"index": r.index, "gamma": list(r.gamma), "controller": r.controller,
                         "error": r.error} for r in records if not r.ok]
    return MonteCarloResult(records, summary)
