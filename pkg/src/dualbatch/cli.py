"""Command-line entry point: ``dualbatch <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import controller_config, load_config, plant_config
from .errors import ConfigError, DualBatchError
from .estimation import (BOUNDS_HEADER, Estimator, GammaBox, bounds_row, read_measurements_csv,
                         rows_to_csv)
from .harness import CONTROLLERS, ExperimentSpec, monte_carlo, run_closed_loop
from .model import GammaParams, ProcessState
from .policy import solve_nominal
from .projection import INTERVALS_HEADER, project_switch_times

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 2, 3


def _triple(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return vals


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file with [plant]/[controller]/[experiment]")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--ts", type=float, help="control sampling period [h]")
    common.add_argument("--eps", type=float, help="re-solve tolerance [h]")
    common.add_argument("--nr", type=int, choices=(1, 2), help="robust horizon of the dual controller")
    common.add_argument("--seed", type=int, help="noise seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dualbatch", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve-nominal", parents=[common], help="optimal policy for known parameters")
    s.add_argument("--gamma", type=_triple, help="g1,g2,g3 (default: prior midpoint)")

    s = sub.add_parser("simulate", parents=[common], help="one closed-loop batch")
    s.add_argument("--gamma", type=_triple, help="true g1,g2,g3 (default: prior midpoint)")
    s.add_argument("--controller", choices=CONTROLLERS, default="adaptive")

    s = sub.add_parser("estimate-replay", parents=[common], help="bounds from a measurement CSV")
    s.add_argument("measurements", type=Path, help="CSV with t_h,qp_Lh,c1_gL,c2_gL")

    s = sub.add_parser("montecarlo", parents=[common], help="grid of truths x controllers")
    s.add_argument("--grid", type=int, help="points per parameter dimension")
    s.add_argument("--controllers", help="comma-separated subset of " + ",".join(CONTROLLERS))
    s.add_argument("--workers", type=int, help="worker processes")

    s = sub.add_parser("project-intervals", parents=[common], help="switching-time intervals of a box")
    s.add_argument("--lower", type=_triple, help="box lower corner (default: prior)")
    s.add_argument("--upper", type=_triple, help="box upper corner (default: prior)")
    s.add_argument("--state", type=_triple, help="c1,c2,t (default: initial state)")
    return p


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _cmd_solve_nominal(args, data, cfg):
    g = GammaParams(*args.gamma) if args.gamma else cfg.prior_mid
    sol = solve_nominal(g, cfg)
    doc = {**sol.policy.to_json(),
           "c1_t1_gL": sol.state_t1.c1, "c1_t2_gL": sol.state_t2.c1, "c2_t2_gL": sol.state_t2.c2,
           "dilution_factor": sol.dilution_factor,
           "final_c1_gL": sol.final_state.c1, "final_c2_gL": sol.final_state.c2}
    _write(args.out, "policy.json", json.dumps(doc, indent=2))
    _write(args.out, "trajectory.csv", sol.trajectory.to_csv())
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def _cmd_simulate(args, data, cfg):
    g = GammaParams(*args.gamma) if args.gamma else cfg.prior_mid
    ccfg = controller_config(data, args.controller, eps=args.eps, Nr=args.nr)
    seed = args.seed if args.seed is not None else data.get("experiment", {}).get("seed", 0)
    res = run_closed_loop(g, args.controller, cfg, ccfg, seed=seed)
    _write(args.out, "result.json", json.dumps(res.to_json(), indent=2))
    _write(args.out, "trajectory.csv", res.trajectory.to_csv())
    _write(args.out, "bounds.csv", rows_to_csv(BOUNDS_HEADER, res.bounds))
    _write(args.out, "intervals.csv", rows_to_csv(INTERVALS_HEADER, res.intervals))
    print(f"tf = {res.tf:.6f} h  ok = {res.ok}  re-solves = {res.n_resolves}  skips = {res.n_skips}")
    return EXIT_OK if res.ok else EXIT_PARTIAL


def _cmd_estimate_replay(args, data, cfg):
    try:
        ms = read_measurements_csv(args.measurements.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {args.measurements}: {exc}") from exc
    est = Estimator(cfg)
    rows = []
    for m in ms:
        est.update([m])
        rows.append(bounds_row(m.t, est.pbox))
    path = _write(args.out, "bounds.csv", rows_to_csv(BOUNDS_HEADER, rows))
    print(f"{len(rows)} measurements -> {path}")
    return EXIT_OK


def _cmd_montecarlo(args, data, cfg):
    exp = dict(data.get("experiment", {}))
    kinds = args.controllers.split(",") if args.controllers else exp.get("controllers", CONTROLLERS)
    try:
        spec = ExperimentSpec(
            grid=args.grid if args.grid is not None else exp.get("grid", 10),
            controllers=tuple(kinds),
            seed=args.seed if args.seed is not None else exp.get("seed", 0),
            plant=cfg,
            controller=controller_config(data, "adaptive", eps=args.eps, Nr=args.nr),
            workers=args.workers if args.workers is not None else exp.get("workers", 1),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    mc = monte_carlo(spec)
    _write(args.out, "runs.csv", mc.runs_csv())
    _write(args.out, "summary.json", mc.summary_json())
    for kind, st in mc.summary.controllers.items():
        print(f"{kind:9s} n={st.n:5d} median={st.median:.4f} h  IQR={st.iqr:.4f} h")
    if mc.summary.failures:
        print(f"{len(mc.summary.failures)} runs failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_project(args, data, cfg):
    box = GammaBox(args.lower or cfg.gamma_lower, args.upper or cfg.gamma_upper)
    state = ProcessState(*args.state) if args.state else cfg.initial_state()
    iv = project_switch_times(box, state, cfg)
    doc = dict(zip(INTERVALS_HEADER, iv.row(state.t)))
    _write(args.out, "intervals.csv", rows_to_csv(INTERVALS_HEADER, [iv.row(state.t)]))
    print(json.dumps(doc, indent=2))
    return EXIT_OK


COMMANDS = {
    "solve-nominal": _cmd_solve_nominal,
    "simulate": _cmd_simulate,
    "estimate-replay": _cmd_estimate_replay,
    "montecarlo": _cmd_montecarlo,
    "project-intervals": _cmd_project,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        data = load_config(args.config)
        cfg = plant_config(data, Ts=args.ts)
        return COMMANDS[args.command](args, data, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DualBatchError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
