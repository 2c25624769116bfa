"""Command-line harness: single solves, benchmark sweeps, frontiers, metrics.

All randomness flows from one master seed through `run_seed`, so repeated
invocations with the same arguments reproduce the same numeric outputs.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import solvers
from .metrics import FrontSet, ProfileTable, nondominated_filter, performance_profile, \
    purity, spread_delta, spread_gamma
from .problems import CatalogError, catalog_names, draw_robust_spec, load_manifest, \
    make_problem, robustify, sample_start
from .solvers import ALGORITHMS, CONVERGED, RunResult, SolverConfig, run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_FAILURE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(ValueError):
    pass


def run_seed(master_seed: int, *indices: int) -> int:
    """Fixed integer mix: a seed sequence over (master, index...)."""
    ss = np.random.SeedSequence([int(master_seed)] + [int(i) for i in indices])
    return int(ss.generate_state(1)[0])


def _build_instance(name: str, robust: bool, robust_seed: int):
    if os.path.exists(name):
        instance = load_manifest(name)
    else:
        instance = make_problem(name)
    if robust:
        instance = robustify(instance, robust_seed)
    return instance


def _config_from_args(args, algo: str) -> SolverConfig:
    kwargs = {"algorithm": algo}
    for key in ("alpha", "gamma", "tau1", "tau2", "sigma", "eps", "max_iters"):
        val = getattr(args, key, None)
        if val is not None:
            kwargs[key] = val
    return SolverConfig(**kwargs)


def _add_solver_flags(p):
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--tau1", type=float, default=None)
    p.add_argument("--tau2", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)


def _apply_config_file(args, parser):
    """Overlay key=value pairs from --config; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    overrides = {}
    with open(args.config) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"bad config line: {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            overrides[key.replace("-", "_")] = val
    casters = {}
    for action in parser._subparsers._group_actions[0].choices[args.command]._actions:
        if action.dest != argparse.SUPPRESS:
            if isinstance(action, argparse._StoreTrueAction):
                casters[action.dest] = lambda v: v.lower() in ("1", "true", "yes")
            else:
                casters[action.dest] = action.type or str
    for key, val in overrides.items():
        if key not in casters:
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, key) is None or getattr(args, key) is False:
            setattr(args, key, casters[key](val))
    return args


# --- solve ------------------------------------------------------------------

def _write_iterations_csv(path, run_id: str, result: RunResult, m: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "k", "t", "theta", "norm_d", "omega", "alpha_used"]
                   + [f"F_{j + 1}" for j in range(m)])
        for rec in result.trace:
            w.writerow([run_id, rec.k, repr(rec.t), repr(rec.theta),
                        repr(rec.norm_d), rec.omega, repr(rec.alpha_used)]
                       + [repr(float(v)) for v in rec.F])


def cmd_solve(args) -> int:
    robust_seed = run_seed(args.seed, 0)
    instance = _build_instance(args.problem, args.robust, robust_seed)
    config = _config_from_args(args, args.algo)
    if args.x0 == "random":
        x0 = sample_start(instance, run_seed(args.seed, 1))
    else:
        x0 = np.array([float(v) for v in args.x0.replace(",", " ").split()])
    t0 = time.perf_counter()
    result = run(instance, x0, config)
    elapsed_ms = 1000.0 * (time.perf_counter() - t0)

    os.makedirs(args.out, exist_ok=True)
    run_id = f"{args.problem}-{args.algo}-{args.seed}"
    _write_iterations_csv(os.path.join(args.out, "iterations.csv"), run_id,
                          result, instance.m)
    payload = {
        "run_id": run_id,
        "problem": args.problem,
        "algorithm": args.algo,
        "robust": bool(args.robust),
        "seed": args.seed,
        "status": result.status,
        "iterations": len(result.trace),
        "theta_final": None if np.isnan(result.theta_final) else result.theta_final,
        "final_point": [float(v) for v in result.x_final],
        "final_objectives": [float(v) for v in result.f_final],
        "alpha_final": result.alpha_final,
        "time_ms": elapsed_ms,
        "counters": result.counters.snapshot(),
    }
    with open(os.path.join(args.out, "result.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
    if result.status == CONVERGED:
        return EXIT_OK
    if result.status == solvers.MAX_ITERATIONS:
        return EXIT_NOT_CONVERGED
    return EXIT_FAILURE


# --- bench ------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    problems: tuple
    algorithms: tuple
    starts_per_problem: int = 100
    master_seed: int = 0
    robust: bool = False
    overrides: dict | None = None

    def __post_init__(self):
        if self.starts_per_problem < 1:
            raise ValueError("starts must be >= 1")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        for p in self.problems:
            if p not in catalog_names() and not os.path.exists(p):
                raise CatalogError(f"unknown problem {p!r}")


def _bench_one(task):
    """One (problem, start, algorithm) run; rebuilt from seeds so it pickles."""
    name, robust, master_seed, pi, si, ai, algo, overrides = task
    instance = _build_instance(name, robust, run_seed(master_seed, pi))
    x0 = sample_start(instance, run_seed(master_seed, pi, si))
    kwargs = dict(overrides or {})
    kwargs["algorithm"] = algo
    kwargs["seed"] = run_seed(master_seed, pi, si, ai)
    config = SolverConfig(**kwargs)
    t0 = time.perf_counter()
    result = run(instance, x0, config)
    elapsed_ms = 1000.0 * (time.perf_counter() - t0)
    snap = result.counters.snapshot()
    row = [name, algo, config.seed, result.status, len(result.trace),
           repr(elapsed_ms), snap["g_evals"], snap["grad_evals"], snap["h_evals"],
           snap["subproblem_solves"], snap["lp_solves"],
           repr(float(result.theta_final))]
    finals = (result.status, [float(v) for v in result.x_final],
              [float(v) for v in result.f_final])
    return row, finals


RESULT_COLUMNS = ["problem", "algo", "seed", "status", "iterations", "time_ms",
                  "g_evals", "grad_evals", "h_evals", "subproblem_solves",
                  "lp_solves", "theta_final"]


def run_bench(exp: ExperimentConfig, out_dir: str, workers: int | None = None):
    """Execute the sweep and write results.csv / summary.json; returns rows."""
    tasks = []
    for pi, name in enumerate(exp.problems):
        for si in range(exp.starts_per_problem):
            for ai, algo in enumerate(exp.algorithms):
                tasks.append((name, exp.robust, exp.master_seed, pi, si, ai,
                              algo, exp.overrides))
    if workers is None:
        workers = int(os.environ.get("MOPROX_THREADS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_bench_one, tasks, chunksize=4))
    else:
        outcomes = [_bench_one(t) for t in tasks]

    rows = [o[0] for o in outcomes]
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        w.writerows(rows)

    summary = {"master_seed": exp.master_seed, "robust": exp.robust,
               "problems": list(exp.problems), "algorithms": {}}
    if exp.robust:
        summary["robust_specs"] = {}
        for pi, name in enumerate(exp.problems):
            base = _build_instance(name, False, 0)
            spec = draw_robust_spec(base, run_seed(exp.master_seed, pi))
            summary["robust_specs"][name] = {
                "seed": run_seed(exp.master_seed, pi),
                "delta_hat": spec.delta_hat,
                "delta": spec.delta,
            }
    for algo in exp.algorithms:
        sel = [r for r in rows if r[1] == algo]
        conv = [r for r in sel if r[3] == CONVERGED]
        h_conv = sorted(int(r[8]) for r in conv)
        summary["algorithms"][algo] = {
            "runs": len(sel),
            "converged": len(conv),
            "robustness": len(conv) / len(sel) if sel else None,
            "median_h_evals_converged":
                float(np.median(h_conv)) if h_conv else None,
        }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return rows, summary


def cmd_bench(args) -> int:
    exp = ExperimentConfig(
        problems=tuple(args.problems.split(",")),
        algorithms=tuple(args.algos.split(",")),
        starts_per_problem=args.starts,
        master_seed=args.master_seed,
        robust=args.robust,
        overrides=_solver_overrides(args),
    )
    run_bench(exp, args.out, workers=args.workers)
    return EXIT_OK


def _solver_overrides(args) -> dict:
    out = {}
    for key in ("alpha", "gamma", "tau1", "tau2", "sigma", "eps", "max_iters"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    # validate ranges early so bad configs exit with a usage error
    SolverConfig(**out)
    return out


# --- frontier ---------------------------------------------------------------

def run_frontier(problem: str, algo: str, starts: int, seed: int, robust: bool,
                 overrides: dict | None = None):
    """Pool final points of converged runs and filter in objective space."""
    instance = _build_instance(problem, robust, run_seed(seed, 0))
    xs, fs, ids = [], [], []
    for si in range(starts):
        x0 = sample_start(instance, run_seed(seed, 0, si))
        kwargs = dict(overrides or {})
        kwargs["algorithm"] = algo
        kwargs["seed"] = run_seed(seed, 0, si, 0)
        result = run(instance, x0, SolverConfig(**kwargs))
        if result.status == CONVERGED:
            xs.append(result.x_final)
            fs.append(result.f_final)
            ids.append(si)
    if not fs:
        return instance, FrontSet(points=np.zeros((0, instance.m)), solver=algo), []
    front = nondominated_filter(fs, solver=algo, run_ids=tuple(ids))
    kept = set(front.run_ids)
    xs_kept = [x for i, x in zip(ids, xs) if i in kept]
    return instance, front, xs_kept


def cmd_frontier(args) -> int:
    instance, front, xs = run_frontier(args.problem, args.algo, args.starts,
                                       args.seed, args.robust,
                                       _solver_overrides(args))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "front.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i + 1}" for i in range(instance.n)]
                   + [f"F_{j + 1}" for j in range(instance.m)])
        for x, f in zip(xs, front.points):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in f])
    return EXIT_OK if len(front) else EXIT_NOT_CONVERGED


# --- metrics ----------------------------------------------------------------

def _load_results(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def profiles_from_results(rows, measure: str):
    """One profile instance per (problem, start); failures never score."""
    algos = sorted({r["algo"] for r in rows})
    # group by (problem, start): the start is identified by row order per algo
    by_key = {}
    seen = {}
    for r in rows:
        si = seen.get((r["problem"], r["algo"]), 0)
        seen[(r["problem"], r["algo"])] = si + 1
        by_key.setdefault((r["problem"], si), {})[r["algo"]] = r
    keys = sorted(by_key)
    costs = np.full((len(keys), len(algos)), np.nan)
    for i, key in enumerate(keys):
        for s, algo in enumerate(algos):
            r = by_key[key].get(algo)
            if r is not None and r["status"] == CONVERGED:
                val = float(r[measure])
                costs[i, s] = max(val, 1e-9)
    usable = ~np.isnan(costs).all(axis=1)
    return ProfileTable(costs=costs[usable], solvers=tuple(algos),
                        measure=measure, problems=tuple(keys[i] for i in
                                                        range(len(keys)) if usable[i]))


def cmd_metrics(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    report = {}
    if args.results:
        rows = _load_results(args.results)
        for measure in args.measures.split(","):
            table = profiles_from_results(rows, measure)
            taus, rho = performance_profile(table)
            path = os.path.join(args.out, f"profile_{measure}.csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["tau"] + [f"rho_{a}" for a in table.solvers])
                for i, tau in enumerate(taus):
                    w.writerow([repr(float(tau))] + [repr(float(v)) for v in rho[i]])
    if args.fronts:
        named = []
        for spec in args.fronts:
            if "=" not in spec:
                raise UsageError("front spec must be label=path")
            label, path = spec.split("=", 1)
            with open(path, newline="") as fh:
                rdr = csv.reader(fh)
                header = next(rdr)
                fcols = [i for i, h in enumerate(header) if h.startswith("F_")]
                pts = [[float(row[i]) for i in fcols] for row in rdr]
            named.append((label, FrontSet(points=np.array(pts) if pts else
                                          np.zeros((0, len(fcols))), solver=label)))
        pooled = [p for _, f in named for p in f.points]
        reference = nondominated_filter(pooled)
        front_report = {}
        for label, front in named:
            entry = {"points": len(front),
                     "purity": _json_float(purity(front, reference))}
            if front.points.shape[1] == 2 and len(front) >= 2:
                entry["spread_gamma"] = _json_float(spread_gamma(front))
                entry["spread_delta"] = _json_float(spread_delta(front))
            front_report[label] = entry
        report["fronts"] = front_report
    with open(os.path.join(args.out, "metrics.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    return EXIT_OK


def _json_float(v):
    return None if np.isnan(v) else float(v)


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="moprox")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver on one problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--algo", default="mpg", choices=ALGORITHMS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--robust", action="store_true")
    p.add_argument("--x0", default="random")
    p.add_argument("--out", default="out")
    p.add_argument("--config", default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="problems x starts x algorithms sweep")
    p.add_argument("--problems", required=True)
    p.add_argument("--algos", default=",".join(ALGORITHMS))
    p.add_argument("--starts", type=int, default=100)
    p.add_argument("--master-seed", dest="master_seed", type=int, default=0)
    p.add_argument("--robust", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default="out")
    p.add_argument("--config", default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("frontier", help="collect a Pareto front approximation")
    p.add_argument("--problem", required=True)
    p.add_argument("--algo", default="mpg", choices=ALGORITHMS)
    p.add_argument("--starts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--robust", action="store_true")
    p.add_argument("--out", default="out")
    p.add_argument("--config", default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("metrics", help="profiles and front metrics from files")
    p.add_argument("--results", default=None)
    p.add_argument("--measures", default="time_ms,h_evals")
    p.add_argument("--fronts", nargs="*", default=None,
                   help="label=front.csv pairs")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(args, parser)
        return args.func(args)
    except (UsageError, CatalogError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
