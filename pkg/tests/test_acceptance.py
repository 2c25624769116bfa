"""End-to-end acceptance checks.

Each test emits one PASS/FAIL line (written past pytest's capture so the
lines always appear in the console output).
"""
import sys
import time

import numpy as np
import pytest

from moprox import cli
from moprox.cli import ExperimentConfig, run_bench
from moprox.convexprog import LpProblem, solve_lp
from moprox.core import eval_grad, eval_h, objective_values, psi_value
from moprox.metrics import (FrontSet, ProfileTable, nondominated_filter,
                            performance_profile)
from moprox.problems import catalog_names, make_problem, robustify, sample_start
from moprox.solvers import CONVERGED, SolverConfig, run, run_mpg
from moprox.subproblem import solve_proximal

from conftest import (quad_smooth, random_convex_instance,
                      random_structured_set, make_instance)


def report(name: str, ok: bool, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'} {name}"
    if detail:
        line += f" ({detail})"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


# --- criterion 1: subproblem soundness --------------------------------------

def test_criterion_1_subproblem_soundness():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_kkt = worst_theta = worst_gap = 0.0
    for trial in range(200):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 4))
        robust = trial % 2 == 0
        inst = random_convex_instance(rng, n, m, robust=robust)
        x = rng.uniform(inst.box.lb, inst.box.ub)
        alpha = float(rng.uniform(0.25, 2.0))
        sub = solve_proximal(inst, x, alpha)
        worst_kkt = max(worst_kkt, sub.kkt_residual)
        worst_theta = max(worst_theta, sub.theta)
        grads = [eval_grad(inst, j, x) for j in range(m)]
        recomputed = (psi_value(inst, x, sub.p, grads)
                      + float(sub.d @ sub.d) / (2.0 * alpha))
        worst_gap = max(worst_gap, abs(sub.theta - recomputed))
    elapsed = time.perf_counter() - t0
    ok = (worst_kkt <= 1e-8 and worst_theta <= 1e-10 and worst_gap <= 1e-7
          and elapsed < 60.0)
    report("criterion 1: subproblem soundness", ok,
           f"kkt {worst_kkt:.1e}, theta {worst_theta:.1e}, "
           f"recompute gap {worst_gap:.1e}, {elapsed:.1f}s")


# --- criterion 2: m=1 reduction ---------------------------------------------

def _reference_interpolate(t, phi0, dphi0, phit, tau1, tau2):
    denom = 2.0 * (phit - phi0 - dphi0 * t)
    scale = abs(phit) + abs(phi0) + abs(dphi0 * t)
    if dphi0 >= 0 or denom <= 1e-14 * (1.0 + scale):
        return 0.5 * (tau1 + tau2) * t
    return min(max(-dphi0 * t * t / denom, tau1 * t), tau2 * t)


def _reference_trajectory(value, gradient, x0, gamma, tau1, tau2, eps, cap):
    """Scalar-objective proximal-gradient recursion with the same search."""
    x = np.asarray(x0, dtype=float).copy()
    out = []
    for _ in range(cap):
        g = gradient(x)
        d = -g                              # alpha = 1, interior
        dd = float(d @ d)
        theta = -0.5 * dd
        if abs(theta) <= eps:
            break
        t = 1.0
        phi0 = value(x)
        slope = float(g @ d)
        while True:
            phit = value(x + t * d)
            if phit <= phi0 + t * slope + t * 0.5 * gamma * dd:
                break
            t = _reference_interpolate(t, phi0, slope, phit, tau1, tau2)
        x = x + t * d
        out.append(x.copy())
    return out


def test_criterion_2_scalar_reduction():
    t0 = time.perf_counter()
    cases = [
        (np.diag([1.0, 0.5]), np.array([0.3, -0.2])),
        (np.array([[2.0, 0.4], [0.4, 1.0]]), np.array([-1.0, 0.5])),
        (np.diag([30.0, 3.0, 0.7]), np.array([1.0, -2.0, 0.5])),  # L > gamma
    ]
    worst = 0.0
    for Q, c in cases:
        n = Q.shape[0]
        inst = make_instance([quad_smooth(Q, c)],
                             np.full(n, -1000.0), np.full(n, 1000.0))
        x0 = np.full(n, 2.0)
        cfg = SolverConfig()
        res = run_mpg(inst, x0, cfg)
        assert res.status == CONVERGED
        ref = _reference_trajectory(inst.smooth[0].value,
                                    inst.smooth[0].gradient, x0,
                                    cfg.gamma, cfg.tau1, cfg.tau2,
                                    cfg.eps, cfg.max_iters)
        assert len(ref) == len(res.trace)
        for rec, xr in zip(res.trace, ref):
            worst = max(worst, float(np.abs(rec.x - xr).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 5.0
    report("criterion 2: m=1 closed-form recursion", ok,
           f"max deviation {worst:.1e}, {elapsed:.1f}s")


# --- criterion 3: monotonicity and j* decrease ------------------------------

def test_criterion_3_monotonicity_and_jstar_decrease():
    mono_viol = jstar_viol = runs = 0
    worst_mono = worst_jstar = -np.inf
    for name in catalog_names():
        for robust in (False, True):
            inst = make_problem(name)
            if robust:
                inst = robustify(inst, seed=77)
            for si in range(3):
                x0 = sample_start(inst, seed=500 + si)
                for algo in ("mpg", "mpg_armijo", "mpg_implicit"):
                    res = run(inst, x0, SolverConfig(algorithm=algo))
                    runs += 1
                    f_prev = objective_values(inst, x0).f
                    for rec in res.trace:
                        gap = float((rec.F - f_prev).max())
                        worst_mono = max(worst_mono, gap)
                        if gap > 1e-12:
                            mono_viol += 1
                        if algo in ("mpg", "mpg_armijo"):
                            a = rec.alpha_used
                            bound = (-rec.t * (1.0 / a - 1.9999 / 2.0)
                                     * rec.norm_d ** 2 + 1e-10)
                            drop = float(rec.F[rec.j_star] - f_prev[rec.j_star])
                            worst_jstar = max(worst_jstar, drop - bound)
                            if drop > bound:
                                jstar_viol += 1
                        f_prev = rec.F
    ok = mono_viol == 0 and jstar_viol == 0
    report("criterion 3: monotonicity and j* decrease", ok,
           f"{runs} runs, mono viol {mono_viol}, j* viol {jstar_viol}, "
           f"worst slack {worst_mono:.1e}/{worst_jstar:.1e}")


# --- criteria 4 and 5: shared robust benchmark ------------------------------

@pytest.fixture(scope="module")
def robust_bench(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    exp = ExperimentConfig(problems=tuple(catalog_names()),
                           algorithms=("mpg", "mpg_armijo", "mpg_implicit"),
                           starts_per_problem=100, master_seed=0, robust=True)
    t0 = time.perf_counter()
    rows, summary = run_bench(exp, str(out))
    elapsed = time.perf_counter() - t0
    return rows, summary, elapsed


def test_criterion_4_robustness(robust_bench):
    rows, summary, elapsed = robust_bench
    rob = {a: summary["algorithms"][a]["robustness"]
           for a in ("mpg", "mpg_armijo", "mpg_implicit")}
    ok = (rob["mpg"] >= 0.95 and rob["mpg_armijo"] >= 0.95
          and rob["mpg_implicit"] >= 0.60 and elapsed < 600.0)
    report("criterion 4: desk-scale robustness", ok,
           f"mpg {rob['mpg']:.3f}, armijo {rob['mpg_armijo']:.3f}, "
           f"implicit {rob['mpg_implicit']:.3f}, {elapsed:.0f}s")


def test_criterion_5_h_eval_economy(robust_bench):
    rows, summary, _ = robust_bench
    med = {a: summary["algorithms"][a]["median_h_evals_converged"]
           for a in ("mpg", "mpg_armijo")}
    wins = ties = losses = 0
    for name in {r[0] for r in rows}:
        per = {}
        for algo in ("mpg", "mpg_armijo"):
            vals = [int(r[8]) for r in rows
                    if r[0] == name and r[1] == algo and r[3] == CONVERGED]
            per[algo] = float(np.median(vals)) if vals else np.inf
        if per["mpg"] < per["mpg_armijo"]:
            wins += 1
        elif per["mpg"] == per["mpg_armijo"]:
            ties += 1
        else:
            losses += 1
    total = wins + ties + losses
    ok = med["mpg"] <= med["mpg_armijo"] and (wins + ties) >= 0.5 * total
    report("criterion 5: H-evaluation economy", ok,
           f"median {med['mpg']:.0f} vs {med['mpg_armijo']:.0f}, "
           f"wins+ties {wins + ties}/{total}")


# --- criterion 6: line-search bounds ----------------------------------------

def test_criterion_6_linesearch_bounds():
    gamma, tau1, tau2 = 1.9999, 0.1, 0.9
    t_viol = omega_viol = checked = 0
    cases = [(make_problem(name), 5) for name in catalog_names()]
    for L in (8.0, 50.0, 300.0):
        inst = make_instance([quad_smooth(np.diag([L, 1.0]), np.array([0.5, -1.0])),
                              quad_smooth(np.diag([1.0, L]), np.array([-1.0, 0.5]))],
                             np.full(2, -20.0), np.full(2, 20.0),
                             name=f"stiff{L:g}")
        cases.append((inst, 5))
    for inst, starts in cases:
        lips = [s.lipschitz for s in inst.smooth]
        assert all(l is not None for l in lips)
        l_max = max(lips)
        if l_max <= 0:
            continue
        t_min = min(1.0, tau1 * gamma / l_max)
        omega_cap = np.log(t_min) / np.log(tau2) + 1.0
        for si in range(starts):
            res = run_mpg(inst, sample_start(inst, seed=900 + si), SolverConfig())
            for rec in res.trace:
                checked += 1
                if rec.t < t_min - 1e-12:
                    t_viol += 1
                if rec.omega > omega_cap:
                    omega_viol += 1
    ok = t_viol == 0 and omega_viol == 0
    report("criterion 6: step-size and backtrack bounds", ok,
           f"{checked} iterations, t viol {t_viol}, omega viol {omega_viol}")


# --- criterion 7: complexity trend ------------------------------------------

def test_criterion_7_complexity_trend():
    # a mildly ill conditioned robustified instance: the merit value decays
    # geometrically through all 80 iterations instead of hitting the
    # stationarity floor early
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    n = 5
    spread = np.logspace(0.0, np.log10(25.0), n)
    c = rng.normal(size=n)
    supports = [random_structured_set(rng, n, delta=0.05) for _ in range(2)]
    inst = make_instance([quad_smooth(np.diag(spread), c),
                          quad_smooth(np.diag(spread[::-1]), -c)],
                         np.full(n, -10.0), np.full(n, 10.0),
                         support_terms=supports, name="slowrobust")
    x0 = sample_start(inst, seed=500)
    cfg = SolverConfig(eps=1e-30, max_iters=80)
    res = run_mpg(inst, x0, cfg)
    thetas = np.abs([rec.theta for rec in res.trace])
    assert len(thetas) >= 80
    vals = {N: N * thetas[:N].min() for N in (10, 20, 40, 80)}
    elapsed = time.perf_counter() - t0
    ok = max(vals.values()) <= 2.0 * vals[10] and elapsed < 30.0
    report("criterion 7: complexity trend", ok,
           ", ".join(f"N={N}: {v:.2e}" for N, v in vals.items())
           + f", {elapsed:.1f}s")


# --- criterion 8: oracle equivalences ---------------------------------------

def test_criterion_8_oracle_equivalences():
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        s = random_structured_set(rng, n)
        x = rng.normal(size=n)
        sol = solve_lp(LpProblem(c=x, constraint_set=s))
        expect = s.delta * np.abs(np.linalg.solve(s.B.T, x)).sum()
        worst = max(worst, abs(sol.objective_value - expect) / (1.0 + expect))
    lp_ok = worst <= 1e-8

    filter_ok = True
    for size in (20, 100, 200):
        pts = rng.normal(size=(size, 2))
        front = nondominated_filter(list(pts))
        keep = [i for i, p in enumerate(pts)
                if not any(np.all(q <= p) and np.any(q < p)
                           for j, q in enumerate(pts) if j != i)]
        filter_ok = filter_ok and np.array_equal(front.points, pts[keep])

    table = ProfileTable(costs=[[1.0, 2.0], [2.0, 1.0], [1.0, 1.0]],
                         solvers=("a", "b"))
    taus, rho = performance_profile(table)
    i1 = int(np.searchsorted(taus, 1.0))
    i2 = int(np.searchsorted(taus, 2.0))
    profile_ok = (np.allclose(rho[i1], [2 / 3, 2 / 3])
                  and np.allclose(rho[i2], [1.0, 1.0]))

    ok = lp_ok and filter_ok and profile_ok
    report("criterion 8: oracle equivalences", ok,
           f"lp gap {worst:.1e}, filter {'ok' if filter_ok else 'BAD'}, "
           f"profile {'ok' if profile_ok else 'BAD'}")


# --- criterion 9: determinism -----------------------------------------------

def test_criterion_9_bench_determinism(tmp_path):
    args = ["bench", "--problems", "BK1,VU2", "--starts", "3",
            "--master-seed", "17", "--robust"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0

    def strip_time(path):
        lines = (path / "results.csv").read_text().splitlines()
        header = lines[0].split(",")
        drop = header.index("time_ms")
        return "\n".join(",".join(v for i, v in enumerate(l.split(","))
                                  if i != drop) for l in lines)

    same = strip_time(tmp_path / "a") == strip_time(tmp_path / "b")
    report("criterion 9: benchmark determinism", same,
           "results.csv identical excluding time_ms")
