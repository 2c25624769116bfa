"""Step-size strategies: explicit backtracking, Armijo halving, implicit test.

The explicit search backtracks only on the smooth parts: first on the single
worst-slope objective, then (if plain objective dominance fails) on all of
them, with quadratic interpolation for each trial reduction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Counters, ProblemInstance, eval_g, eval_h

BACKTRACK_CAP = 200
ARMIJO_CAP = 60


class LineSearchError(RuntimeError):
    """Backtrack cap exceeded; signals broken oracles, not a theory failure."""


@dataclass
class LineSearchResult:
    t: float
    accepted_case: str           # "LS1", "LS2", or "armijo"
    backtracks: int              # number of shrunk trial steps (omega)
    g_evals: int                 # smooth evaluations spent backtracking
    h_evals: int                 # nonsmooth evaluations spent on dominance tests
    f_new: np.ndarray | None = None   # F at the accepted point, when computed
    g_new: np.ndarray | None = None   # G at the accepted point, when computed


def interpolate_step(t: float, phi0: float, dphi0: float, phit: float,
                     tau1: float, tau2: float) -> float:
    """Minimizer of the quadratic through (0, phi0), slope dphi0, (t, phit).

    Clamped to [tau1*t, tau2*t]; falls back to the midpoint factor for a
    nondescent slope or a degenerate fit.
    """
    denom = 2.0 * (phit - phi0 - dphi0 * t)
    scale = abs(phit) + abs(phi0) + abs(dphi0 * t)
    if dphi0 >= 0 or denom <= 1e-14 * (1.0 + scale):
        return 0.5 * (tau1 + tau2) * t
    t_q = -dphi0 * t * t / denom
    return float(min(max(t_q, tau1 * t), tau2 * t))


def explicit_search(instance: ProblemInstance, x, d, grads, F_at_x,
                    gamma: float, tau1: float, tau2: float,
                    counters: Counters | None = None,
                    g_at_x=None) -> LineSearchResult:
    """Backtracking line search on the smooth parts only.

    Step A: backtrack on the objective with the largest directional slope
    until its smooth decrease condition holds.  Step B: accept if the full
    objective vector does not increase (LS1).  Step C: otherwise shrink and
    backtrack on the smooth condition for every objective (LS2).
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    m = instance.m
    slopes = np.array([float(g @ d) for g in grads])
    jstar = int(np.argmax(slopes))  # argmax ties break to the smallest index
    dd = float(d @ d)
    quad = 0.5 * gamma * dd

    def g_at(j, t):
        return eval_g(instance, j, x + t * d, counters)

    def smooth_ok(j, t, gval):
        gx = F_at_x_g[j]
        return gval <= gx + t * slopes[j] + t * quad

    # smooth values at x: passed in by the driver or recovered via H
    F_at_x = np.asarray(F_at_x, dtype=float)
    if g_at_x is not None:
        F_at_x_g = np.asarray(g_at_x, dtype=float)
    else:
        h_x = np.array([eval_h(instance.nonsmooth[j], x) for j in range(m)])
        F_at_x_g = F_at_x - h_x

    t = 1.0
    omega = 0
    g_evals = 0
    h_evals = 0

    # Step A: single-objective backtracking on j*
    while True:
        gval = g_at(jstar, t)
        g_evals += 1
        if smooth_ok(jstar, t, gval):
            break
        if omega >= BACKTRACK_CAP:
            raise LineSearchError("explicit search exceeded the backtrack cap")
        t = interpolate_step(t, F_at_x_g[jstar], slopes[jstar], gval, tau1, tau2)
        omega += 1

    # Step B: objective-vector dominance test at the current trial
    g_trial = np.empty(m)
    g_trial[jstar] = gval
    for j in range(m):
        if j != jstar:
            g_trial[j] = g_at(j, t)
    h_trial = np.empty(m)
    xt = x + t * d
    for j in range(m):
        h_trial[j] = eval_h(instance.nonsmooth[j], xt, counters)
        h_evals += 1
    f_trial = g_trial + h_trial
    if np.all(f_trial <= F_at_x):
        return LineSearchResult(t=t, accepted_case="LS1", backtracks=omega,
                                g_evals=g_evals, h_evals=h_evals,
                                f_new=f_trial, g_new=g_trial)

    # Step C: shrink first, then backtrack on the all-objective condition
    while True:
        if omega >= BACKTRACK_CAP:
            raise LineSearchError("explicit search exceeded the backtrack cap")
        # interpolate on the objective most violating the smooth condition
        viol = g_trial - (F_at_x_g + t * slopes + t * quad)
        jv = int(np.argmax(viol))
        if viol[jv] > 0:
            t_new = interpolate_step(t, F_at_x_g[jv], slopes[jv], g_trial[jv], tau1, tau2)
        else:
            t_new = 0.5 * (tau1 + tau2) * t
        t = t_new
        omega += 1
        g_trial = np.array([g_at(j, t) for j in range(m)])
        g_evals += m
        if all(smooth_ok(j, t, g_trial[j]) for j in range(m)):
            return LineSearchResult(t=t, accepted_case="LS2", backtracks=omega,
                                    g_evals=g_evals, h_evals=h_evals,
                                    f_new=None, g_new=g_trial)


def armijo_search(instance: ProblemInstance, x, d, psi_p: float, sigma: float,
                  F_at_x, counters: Counters | None = None,
                  literal_sign: bool = False) -> LineSearchResult:
    """Halving search: largest t = 2^-l with sufficient decrease in every F_j.

    The sufficient-decrease threshold is F_j(x) + sigma*t*psi (psi <= 0);
    `literal_sign` flips it to the published - sign for comparison runs.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    F_at_x = np.asarray(F_at_x, dtype=float)
    m = instance.m
    decr = -sigma * psi_p if literal_sign else sigma * psi_p

    t = 1.0
    g_evals = 0
    h_evals = 0
    for level in range(ARMIJO_CAP + 1):
        xt = x + t * d
        g_trial = np.array([eval_g(instance, j, xt, counters) for j in range(m)])
        g_evals += m
        h_trial = np.array([eval_h(instance.nonsmooth[j], xt, counters) for j in range(m)])
        h_evals += m
        f_trial = g_trial + h_trial
        if np.all(f_trial <= F_at_x + t * decr):
            return LineSearchResult(t=t, accepted_case="armijo", backtracks=level,
                                    g_evals=g_evals, h_evals=h_evals,
                                    f_new=f_trial, g_new=g_trial)
        t *= 0.5
    raise LineSearchError("Armijo search exceeded the halving cap")


def implicit_test(instance: ProblemInstance, x, p, grads, alpha: float,
                  counters: Counters | None = None,
                  g_at_x=None) -> tuple[bool, np.ndarray]:
    """All-objective smooth decrease test with coefficient 1/(2*alpha).

    Returns (accepted, G values at p) so callers can reuse the evaluations.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    d = p - x
    dd = float(d @ d)
    m = instance.m
    if g_at_x is None:
        g_at_x = np.array([eval_g(instance, j, x, counters) for j in range(m)])
    g_p = np.array([eval_g(instance, j, p, counters) for j in range(m)])
    ok = True
    for j in range(m):
        bound = float(g_at_x[j]) + float(grads[j] @ d) + dd / (2.0 * alpha)
        if g_p[j] > bound:
            ok = False
            break
    return ok, g_p
