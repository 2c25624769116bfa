"""Algorithm drivers: explicit-search, Armijo, and implicit proximal gradient.

All three share the stopping rule |theta_a(x)| <= eps and record a full
per-iteration trace with oracle counters.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import Counters, ObjectiveValues, ProblemInstance, eval_h, objective_values
from .linesearch import LineSearchError, armijo_search, explicit_search, implicit_test
from .subproblem import SubproblemError, solve_proximal

MPG = "mpg"
MPG_ARMIJO = "mpg_armijo"
MPG_IMPLICIT = "mpg_implicit"
ALGORITHMS = (MPG, MPG_ARMIJO, MPG_IMPLICIT)

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
LINESEARCH_FAILURE = "linesearch_failure"
SUBPROBLEM_FAILURE = "subproblem_failure"

TRACE_X_LIMIT = 1000   # beyond this dimension, iterates are not stored
ALPHA_UNDERFLOW = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = MPG
    alpha: float = 1.0
    gamma: float = 1.9999
    tau1: float = 0.1
    tau2: float = 0.9
    sigma: float = 1e-4
    eps: float = 1e-4
    max_iters: int = 200
    seed: int = 0
    armijo_literal_sign: bool = False  # published sign of the decrease term

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.gamma < 2.0 / self.alpha:
            raise ValueError("gamma must lie in (0, 2/alpha)")
        if not 0 < self.tau1 < self.tau2 < 1:
            raise ValueError("need 0 < tau1 < tau2 < 1")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class IterationRecord:
    k: int
    x: np.ndarray | None      # iterate after the step (omitted when n is large)
    F: np.ndarray             # objective vector after the step
    theta: float              # merit value at the pre-step iterate
    norm_d: float
    t: float
    accepted_case: str
    omega: int
    alpha_used: float
    j_star: int
    counters: dict
    wall_time: float


@dataclass
class RunResult:
    status: str
    x_final: np.ndarray
    f_final: np.ndarray
    theta_final: float
    trace: list[IterationRecord]
    counters: Counters
    alpha_final: float
    message: str = ""


def _start(instance: ProblemInstance, x0) -> tuple[np.ndarray, Counters, ObjectiveValues]:
    x = np.asarray(x0, dtype=float).copy()
    if not instance.box.contains(x, tol=1e-12):
        raise ValueError("x0 must lie in the box domain")
    counters = Counters()
    fv = objective_values(instance, x, counters)
    return x, counters, fv


def _record(trace, instance, k, x, f_new, sub, t, case, omega, alpha, jstar,
            counters, t0):
    trace.append(IterationRecord(
        k=k,
        x=x.copy() if instance.n <= TRACE_X_LIMIT else None,
        F=np.asarray(f_new, dtype=float).copy(),
        theta=sub.theta,
        norm_d=float(np.linalg.norm(sub.d)),
        t=t,
        accepted_case=case,
        omega=omega,
        alpha_used=alpha,
        j_star=jstar,
        counters=counters.snapshot(),
        wall_time=time.perf_counter() - t0,
    ))


def run_mpg(instance: ProblemInstance, x0, config: SolverConfig) -> RunResult:
    """Proximal gradient with the explicit smooth-part line search."""
    t0 = time.perf_counter()
    x, counters, fv = _start(instance, x0)
    trace: list[IterationRecord] = []
    alpha = config.alpha
    for k in range(config.max_iters + 1):
        try:
            sub = solve_proximal(instance, x, alpha, counters)
        except SubproblemError as exc:
            return RunResult(SUBPROBLEM_FAILURE, x, fv.f, np.nan, trace, counters,
                             alpha, message=str(exc))
        if abs(sub.theta) <= config.eps:
            return RunResult(CONVERGED, x, fv.f, sub.theta, trace, counters, alpha)
        if float(np.linalg.norm(sub.d)) == 0.0:
            return RunResult(SUBPROBLEM_FAILURE, x, fv.f, sub.theta, trace, counters,
                             alpha, message="zero step with nonzero merit value")
        if k == config.max_iters:
            return RunResult(MAX_ITERATIONS, x, fv.f, sub.theta, trace, counters, alpha)
        slopes = [float(g @ sub.d) for g in sub.grads]
        jstar = int(np.argmax(slopes))
        try:
            ls = explicit_search(instance, x, sub.d, sub.grads, fv.f,
                                 config.gamma, config.tau1, config.tau2,
                                 counters=counters, g_at_x=fv.g)
        except LineSearchError as exc:
            return RunResult(LINESEARCH_FAILURE, x, fv.f, sub.theta, trace, counters,
                             alpha, message=str(exc))
        x = x + ls.t * sub.d
        if ls.f_new is not None:
            fv = ObjectiveValues(f=ls.f_new, g=ls.g_new, h=ls.f_new - ls.g_new)
        else:
            h_new = np.array([eval_h(instance.nonsmooth[j], x, counters)
                              for j in range(instance.m)])
            fv = ObjectiveValues(f=ls.g_new + h_new, g=ls.g_new, h=h_new)
        _record(trace, instance, k, x, fv.f, sub, ls.t, ls.accepted_case,
                ls.backtracks, alpha, jstar, counters, t0)
    raise AssertionError("unreachable")


def run_mpg_armijo(instance: ProblemInstance, x0, config: SolverConfig) -> RunResult:
    """Vanilla proximal gradient with halving Armijo search on the full objectives."""
    t0 = time.perf_counter()
    x, counters, fv = _start(instance, x0)
    trace: list[IterationRecord] = []
    alpha = config.alpha
    for k in range(config.max_iters + 1):
        try:
            sub = solve_proximal(instance, x, alpha, counters)
        except SubproblemError as exc:
            return RunResult(SUBPROBLEM_FAILURE, x, fv.f, np.nan, trace, counters,
                             alpha, message=str(exc))
        if abs(sub.theta) <= config.eps:
            return RunResult(CONVERGED, x, fv.f, sub.theta, trace, counters, alpha)
        if float(np.linalg.norm(sub.d)) == 0.0:
            return RunResult(SUBPROBLEM_FAILURE, x, fv.f, sub.theta, trace, counters,
                             alpha, message="zero step with nonzero merit value")
        if k == config.max_iters:
            return RunResult(MAX_ITERATIONS, x, fv.f, sub.theta, trace, counters, alpha)
        slopes = [float(g @ sub.d) for g in sub.grads]
        jstar = int(np.argmax(slopes))
        psi_p = sub.theta - float(sub.d @ sub.d) / (2.0 * alpha)
        try:
            ls = armijo_search(instance, x, sub.d, psi_p, config.sigma, fv.f,
                               counters=counters,
                               literal_sign=config.armijo_literal_sign)
        except LineSearchError as exc:
            return RunResult(LINESEARCH_FAILURE, x, fv.f, sub.theta, trace, counters,
                             alpha, message=str(exc))
        x = x + ls.t * sub.d
        fv = ObjectiveValues(f=ls.f_new, g=ls.g_new, h=ls.f_new - ls.g_new)
        _record(trace, instance, k, x, fv.f, sub, ls.t, ls.accepted_case,
                ls.backtracks, alpha, jstar, counters, t0)
    raise AssertionError("unreachable")


def run_mpg_implicit(instance: ProblemInstance, x0, config: SolverConfig) -> RunResult:
    """Implicit variant: halve alpha until the full step passes the smooth test."""
    t0 = time.perf_counter()
    x, counters, fv = _start(instance, x0)
    trace: list[IterationRecord] = []
    alpha = config.alpha  # persists (monotone nonincreasing) across iterations
    for k in range(config.max_iters + 1):
        omega = 0
        while True:
            try:
                sub = solve_proximal(instance, x, alpha, counters)
            except SubproblemError as exc:
                return RunResult(SUBPROBLEM_FAILURE, x, fv.f, np.nan, trace, counters,
                                 alpha, message=str(exc))
            if abs(sub.theta) <= config.eps:
                return RunResult(CONVERGED, x, fv.f, sub.theta, trace, counters, alpha)
            if k == config.max_iters:
                return RunResult(MAX_ITERATIONS, x, fv.f, sub.theta, trace, counters,
                                 alpha)
            ok, g_p = implicit_test(instance, x, sub.p, sub.grads, alpha, counters,
                                    g_at_x=fv.g)
            if ok:
                break
            alpha *= 0.5
            omega += 1
            if alpha < ALPHA_UNDERFLOW:
                return RunResult(SUBPROBLEM_FAILURE, x, fv.f, sub.theta, trace,
                                 counters, alpha, message="alpha underflow")
        slopes = [float(g @ sub.d) for g in sub.grads]
        jstar = int(np.argmax(slopes))
        x = sub.p
        h_new = np.array([eval_h(instance.nonsmooth[j], x, counters)
                          for j in range(instance.m)])
        fv = ObjectiveValues(f=g_p + h_new, g=g_p, h=h_new)
        _record(trace, instance, k, x, fv.f, sub, 1.0, "implicit", omega, alpha,
                jstar, counters, t0)
    raise AssertionError("unreachable")


_RUNNERS = {MPG: run_mpg, MPG_ARMIJO: run_mpg_armijo, MPG_IMPLICIT: run_mpg_implicit}


def run(instance: ProblemInstance, x0, config: SolverConfig) -> RunResult:
    return _RUNNERS[config.algorithm](instance, x0, config)


def check_stationarity(instance: ProblemInstance, x, alpha: float, eps: float) -> bool:
    """Fresh subproblem solve; true iff |theta_a(x)| <= eps."""
    sub = solve_proximal(instance, x, alpha)
    return abs(sub.theta) <= eps
