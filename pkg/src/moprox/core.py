"""Domain types for separable multiobjective problems F_j = G_j + H_j.

Each objective splits into a smooth convex part (value + gradient oracles)
and a nonsmooth part: the indicator of a shared box, optionally plus the
support function of a bounded polyhedron evaluated by LP.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .convexprog import InvalidUncertaintySetError, LpProblem, OPTIMAL, PolyhedralSet, solve_lp


@dataclass(frozen=True)
class BoxDomain:
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        lb = np.asarray(self.lb, dtype=float).ravel()
        ub = np.asarray(self.ub, dtype=float).ravel()
        if lb.shape != ub.shape:
            raise ValueError("lb and ub must have the same length")
        if not (np.isfinite(lb).all() and np.isfinite(ub).all()):
            raise ValueError("box bounds must be finite")
        if np.any(lb > ub):
            raise ValueError("lb must be <= ub componentwise")
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @property
    def n(self) -> int:
        return self.lb.shape[0]

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lb - tol) and np.all(x <= self.ub + tol))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lb, self.ub)


@dataclass(frozen=True)
class SmoothPart:
    """Smooth convex objective component: value and gradient oracles."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz: float | None = None  # gradient Lipschitz constant, if known


@dataclass(frozen=True)
class NonsmoothPart:
    """Box indicator, optionally plus the support function of a polyhedron."""

    domain: BoxDomain
    support_term: PolyhedralSet | None = None


@dataclass(frozen=True)
class ProblemInstance:
    name: str
    n: int
    m: int
    smooth: tuple[SmoothPart, ...]
    nonsmooth: tuple[NonsmoothPart, ...]

    def __post_init__(self):
        object.__setattr__(self, "smooth", tuple(self.smooth))
        object.__setattr__(self, "nonsmooth", tuple(self.nonsmooth))
        if self.m < 1 or len(self.smooth) != self.m or len(self.nonsmooth) != self.m:
            raise ValueError("need m >= 1 smooth and nonsmooth parts")
        box = self.nonsmooth[0].domain
        if box.n != self.n:
            raise ValueError("box dimension does not match n")
        for part in self.nonsmooth:
            if part.domain is not box and not (
                np.array_equal(part.domain.lb, box.lb) and np.array_equal(part.domain.ub, box.ub)
            ):
                raise ValueError("all nonsmooth parts must share one box")

    @property
    def box(self) -> BoxDomain:
        return self.nonsmooth[0].domain


@dataclass(frozen=True)
class ObjectiveValues:
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray


@dataclass
class Counters:
    """Per-run oracle accumulator; never shared across runs."""

    g_evals: int = 0
    grad_evals: int = 0
    h_evals: int = 0
    subproblem_solves: int = 0
    lp_solves: int = 0

    def snapshot(self) -> dict:
        return {
            "g_evals": self.g_evals,
            "grad_evals": self.grad_evals,
            "h_evals": self.h_evals,
            "subproblem_solves": self.subproblem_solves,
            "lp_solves": self.lp_solves,
        }


def dominates_weakly(a, b) -> bool:
    """a <= b componentwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("vectors must have equal length")
    return bool(np.all(a <= b))


def is_weak_pareto_in_set(index: int, values: Sequence) -> bool:
    """No other vector in the set is strictly smaller in every component."""
    vals = [np.asarray(v, dtype=float) for v in values]
    target = vals[index]
    for i, v in enumerate(vals):
        if i != index and np.all(v < target):
            return False
    return True


def eval_g(instance: ProblemInstance, j: int, x, counters: Counters | None = None) -> float:
    if counters is not None:
        counters.g_evals += 1
    return float(instance.smooth[j].value(np.asarray(x, dtype=float)))


def eval_grad(instance: ProblemInstance, j: int, x, counters: Counters | None = None) -> np.ndarray:
    if counters is not None:
        counters.grad_evals += 1
    return np.asarray(instance.smooth[j].gradient(np.asarray(x, dtype=float)), dtype=float)


def eval_h(part: NonsmoothPart, x, counters: Counters | None = None) -> float:
    """H value inside the box: 0, or the support-function LP optimum."""
    if counters is not None:
        counters.h_evals += 1
    if part.support_term is None:
        return 0.0
    x = np.asarray(x, dtype=float)
    if counters is not None:
        counters.lp_solves += 1
    hint = part.support_term.support_basis_hint(x)
    sol = solve_lp(LpProblem(c=x, constraint_set=part.support_term), basis_hint=hint)
    if sol.status != OPTIMAL:
        raise InvalidUncertaintySetError(
            f"support LP is {sol.status}; the uncertainty set must be a "
            "nonempty bounded polyhedron"
        )
    return sol.objective_value


def objective_values(instance: ProblemInstance, x, counters: Counters | None = None) -> ObjectiveValues:
    x = np.asarray(x, dtype=float)
    g = np.array([eval_g(instance, j, x, counters) for j in range(instance.m)])
    h = np.array([eval_h(instance.nonsmooth[j], x, counters) for j in range(instance.m)])
    return ObjectiveValues(f=g + h, g=g, h=h)


def psi_value(instance: ProblemInstance, x, u, grads, counters: Counters | None = None) -> float:
    """Model gap max_j grad_j'(u-x) + H_j(u) - H_j(x); +inf outside the box."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if not instance.box.contains(u, tol=1e-12):
        return np.inf
    best = -np.inf
    for j in range(instance.m):
        part = instance.nonsmooth[j]
        term = float(np.dot(grads[j], u - x))
        if part.support_term is not None:
            term += eval_h(part, u, counters) - eval_h(part, x, counters)
        if term > best:
            best = term
    return best
