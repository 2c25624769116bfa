"""Pareto front quality metrics and performance profiles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FrontSet:
    points: np.ndarray                      # rows are objective vectors
    solver: str = ""
    run_ids: tuple = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 0)
        self.points = np.atleast_2d(pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class ProfileTable:
    costs: np.ndarray                       # problems x solvers, NaN = failure
    solvers: tuple
    measure: str = ""
    problems: tuple = ()

    def __post_init__(self):
        self.costs = np.atleast_2d(np.asarray(self.costs, dtype=float))


def _dominates(a, b) -> bool:
    """a <= b everywhere and strictly smaller somewhere."""
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_filter(points, solver: str = "", run_ids=()) -> FrontSet:
    """Retain the points not dominated by any other; stable order."""
    pts = [np.asarray(p, dtype=float) for p in points]
    keep = []
    for i, p in enumerate(pts):
        if not any(_dominates(q, p) for j, q in enumerate(pts) if j != i):
            keep.append(i)
    rows = np.array([pts[i] for i in keep]) if keep else np.zeros((0, 0))
    ids = tuple(run_ids[i] for i in keep) if run_ids else ()
    return FrontSet(points=rows, solver=solver, run_ids=ids)


def purity(front: FrontSet, reference: FrontSet, tol: float | None = None) -> float:
    """Fraction of front points present in the reference front.

    Membership is an infinity-norm match within tol; NaN marks an empty front.
    """
    if len(front) == 0:
        return float("nan")
    ref = reference.points
    if tol is None:
        tol = 1e-8 * (1.0 + np.abs(ref).max(initial=0.0))
    hits = 0
    for p in front.points:
        if len(reference) and np.min(np.abs(ref - p).max(axis=1)) <= tol:
            hits += 1
    return hits / len(front)


def _sorted_gaps(front: FrontSet, axis: int, extremes):
    order = np.argsort(front.points[:, axis], kind="stable")
    vals = front.points[order, axis]
    if extremes is not None:
        lo = min(e[axis] for e in extremes)
        hi = max(e[axis] for e in extremes)
        lo = min(lo, vals[0])
        hi = max(hi, vals[-1])
    else:
        lo, hi = vals[0], vals[-1]
    inner = np.diff(vals)
    return float(vals[0] - lo), inner, float(hi - vals[-1])


def spread_gamma(front: FrontSet, extremes=None) -> float:
    """Largest coordinate gap along the sorted 2-objective front."""
    if _degenerate(front):
        return float("nan")
    _require_biobjective(front)
    worst = 0.0
    for axis in range(2):
        d0, inner, dN = _sorted_gaps(front, axis, extremes)
        worst = max(worst, d0, dN, inner.max(initial=0.0))
    return worst


def spread_delta(front: FrontSet, extremes=None) -> float:
    """Gap-uniformity measure averaged over the two objectives."""
    if _degenerate(front):
        return float("nan")
    _require_biobjective(front)
    vals = []
    for axis in range(2):
        d0, inner, dN = _sorted_gaps(front, axis, extremes)
        dbar = inner.mean()
        num = d0 + dN + np.abs(inner - dbar).sum()
        den = d0 + dN + inner.size * dbar
        vals.append(num / den if den > 0 else 0.0)
    return float(np.mean(vals))


def _degenerate(front: FrontSet) -> bool:
    # empty or singleton fronts have no gaps to measure
    return len(front) < 2


def _require_biobjective(front: FrontSet):
    if front.points.shape[1] != 2:
        raise ValueError("spread metrics support two objectives only")


def performance_profile(table: ProfileTable):
    """Dolan-More profiles: ratios to the per-problem best cost.

    Returns (taus, rho) where rho[i, s] is the fraction of problems solver s
    handles within ratio taus[i]; failures never enter.
    """
    costs = table.costs
    if np.isnan(costs).all(axis=1).any():
        raise ValueError("every problem needs at least one successful solver")
    best = np.nanmin(costs, axis=1)
    if np.any(costs[~np.isnan(costs)] <= 0):
        raise ValueError("costs must be positive")
    ratios = costs / best[:, None]
    ratios = np.where(np.isnan(ratios), np.inf, ratios)
    finite = ratios[np.isfinite(ratios)]
    taus = np.unique(np.concatenate([[1.0], finite]))
    rho = np.empty((taus.size, costs.shape[1]))
    for s in range(costs.shape[1]):
        rho[:, s] = (ratios[:, s][None, :] <= taus[:, None]).mean(axis=1)
    return taus, rho
