"""Shared builders for small synthetic instances used across the test suite."""
import numpy as np
import pytest

from moprox.convexprog import PolyhedralSet
from moprox.core import BoxDomain, NonsmoothPart, ProblemInstance, SmoothPart


def quad_smooth(Q, c, r=0.0):
    """Smooth part 1/2 x'Qx + c'x + r with its exact Lipschitz constant."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    c = np.asarray(c, dtype=float).ravel()
    L = float(np.linalg.eigvalsh(Q).max()) if Q.any() else 0.0
    return SmoothPart(
        value=lambda x, Q=Q, c=c, r=r: float(0.5 * x @ (Q @ x) + c @ x + r),
        gradient=lambda x, Q=Q, c=c: Q @ x + c,
        lipschitz=L,
    )


def linear_smooth(c, r=0.0):
    c = np.asarray(c, dtype=float).ravel()
    return SmoothPart(
        value=lambda x, c=c, r=r: float(c @ x + r),
        gradient=lambda x, c=c: c.copy(),
        lipschitz=0.0,
    )


def make_instance(smooth_parts, lb, ub, support_terms=None, name="test"):
    box = BoxDomain(lb=np.asarray(lb, dtype=float), ub=np.asarray(ub, dtype=float))
    m = len(smooth_parts)
    if support_terms is None:
        support_terms = [None] * m
    nonsmooth = tuple(NonsmoothPart(domain=box, support_term=s) for s in support_terms)
    return ProblemInstance(name=name, n=box.n, m=m,
                           smooth=tuple(smooth_parts), nonsmooth=nonsmooth)


def scalar_quad_instance(L=1.0, lb=-10.0, ub=10.0):
    """n=1, m=1 instance G(x) = (L/2) x^2 on [lb, ub]."""
    return make_instance([quad_smooth([[L]], [0.0])], [lb], [ub],
                         name=f"quad{L:g}")


def two_linear_instance():
    """n=1, m=2 with G1 = x, G2 = -x on [-1, 1]; every point is weakly Pareto."""
    return make_instance([linear_smooth([1.0]), linear_smooth([-1.0])],
                         [-1.0], [1.0], name="twolinear")


def random_structured_set(rng, n, delta=None, max_cond=1e6):
    while True:
        B = rng.uniform(-1.0, 1.0, size=(n, n))
        if np.linalg.cond(B) <= max_cond:
            break
    if delta is None:
        delta = float(rng.uniform(0.1, 2.0))
    return PolyhedralSet.structured(B, delta)


def random_convex_instance(rng, n, m, robust=False, box_half=2.0):
    """Random strictly convex quadratic objectives on a symmetric box.

    Kept at unit scale (curvature, gradients, and support values all O(1))
    so absolute solver tolerances are meaningful.
    """
    parts = []
    for _ in range(m):
        M = rng.normal(size=(n, n))
        Q = M.T @ M / n + 0.1 * np.eye(n)
        c = rng.normal(size=n)
        parts.append(quad_smooth(Q, c))
    supports = None
    if robust:
        supports = [random_structured_set(rng, n,
                                          delta=float(rng.uniform(0.05, 0.5)),
                                          max_cond=100.0)
                    for _ in range(m)]
    lb = np.full(n, -box_half)
    ub = np.full(n, box_half)
    return make_instance(parts, lb, ub, support_terms=supports, name="random")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
