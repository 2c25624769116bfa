"""Proximal subproblem: epigraph QP assembly and solve.

The subproblem min_u psi_x(u) + (1/2a)||u - x||^2 is rewritten with an
epigraph variable tau; for objectives carrying a support term the H_j(u)
appearing in the epigraph row is replaced by its LP dual via strong duality,
yielding one convex QP in (tau, u, w_1, ..).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import convexprog
from .convexprog import MAX_ITERATIONS, QpProblem, solve_qp
from .core import Counters, ProblemInstance, eval_grad, eval_h


class SubproblemError(RuntimeError):
    """The QP returned an iterate that violates the subproblem contract."""


@dataclass
class SubproblemSolution:
    p: np.ndarray            # minimizer p_a(x)
    theta: float             # optimal value (nonpositive merit)
    d: np.ndarray            # p - x
    tau: float
    duals: list              # per-objective (epigraph multiplier, w block or None)
    kkt_residual: float
    degraded: bool = False   # QP hit its iteration cap; best iterate returned
    grads: list | None = None      # gradient oracles at x, reusable by callers
    h_at_x: np.ndarray | None = None


def build_epigraph_qp(instance: ProblemInstance, x, grads, h_at_x, alpha: float) -> QpProblem:
    """Assemble the dualized epigraph QP at x.

    Variables are (tau, u, w_j for each j with a support term).  Rows:
    one epigraph inequality per objective, w_j >= 0, box bounds on u, and
    the coupling equalities A_j' w_j = u.
    """
    n, m = instance.n, instance.m
    x = np.asarray(x, dtype=float)
    grads = [np.asarray(g, dtype=float) for g in grads]
    h_at_x = np.asarray(h_at_x, dtype=float)

    w_sets = [instance.nonsmooth[j].support_term for j in range(m)]
    w_sizes = [s.A.shape[0] if s is not None else 0 for s in w_sets]
    w_off = [0] * m
    off = 1 + n
    for j in range(m):
        w_off[j] = off
        off += w_sizes[j]
    nv = off

    P = np.zeros((nv, nv))
    P[1:1 + n, 1:1 + n] = np.eye(n) / alpha
    q = np.zeros(nv)
    q[0] = 1.0
    q[1:1 + n] = -x / alpha

    n_ineq = m + sum(w_sizes) + 2 * n
    C = np.zeros((n_ineq, nv))
    c = np.zeros(n_ineq)
    row = 0
    for j in range(m):
        C[row, 0] = -1.0
        C[row, 1:1 + n] = grads[j]
        rhs = float(grads[j] @ x)
        if w_sets[j] is not None:
            C[row, w_off[j]:w_off[j] + w_sizes[j]] = w_sets[j].b
            rhs += h_at_x[j]
        c[row] = rhs
        row += 1
    for j in range(m):
        for i in range(w_sizes[j]):
            C[row, w_off[j] + i] = -1.0
            row += 1
    box = instance.box
    C[row:row + n, 1:1 + n] = np.eye(n)
    c[row:row + n] = box.ub
    row += n
    C[row:row + n, 1:1 + n] = -np.eye(n)
    c[row:row + n] = -box.lb

    n_eq = sum(n if s is not None else 0 for s in w_sets)
    E = np.zeros((n_eq, nv))
    e = np.zeros(n_eq)
    erow = 0
    for j in range(m):
        if w_sets[j] is not None:
            E[erow:erow + n, w_off[j]:w_off[j] + w_sizes[j]] = w_sets[j].A.T
            E[erow:erow + n, 1:1 + n] = -np.eye(n)
            erow += n
    return QpProblem(P=P, q=q, C=C, c=c, E=E, e=e)


def build_structured_qp(instance: ProblemInstance, x, grads, h_at_x, alpha: float) -> QpProblem:
    """Condensed subproblem QP for structured support sets.

    For sets {z : -delta e <= B z <= delta e} the support value at u is
    delta * ||B^-T u||_1, so the dual block w_j and its coupling equalities
    collapse to n bound variables s_j >= |B_j^-T u|.  Same minimizer and
    optimal value as the general epigraph form, with no equality rows.
    """
    n, m = instance.n, instance.m
    x = np.asarray(x, dtype=float)
    grads = [np.asarray(g, dtype=float) for g in grads]
    h_at_x = np.asarray(h_at_x, dtype=float)

    w_sets = [instance.nonsmooth[j].support_term for j in range(m)]
    s_sizes = [n if ws is not None else 0 for ws in w_sets]
    s_off = [0] * m
    off = 1 + n
    for j in range(m):
        s_off[j] = off
        off += s_sizes[j]
    nv = off

    P = np.zeros((nv, nv))
    P[1:1 + n, 1:1 + n] = np.eye(n) / alpha
    q = np.zeros(nv)
    q[0] = 1.0
    q[1:1 + n] = -x / alpha

    n_ineq = m + 2 * sum(s_sizes) + 2 * n
    C = np.zeros((n_ineq, nv))
    c = np.zeros(n_ineq)
    row = 0
    for j in range(m):
        C[row, 0] = -1.0
        C[row, 1:1 + n] = grads[j]
        rhs = float(grads[j] @ x)
        if w_sets[j] is not None:
            C[row, s_off[j]:s_off[j] + n] = w_sets[j].delta
            rhs += h_at_x[j]
        c[row] = rhs
        row += 1
    for j in range(m):
        if w_sets[j] is None:
            continue
        ibt = w_sets[j].inv_bt()
        C[row:row + n, 1:1 + n] = ibt
        C[row:row + n, s_off[j]:s_off[j] + n] = -np.eye(n)
        row += n
        C[row:row + n, 1:1 + n] = -ibt
        C[row:row + n, s_off[j]:s_off[j] + n] = -np.eye(n)
        row += n
    box = instance.box
    C[row:row + n, 1:1 + n] = np.eye(n)
    c[row:row + n] = box.ub
    row += n
    C[row:row + n, 1:1 + n] = -np.eye(n)
    c[row:row + n] = -box.lb
    return QpProblem(P=P, q=q, C=C, c=c, E=np.zeros((0, nv)), e=np.zeros(0))


def solve_proximal(instance: ProblemInstance, x, alpha: float,
                   counters: Counters | None = None,
                   grads=None, h_at_x=None) -> SubproblemSolution:
    """Solve the proximal subproblem at x, returning p_a(x) and theta_a(x).

    `grads` and `h_at_x` may be passed in when the caller has already paid
    for those oracles at x.
    """
    x = np.asarray(x, dtype=float)
    n, m = instance.n, instance.m
    if grads is None:
        grads = [eval_grad(instance, j, x, counters) for j in range(m)]
    if h_at_x is None:
        h_at_x = np.array([eval_h(instance.nonsmooth[j], x, counters) for j in range(m)])
    h_at_x = np.asarray(h_at_x, dtype=float)
    sets = [instance.nonsmooth[j].support_term for j in range(m)]
    condensed = any(s is not None for s in sets) and all(
        s is None or s.B is not None for s in sets)
    if condensed:
        qp = build_structured_qp(instance, x, grads, h_at_x, alpha)
    else:
        qp = build_epigraph_qp(instance, x, grads, h_at_x, alpha)
    if counters is not None:
        counters.subproblem_solves += 1
    sol = solve_qp(qp)
    degraded = sol.status == MAX_ITERATIONS
    if sol.status not in (convexprog.OPTIMAL, MAX_ITERATIONS) or sol.primal is None:
        raise SubproblemError(f"subproblem QP failed with status {sol.status}")

    tau = float(sol.primal[0])
    u = sol.primal[1:1 + n]
    box = instance.box
    viol = max((box.lb - u).max(initial=0.0), (u - box.ub).max(initial=0.0))
    box_scale = 1.0 + max(np.abs(box.lb).max(initial=0.0),
                          np.abs(box.ub).max(initial=0.0))
    if viol > 1e-9 * box_scale:
        raise SubproblemError(f"QP iterate violates the box by {viol:.2e}")
    p = box.clip(u)

    d = p - x
    theta = tau + float(d @ d) / (2.0 * alpha)
    if theta > 0.0:
        # u = x is always feasible with objective 0, so the subproblem value
        # is nonpositive; a positive theta means the QP iterate lost to the
        # trivial candidate (x is stationary up to solver accuracy)
        if theta > 1e-6:
            raise SubproblemError(f"QP returned positive merit {theta:.2e}")
        p = x.copy()
        d = np.zeros(n)
        tau = 0.0
        theta = 0.0
    duals = []
    off = 1 + n
    for j in range(m):
        lam_j = float(sol.dual_ineq[j]) if sol.dual_ineq is not None else np.nan
        st = instance.nonsmooth[j].support_term
        if st is None:
            duals.append((lam_j, None))
        elif condensed:
            # recover the support LP dual at p from its closed form
            wt = st.inv_bt() @ p
            duals.append((lam_j, np.concatenate([np.maximum(wt, 0.0),
                                                 np.maximum(-wt, 0.0)])))
        else:
            dj = st.A.shape[0]
            duals.append((lam_j, sol.primal[off:off + dj].copy()))
            off += dj
    return SubproblemSolution(p=p, theta=theta, d=d, tau=tau, duals=duals,
                              kkt_residual=sol.kkt_residual, degraded=degraded,
                              grads=grads, h_at_x=h_at_x)
