"""Dense LP and convex QP solvers with verifiable KKT certificates.

Sized for desk-scale subproblems (a few hundred variables).  The LP path is
a revised primal simplex with Bland's rule applied to the dual standard form
of the support-function problem; the QP path is a Mehrotra-style
predictor-corrector interior point method on dense factorizations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max_iterations"

KKT_TOL = 1e-8


class InvalidUncertaintySetError(ValueError):
    """The polyhedron is empty or unbounded."""


@dataclass(eq=False)
class PolyhedralSet:
    """Nonempty bounded polyhedron {z : A z <= b}.

    When built from the structured form {z : -delta*e <= B z <= delta*e}
    (B nonsingular), the factorized B is kept around to seed the simplex
    with a crash basis.
    """

    A: np.ndarray
    b: np.ndarray
    B: np.ndarray | None = None
    delta: float | None = None
    _bt_lu: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b row counts differ")
        if self.B is not None:
            self.B = np.asarray(self.B, dtype=float)
            n = self.B.shape[0]
            if self.B.shape != (n, n):
                raise InvalidUncertaintySetError("structured matrix must be square")
            if self.delta is None or self.delta <= 0:
                raise InvalidUncertaintySetError("structured form needs delta > 0")
            if self.A.shape[0] != 2 * n:
                raise InvalidUncertaintySetError("structured form implies d = 2n")
            if np.linalg.matrix_rank(self.B) < n:
                raise InvalidUncertaintySetError("structured matrix is singular")
            self._bt_lu = scipy.linalg.lu_factor(self.B.T)
        else:
            self._check_nonempty_bounded()

    @classmethod
    def structured(cls, B, delta: float) -> "PolyhedralSet":
        B = np.asarray(B, dtype=float)
        n = B.shape[0]
        e = np.full(n, float(delta))
        A = np.vstack([B, -B])
        return cls(A=A, b=np.concatenate([e, e]), B=B, delta=float(delta))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def _check_nonempty_bounded(self):
        # Bound max +-e_i^T z for every coordinate; any failure means the
        # set is empty or unbounded.
        n = self.dim
        for i in range(n):
            for sign in (1.0, -1.0):
                c = np.zeros(n)
                c[i] = sign
                status, _, _ = _solve_support_lp(self.A, self.b, c)
                if status != OPTIMAL:
                    raise InvalidUncertaintySetError(
                        f"polyhedron is {status} along coordinate {i}"
                    )

    def inv_bt(self) -> np.ndarray | None:
        """Dense B^-T for structured sets (cached); None otherwise."""
        if self._bt_lu is None:
            return None
        if getattr(self, "_inv_bt", None) is None:
            n = self.B.shape[0]
            self._inv_bt = scipy.linalg.lu_solve(self._bt_lu, np.eye(n))
        return self._inv_bt

    def support_basis_hint(self, x: np.ndarray) -> np.ndarray | None:
        """Crash basis for max x^T z from the structured form (phase-1 free)."""
        if self._bt_lu is None:
            return None
        y = scipy.linalg.lu_solve(self._bt_lu, x)
        n = y.shape[0]
        return np.where(y >= 0, np.arange(n), np.arange(n) + n)


@dataclass(frozen=True)
class LpProblem:
    """Maximize c^T z over a polyhedral set."""

    c: np.ndarray
    constraint_set: PolyhedralSet

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).ravel())
        if self.c.shape[0] != self.constraint_set.dim:
            raise ValueError("objective dimension does not match the set")


@dataclass(frozen=True)
class QpProblem:
    """min 1/2 v'Pv + q'v  s.t.  Cv <= c, Ev = e."""

    P: np.ndarray
    q: np.ndarray
    C: np.ndarray
    c: np.ndarray
    E: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        q = np.asarray(self.q, dtype=float).ravel()
        nv = q.shape[0]
        C = np.asarray(self.C, dtype=float).reshape(-1, nv)
        c = np.asarray(self.c, dtype=float).ravel()
        E = np.asarray(self.E, dtype=float).reshape(-1, nv)
        e = np.asarray(self.e, dtype=float).ravel()
        if P.shape != (nv, nv):
            raise ValueError("P has inconsistent shape")
        if np.abs(P - P.T).max(initial=0.0) > 1e-12 * (1.0 + np.abs(P).max(initial=0.0)):
            raise ValueError("P must be symmetric")
        if C.shape[0] != c.shape[0] or E.shape[0] != e.shape[0]:
            raise ValueError("constraint blocks have inconsistent shapes")
        for name, val in (("P", P), ("q", q), ("C", C), ("c", c), ("E", E), ("e", e)):
            object.__setattr__(self, name, val)

    @property
    def nv(self) -> int:
        return self.q.shape[0]


@dataclass
class ProgramSolution:
    primal: np.ndarray | None
    dual_ineq: np.ndarray | None
    dual_eq: np.ndarray | None
    objective_value: float
    kkt_residual: float
    status: str
    iterations: int = 0
    regularized: bool = False


# ---------------------------------------------------------------------------
# revised simplex (min cost'w  s.t.  M w = rhs, w >= 0)
# ---------------------------------------------------------------------------

_SIMPLEX_REFACTOR = 60


def _revised_simplex(M, rhs, cost, basis, max_iter, blocked=()):
    """Phase-2 simplex from a feasible basis, Bland's rule.

    Returns (status, w, basis).  `blocked` columns never enter (used to keep
    phase-1 artificials out).
    """
    m_eq, n_var = M.shape
    basis = np.array(basis, dtype=int)
    scale = 1.0 + np.abs(cost).max(initial=0.0)
    rc_tol = 1e-9 * scale
    allowed = np.ones(n_var, dtype=bool)
    for j in blocked:
        allowed[j] = False

    Binv = np.linalg.inv(M[:, basis])
    wB = Binv @ rhs
    since_refactor = 0
    for _ in range(max_iter):
        if since_refactor >= _SIMPLEX_REFACTOR:
            Binv = np.linalg.inv(M[:, basis])
            wB = Binv @ rhs
            since_refactor = 0
        y = Binv.T @ cost[basis]
        rc = cost - y @ M
        rc[basis] = 0.0
        candidates = np.nonzero(allowed & (rc < -rc_tol))[0]
        if candidates.size == 0:
            w = np.zeros(n_var)
            w[basis] = np.maximum(wB, 0.0)
            return OPTIMAL, w, basis
        j = int(candidates[0])  # Bland: smallest index
        dcol = Binv @ M[:, j]
        pos = dcol > 1e-11
        if not np.any(pos):
            return UNBOUNDED, None, basis
        ratios = np.full(m_eq, np.inf)
        ratios[pos] = np.maximum(wB[pos], 0.0) / dcol[pos]
        rmin = ratios.min()
        ties = np.nonzero(ratios <= rmin + 1e-12 * (1.0 + rmin))[0]
        r = int(ties[np.argmin(basis[ties])])  # Bland tie-break on leaving var
        # pivot: update Binv and the basic solution
        piv = dcol[r]
        wB = wB - rmin * dcol
        wB[r] = rmin
        Brow = Binv[r] / piv
        Binv = Binv - np.outer(dcol, Brow)
        Binv[r] = Brow
        basis[r] = j
        since_refactor += 1
    return MAX_ITERATIONS, None, basis


def _phase1(M, rhs, max_iter):
    """Find a feasible basis for {w : M w = rhs, w >= 0}.

    Returns (status, basis, M, rhs) with redundant rows dropped.
    """
    M = M.copy()
    rhs = rhs.copy()
    neg = rhs < 0
    M[neg] *= -1.0
    rhs[neg] *= -1.0
    m_eq, n_var = M.shape
    M1 = np.hstack([M, np.eye(m_eq)])
    cost1 = np.concatenate([np.zeros(n_var), np.ones(m_eq)])
    basis = np.arange(n_var, n_var + m_eq)
    status, w, basis = _revised_simplex(M1, rhs, cost1, basis, max_iter)
    if status != OPTIMAL:
        return status, None, M, rhs
    if w[n_var:].sum() > 1e-8 * (1.0 + np.abs(rhs).max(initial=0.0)):
        return INFEASIBLE, None, M, rhs
    # drive leftover artificials out of the basis (they sit at zero)
    keep_rows = np.ones(m_eq, dtype=bool)
    art_rows = [r for r, j in enumerate(basis) if j >= n_var]
    if art_rows:
        Binv = np.linalg.inv(M1[:, basis])
        for r in art_rows:
            row = Binv[r] @ M
            nz = np.nonzero(np.abs(row) > 1e-9)[0]
            entered = False
            for j in nz:
                if j not in basis:
                    basis[r] = j
                    Binv = np.linalg.inv(M1[:, basis])
                    entered = True
                    break
            if not entered:
                keep_rows[r] = False  # redundant equality
        if not keep_rows.all():
            M = M[keep_rows]
            rhs = rhs[keep_rows]
            basis = np.array([b for r, b in enumerate(basis) if keep_rows[r]], dtype=int)
    return OPTIMAL, basis, M, rhs


def solve_lp(p: LpProblem, basis_hint=None) -> ProgramSolution:
    """Maximize c^T z over {A z <= b} via primal simplex on the dual.

    The dual standard form min b'w s.t. A'w = c, w >= 0 is solved with
    Bland's rule; the optimal simplex multipliers recover the primal vertex.
    """
    A = p.constraint_set.A
    b = p.constraint_set.b
    c = p.c
    d, n = A.shape
    M = A.T  # n x d
    max_iter = 50 * (d + n) + 1000

    basis = None
    if basis_hint is not None:
        basis = np.asarray(basis_hint, dtype=int)
        try:
            wB = np.linalg.solve(M[:, basis], c)
        except np.linalg.LinAlgError:
            basis = None
        else:
            if wB.min(initial=0.0) < -1e-9 * (1.0 + np.abs(c).max(initial=0.0)):
                basis = None
    Mw, rhs = M, c
    if basis is None:
        status, basis, Mw, rhs = _phase1(M, c, max_iter)
        if status == INFEASIBLE:
            # dual infeasible and the set is nonempty: the primal is unbounded
            return ProgramSolution(None, None, None, np.inf, np.inf, UNBOUNDED)
        if status != OPTIMAL:
            return ProgramSolution(None, None, None, np.nan, np.inf, status)

    status, w, basis = _revised_simplex(Mw, rhs, b, basis, max_iter)
    if status == UNBOUNDED:
        # dual unbounded below means the primal is infeasible
        return ProgramSolution(None, None, None, np.nan, np.inf, INFEASIBLE)
    if status != OPTIMAL:
        return ProgramSolution(None, None, None, np.nan, np.inf, status)

    # primal vertex: the basic dual columns mark active primal constraints
    AB = A[basis]
    if AB.shape[0] == n:
        z = np.linalg.solve(AB, b[basis])
    else:
        z, *_ = np.linalg.lstsq(AB, b[basis], rcond=None)
    value = float(c @ z)
    scale = 1.0 + max(np.abs(A).max(initial=0.0), np.abs(b).max(initial=0.0),
                      np.abs(c).max(initial=0.0))
    res = max(
        (A @ z - b).max(initial=0.0),                     # primal feasibility
        np.abs(M @ w - c).max(initial=0.0),               # dual feasibility (eq)
        (-w).max(initial=0.0),                            # dual feasibility (sign)
        abs(w @ (b - A @ z)),                             # complementarity
        abs(value - b @ w),                               # duality gap
    ) / scale
    return ProgramSolution(
        primal=z, dual_ineq=w, dual_eq=None, objective_value=value,
        kkt_residual=float(res), status=OPTIMAL,
    )


# ---------------------------------------------------------------------------
# QP interior point (Mehrotra predictor-corrector)
# ---------------------------------------------------------------------------


def _qp_scale(qp: QpProblem) -> float:
    return 1.0 + max(
        np.abs(qp.P).max(initial=0.0), np.abs(qp.q).max(initial=0.0),
        np.abs(qp.C).max(initial=0.0), np.abs(qp.c).max(initial=0.0),
        np.abs(qp.E).max(initial=0.0), np.abs(qp.e).max(initial=0.0),
    )


def _qp_residual(qp: QpProblem, v, lam, y, scale: float | None = None) -> float:
    if scale is None:
        scale = _qp_scale(qp)
    r_stat = qp.P @ v + qp.q
    if qp.C.shape[0]:
        r_stat = r_stat + qp.C.T @ lam
    if qp.E.shape[0]:
        r_stat = r_stat + qp.E.T @ y
    res = np.abs(r_stat).max(initial=0.0)
    if qp.C.shape[0]:
        slack = qp.c - qp.C @ v
        res = max(res, (-slack).max(initial=0.0))          # primal feasibility
        res = max(res, (-lam).max(initial=0.0))            # dual feasibility
        res = max(res, np.abs(lam * slack).max(initial=0.0))  # complementarity
    if qp.E.shape[0]:
        res = max(res, np.abs(qp.E @ v - qp.e).max(initial=0.0))
    return float(res / scale)


def _qp_polish(qp: QpProblem, v, lam, y, reg=1e-12):
    """Active-set refinement: resolve the KKT equalities for the active rows.

    Active rows with a single nonzero pin one variable each; those variables
    are eliminated up front so the saddle solve stays small.
    """
    mi, me = qp.C.shape[0], qp.E.shape[0]
    nv = qp.nv
    slack = qp.c - qp.C @ v if mi else np.zeros(0)
    active = np.nonzero(lam > slack)[0] if mi else np.array([], dtype=int)

    pin_row = np.full(nv, -1, dtype=int)
    dense_active = []
    for i in active:
        nz = np.nonzero(qp.C[i])[0]
        if nz.size == 1:
            if pin_row[nz[0]] < 0:
                pin_row[nz[0]] = i   # duplicates carry no multiplier
        else:
            dense_active.append(i)
    fixed = pin_row >= 0
    free = ~fixed
    cols = np.nonzero(fixed)[0]
    vfix = np.zeros(nv)
    if cols.size:
        vfix[cols] = qp.c[pin_row[cols]] / qp.C[pin_row[cols], cols]

    nf = int(free.sum())
    CAd = qp.C[np.array(dense_active, dtype=int)]
    CA = CAd[:, free]
    cA = qp.c[dense_active] - CAd[:, fixed] @ vfix[fixed] if dense_active else np.zeros(0)
    Ef = qp.E[:, free]
    ee = qp.e - qp.E[:, fixed] @ vfix[fixed] if me else np.zeros(0)
    Pf = qp.P[np.ix_(free, free)]
    qf = qp.q[free] + qp.P[np.ix_(free, fixed)] @ vfix[fixed]

    na = CA.shape[0]
    dim = nf + na + me
    K = np.zeros((dim, dim))
    K[:nf, :nf] = Pf + reg * np.eye(nf)
    K[:nf, nf:nf + na] = CA.T
    K[nf:nf + na, :nf] = CA
    K[nf:nf + na, nf:nf + na] = -reg * np.eye(na)
    if me:
        K[:nf, nf + na:] = Ef.T
        K[nf + na:, :nf] = Ef
        K[nf + na:, nf + na:] = -reg * np.eye(me)
    rhs = np.concatenate([-qf, cA, ee])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    v2 = vfix.copy()
    v2[free] = sol[:nf]
    y2 = sol[nf + na:]
    lam2 = np.zeros(mi)
    if dense_active:
        lam2[dense_active] = np.maximum(sol[nf:nf + na], 0.0)
    if cols.size:
        # multipliers of the pinned rows come from stationarity at their column
        g = qp.P @ v2 + qp.q
        if dense_active:
            g = g + CAd.T @ lam2[dense_active]
        if me:
            g = g + qp.E.T @ y2
        lam2[pin_row[cols]] = np.maximum(-g[cols] / qp.C[pin_row[cols], cols], 0.0)
    return v2, lam2, y2


@np.errstate(over="ignore", invalid="ignore", divide="ignore")
def solve_qp(qp: QpProblem, tol: float = 1e-9, max_iter: int = 60) -> ProgramSolution:
    """Interior point solve of a feasible convex QP with bounded optimum.

    Transient overflow near complementarity exhaustion is tolerated; the
    finite-iterate guards in the loop discard any contaminated step.
    """
    nv, mi, me = qp.nv, qp.C.shape[0], qp.E.shape[0]
    P, q, C, c, E, e = qp.P, qp.q, qp.C, qp.c, qp.E, qp.e
    reg = 1e-10

    if mi == 0:
        # pure equality QP: one regularized KKT solve
        K = np.zeros((nv + me, nv + me))
        K[:nv, :nv] = P + reg * np.eye(nv)
        if me:
            K[:nv, nv:] = E.T
            K[nv:, :nv] = E
            K[nv:, nv:] = -reg * np.eye(me)
        sol = np.linalg.solve(K, np.concatenate([-q, e]))
        v, y = sol[:nv], sol[nv:]
        res = _qp_residual(qp, v, np.zeros(0), y)
        obj = float(0.5 * v @ (P @ v) + q @ v)
        return ProgramSolution(v, np.zeros(0), y, obj, res, OPTIMAL, regularized=True)

    # rows of C with a single nonzero only shift the diagonal of the normal
    # matrix; treat them separately so C'DC costs O(m_dense * nv^2)
    nnz = np.count_nonzero(C, axis=1)
    simple = nnz <= 1
    simple_col = np.abs(C[simple]).argmax(axis=1) if simple.any() else np.array([], int)
    simple_val = C[simple, simple_col] if simple.any() else np.array([])
    dense_rows = np.nonzero(~simple)[0]
    Cd = C[dense_rows]

    # starting point: regularized equality solve, then shift slacks/duals
    K0 = np.zeros((nv + me, nv + me))
    K0[:nv, :nv] = P + np.eye(nv)
    if me:
        K0[:nv, nv:] = E.T
        K0[nv:, :nv] = E
        K0[nv:, nv:] = -reg * np.eye(me)
    sol = np.linalg.solve(K0, np.concatenate([-q, e]))
    v = sol[:nv]
    y = sol[nv:]
    s0 = c - C @ v
    shift = max(1.0, -1.5 * s0.min(initial=0.0))
    s = s0 + shift
    lam = np.full(mi, max(1.0, np.abs(q).max(initial=0.0)))

    scale = _qp_scale(qp)
    best = None
    polished = None
    it = 0
    for it in range(1, max_iter + 1):
        mu = float(s @ lam) / mi
        if not (np.isfinite(mu) and np.isfinite(v).all() and np.isfinite(lam).all()):
            break
        res = _qp_residual(qp, v, lam, y, scale)
        if best is None or res < best[0]:
            best = (res, v.copy(), lam.copy(), y.copy())
        if res <= 1e-6:
            # the active set is usually settled by now; one equality resolve
            # lands near machine precision and skips the slow final iterations
            v2, lam2, y2 = _qp_polish(qp, v, lam, y)
            res2 = _qp_residual(qp, v2, lam2, y2, scale)
            if polished is None or res2 < polished[0]:
                polished = (res2, v2, lam2, y2)
            if res2 <= 1e-11:
                break
        if res <= tol and mu <= tol * (1.0 + np.abs(c).max(initial=0.0)):
            break
        if mu <= 1e-14 * (1.0 + np.abs(c).max(initial=0.0)):
            break  # the barrier is exhausted; further steps only lose digits

        d = lam / np.maximum(s, 1e-300)
        Kuu = P + reg * np.eye(nv)
        if simple.any():
            dsimp = d[simple] * simple_val ** 2
            np.add.at(Kuu, (simple_col, simple_col), dsimp)
        if dense_rows.size:
            # rank-k update through syrk fills the lower triangle only
            X = Cd * np.sqrt(d[dense_rows])[:, None]
            Kuu += scipy.linalg.blas.dsyrk(1.0, X, trans=1, lower=1)
        if me == 0:
            # the normal matrix is positive definite; Cholesky on the
            # (complete) lower triangle beats a full LU
            try:
                ch = scipy.linalg.cho_factor(Kuu, lower=True, check_finite=False)
            except (scipy.linalg.LinAlgError, ValueError):
                break

            def kkt_solve(r1, r2, ch=ch):
                return (scipy.linalg.cho_solve(ch, r1, check_finite=False),
                        np.zeros(0))
        else:
            Kuu = np.tril(Kuu) + np.tril(Kuu, -1).T
            K = np.zeros((nv + me, nv + me))
            K[:nv, :nv] = Kuu
            K[:nv, nv:] = E.T
            K[nv:, :nv] = E
            K[nv:, nv:] = -reg * np.eye(me)
            try:
                lu = scipy.linalg.lu_factor(K, check_finite=False)
            except (scipy.linalg.LinAlgError, ValueError):
                break

            def kkt_solve(r1, r2, lu=lu):
                sol = scipy.linalg.lu_solve(lu, np.concatenate([r1, r2]),
                                            check_finite=False)
                return sol[:nv], sol[nv:]

        r_d = P @ v + q + C.T @ lam + (E.T @ y if me else 0.0)
        r_e = E @ v - e if me else np.zeros(0)
        r_i = C @ v + s - c

        def newton(r_comp):
            rhs1 = -r_d + C.T @ ((r_comp - lam * r_i) / s)
            dv, dy = kkt_solve(rhs1, -r_e)
            ds = -r_i - C @ dv
            dlam = (-r_comp - lam * ds) / s
            return dv, dy, ds, dlam

        # predictor
        dv, dy, ds, dlam = newton(lam * s)
        a_p = _max_step(s, ds)
        a_d = _max_step(lam, dlam)
        mu_aff = float((s + a_p * ds) @ (lam + a_d * dlam)) / mi
        sigma = min(1.0, max((mu_aff / max(mu, 1e-300)) ** 3, 1e-8))
        # corrector
        dv, dy, ds, dlam = newton(lam * s + ds * dlam - sigma * mu)
        a_p = 0.995 * _max_step(s, ds)
        a_d = 0.995 * _max_step(lam, dlam)
        a = min(a_p, a_d, 1.0)
        if not (np.isfinite(dv).all() and np.isfinite(dlam).all()):
            break
        v = v + a * dv
        y = y + a * dy
        s = np.maximum(s + a * ds, 1e-300)
        lam = np.maximum(lam + a * dlam, 1e-300)

    res, v, lam, y = best if best is not None else (np.inf, v, lam, y)
    if polished is None:
        polished = (np.inf,)
        v2, lam2, y2 = _qp_polish(qp, v, lam, y)
        res2 = _qp_residual(qp, v2, lam2, y2, scale)
        if res2 < polished[0]:
            polished = (res2, v2, lam2, y2)
    if polished[0] < res:
        res, v, lam, y = polished
    obj = float(0.5 * v @ (P @ v) + q @ v)
    status = OPTIMAL if res <= KKT_TOL else MAX_ITERATIONS
    return ProgramSolution(v, lam, y, obj, res, status, iterations=it, regularized=True)


def _max_step(x, dx) -> float:
    neg = dx < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, (x[neg] / -dx[neg]).min()))


def _solve_support_lp(A, b, c):
    """Bare support LP max c'z over {Az <= b}; used by the construction check.

    Returns (status, value, z).
    """
    d, n = A.shape
    M = A.T
    max_iter = 50 * (d + n) + 1000
    status, basis, Mw, rhs = _phase1(M, c.astype(float), max_iter)
    if status != OPTIMAL:
        return (UNBOUNDED if status == INFEASIBLE else status), None, None
    status, w, basis = _revised_simplex(Mw, rhs, b, basis, max_iter)
    if status != OPTIMAL:
        return (INFEASIBLE if status == UNBOUNDED else status), None, None
    AB = A[basis]
    if AB.shape[0] == n:
        z = np.linalg.solve(AB, b[basis])
    else:
        z, *_ = np.linalg.lstsq(AB, b[basis], rcond=None)
    return OPTIMAL, float(c @ z), z
