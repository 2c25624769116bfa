"""Built-in convex benchmark problems and the robust augmentation generator.

Smooth parts come from classic convex multiobjective test problems; the
robust variant adds to every objective the support function of a random
polyhedral uncertainty set {z : -delta*e <= B z <= delta*e}.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from functools import partial

import numpy as np

from .convexprog import PolyhedralSet
from .core import BoxDomain, NonsmoothPart, ProblemInstance, SmoothPart

MAX_CONDITION = 1e6

SQRT2 = float(np.sqrt(2.0))


class CatalogError(ValueError):
    """Unknown problem name."""


@dataclass(frozen=True)
class ProblemCatalogEntry:
    name: str
    n: int
    m: int
    lb: tuple
    ub: tuple
    reference: str


@dataclass(frozen=True)
class RobustSpec:
    delta_hat: float
    x_hat: np.ndarray
    B: tuple          # one nonsingular n x n matrix per objective

    def __post_init__(self):
        if not 0.02 <= self.delta_hat <= 0.10:
            raise ValueError("delta_hat must lie in [0.02, 0.10]")
        for Bj in self.B:
            if np.linalg.cond(Bj) > MAX_CONDITION:
                raise ValueError("uncertainty matrix is too ill conditioned")
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @property
    def delta(self) -> float:
        return float(self.delta_hat * np.linalg.norm(self.x_hat))


# --- smooth oracle building blocks (module level so instances pickle) ------

def _quad_value(Q, c, r, x):
    return float(0.5 * x @ (Q @ x) + c @ x + r)


def _quad_grad(Q, c, x):
    return Q @ x + c


def _quad(Q, c, r=0.0) -> SmoothPart:
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    L = float(np.linalg.eigvalsh(Q).max()) if Q.any() else 0.0
    return SmoothPart(value=partial(_quad_value, Q, c, r),
                      gradient=partial(_quad_grad, Q, c),
                      lipschitz=L)


def _sos_value(w, A, b, x):
    r = A @ x - b
    return float(w @ (r * r))


def _sos_grad(w, A, b, x):
    return 2.0 * A.T @ (w * (A @ x - b))


def _sos(w, A, b) -> SmoothPart:
    """Weighted sum of squares sum_i w_i (a_i'x - b_i)^2."""
    w = np.asarray(w, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    L = float(2.0 * np.linalg.eigvalsh(A.T @ (w[:, None] * A)).max())
    return SmoothPart(value=partial(_sos_value, w, A, b),
                      gradient=partial(_sos_grad, w, A, b),
                      lipschitz=L)


def _fds1_value(x):
    n = x.size
    i = np.arange(1, n + 1)
    return float(np.sum(i * (x - i) ** 4) / n ** 2)


def _fds1_grad(x):
    n = x.size
    i = np.arange(1, n + 1)
    return 4.0 * i * (x - i) ** 3 / n ** 2


def _fds2_value(x):
    return float(np.exp(np.sum(x) / x.size) + x @ x)


def _fds2_grad(x):
    n = x.size
    return np.exp(np.sum(x) / n) / n + 2.0 * x


def _fds3_value(x):
    n = x.size
    i = np.arange(1, n + 1)
    return float(np.sum(i * (n - i + 1) * np.exp(-x)) / (n * (n + 1)))


def _fds3_grad(x):
    n = x.size
    i = np.arange(1, n + 1)
    return -i * (n - i + 1) * np.exp(-x) / (n * (n + 1))


def _sd2_value(x):
    return float(2.0 / x[0] + 2.0 * SQRT2 / x[1] + 2.0 * SQRT2 / x[2] + 2.0 / x[3])


def _sd2_grad(x):
    return np.array([-2.0 / x[0] ** 2, -2.0 * SQRT2 / x[1] ** 2,
                     -2.0 * SQRT2 / x[2] ** 2, -2.0 / x[3] ** 2])


# --- catalog ----------------------------------------------------------------

def _diag(*vals):
    return np.diag(np.asarray(vals, dtype=float))


def _build_ap2():
    return [_quad([[2.0]], [0.0], -4.0), _quad([[2.0]], [-2.0], 1.0)]


def _build_bk1():
    return [_quad(2 * np.eye(2), [0.0, 0.0]),
            _quad(2 * np.eye(2), [-10.0, -10.0], 50.0)]


def _build_jos1():
    n = 100
    return [_quad(2 * np.eye(n) / n, np.zeros(n)),
            _quad(2 * np.eye(n) / n, np.full(n, -4.0 / n), 4.0)]


def _build_sp1():
    # (x1-1)^2 + (x1-x2)^2 and (x2-3)^2 + (x1-x2)^2
    return [_sos([1.0, 1.0], [[1.0, 0.0], [1.0, -1.0]], [1.0, 0.0]),
            _sos([1.0, 1.0], [[0.0, 1.0], [1.0, -1.0]], [3.0, 0.0])]


def _build_fds():
    return [SmoothPart(_fds1_value, _fds1_grad, lipschitz=118.0),
            SmoothPart(_fds2_value, _fds2_grad, lipschitz=3.48),
            SmoothPart(_fds3_value, _fds3_grad, lipschitz=2.22)]


def _build_lov1():
    return [_quad(_diag(2.10, 1.96), [0.0, 0.0]),
            _quad(_diag(1.98, 2.06), [-5.94, -5.15], 0.99 * 9.0 + 1.03 * 6.25)]


def _build_mop7():
    f1 = _sos([0.5, 1.0 / 13.0], [[1.0, 0.0], [0.0, 1.0]], [2.0, -1.0])
    f1 = SmoothPart(partial(_shifted_value, f1.value, 3.0), f1.gradient, f1.lipschitz)
    f2 = _sos([1.0 / 36.0, 0.125], [[1.0, 1.0], [-1.0, 1.0]], [3.0, -2.0])
    f2 = SmoothPart(partial(_shifted_value, f2.value, -17.0), f2.gradient, f2.lipschitz)
    f3 = _sos([1.0 / 175.0, 1.0 / 17.0], [[1.0, 2.0], [-1.0, 2.0]], [1.0, 0.0])
    f3 = SmoothPart(partial(_shifted_value, f3.value, -13.0), f3.gradient, f3.lipschitz)
    return [f1, f2, f3]


def _shifted_value(fn, shift, x):
    return fn(x) + shift


def _build_sd():
    lin = np.array([2.0, SQRT2, SQRT2, 1.0])
    return [_quad(np.zeros((4, 4)), lin),
            SmoothPart(_sd2_value, _sd2_grad, lipschitz=4.0)]


def _build_toi4():
    Q1 = _diag(2.0, 2.0, 0.0, 0.0)
    return [_quad(Q1, np.zeros(4), 1.0),
            _sos([0.5, 0.5], [[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]],
                 [0.0, 0.0])]


def _build_vu2():
    return [_quad(np.zeros((2, 2)), [1.0, 1.0], 1.0),
            _quad(_diag(2.0, 0.0), [0.0, 2.0], -1.0)]


CATALOG: dict[str, tuple[ProblemCatalogEntry, callable]] = {
    "AP2": (ProblemCatalogEntry("AP2", 1, 2, (-100.0,), (100.0,), "Ansary-Panda"),
            _build_ap2),
    "BK1": (ProblemCatalogEntry("BK1", 2, 2, (-5.0, -5.0), (10.0, 10.0),
                                "Huband et al. review"), _build_bk1),
    "JOS1": (ProblemCatalogEntry("JOS1", 100, 2, tuple([-100.0] * 100),
                                 tuple([100.0] * 100), "Jin-Olhofer-Sendhoff"),
             _build_jos1),
    "SP1": (ProblemCatalogEntry("SP1", 2, 2, (-100.0, -100.0), (100.0, 100.0),
                                "Huband et al. review"), _build_sp1),
    "FDS": (ProblemCatalogEntry("FDS", 5, 3, tuple([-2.0] * 5), tuple([2.0] * 5),
                                "Fliege-Drummond-Svaiter"), _build_fds),
    "Lov1": (ProblemCatalogEntry("Lov1", 2, 2, (-10.0, -10.0), (10.0, 10.0),
                                 "Lovison"), _build_lov1),
    "MOP7": (ProblemCatalogEntry("MOP7", 2, 3, (-400.0, -400.0), (400.0, 400.0),
                                 "Huband et al. review"), _build_mop7),
    "SD": (ProblemCatalogEntry("SD", 4, 2, (1.0, SQRT2, SQRT2, 1.0),
                               (3.0, 3.0, 3.0, 3.0), "Stadler-Dauer"), _build_sd),
    "Toi4": (ProblemCatalogEntry("Toi4", 4, 2, tuple([-2.0] * 4), tuple([5.0] * 4),
                                 "Toint"), _build_toi4),
    "VU2": (ProblemCatalogEntry("VU2", 2, 2, (-3.0, -3.0), (3.0, 3.0),
                                "Van Veldhuizen"), _build_vu2),
}


def catalog_names() -> list[str]:
    return list(CATALOG)


def catalog_entry(name: str) -> ProblemCatalogEntry:
    try:
        return CATALOG[name][0]
    except KeyError:
        raise CatalogError(f"unknown problem {name!r}") from None


def make_problem(name: str) -> ProblemInstance:
    try:
        entry, builder = CATALOG[name]
    except KeyError:
        raise CatalogError(f"unknown problem {name!r}") from None
    box = BoxDomain(lb=np.array(entry.lb), ub=np.array(entry.ub))
    smooth = builder()
    nonsmooth = [NonsmoothPart(domain=box) for _ in range(entry.m)]
    return ProblemInstance(name=entry.name, n=entry.n, m=entry.m,
                           smooth=tuple(smooth), nonsmooth=tuple(nonsmooth))


# --- robust augmentation ----------------------------------------------------

def draw_robust_spec(instance: ProblemInstance, seed: int) -> RobustSpec:
    """Seed-deterministic uncertainty draw: shared delta, per-objective B."""
    rng = np.random.default_rng(seed)
    delta_hat = float(rng.uniform(0.02, 0.10))
    x_hat = instance.box.ub.copy()
    mats = []
    for _ in range(instance.m):
        while True:
            B = rng.uniform(-1.0, 1.0, size=(instance.n, instance.n))
            if np.linalg.cond(B) <= MAX_CONDITION:
                break
        mats.append(B)
    return RobustSpec(delta_hat=delta_hat, x_hat=x_hat, B=tuple(mats))


def robustify(instance: ProblemInstance, seed: int) -> ProblemInstance:
    """Attach a structured polyhedral support term to every objective."""
    spec = draw_robust_spec(instance, seed)
    delta = spec.delta
    nonsmooth = tuple(
        NonsmoothPart(domain=part.domain,
                      support_term=PolyhedralSet.structured(spec.B[j], delta))
        for j, part in enumerate(instance.nonsmooth)
    )
    return ProblemInstance(name=instance.name + "_robust", n=instance.n,
                           m=instance.m, smooth=instance.smooth,
                           nonsmooth=nonsmooth)


def sample_start(instance: ProblemInstance, seed: int) -> np.ndarray:
    """Uniform draw from the box, seed-deterministic."""
    rng = np.random.default_rng(seed)
    box = instance.box
    return rng.uniform(box.lb, box.ub)


# --- manifest loading -------------------------------------------------------

def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.replace(",", " ").split()])


def _parse_matrix(text: str) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip()]
    return np.array([[float(v) for v in row.split()] for row in rows])


def load_manifest(path) -> ProblemInstance:
    """Build a ProblemInstance from a key-value manifest file.

    Sections: [problem] with name/n/m/lb/ub; [objective J] with either a
    quadratic form (Q, c, r) or weighted sum-of-squares terms; optional
    [uncertainty J] with a structured (B, delta) or explicit (A, b) set.
    """
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    prob = cp["problem"]
    n = prob.getint("n")
    m = prob.getint("m")
    name = prob.get("name", "manifest")
    box = BoxDomain(lb=_parse_vector(prob["lb"]), ub=_parse_vector(prob["ub"]))
    if box.n != n:
        raise ValueError("manifest box length does not match n")

    smooth = []
    for j in range(1, m + 1):
        sec = cp[f"objective {j}"]
        kind = sec.get("type", "quadratic")
        if kind == "quadratic":
            Q = _parse_matrix(sec.get("Q", "; ".join(["0 " * n] * n)))
            c = _parse_vector(sec.get("c", "0 " * n))
            r = sec.getfloat("r", 0.0)
            smooth.append(_quad(Q, c, r))
        elif kind == "sum_of_squares":
            # one term per line: "w : a1 .. an : b"
            w, A, b = [], [], []
            for line in sec["terms"].strip().splitlines():
                wi, ai, bi = (s.strip() for s in line.split(":"))
                w.append(float(wi))
                A.append(_parse_vector(ai))
                b.append(float(bi))
            smooth.append(_sos(w, A, b))
        else:
            raise ValueError(f"unknown smooth form {kind!r}")

    nonsmooth = []
    for j in range(1, m + 1):
        sec_name = f"uncertainty {j}"
        if cp.has_section(sec_name):
            sec = cp[sec_name]
            # configparser lowercases keys, so the polytope's b would shadow a
            # structured B; dispatch on the A key instead
            if "A" in sec:
                support = PolyhedralSet(A=_parse_matrix(sec["A"]),
                                        b=_parse_vector(sec["b"]))
            else:
                delta = sec.getfloat("delta", cp.getfloat("robust", "delta", fallback=0.0))
                support = PolyhedralSet.structured(_parse_matrix(sec["B"]), delta)
            nonsmooth.append(NonsmoothPart(domain=box, support_term=support))
        else:
            nonsmooth.append(NonsmoothPart(domain=box))
    return ProblemInstance(name=name, n=n, m=m, smooth=tuple(smooth),
                           nonsmooth=tuple(nonsmooth))
