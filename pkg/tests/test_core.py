import numpy as np
import pytest

from moprox.convexprog import PolyhedralSet
from moprox.core import (BoxDomain, Counters, NonsmoothPart, dominates_weakly,
                         eval_grad, eval_h, is_weak_pareto_in_set,
                         objective_values, psi_value)
from moprox.problems import make_problem

from conftest import (make_instance, quad_smooth, random_convex_instance,
                      random_structured_set, scalar_quad_instance,
                      two_linear_instance)


class TestBoxDomain:
    def test_rejects_crossed_bounds(self):
        with pytest.raises(ValueError):
            BoxDomain(lb=np.array([1.0]), ub=np.array([0.0]))

    def test_rejects_nonfinite_bounds(self):
        with pytest.raises(ValueError):
            BoxDomain(lb=np.array([-np.inf]), ub=np.array([1.0]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            BoxDomain(lb=np.zeros(2), ub=np.ones(3))

    def test_contains_and_clip(self):
        box = BoxDomain(lb=np.array([-1.0, 0.0]), ub=np.array([1.0, 2.0]))
        assert box.contains([0.0, 1.0])
        assert not box.contains([2.0, 1.0])
        assert np.array_equal(box.clip([5.0, -5.0]), [1.0, 0.0])


class TestDominance:
    def test_reflexive(self):
        assert dominates_weakly((1.0, 2.0), (1.0, 2.0)) is True

    def test_mixed_signs(self):
        assert dominates_weakly((0.0, 3.0), (1.0, 2.0)) is False

    def test_strict_componentwise(self):
        assert dominates_weakly((1.0, 1.0, 1.0), (2.0, 2.0, 2.0)) is True

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            dominates_weakly((1.0,), (1.0, 2.0))


class TestWeakParetoInSet:
    def test_incomparable_pair(self):
        assert is_weak_pareto_in_set(0, [(0.0, 1.0), (1.0, 0.0)]) is True

    def test_strictly_dominated(self):
        assert is_weak_pareto_in_set(1, [(1.0, 1.0), (2.0, 2.0)]) is False

    def test_singleton(self):
        assert is_weak_pareto_in_set(0, [(1.0, 1.0)]) is True


class TestPsiValue:
    def test_zero_at_u_equals_x(self, rng):
        for name in ("BK1", "SP1", "Toi4"):
            inst = make_problem(name)
            x = rng.uniform(inst.box.lb, inst.box.ub)
            grads = [eval_grad(inst, j, x) for j in range(inst.m)]
            assert abs(psi_value(inst, x, x, grads)) <= 1e-12

    def test_single_linear_term(self):
        inst = scalar_quad_instance(L=1.0)
        x = np.array([1.0])
        grads = [eval_grad(inst, 0, x)]
        assert psi_value(inst, x, np.array([0.0]), grads) == pytest.approx(-1.0)

    def test_two_objective_max(self):
        inst = two_linear_instance()
        x = np.array([0.0])
        grads = [eval_grad(inst, j, x) for j in range(2)]
        assert psi_value(inst, x, np.array([0.5]), grads) == pytest.approx(0.5)

    def test_infinite_outside_box(self):
        inst = scalar_quad_instance()
        grads = [eval_grad(inst, 0, np.array([0.0]))]
        assert psi_value(inst, np.array([0.0]), np.array([11.0]), grads) == np.inf

    def test_convex_in_u(self, rng):
        inst = random_convex_instance(rng, n=3, m=2, robust=True)
        x = rng.uniform(inst.box.lb, inst.box.ub)
        grads = [eval_grad(inst, j, x) for j in range(inst.m)]
        for _ in range(10):
            u = rng.uniform(inst.box.lb, inst.box.ub)
            v = rng.uniform(inst.box.lb, inst.box.ub)
            t = float(rng.uniform())
            mid = psi_value(inst, x, t * u + (1 - t) * v, grads)
            bound = (t * psi_value(inst, x, u, grads)
                     + (1 - t) * psi_value(inst, x, v, grads))
            assert mid <= bound + 1e-10

    def test_gradient_inequality_bound(self, rng):
        # max_j(F_j(x) - F_j(x0)) >= psi_{x0}(x) for convex objectives
        inst = random_convex_instance(rng, n=3, m=2, robust=True)
        for _ in range(10):
            x0 = rng.uniform(inst.box.lb, inst.box.ub)
            x = rng.uniform(inst.box.lb, inst.box.ub)
            grads = [eval_grad(inst, j, x0) for j in range(inst.m)]
            f0 = objective_values(inst, x0).f
            f1 = objective_values(inst, x).f
            assert (f1 - f0).max() >= psi_value(inst, x0, x, grads) - 1e-10


class TestEvalH:
    def test_box_only_is_zero(self, rng):
        inst = make_problem("BK1")
        x = rng.uniform(inst.box.lb, inst.box.ub)
        assert eval_h(inst.nonsmooth[0], x) == 0.0

    def test_identity_set_support(self):
        part = NonsmoothPart(
            domain=BoxDomain(lb=np.full(2, -10.0), ub=np.full(2, 10.0)),
            support_term=PolyhedralSet.structured(np.eye(2), 1.0),
        )
        assert eval_h(part, np.array([3.0, -4.0])) == pytest.approx(7.0, abs=1e-10)
        assert eval_h(part, np.zeros(2)) == pytest.approx(0.0, abs=1e-12)

    def test_structured_closed_form(self, rng):
        # support of {z : -delta e <= Bz <= delta e} is delta * ||B^-T x||_1
        box = BoxDomain(lb=np.full(3, -5.0), ub=np.full(3, 5.0))
        for _ in range(20):
            s = random_structured_set(rng, 3)
            part = NonsmoothPart(domain=box, support_term=s)
            x = rng.uniform(box.lb, box.ub)
            expect = s.delta * np.abs(np.linalg.solve(s.B.T, x)).sum()
            assert eval_h(part, x) == pytest.approx(expect, abs=1e-8 * (1 + expect))

    def test_counters_increment(self, rng):
        box = BoxDomain(lb=np.full(2, -5.0), ub=np.full(2, 5.0))
        part = NonsmoothPart(domain=box, support_term=random_structured_set(rng, 2))
        counters = Counters()
        eval_h(part, np.array([1.0, 2.0]), counters)
        assert counters.h_evals == 1
        assert counters.lp_solves == 1
        plain = NonsmoothPart(domain=box)
        eval_h(plain, np.zeros(2), counters)
        assert counters.h_evals == 2
        assert counters.lp_solves == 1


class TestObjectiveValues:
    def test_f_equals_g_plus_h(self, rng):
        inst = random_convex_instance(rng, n=2, m=2, robust=True)
        x = rng.uniform(inst.box.lb, inst.box.ub)
        fv = objective_values(inst, x)
        scale = 1.0 + np.abs(fv.f).max()
        assert np.abs(fv.f - (fv.g + fv.h)).max() <= 1e-12 * scale

    def test_counts_all_oracles(self, rng):
        inst = random_convex_instance(rng, n=2, m=3, robust=True)
        counters = Counters()
        objective_values(inst, np.zeros(2), counters)
        assert counters.g_evals == 3
        assert counters.h_evals == 3
        assert counters.lp_solves == 3


class TestGradientConsistency:
    def test_finite_differences_on_synthetic(self, rng):
        inst = random_convex_instance(rng, n=4, m=2)
        eps = 1e-6
        for j in range(inst.m):
            for _ in range(20):
                x = rng.uniform(inst.box.lb * 0.9, inst.box.ub * 0.9)
                g = eval_grad(inst, j, x)
                fd = np.empty_like(g)
                for i in range(inst.n):
                    step = np.zeros(inst.n)
                    step[i] = eps
                    fd[i] = (inst.smooth[j].value(x + step)
                             - inst.smooth[j].value(x - step)) / (2 * eps)
                assert np.abs(fd - g).max() <= 1e-5 * (1.0 + np.abs(g).max())


def test_instance_requires_shared_box():
    from moprox.core import ProblemInstance
    a = BoxDomain(lb=np.array([-1.0]), ub=np.array([1.0]))
    b = BoxDomain(lb=np.array([-2.0]), ub=np.array([2.0]))
    parts = (quad_smooth([[1.0]], [0.0]), quad_smooth([[1.0]], [0.0]))
    with pytest.raises(ValueError):
        ProblemInstance(name="bad", n=1, m=2, smooth=parts,
                        nonsmooth=(NonsmoothPart(domain=a),
                                   NonsmoothPart(domain=b)))
