import numpy as np
import pytest

from leximin_lottery.lp import DenseLP, Status, dual_of, solve_dense_lp
from leximin_lottery.lp.ellipsoid import (
    Column,
    CutLog,
    EllipsoidParams,
    NoFeasiblePoint,
    ReducedPrimalInfeasible,
    Violation,
    box_ellipsoid,
    ellipsoid_solve,
    iteration_cap,
    recover_sparse_primal,
)

from helpers import covering_separation, dual_box_upper, random_covering_lp


def lift(primal, n_vars):
    x = np.zeros(n_vars)
    for (_, j), v in primal.values.items():
        x[j] = v
    return x


class TestSimplex:
    def test_single_bound(self):
        res = solve_dense_lp(DenseLP(c=[1.0], A=[[1.0]], senses=[">="], b=[3.0]))
        assert res.optimal
        assert res.x[0] == pytest.approx(3.0)
        assert res.value == pytest.approx(3.0)

    def test_simplex_corner(self):
        res = solve_dense_lp(DenseLP(c=[1.0, 1.0], A=[[1.0, 1.0]], senses=["<="], b=[1.0], maximize=True))
        assert res.value == pytest.approx(1.0)

    def test_infeasible(self):
        lp = DenseLP(c=[1.0], A=[[1.0], [1.0]], senses=[">=", "<="], b=[2.0, 1.0])
        assert solve_dense_lp(lp).status is Status.INFEASIBLE

    def test_unbounded(self):
        lp = DenseLP(c=[1.0], A=[[1.0]], senses=[">="], b=[0.0], maximize=True)
        assert solve_dense_lp(lp).status is Status.UNBOUNDED

    def test_free_variable(self):
        lp = DenseLP(c=[1.0], A=[[1.0]], senses=[">="], b=[-4.0], lower=[None])
        res = solve_dense_lp(lp)
        assert res.x[0] == pytest.approx(-4.0)

    def test_equality_rows(self):
        lp = DenseLP(c=[1.0, 2.0], A=[[1.0, 1.0]], senses=["="], b=[5.0])
        res = solve_dense_lp(lp)
        assert res.x.tolist() == pytest.approx([5.0, 0.0])

    def test_degenerate_program_terminates(self):
        # a classic cycling example for the textbook largest-coefficient rule
        A = [[0.5, -5.5, -2.5, 9.0], [0.5, -1.5, -0.5, 1.0], [1.0, 0.0, 0.0, 0.0]]
        lp = DenseLP(c=[10.0, -57.0, -9.0, -24.0], A=A, senses=["<="] * 3, b=[0.0, 0.0, 1.0], maximize=True)
        res = solve_dense_lp(lp)
        assert res.optimal
        assert res.value == pytest.approx(1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            DenseLP(c=[1.0, 1.0], A=[[1.0, 1.0]], senses=[">=", ">="], b=[1.0])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            DenseLP(c=[np.inf], A=[[1.0]], senses=[">="], b=[1.0])

    def test_strong_duality_random(self, rng):
        for _ in range(50):
            lp = random_covering_lp(rng, max_cols=8, max_rows=8)
            primal, dual = solve_dense_lp(lp), solve_dense_lp(dual_of(lp))
            assert primal.optimal and dual.optimal
            assert primal.value == pytest.approx(dual.value, abs=1e-6)
            assert lp.is_feasible(primal.x)
            # reported duals are an optimal dual solution
            assert primal.duals @ lp.b == pytest.approx(primal.value, abs=1e-6)
            assert np.all(lp.A.T @ primal.duals <= lp.c + 1e-7)

    def test_dual_of_form(self):
        with pytest.raises(ValueError):
            dual_of(DenseLP(c=[1.0], A=[[1.0]], senses=["<="], b=[1.0]))


class TestEllipsoid:
    def test_one_dimensional_optimum(self):
        def sep(y):
            if y[0] < 0:
                return Violation(nonneg_index=0)
            if y[0] > 1 + 1e-9:
                return Violation(column=Column("x", np.array([1.0]), 1.0))
            return None

        center, shape = box_ellipsoid([4.0])
        params = EllipsoidParams(value_tolerance=1e-8)
        res = ellipsoid_solve(sep, [1.0], center, shape, params)
        assert res.point[0] >= 1 - 1e-7
        assert res.point[0] <= 1 + 1e-9

    def test_always_approving_stays_at_center(self):
        center, shape = box_ellipsoid([2.0, 2.0])
        res = ellipsoid_solve(lambda y: None, [0.0, 0.0], center, shape, EllipsoidParams(iterations=25))
        np.testing.assert_allclose(res.point, center)
        assert all(r.kind == "optimality" for r in res.log.records)

    def test_two_dimensional_box(self):
        cols = [Column(("x", i), np.eye(2)[i], 1.0) for i in range(2)]

        def sep(y):
            if np.any(y < 0):
                return Violation(nonneg_index=int(np.argmin(y)))
            for col in cols:
                if col.a @ y > col.cost + 1e-9:
                    return Violation(column=col)
            return None

        center, shape = box_ellipsoid([3.0, 3.0])
        res = ellipsoid_solve(sep, [1.0, 1.0], center, shape)
        assert res.value == pytest.approx(2.0, abs=1e-4)

    def test_empty_region(self):
        def sep(y):
            return Violation(column=Column("x", np.array([1.0]), -5.0))

        center, shape = box_ellipsoid([1.0])
        with pytest.raises(NoFeasiblePoint):
            ellipsoid_solve(sep, [1.0], center, shape, EllipsoidParams(iterations=40))

    def test_iteration_cap_schedule(self):
        assert iteration_cap(3, 10.0, EllipsoidParams(value_tolerance=1e-7)) == int(np.ceil(8 * 9 * np.log(1e8)))
        assert iteration_cap(3, 10.0, EllipsoidParams(iterations=7)) == 7

    def test_volume_shrinks_and_cuts_are_genuine(self, rng):
        for _ in range(10):
            lp = random_covering_lp(rng)
            sep, _ = covering_separation(lp)
            center, shape = box_ellipsoid(dual_box_upper(lp))
            res = ellipsoid_solve(sep, lp.b, center, shape, EllipsoidParams(track_volume=True))
            assert np.all(np.diff(res.volume_log) < 0)
            for rec in res.log.feasibility_cuts():
                if isinstance(rec.row_id, tuple) and rec.row_id[0] == "nonneg":
                    assert rec.point[rec.row_id[1]] < 0
                else:
                    col = res.log.columns[rec.row_id]
                    assert col.a @ rec.point > col.cost + 1e-7

    def test_pure_ellipsoid_recovery(self, rng):
        for _ in range(20):
            lp = random_covering_lp(rng)
            opt = solve_dense_lp(lp).value
            sep, _ = covering_separation(lp)
            center, shape = box_ellipsoid(dual_box_upper(lp))
            res = ellipsoid_solve(sep, lp.b, center, shape, EllipsoidParams(value_tolerance=1e-9))
            primal = recover_sparse_primal(res.log, [], lp.b)
            x = lift(primal, lp.n_vars)
            assert lp.is_feasible(x, 1e-6)
            assert abs(lp.c @ x - opt) <= 1e-4 * (1 + abs(opt))

    def test_certificate_matches_dense_solve(self, rng):
        for _ in range(20):
            lp = random_covering_lp(rng)
            opt = solve_dense_lp(lp).value
            sep, _ = covering_separation(lp)
            center, shape = box_ellipsoid(dual_box_upper(lp))
            res = ellipsoid_solve(sep, lp.b, center, shape, certify_with=[])
            assert res.certified
            x = lift(res.primal, lp.n_vars)
            assert lp.is_feasible(x, 1e-6)
            assert abs(lp.c @ x - opt) <= 1e-4 * (1 + abs(opt))


class TestRecovery:
    def test_all_columns_is_exact(self, rng):
        lp = random_covering_lp(rng)
        _, columns = covering_separation(lp)
        primal = recover_sparse_primal(CutLog(), columns, lp.b)
        assert primal.objective == pytest.approx(solve_dense_lp(lp).value)

    def test_empty_log_uses_always_included(self):
        cols = [Column("a", np.array([1.0]), 2.0)]
        primal = recover_sparse_primal(CutLog(), cols, [3.0])
        assert primal.values == {"a": pytest.approx(3.0)}

    def test_empty_everything(self):
        assert recover_sparse_primal(CutLog(), [], [0.0, 0.0]).values == {}
        with pytest.raises(ReducedPrimalInfeasible):
            recover_sparse_primal(CutLog(), [], [1.0])

    def test_infeasible_restriction(self):
        cols = [Column("a", np.array([1.0, 0.0]), 1.0)]
        with pytest.raises(ReducedPrimalInfeasible):
            recover_sparse_primal(CutLog(), cols, [1.0, 1.0])

    def test_feasibility_on_random_instances(self, rng):
        for _ in range(100):
            lp = random_covering_lp(rng)
            sep, _ = covering_separation(lp)
            center, shape = box_ellipsoid(dual_box_upper(lp))
            res = ellipsoid_solve(sep, lp.b, center, shape, certify_with=[])
            x = lift(res.primal, lp.n_vars)
            assert np.all(lp.A @ x >= lp.b - 1e-7)
