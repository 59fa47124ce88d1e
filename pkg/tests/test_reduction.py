import numpy as np
import pytest

from leximin_lottery.blackbox import DowngradedBlackBox, ExhaustiveBlackBox, expand_virtual_states
from leximin_lottery.core import (
    DEGENERATE_HANDLE,
    SparseDistribution,
    StateRecord,
    degenerate_state,
    expected_utilities,
    sorted_ascending,
    verify_alpha_leximin_approx,
)
from leximin_lottery.lp import solve_dense_lp
from leximin_lottery.oracle import EnumeratedUniverse, brute_force_leximin, exact_round
from leximin_lottery.reduction import (
    DualPoint,
    Feasible,
    InfeasibleUnderXalpha,
    PipelineParams,
    ProgramContext,
    UpperBoundBelowWarmStart,
    auxiliary_system_feasible,
    full_p3_lp,
    leximin_main_loop,
    linearization_witness,
    p1_feasible,
    p1_objective,
    p2_feasible,
    pad_with_degenerate,
    probe_blackbox_box,
    separation_oracle_d3,
    shallow_solve,
    solve_p2_sparse,
    solve_p3_sparse,
    weak_feasibility_oracle,
)
from leximin_lottery.reduction.programs import auxiliary_columns, state_column

from helpers import random_explicit, sorted_gap


def mix(pairs, n):
    return SparseDistribution.from_pairs(pairs, n)


def degenerate_mass(n):
    return SparseDistribution.point_mass(degenerate_state(n))


@pytest.fixture
def ninety(fixture_states):
    """0.9 on s1, 0.1 on the degenerate state: E = (9, 9)."""
    return mix([(fixture_states[0], 0.9), (degenerate_state(2), 0.1)], 2)


@pytest.fixture
def downgraded(fixture_blackbox):
    return DowngradedBlackBox(fixture_blackbox, 0.9)


def box_for(blackbox):
    box, upper, _ = probe_blackbox_box(blackbox)
    return box, upper


class TestProgramObjects:
    def test_context_invariants(self):
        with pytest.raises(ValueError):
            ProgramContext(0, 2)
        with pytest.raises(ValueError):
            ProgramContext(2, 2, ())
        assert ProgramContext(2, 3, (1.5,)).with_target(2.0).prefix_targets().tolist() == [1.5, 3.5]

    def test_dual_point_round_trip(self, rng):
        y = rng.random(2 * 4)
        p = DualPoint.unpack(y, 2, 3)
        assert p.v.shape == (2, 3)
        np.testing.assert_allclose(p.pack(), y)
        np.testing.assert_allclose(p.agent_weights(), p.v.sum(axis=0))

    def test_p1_objective_first_round(self, ninety):
        assert p1_objective(ninety, ProgramContext(1, 2)) == pytest.approx(9.0)

    def test_p1_objective_second_round(self, ninety):
        assert p1_objective(ninety, ProgramContext(2, 2, (9.0,))) == pytest.approx(9.0)

    def test_p1_objective_with_jackpot(self, fixture_states):
        x = mix([(fixture_states[0], 0.9), (fixture_states[1], 0.1)], 2)
        np.testing.assert_allclose(expected_utilities(x), [9.0, 109.0])
        assert p1_objective(x, ProgramContext(2, 2, (9.0,))) == pytest.approx(109.0)

    def test_p1_feasible(self, fixture_states, ninety):
        assert p1_feasible(degenerate_mass(2), ProgramContext(1, 2))
        assert p1_feasible(ninety, ProgramContext(2, 2, (9.0,)))
        assert not p1_feasible(SparseDistribution.point_mass(fixture_states[1]), ProgramContext(2, 2, (9.0,)))

    def test_p2_feasible_reads_target(self, ninety):
        assert p2_feasible(ninety, ProgramContext(1, 2, (), 9.0))
        assert not p2_feasible(ninety, ProgramContext(1, 2, (), 9.5))


class TestLinearization:
    def test_witness_on_example(self):
        y, m = linearization_witness([5.0, 1.0, 3.0], 2)
        assert y == 3.0
        assert m.tolist() == [0.0, 2.0, 0.0]
        assert 2 * y - m.sum() == 4.0

    def test_equivalence_random(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 6))
            v = rng.integers(0, 10, n).astype(float)
            k = int(rng.integers(1, n + 1))
            c = float(rng.integers(0, 30))
            holds = sorted_ascending(v)[:k].sum() >= c
            assert auxiliary_system_feasible(v, c, k) == holds
            if holds:
                y, m = linearization_witness(v, k)
                assert k * y - m.sum() >= c
                assert np.all(m >= y - v) and np.all(m >= 0)

    def test_column_layout(self):
        s = StateRecord("s", (2.0, 5.0))
        col = state_column(s, 2, 2)
        assert col.a.tolist() == [0, 0, 2, 5, 2, 5]
        aux = {c.key: c.a.tolist() for c in auxiliary_columns(2, 2)}
        assert aux[("y", 2)] == [0, 2, 0, 0, -1, -1]
        assert aux[("m", 1, 1)] == [-1, 0, 0, 1, 0, 0]


class TestSeparation:
    def test_negative_coordinate(self, fixture_blackbox):
        ctx = ProgramContext(1, 2, (), 1.0)
        answer = separation_oracle_d3(DualPoint(np.array([-0.5]), np.zeros((1, 2))), ctx, fixture_blackbox)
        assert answer is not None and answer.nonneg_index == 0

    def test_auxiliary_row(self, fixture_blackbox):
        ctx = ProgramContext(1, 2, (), 1.0)
        # y_1 row: q_1 - v_11 - v_12 <= 0 fails
        answer = separation_oracle_d3(DualPoint(np.array([0.01]), np.zeros((1, 2))), ctx, fixture_blackbox)
        assert answer.column.key == ("y", 1)

    def test_origin_is_feasible(self, fixture_blackbox):
        ctx = ProgramContext(2, 2, (1.0,), 1.0)
        assert separation_oracle_d3(np.zeros(6), ctx, fixture_blackbox) is None

    def test_state_row(self):
        bb = ExhaustiveBlackBox([StateRecord("only", (10.0, 10.0))], 2)
        ctx = ProgramContext(1, 2, (), 1.0)
        point = DualPoint(np.array([0.1]), np.array([[0.1, 0.1]]))  # c.u = 2
        answer = separation_oracle_d3(point, ctx, bb)
        assert answer.column.key == ("x", "only")
        assert answer.column.a @ point.pack() == pytest.approx(2.0)

    def test_boundary_is_approved(self):
        bb = ExhaustiveBlackBox([StateRecord("only", (10.0, 10.0))], 2)
        point = DualPoint(np.array([0.05]), np.array([[0.05, 0.05]]))  # c.u = 1
        assert separation_oracle_d3(point, ProgramContext(1, 2, (), 1.0), bb) is None


class TestSparseSolvers:
    def test_zero_target(self, fixture_blackbox):
        box, _ = box_for(fixture_blackbox)
        run = solve_p3_sparse(ProgramContext(1, 2, (), 0.0), fixture_blackbox, box)
        assert run.solution.objective <= 1e-7

    def test_single_state_binding(self):
        s = StateRecord("only", (3.0, 7.0))
        bb = ExhaustiveBlackBox([s], 2)
        box, _ = box_for(bb)
        run = solve_p3_sparse(ProgramContext(1, 2, (), 3.0), bb, box)
        assert run.solution.objective == pytest.approx(1.0, abs=1e-6)
        assert np.all(run.solution.residuals(ProgramContext(1, 2, (), 3.0)) >= -1e-7)

    def test_matches_full_enumeration(self, rng):
        for _ in range(15):
            inst = random_explicit(rng)
            states = inst.enumerate_states(100)
            bb = ExhaustiveBlackBox(states, inst.n)
            box, upper = box_for(bb)
            n = inst.n
            ctx = ProgramContext(1, n, (), float(rng.uniform(0, 1)) * upper / n)
            exact = solve_dense_lp(full_p3_lp(states, ctx))
            run = solve_p3_sparse(ctx, bb, box)
            if not exact.optimal:
                # the target exceeds what any mixture reaches, at any total mass
                assert run.solution is None
                continue
            assert run.solution.objective == pytest.approx(exact.value, abs=1e-4)
            x, _ = solve_p2_sparse(ctx, bb, box)
            assert x.total == pytest.approx(run.solution.objective)
            assert p2_feasible(x, ctx, tol=1e-6)

    def test_second_round_matches_enumeration(self, rng):
        for _ in range(10):
            inst = random_explicit(rng, n_choices=(3,))
            states = inst.enumerate_states(100)
            universe = EnumeratedUniverse.from_states(states, 3)
            _, z1 = exact_round(universe, ProgramContext(1, 3))
            ctx = ProgramContext(2, 3, (z1,), 0.5 * z1)
            bb = ExhaustiveBlackBox(states, 3)
            box, _ = box_for(bb)
            exact = solve_dense_lp(full_p3_lp(states, ctx))
            if not exact.optimal:
                continue
            run = solve_p3_sparse(ctx, bb, box)
            assert run.solution.objective == pytest.approx(exact.value, abs=1e-4)

    def test_support_is_cut_states(self, fixture_blackbox):
        box, _ = box_for(fixture_blackbox)
        run = solve_p3_sparse(ProgramContext(1, 2, (), 5.0), fixture_blackbox, box)
        cut_states = {k[1] for k in run.log.columns if k[0] == "x"}
        assert set(run.solution.x) <= cut_states


class TestWeakOracle:
    def test_zero_target_feasible(self, fixture_blackbox):
        box, _ = box_for(fixture_blackbox)
        answer = weak_feasibility_oracle(ProgramContext(1, 2, (), 0.0), fixture_blackbox, box)
        assert isinstance(answer, Feasible)
        assert answer.x.is_valid()

    def test_fixture_at_nine(self, downgraded):
        box, _ = box_for(downgraded)
        answer = weak_feasibility_oracle(ProgramContext(1, 2, (), 9.0), downgraded, box)
        assert isinstance(answer, Feasible)
        E = expected_utilities(expand_virtual_states(answer.x))
        assert min(E) >= 9.0 - 1e-6

    def test_fixture_above_nine(self, downgraded):
        box, _ = box_for(downgraded)
        answer = weak_feasibility_oracle(ProgramContext(1, 2, (), 9.5), downgraded, box)
        assert isinstance(answer, InfeasibleUnderXalpha)
        assert answer.mass > 1.0

    def test_padding(self, fixture_states):
        x = SparseDistribution({"s1": 0.6}, {"s1": fixture_states[0]}, 2)
        padded = pad_with_degenerate(x)
        assert padded.weights[DEGENERATE_HANDLE] == pytest.approx(0.4)
        sliver = pad_with_degenerate(SparseDistribution({"s1": 1 - 1e-9}, {"s1": fixture_states[0]}, 2))
        assert DEGENERATE_HANDLE not in sliver.weights
        assert sliver.total == pytest.approx(1.0, abs=1e-15)
        over = pad_with_degenerate(SparseDistribution({"s1": 1 + 1e-8}, {"s1": fixture_states[0]}, 2))
        assert over.total == pytest.approx(1.0, abs=1e-15)


class TestShallowSolver:
    def test_fixture_round_one(self, downgraded):
        box, upper = box_for(downgraded)
        x, z, record = shallow_solve(ProgramContext(1, 2), degenerate_mass(2), downgraded, 1e-3, box, upper)
        assert 9 - 1e-3 <= z <= 9
        assert record.upper_start - record.lower_start > 0
        assert min(expected_utilities(expand_virtual_states(x))) >= z - 1e-6

    def test_only_degenerate_state(self):
        bb = ExhaustiveBlackBox([], 2)
        box, upper = box_for(bb)
        x, z, _ = shallow_solve(ProgramContext(1, 2), degenerate_mass(2), bb, 1e-6, box, upper)
        assert z == 0.0
        assert set(x.weights) == {DEGENERATE_HANDLE}

    def test_matches_dense_optimum(self, rng):
        for _ in range(10):
            inst = random_explicit(rng, n_choices=(2,))
            states = inst.enumerate_states(100)
            bb = ExhaustiveBlackBox(states, 2)
            box, upper = box_for(bb)
            _, opt = exact_round(EnumeratedUniverse.from_states(states, 2), ProgramContext(1, 2))
            eps = 1e-6 * max(1.0, upper)
            _, z, _ = shallow_solve(ProgramContext(1, 2), degenerate_mass(2), bb, eps, box, upper)
            assert opt - eps - 1e-7 <= z <= opt + 1e-7

    def test_probe_monotonicity(self, rng):
        inst = random_explicit(rng, n_choices=(3,))
        bb = ExhaustiveBlackBox(inst.enumerate_states(100), 3)
        report = leximin_main_loop(3, bb)
        for record in report.rounds:
            for a in record.probes:
                for b in record.probes:
                    if a.feasible and b.value < a.value:
                        assert b.feasible
                    if not a.feasible and b.value > a.value:
                        assert not b.feasible

    def test_infeasible_warm_start(self, fixture_blackbox, fixture_states):
        box, upper = box_for(fixture_blackbox)
        warm = SparseDistribution.point_mass(fixture_states[1])
        with pytest.raises(ValueError):
            shallow_solve(ProgramContext(2, 2, (9.0,)), warm, fixture_blackbox, 1e-3, box, upper)

    def test_upper_bound_below_warm_start(self, fixture_blackbox, fixture_states):
        box, _ = box_for(fixture_blackbox)
        warm = SparseDistribution.point_mass(fixture_states[0])
        with pytest.raises(UpperBoundBelowWarmStart):
            shallow_solve(ProgramContext(1, 2), warm, fixture_blackbox, 1e-3, box, upper_welfare=5.0)


class TestMainLoop:
    def test_single_agent(self):
        bb = ExhaustiveBlackBox([StateRecord("s", (7.0,))], 1)
        # below the padding threshold the leftover degenerate sliver is dropped
        report = leximin_main_loop(1, bb, PipelineParams(eps=1e-9))
        assert report.distribution.weights == {"s": pytest.approx(1.0)}

    def test_fixture_exact(self, fixture_blackbox):
        report = leximin_main_loop(2, fixture_blackbox)
        assert verify_alpha_leximin_approx(report.expected, (10.0, 10.0), 1.0, tol=2 * report.eps)
        assert report.distribution.is_valid()
        # a tight search width pins the lottery to the point mass on s1
        tight = leximin_main_loop(2, fixture_blackbox, PipelineParams(eps=1e-9))
        assert sorted_gap(tight.expected, (10.0, 10.0)) <= 1e-5

    def test_agent_count_mismatch(self, fixture_blackbox):
        with pytest.raises(ValueError):
            leximin_main_loop(3, fixture_blackbox)

    def test_random_instances_against_oracle(self, rng):
        for _ in range(20):
            inst = random_explicit(rng)
            states = inst.enumerate_states(100)
            bb = ExhaustiveBlackBox(states, inst.n)
            report = leximin_main_loop(inst.n, bb)
            _, E = brute_force_leximin(EnumeratedUniverse.from_states(states, inst.n))
            tol = max(inst.n * report.eps, 1e-5)
            assert verify_alpha_leximin_approx(report.expected, E, 1.0, tol=tol)
            assert len(report.distribution.weights) <= report.support_cap

    def test_report_bookkeeping(self, fixture_blackbox):
        report = leximin_main_loop(2, fixture_blackbox, PipelineParams(eps=1e-4))
        assert report.eps == 1e-4
        assert len(report.rounds) == 2 and len(report.z) == 2
        assert report.blackbox_calls >= sum(r.blackbox_calls for r in report.rounds)
        assert report.repetitions == 1
        assert all("probes" in r.as_dict() for r in report.rounds)

    def test_pure_ellipsoid_path(self, fixture_blackbox):
        params = PipelineParams(eps=1e-3)
        params.solver.certificate = False
        report = leximin_main_loop(2, fixture_blackbox, params)
        assert verify_alpha_leximin_approx(report.expected, (10.0, 10.0), 1.0, tol=2e-3)
        assert report.distribution.is_valid()
