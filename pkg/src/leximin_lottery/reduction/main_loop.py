"""Binary-search shallow solver and the leximin main loop.

Round ``t`` of the main loop maximizes the sum of the ``t`` smallest expected
utilities subject to the sums fixed in earlier rounds, then freezes the gain
as ``z_t``. The shallow solver does this by bisecting over the target value,
asking the weak feasibility oracle at every probe.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Protocol

import numpy as np

from ..blackbox import BlackBox, CountingBlackBox, compute_repetitions, BoostedBlackBox
from ..core import TAU_DIST, SparseDistribution, StateRecord, degenerate_state, expected_utilities
from ..lp.ellipsoid import iteration_cap
from .programs import ProgramContext, p1_feasible, p1_objective, p2_feasible
from .solvers import DualBox, Feasible, SparseSolverParams, weak_feasibility_oracle

log = logging.getLogger(__name__)

# Upper bound on binary-search probes per round used when sizing the boosting budget.
MAX_PROBES = 64


class UpperBoundBelowWarmStart(RuntimeError):
    """The search interval came out empty although the black-box claims to be deterministic."""


@dataclass
class Probe:
    value: float
    feasible: bool
    mass: float
    iterations: int
    cuts: int
    certified: bool


@dataclass
class RoundRecord:
    """What one round of the main loop did."""

    t: int
    z: float
    lower_start: float
    upper_start: float
    probes: list[Probe] = field(default_factory=list)
    blackbox_calls: int = 0
    ellipsoid_iterations: int = 0
    cuts: int = 0
    clamped: bool = False

    def as_dict(self) -> dict:
        d = asdict(self)
        d["probe_count"] = len(self.probes)
        return d


@dataclass
class PipelineParams:
    """Everything a pipeline run needs besides the instance and the black-box."""

    eps: Optional[float] = None  # binary-search width; default 1e-6 * search upper bound
    seed: int = 0
    solver: SparseSolverParams = field(default_factory=SparseSolverParams)
    tau_dist: float = TAU_DIST
    check_invariants: bool = True


@dataclass
class RunReport:
    distribution: SparseDistribution
    rounds: list[RoundRecord]
    blackbox_calls: int
    repetitions: int
    eps: float
    alpha: float
    iteration_cap: int

    @property
    def z(self) -> list[float]:
        return [r.z for r in self.rounds]

    @property
    def expected(self) -> np.ndarray:
        return expected_utilities(self.distribution)

    @property
    def support_cap(self) -> int:
        n = self.distribution.n
        return n * (self.iteration_cap + 1) + 1


class RoundSolver(Protocol):
    """Solves one round: returns ``(x_t, z_t)`` and a record of the work done."""

    def __call__(self, ctx: ProgramContext, warm_start: SparseDistribution) -> tuple[SparseDistribution, float, RoundRecord]: ...


def shallow_solve(
    ctx: ProgramContext,
    warm_start: SparseDistribution,
    blackbox: BlackBox,
    eps: float,
    dual_box: DualBox,
    upper_welfare: float,
    params: Optional[PipelineParams] = None,
) -> tuple[SparseDistribution, float, RoundRecord]:
    """Bisect on the round's target value between the warm start and ``upper_welfare / alpha``.

    ``upper_welfare`` is the black-box welfare at unit weights; divided by
    ``alpha`` it bounds the total expected welfare of any lottery, hence the
    round objective. Returns the last lottery the weak oracle accepted (the
    warm start if it never accepted one) and the lower end ``l`` of the final
    interval, with ``u - l <= eps``.
    """
    params = params or PipelineParams()
    if params.check_invariants and not p1_feasible(warm_start, ctx, tol=1e-7 * (1.0 + ctx.fixed_total)):
        raise ValueError("warm start violates the round's prefix constraints")
    lower = p1_objective(warm_start, ctx)
    upper = upper_welfare / blackbox.alpha
    record = RoundRecord(ctx.t, lower, lower, upper)
    if upper < lower - 1e-9 * (1.0 + abs(lower)):
        if blackbox.deterministic:
            raise UpperBoundBelowWarmStart(
                f"round {ctx.t}: upper bound {upper} below warm-start objective {lower}"
            )
        log.warning("round %d: randomized upper bound %g below warm start %g; keeping warm start", ctx.t, upper, lower)
        record.clamped = True
        upper = lower
        record.upper_start = upper

    retained = warm_start
    seeds = tuple(s for s, p in warm_start.items() if p > 0 and not s.is_degenerate)
    while upper - lower > eps:
        probe = 0.5 * (lower + upper)
        answer = weak_feasibility_oracle(ctx.with_target(probe), blackbox, dual_box, params.solver, seeds)
        run = answer.run
        record.ellipsoid_iterations += run.iterations
        record.cuts += len(run.log.columns)
        if isinstance(answer, Feasible):
            record.probes.append(Probe(probe, True, answer.x.total, run.iterations, len(run.log.columns), run.certified))
            if params.check_invariants:
                _check_feasible_probe(answer.x, ctx.with_target(probe), params)
            lower, retained = probe, answer.x
            seeds = tuple(dict.fromkeys(seeds + tuple(s for s, p in retained.items() if p > 0 and not s.is_degenerate)))
        else:
            record.probes.append(Probe(probe, False, answer.mass, run.iterations, len(run.log.columns), run.certified))
            upper = probe
    record.z = lower
    return retained, lower, record


def _check_feasible_probe(x: SparseDistribution, ctx: ProgramContext, params: PipelineParams) -> None:
    scale = 1.0 + float(ctx.prefix_targets()[-1])
    if not x.is_valid(params.tau_dist):
        raise AssertionError(f"accepted probe returned an invalid lottery (total {x.total})")
    if not p2_feasible(x, ctx, tol=10 * params.tau_dist * scale):
        raise AssertionError(f"accepted probe z={ctx.z_t} returned a lottery missing its prefix targets")


def probe_blackbox_box(blackbox: BlackBox) -> tuple[DualBox, float, list[StateRecord]]:
    """Unit-vector calls for the dual box and the all-ones call for the search bound."""
    n = blackbox.n
    probes = [blackbox.solve(np.eye(n)[i]) for i in range(n)]
    top = blackbox.solve(np.ones(n))
    probes.append(top)
    return DualBox.from_probe_states(probes, n), float(sum(top.utilities)), probes


def leximin_main_loop(
    n: int,
    blackbox: BlackBox,
    params: Optional[PipelineParams] = None,
    round_solver: Optional[RoundSolver] = None,
) -> RunReport:
    """Rounds ``t = 1..n``; round ``t`` starts from ``x^{t-1}`` (``x^0`` = degenerate point mass).

    With the default round solver (binary search over the black-box-driven
    weak oracle) the result is an ``(alpha, eps)``-leximin-approximation.
    A randomized black-box is boosted so that all calls of the run succeed
    together with probability at least its single-call success probability.
    """
    params = params or PipelineParams()
    if blackbox.n != n:
        raise ValueError(f"black-box serves {blackbox.n} agents, instance has {n}")
    cap = iteration_cap(n * (n + 1), 1.0, params.solver.ellipsoid)
    q = 1
    if not blackbox.deterministic:
        budget = n * (1 + MAX_PROBES * cap) + n + 1
        q = compute_repetitions(blackbox.success_probability, budget)
        blackbox = BoostedBlackBox(blackbox, q)
    counted = CountingBlackBox(blackbox, params.seed)

    eps = params.eps
    if round_solver is None:
        dual_box, upper_welfare, _ = probe_blackbox_box(counted)
        if eps is None:
            eps = 1e-6 * max(1.0, upper_welfare / counted.alpha)

        def round_solver(ctx, warm):
            return shallow_solve(ctx, warm, counted, eps, dual_box, upper_welfare, params)

    x = SparseDistribution.point_mass(degenerate_state(n))
    z: list[float] = []
    rounds: list[RoundRecord] = []
    for t in range(1, n + 1):
        ctx = ProgramContext(t, n, tuple(z))
        calls_before = counted.calls
        x, z_t, record = round_solver(ctx, x)
        record.blackbox_calls = counted.calls - calls_before
        z.append(z_t)
        rounds.append(record)
        if params.check_invariants and t < n:
            nxt = ProgramContext(t + 1, n, tuple(z))
            if not p1_feasible(x, nxt, tol=1e-7 * (1.0 + nxt.fixed_total)):
                raise AssertionError(f"round {t} output is infeasible for round {t + 1}")
    x = x.without_zeros()
    return RunReport(x, rounds, counted.calls, q, eps if eps is not None else 0.0, counted.alpha, cap)
