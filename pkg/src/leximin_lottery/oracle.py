"""Ground truth for small instances.

Enumerates every state, runs the same main loop with an exact round solver
(one dense LP per round over all states), and checks candidate lotteries
against the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from .core import (
    DEFAULT_TOL,
    DEGENERATE_HANDLE,
    TAU_DIST,
    EnumerationCapExceeded,
    SparseDistribution,
    StateRecord,
    degenerate_state,
    expected_utilities,
    leximin_compare,
    Preference,
    sorted_ascending,
)
from .lp import DenseLP, Sense, solve_dense_lp
from .reduction.main_loop import PipelineParams, RoundRecord, leximin_main_loop
from .reduction.programs import ProgramContext
from .blackbox import ExhaustiveBlackBox

DEFAULT_STATE_CAP = 5000
# relative slack on earlier rounds' prefix targets; later rounds can trade along it,
# amplified by the instance's utility ratios, so it sits just above simplex round-off
_PREFIX_SLACK = 1e-12


class Enumerable(Protocol):
    n: int

    def enumerate_states(self, cap: int) -> list[StateRecord]: ...

    def is_feasible_record(self, record: StateRecord) -> bool: ...


@dataclass(frozen=True)
class EnumeratedUniverse:
    """Every state of an instance, degenerate state first, no duplicate handles."""

    states: tuple[StateRecord, ...]
    n: int

    def __post_init__(self):
        handles = [s.handle for s in self.states]
        if len(set(handles)) != len(handles):
            raise ValueError("duplicate state handles in universe")
        if DEGENERATE_HANDLE not in handles:
            raise ValueError("universe lacks the degenerate state")

    @classmethod
    def from_states(cls, states: Sequence[StateRecord], n: int) -> "EnumeratedUniverse":
        seen: dict[str, StateRecord] = {DEGENERATE_HANDLE: degenerate_state(n)}
        for s in states:
            seen.setdefault(s.handle, s)
        return cls(tuple(seen.values()), n)

    @property
    def matrix(self) -> np.ndarray:
        """``|S| x n`` utility table."""
        return np.array([s.utilities for s in self.states], dtype=float).reshape(len(self.states), self.n)

    def __len__(self) -> int:
        return len(self.states)


def enumerate_states(instance: Enumerable, cap: int = DEFAULT_STATE_CAP) -> EnumeratedUniverse:
    states = instance.enumerate_states(cap)
    if len(states) + 1 > cap:
        raise EnumerationCapExceeded(f"{len(states)} states exceed the cap of {cap}")
    return EnumeratedUniverse.from_states(states, instance.n)


def exact_round(universe: EnumeratedUniverse, ctx: ProgramContext) -> tuple[SparseDistribution, float]:
    """Exact optimum of one main-loop round by a dense LP over all states.

    Variables: ``x_s`` for every state, ``y_l`` free and ``m_{l,i} >= 0``;
    the sum of the ``l`` smallest expected utilities is linearized as
    ``l*y_l - sum_i m_{l,i}`` with ``m_{l,i} >= y_l - E_i``.
    """
    U = universe.matrix
    S, n, t = len(universe), universe.n, ctx.t
    nv = S + t + t * n
    ycol = lambda l: S + l - 1  # noqa: E731
    mcol = lambda l, i: S + t + (l - 1) * n + i  # noqa: E731
    rows, senses, rhs = [], [], []
    targets = np.cumsum(np.asarray(ctx.z_prefix, dtype=float))
    for l in range(1, t):
        r = np.zeros(nv)
        r[ycol(l)] = l
        for i in range(n):
            r[mcol(l, i)] = -1.0
        rows.append(r)
        senses.append(Sense.GE)
        # a hair of slack keeps earlier rounds' optima feasible under round-off
        rhs.append(targets[l - 1] - _PREFIX_SLACK * (1.0 + abs(targets[l - 1])))
    for l in range(1, t + 1):
        for i in range(n):
            r = np.zeros(nv)
            r[mcol(l, i)] = 1.0
            r[ycol(l)] = -1.0
            r[:S] = U[:, i]
            rows.append(r)
            senses.append(Sense.GE)
            rhs.append(0.0)
    r = np.zeros(nv)
    r[:S] = 1.0
    rows.append(r)
    senses.append(Sense.EQ)
    rhs.append(1.0)

    c = np.zeros(nv)
    c[ycol(t)] = t
    for i in range(n):
        c[mcol(t, i)] = -1.0
    lower: list[Optional[float]] = [0.0] * S + [None] * t + [0.0] * (t * n)
    res = solve_dense_lp(DenseLP(c, np.array(rows), senses, np.array(rhs), maximize=True, lower=lower))
    if not res.optimal:
        raise RuntimeError(f"exact round {t} LP is {res.status.value}")
    weights = {s.handle: float(p) for s, p in zip(universe.states, res.x[:S]) if p > 1e-15}
    total = math.fsum(weights.values())
    weights = {h: p / total for h, p in weights.items()}
    registry = {s.handle: s for s in universe.states if s.handle in weights}
    x = SparseDistribution(weights, registry, n)
    return x, float(res.value) - ctx.fixed_total


def brute_force_leximin(universe: EnumeratedUniverse) -> tuple[SparseDistribution, np.ndarray]:
    """Leximin-optimal lottery over an explicit universe, and its expected vector."""

    def solver(ctx, warm):
        x, z = exact_round(universe, ctx)
        return x, z, RoundRecord(ctx.t, z, z, z)

    bb = ExhaustiveBlackBox(list(universe.states), universe.n)
    report = leximin_main_loop(universe.n, bb, PipelineParams(check_invariants=False), round_solver=solver)
    return report.distribution, expected_utilities(report.distribution)


def random_mixture_dominates(
    universe: EnumeratedUniverse,
    target: Sequence[float],
    samples: int = 10_000,
    seed: int = 0,
    tol: float = 1e-7,
) -> Optional[np.ndarray]:
    """Search random lotteries for one strictly leximin-better than ``target``; ``None`` if none found.

    Mixes Dirichlet draws over all states with draws over small random supports,
    since sparse mixtures are where leximin optima live.
    """
    rng = np.random.default_rng(seed)
    U = universe.matrix
    S = len(universe)
    for k in range(samples):
        if k % 2 == 0:
            w = rng.dirichlet(np.ones(S))
        else:
            size = int(rng.integers(1, min(S, 4) + 1))
            idx = rng.choice(S, size=size, replace=False)
            w = np.zeros(S)
            w[idx] = rng.dirichlet(np.ones(size))
        E = w @ U
        if leximin_compare(E, target, tol) is Preference.STRICTLY_PREFERRED:
            return E
    return None


@dataclass
class Verdict:
    """Outcome of checking one candidate lottery against the oracle."""

    valid: bool
    support_feasible: bool
    approximation: bool
    alpha: float
    eps: float
    candidate_sorted: list[float]
    oracle_sorted: list[float]
    target_sorted: list[float]
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.valid and self.support_feasible and self.approximation

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "valid_distribution": self.valid,
            "support_feasible": self.support_feasible,
            "approximation": self.approximation,
            "alpha": self.alpha,
            "eps": self.eps,
            "candidate_sorted": self.candidate_sorted,
            "oracle_sorted": self.oracle_sorted,
            "target_sorted": self.target_sorted,
            "failures": list(self.failures),
        }


def verify_output(
    instance: Enumerable,
    candidate: SparseDistribution,
    alpha: float,
    eps: float,
    tol: float = DEFAULT_TOL,
    oracle_expected: Optional[Sequence[float]] = None,
    cap: int = DEFAULT_STATE_CAP,
) -> Verdict:
    """Is ``candidate`` a valid lottery over feasible states that is an ``(alpha, eps)``-leximin-approximation?"""
    failures = []
    valid = candidate.is_valid(TAU_DIST)
    if not valid:
        failures.append(f"probabilities sum to {candidate.total!r} or include negatives")
    infeasible = [h for h, p in candidate.weights.items() if p > 0 and not instance.is_feasible_record(candidate.registry[h])]
    if infeasible:
        failures.append(f"infeasible states in support: {infeasible}")
    if oracle_expected is None:
        _, oracle_expected = brute_force_leximin(enumerate_states(instance, cap))
    E = expected_utilities(candidate)
    target = alpha * np.asarray(oracle_expected, dtype=float) - eps
    approx = leximin_compare(E, target, tol) is not Preference.STRICTLY_DISPREFERRED
    if not approx:
        failures.append("expected vector is leximin-below alpha * optimum - eps")
    return Verdict(
        valid,
        not infeasible,
        approx,
        alpha,
        eps,
        sorted_ascending(E).tolist(),
        sorted_ascending(oracle_expected).tolist(),
        sorted_ascending(target).tolist(),
        failures,
    )
