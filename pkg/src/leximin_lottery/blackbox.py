"""Utilitarian-welfare black-boxes.

A black-box receives non-negative weights ``c`` and returns one state whose
weighted welfare ``sum_i c_i * u_i(s)`` is within a factor ``alpha`` of the
best state -- always for deterministic solvers, with probability at least
``success_probability`` for randomized ones. The reduction only ever talks to
solvers through :meth:`BlackBox.solve`; it never enumerates the state space.

Concrete pieces here:

* :class:`ExhaustiveBlackBox` -- argmax over an explicit state list;
* knapsack DP and its value-scaling FPTAS;
* item-by-item greedy for additive and for monotone submodular allocation;
* :class:`SimulatedRandomizedBlackBox` and :class:`BoostedBlackBox`, the
  failure-injecting wrapper and the best-of-``q`` repetition wrapper.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .core import DEGENERATE_HANDLE, SparseDistribution, StateRecord, degenerate_state


def derive_seed(seed: int, *salt: int) -> int:
    """A child seed that depends only on ``seed`` and ``salt``."""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *salt]).generate_state(1)[0])


def _as_weights(weights: Sequence[float], n: int) -> np.ndarray:
    c = np.asarray(weights, dtype=float)
    if c.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {c.shape}")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError(f"weights must be finite and non-negative: {c}")
    return c


class BlackBox(abc.ABC):
    """Approximate maximizer of weighted utilitarian welfare over the states."""

    n: int
    alpha: float = 1.0
    success_probability: float = 1.0
    name: str = "blackbox"

    @abc.abstractmethod
    def solve(self, weights: Sequence[float], seed: int = 0) -> StateRecord:
        """Return a state approximately maximizing ``sum_i weights[i] * u_i(s)``."""

    @property
    def deterministic(self) -> bool:
        return self.success_probability >= 1.0

    def welfare(self, state: StateRecord, weights: Sequence[float]) -> float:
        return state.welfare(weights)


class ExhaustiveBlackBox(BlackBox):
    """Exact argmax over an explicit list of states.

    The degenerate state is always placed first, so all-zero weights (every
    state ties at 0) return it; otherwise the earliest listed maximizer wins.
    """

    name = "exhaustive"

    def __init__(self, states: Sequence[StateRecord], n: Optional[int] = None):
        states = list(states)
        if n is None:
            if not states:
                raise ValueError("cannot infer agent count from an empty state list")
            n = len(states[0].utilities)
        self.n = n
        ordered = [s for s in states if s.handle == DEGENERATE_HANDLE][:1] or [degenerate_state(n)]
        ordered += [s for s in states if s.handle != DEGENERATE_HANDLE]
        self.states = ordered
        self._U = np.array([s.utilities for s in ordered], dtype=float).reshape(len(ordered), n)

    def solve(self, weights: Sequence[float], seed: int = 0) -> StateRecord:
        c = _as_weights(weights, self.n)
        scores = self._U @ c
        # argmax returns the first maximizer; tiny float noise should not reorder ties
        best = float(scores.max())
        k = int(np.nonzero(scores >= best - 1e-12 * (1.0 + abs(best)))[0][0])
        return self.states[k]


class FunctionBlackBox(BlackBox):
    """Adapter turning a plain ``weights -> StateRecord`` function into a black-box."""

    def __init__(self, n: int, fn: Callable[[np.ndarray], StateRecord], alpha: float = 1.0, name: str = "function"):
        if not 0 < alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        self.n = n
        self.alpha = alpha
        self.name = name
        self._fn = fn

    def solve(self, weights: Sequence[float], seed: int = 0) -> StateRecord:
        return self._fn(_as_weights(weights, self.n))


# --------------------------------------------------------------------------
# knapsack


def _check_knapsack(values: Sequence[float], weights: Sequence[int], capacity: int) -> None:
    if len(values) != len(weights):
        raise ValueError("values and weights differ in length")
    for w in list(weights) + [capacity]:
        if isinstance(w, bool) or not isinstance(w, (int, np.integer)):
            raise ValueError(f"knapsack weights and capacity must be integers, got {w!r}")
        if w < 0:
            raise ValueError(f"knapsack weights and capacity must be non-negative, got {w}")


def knapsack_exact(values: Sequence[float], weights: Sequence[int], capacity: int) -> list[int]:
    """Maximum-value subset within ``capacity`` by dynamic programming over capacity.

    Items of non-positive value are never taken. Returns sorted item indices.

    >>> knapsack_exact([1, 1, 1], [2, 2, 3], 4)
    [0, 1]
    """
    _check_knapsack(values, weights, capacity)
    m = len(values)
    best = np.zeros(capacity + 1)
    take = np.zeros((m, capacity + 1), dtype=bool)
    for j in range(m):
        v, w = float(values[j]), int(weights[j])
        if v <= 0 or w > capacity:
            continue
        cand = np.full(capacity + 1, -np.inf)
        cand[w:] = best[: capacity + 1 - w] + v
        # strict improvement only: earlier items keep ties
        better = cand > best + 1e-12 * (1.0 + np.abs(best))
        take[j] = better
        best = np.where(better, cand, best)
    chosen = []
    cap = capacity
    for j in range(m - 1, -1, -1):
        if take[j, cap]:
            chosen.append(j)
            cap -= int(weights[j])
    return sorted(chosen)


def knapsack_fptas(values: Sequence[float], weights: Sequence[int], capacity: int, eps: float) -> list[int]:
    """Value-scaling FPTAS: the chosen set is worth at least ``(1 - eps) * OPT``.

    Values are rounded down to multiples of ``K = eps * vmax / m`` and the
    rounded instance is solved exactly by a min-weight-per-value table.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    _check_knapsack(values, weights, capacity)
    items = [j for j in range(len(values)) if values[j] > 0 and weights[j] <= capacity]
    if not items:
        return []
    vmax = max(float(values[j]) for j in items)
    scale = eps * vmax / len(items)
    scaled = [int(math.floor(float(values[j]) / scale)) for j in items]
    total = sum(scaled)
    INF = np.iinfo(np.int64).max // 4
    # lightest weight reaching each scaled value, with back-pointers per item
    lightest = np.full(total + 1, INF, dtype=np.int64)
    lightest[0] = 0
    took = np.zeros((len(items), total + 1), dtype=bool)
    for k, j in enumerate(items):
        sv, w = scaled[k], int(weights[j])
        if sv == 0:
            continue
        cand = np.full(total + 1, INF, dtype=np.int64)
        cand[sv:] = np.where(lightest[: total + 1 - sv] < INF, lightest[: total + 1 - sv] + w, INF)
        better = cand < lightest
        took[k] = better
        lightest = np.where(better, cand, lightest)
    reach = int(np.nonzero(lightest <= capacity)[0].max())
    chosen = []
    for k in range(len(items) - 1, -1, -1):
        if took[k, reach]:
            chosen.append(items[k])
            reach -= scaled[k]
    return sorted(chosen)


# --------------------------------------------------------------------------
# allocation greedy


class AdditiveAllocation(Protocol):
    n: int
    additive_values: np.ndarray  # n x m

    def record(self, payload) -> StateRecord: ...


class ValueOracleAllocation(Protocol):
    n: int
    m: int

    def bundle_value(self, agent: int, goods: frozenset) -> float: ...

    def record(self, payload) -> StateRecord: ...


def greedy_additive_allocate(instance: AdditiveAllocation, weights: Sequence[float]) -> StateRecord:
    """Give each good to the agent with the largest ``c_i * u_i(g)``; ties go to the lowest index.

    Exact for additive utilities, since weighted welfare separates over goods.
    """
    c = _as_weights(weights, instance.n)
    scaled = c[:, None] * np.asarray(instance.additive_values, dtype=float)
    owners = tuple(int(a) for a in np.argmax(scaled, axis=0))  # argmax keeps the first maximizer
    return instance.record(owners)


def greedy_submodular_allocate(instance: ValueOracleAllocation, weights: Sequence[float]) -> StateRecord:
    """Item-by-item greedy on weighted marginal gains (a 1/2-approximation for monotone submodular utilities).

    Goods are processed in index order; each goes to the agent whose weighted
    marginal gain is largest, lowest agent index on ties.
    """
    c = _as_weights(weights, instance.n)
    bundles = [frozenset() for _ in range(instance.n)]
    current = [instance.bundle_value(i, bundles[i]) for i in range(instance.n)]
    owners = []
    for g in range(instance.m):
        gains = []
        for i in range(instance.n):
            gains.append(c[i] * (instance.bundle_value(i, bundles[i] | {g}) - current[i]))
        winner = int(np.argmax(gains))
        owners.append(winner)
        bundles[winner] = bundles[winner] | {g}
        current[winner] = instance.bundle_value(winner, bundles[winner])
    return instance.record(tuple(owners))


# --------------------------------------------------------------------------
# randomized solvers and boosting


def compute_repetitions(p: float, k: int) -> int:
    """Repetitions ``q`` so that ``k`` boosted calls all succeed with probability at least ``p``.

    ``q = ceil(log(1/k) / log(1-p) + 1)``; a deterministic solver (``p = 1``) needs one call.

    >>> compute_repetitions(0.5, 100)
    8
    >>> compute_repetitions(0.5, 1)
    1
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if p == 1:
        return 1
    if not 0 < p < 1:
        raise ValueError(f"success probability must lie in (0, 1], got {p}")
    return int(math.ceil(math.log(1.0 / k) / math.log(1.0 - p) + 1.0))


class SimulatedRandomizedBlackBox(BlackBox):
    """Wraps a solver and fails with probability ``1 - p`` by returning the degenerate state.

    The coin flip is a pure function of the call seed. ``alpha`` may be set
    lower than the wrapped solver's factor to advertise a weaker guarantee.
    """

    name = "simulated-randomized"

    def __init__(self, base: BlackBox, success_probability: float, alpha: Optional[float] = None):
        if not 0 < success_probability <= 1:
            raise ValueError(f"success probability must lie in (0, 1], got {success_probability}")
        alpha = base.alpha if alpha is None else alpha
        if not 0 < alpha <= base.alpha:
            raise ValueError(f"simulated alpha must lie in (0, {base.alpha}], got {alpha}")
        self.base = base
        self.n = base.n
        self.alpha = alpha
        self.success_probability = success_probability
        self._fail = degenerate_state(base.n)

    def solve(self, weights: Sequence[float], seed: int = 0) -> StateRecord:
        rng = np.random.default_rng(derive_seed(seed, 1))
        if rng.random() < self.success_probability:
            return self.base.solve(weights, derive_seed(seed, 2))
        return self._fail


class BoostedBlackBox(BlackBox):
    """Best of ``q`` independent calls to ``base``, ranked by weighted welfare (first wins ties)."""

    def __init__(self, base: BlackBox, q: int):
        if q < 1:
            raise ValueError(f"q must be at least 1, got {q}")
        self.base = base
        self.q = int(q)
        self.n = base.n
        self.alpha = base.alpha
        self.success_probability = 1.0 - (1.0 - base.success_probability) ** self.q
        self.name = f"boosted({base.name}, q={self.q})"

    def solve(self, weights: Sequence[float], seed: int = 0) -> StateRecord:
        if self.q == 1:
            return self.base.solve(weights, seed)
        best: Optional[StateRecord] = None
        best_value = -math.inf
        for r in range(self.q):
            s = self.base.solve(weights, derive_seed(seed, 100 + r))
            value = s.welfare(weights)
            if value > best_value:
                best, best_value = s, value
        assert best is not None
        return best


def boosted_solve(base: BlackBox, weights: Sequence[float], q: int, rng_seed: int = 0) -> StateRecord:
    return BoostedBlackBox(base, q).solve(weights, rng_seed)


@dataclass
class CountingBlackBox(BlackBox):
    """Per-run view of a black-box: counts calls and hands each call its own seed."""

    base: BlackBox
    run_seed: int = 0
    calls: int = 0

    def __post_init__(self):
        self.n = self.base.n
        self.alpha = self.base.alpha
        self.success_probability = self.base.success_probability
        self.name = self.base.name

    def solve(self, weights: Sequence[float], seed: Optional[int] = None) -> StateRecord:
        self.calls += 1
        if seed is None:
            seed = derive_seed(self.run_seed, self.calls)
        return self.base.solve(weights, seed)


class DowngradedBlackBox(BlackBox):
    """The weakest answer an ``alpha``-approximate black-box may give.

    Answers with a *virtual* state standing for the lottery "the base
    solver's state with probability ``alpha``, the degenerate state
    otherwise". Its welfare is exactly ``alpha`` times the base state's, so
    the pipeline sees precisely the lotteries with non-degenerate mass at
    most ``alpha``. Use :func:`expand_virtual_states` to turn a lottery over
    virtual states back into one over real states.
    """

    def __init__(self, base: BlackBox, alpha: float):
        if not 0 < alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        self.base = base
        self.n = base.n
        self.alpha = alpha * base.alpha
        self.success_probability = base.success_probability
        self.factor = alpha
        self.name = f"downgraded({base.name}, {alpha:g})"

    def solve(self, weights: Sequence[float], seed: int = 0) -> StateRecord:
        s = self.base.solve(weights, seed)
        if s.handle == DEGENERATE_HANDLE:
            return s
        utilities = tuple(self.factor * u for u in s.utilities)
        return StateRecord(f"{s.handle}~{self.factor:.12g}", utilities, VirtualState(s, self.factor))


@dataclass(frozen=True)
class VirtualState:
    """Payload of a downgraded answer: ``real`` with probability ``factor``, else degenerate."""

    real: StateRecord
    factor: float


def expand_virtual_states(x: SparseDistribution) -> SparseDistribution:
    """Replace every virtual state of a lottery by the real lottery it stands for."""
    weights: dict[str, float] = {}
    registry: dict[str, StateRecord] = {}
    for state, p in x.items():
        if isinstance(state.payload, VirtualState):
            real = state.payload.real
            weights[real.handle] = weights.get(real.handle, 0.0) + p * state.payload.factor
            registry[real.handle] = real
            weights[DEGENERATE_HANDLE] = weights.get(DEGENERATE_HANDLE, 0.0) + p * (1.0 - state.payload.factor)
            registry.setdefault(DEGENERATE_HANDLE, degenerate_state(x.n))
        else:
            weights[state.handle] = weights.get(state.handle, 0.0) + p
            registry[state.handle] = state
    return SparseDistribution(weights, registry, x.n)
