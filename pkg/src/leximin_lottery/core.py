"""Domain types, the leximin order, and the approximation predicates.

A *state* is one deterministic outcome; a lottery is a sparse probability
distribution over states. Every instance carries a distinguished degenerate
state that gives all agents utility 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

# Leximin comparisons treat entries within this band as equal.
DEFAULT_TOL = 1e-9
# "Sums to 1" checks on distributions.
TAU_DIST = 1e-7

DEGENERATE_HANDLE = "degenerate"


class EnumerationCapExceeded(ValueError):
    """An instance has more states than an enumeration is allowed to list."""


class Preference(enum.Enum):
    STRICTLY_PREFERRED = 1
    EQUIVALENT = 0
    STRICTLY_DISPREFERRED = -1


@dataclass(frozen=True)
class StateRecord:
    """A deterministic state: canonical handle, per-agent utilities, decoded payload."""

    handle: str
    utilities: tuple[float, ...]
    payload: Any = None

    def __post_init__(self):
        if any(u < 0 for u in self.utilities):
            raise ValueError(f"negative utility in state {self.handle}: {self.utilities}")

    @property
    def is_degenerate(self) -> bool:
        return self.handle == DEGENERATE_HANDLE

    def welfare(self, weights: Sequence[float]) -> float:
        return float(np.dot(weights, self.utilities))


def degenerate_state(n: int) -> StateRecord:
    return StateRecord(DEGENERATE_HANDLE, (0.0,) * n, None)


@dataclass(frozen=True)
class SparseDistribution:
    """Probabilities over a handful of states, keyed by state handle.

    ``registry`` resolves every handle in ``weights`` to its StateRecord.
    """

    weights: Mapping[str, float]
    registry: Mapping[str, StateRecord]
    n: int

    def __post_init__(self):
        missing = [h for h in self.weights if h not in self.registry]
        if missing:
            raise ValueError(f"unregistered handles in distribution: {missing}")

    @classmethod
    def point_mass(cls, state: StateRecord) -> "SparseDistribution":
        return cls({state.handle: 1.0}, {state.handle: state}, len(state.utilities))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[StateRecord, float]], n: int) -> "SparseDistribution":
        weights: dict[str, float] = {}
        registry: dict[str, StateRecord] = {}
        for state, p in pairs:
            weights[state.handle] = weights.get(state.handle, 0.0) + float(p)
            registry[state.handle] = state
        return cls(weights, registry, n)

    @property
    def total(self) -> float:
        return math.fsum(self.weights.values())

    @property
    def support(self) -> list[str]:
        return [h for h, p in self.weights.items() if p > 0]

    def non_degenerate_mass(self) -> float:
        return math.fsum(p for h, p in self.weights.items() if h != DEGENERATE_HANDLE)

    def items(self) -> Iterable[tuple[StateRecord, float]]:
        for h, p in self.weights.items():
            yield self.registry[h], p

    def is_valid(self, tol: float = TAU_DIST) -> bool:
        if any(p < -tol for p in self.weights.values()):
            return False
        return abs(self.total - 1.0) <= tol

    def without_zeros(self, tol: float = 0.0) -> "SparseDistribution":
        kept = {h: p for h, p in self.weights.items() if p > tol}
        return SparseDistribution(kept, {h: self.registry[h] for h in kept}, self.n)

    def to_json(self) -> list[dict]:
        return [
            {"handle": h, "probability": p, "utilities": list(self.registry[h].utilities)}
            for h, p in sorted(self.weights.items(), key=lambda kv: (-kv[1], kv[0]))
        ]


def sorted_ascending(v: Sequence[float]) -> np.ndarray:
    return np.sort(np.asarray(v, dtype=float), kind="stable")


def leximin_compare(v: Sequence[float], u: Sequence[float], tol: float = DEFAULT_TOL) -> Preference:
    """Compare two utility vectors in the leximin order.

    Both vectors are sorted ascending; the first coordinate where they differ
    by more than ``tol`` decides.
    """
    if len(v) != len(u):
        raise ValueError(f"length mismatch: {len(v)} vs {len(u)}")
    for a, b in zip(sorted_ascending(v), sorted_ascending(u)):
        if abs(a - b) > tol:
            return Preference.STRICTLY_PREFERRED if a > b else Preference.STRICTLY_DISPREFERRED
    return Preference.EQUIVALENT


def leximin_geq(v: Sequence[float], u: Sequence[float], tol: float = DEFAULT_TOL) -> bool:
    return leximin_compare(v, u, tol) is not Preference.STRICTLY_DISPREFERRED


def expected_utilities(x: SparseDistribution) -> np.ndarray:
    """E_i(x): the expected utility of each agent under the lottery."""
    out = np.zeros(x.n)
    for state, p in x.items():
        if p:
            out += p * np.asarray(state.utilities, dtype=float)
    return out


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


def verify_alpha_leximin_approx(
    candidate: Sequence[float],
    optimal: Sequence[float],
    alpha: float,
    tol: float = DEFAULT_TOL,
    eps: float = 0.0,
) -> bool:
    """True iff ``candidate`` is leximin-weakly-preferred over ``alpha * optimal - eps``.

    With ``optimal`` the leximin-optimal expected vector this is equivalent to
    dominating ``alpha * E(x)`` for every lottery x (compare with the
    downgraded optimum, which is leximin-maximal within the downgraded set).
    """
    _check_alpha(alpha)
    target = alpha * np.asarray(optimal, dtype=float) - eps
    return leximin_geq(candidate, target, tol)


def alpha_preferred(x: Sequence[float], y: Sequence[float], alpha: float) -> bool:
    """Hartman-style ``x >_alpha y``: some k with x_i >= y_i below k and x_k > y_k / alpha (sorted)."""
    xs, ys = sorted_ascending(x), sorted_ascending(y)
    for k in range(len(xs)):
        if xs[k] > ys[k] / alpha:
            return True
        if xs[k] < ys[k]:
            return False
    return False


def hartman_approx(candidate: Sequence[float], all_vectors: Iterable[Sequence[float]], alpha: float) -> bool:
    _check_alpha(alpha)
    return not any(alpha_preferred(x, candidate, alpha) for x in all_vectors)


def elementwise_approx(candidate: Sequence[float], optimal: Sequence[float], alpha: float) -> bool:
    if len(candidate) != len(optimal):
        raise ValueError("length mismatch")
    return bool(np.all(sorted_ascending(candidate) >= alpha * sorted_ascending(optimal)))


def downgrade(x: SparseDistribution, alpha: float) -> SparseDistribution:
    """Scale non-degenerate mass by alpha; the degenerate state absorbs the rest."""
    _check_alpha(alpha)
    weights = {h: alpha * p for h, p in x.weights.items() if h != DEGENERATE_HANDLE}
    registry = dict(x.registry)
    weights[DEGENERATE_HANDLE] = 1.0 - math.fsum(weights.values())
    registry.setdefault(DEGENERATE_HANDLE, degenerate_state(x.n))
    return _drop_empty_degenerate(SparseDistribution(weights, registry, x.n), x)


def upgrade(x: SparseDistribution, alpha: float, tol: float = TAU_DIST) -> SparseDistribution:
    """Inverse of :func:`downgrade`; requires non-degenerate mass at most alpha."""
    _check_alpha(alpha)
    mass = x.non_degenerate_mass()
    if mass > alpha + tol:
        raise ValueError(f"non-degenerate mass {mass} exceeds alpha={alpha}")
    weights = {h: p / alpha for h, p in x.weights.items() if h != DEGENERATE_HANDLE}
    registry = dict(x.registry)
    weights[DEGENERATE_HANDLE] = max(0.0, 1.0 - math.fsum(weights.values()))
    registry.setdefault(DEGENERATE_HANDLE, degenerate_state(x.n))
    return _drop_empty_degenerate(SparseDistribution(weights, registry, x.n), x)


def _drop_empty_degenerate(result: SparseDistribution, source: SparseDistribution) -> SparseDistribution:
    # keep the support shape of the input when the degenerate weight vanishes
    if DEGENERATE_HANDLE not in source.weights and abs(result.weights[DEGENERATE_HANDLE]) <= 1e-15:
        weights = {h: p for h, p in result.weights.items() if h != DEGENERATE_HANDLE}
        return SparseDistribution(weights, source.registry, source.n)
    return result


@dataclass
class ApproxVerdicts:
    """The three approximation notions evaluated on one candidate."""

    ours: bool
    hartman: bool
    elementwise: bool
    details: dict = field(default_factory=dict)


def classify_candidate(
    candidate: Sequence[float],
    optimal: Sequence[float],
    all_vectors: Iterable[Sequence[float]],
    alpha: float,
) -> ApproxVerdicts:
    vectors = list(all_vectors)
    return ApproxVerdicts(
        ours=verify_alpha_leximin_approx(candidate, optimal, alpha),
        hartman=hartman_approx(candidate, vectors, alpha),
        elementwise=elementwise_approx(candidate, optimal, alpha),
    )
