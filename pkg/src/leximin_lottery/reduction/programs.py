"""The per-iteration programs as structured objects.

Iteration ``t`` of the main loop fixes constants ``z_1..z_{t-1}`` and asks
for a lottery maximizing the sum of the ``t`` smallest expected utilities,
subject to every shorter prefix sum staying above ``Z_l = z_1 + ... + z_l``.

The sparse solvers work with the linearized sub-probability program

    min  sum_s x_s
    s.t. l * y_l - sum_i m_{l,i}          >= Z_l     for l = 1..t
         m_{l,i} - y_l + sum_s x_s u_i(s) >= 0       for l = 1..t, i = 1..n
         x, y, m >= 0

whose dual has variables ``q_l`` (first block) and ``v_{l,i}`` (second
block). Dual points are flat vectors ``(q_1..q_t, v_{1,1}..v_{t,n})``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..core import TAU_DIST, SparseDistribution, StateRecord, expected_utilities, sorted_ascending
from ..lp import DenseLP, Sense, solve_dense_lp
from ..lp.ellipsoid import Column


@dataclass(frozen=True)
class ProgramContext:
    """Iteration index ``t``, the fixed ``z_1..z_{t-1}``, and optionally a candidate ``z_t``."""

    t: int
    n: int
    z_prefix: tuple[float, ...] = ()
    z_t: Optional[float] = None

    def __post_init__(self):
        if not 1 <= self.t <= self.n:
            raise ValueError(f"t must lie in [1, {self.n}], got {self.t}")
        if len(self.z_prefix) != self.t - 1:
            raise ValueError(f"expected {self.t - 1} fixed constants, got {len(self.z_prefix)}")

    def with_target(self, z_t: float) -> "ProgramContext":
        return ProgramContext(self.t, self.n, tuple(self.z_prefix), float(z_t))

    def prefix_targets(self) -> np.ndarray:
        """``Z_1..Z_t`` (needs ``z_t``)."""
        if self.z_t is None:
            raise ValueError("context carries no candidate z_t")
        return np.cumsum(np.array(list(self.z_prefix) + [self.z_t], dtype=float))

    @property
    def fixed_total(self) -> float:
        return math.fsum(self.z_prefix)

    @property
    def dual_dim(self) -> int:
        return self.t * (self.n + 1)


@dataclass
class DualPoint:
    """``q`` (length t) and ``v`` (t x n) packed as one vector for the ellipsoid."""

    q: np.ndarray
    v: np.ndarray

    @classmethod
    def unpack(cls, y: np.ndarray, t: int, n: int) -> "DualPoint":
        y = np.asarray(y, dtype=float)
        return cls(y[:t].copy(), y[t:].reshape(t, n).copy())

    def pack(self) -> np.ndarray:
        return np.concatenate([self.q, self.v.ravel()])

    def agent_weights(self) -> np.ndarray:
        """Black-box weights ``c_i = sum_l v_{l,i}``."""
        return self.v.sum(axis=0)


def prefix_sums(E: Sequence[float]) -> np.ndarray:
    return np.cumsum(sorted_ascending(E))


def p1_objective(x: SparseDistribution, ctx: ProgramContext) -> float:
    """Sum of the ``t`` smallest expected utilities minus the fixed constants."""
    return float(prefix_sums(expected_utilities(x))[ctx.t - 1]) - ctx.fixed_total


def p1_feasible(x: SparseDistribution, ctx: ProgramContext, tol: float = 1e-9) -> bool:
    """``x`` is a lottery and each shorter prefix sum meets its target (within ``tol``)."""
    if not x.is_valid(TAU_DIST):
        return False
    prefix = prefix_sums(expected_utilities(x))
    targets = np.cumsum(np.asarray(ctx.z_prefix, dtype=float))
    return bool(np.all(prefix[: ctx.t - 1] >= targets - tol))


def p2_feasible(x: SparseDistribution, ctx: ProgramContext, tol: float = 1e-9) -> bool:
    """Sub-probability check: non-negative weights and every prefix target met, ``Z_t`` included."""
    if any(p < -tol for p in x.weights.values()):
        return False
    prefix = prefix_sums(expected_utilities(x))
    targets = ctx.prefix_targets()
    return bool(np.all(prefix[: ctx.t] >= targets - tol * (1.0 + np.abs(targets))))


# ---------------------------------------------------------------------------
# linearization of "sum of the k smallest entries is at least c"


def linearization_witness(v: Sequence[float], k: int) -> tuple[float, np.ndarray]:
    """Auxiliary values certifying ``sum of k smallest of v >= c`` whenever it holds.

    ``y = v_(k)`` (the k-th smallest entry) and ``m_i = max(0, y - v_i)`` give
    ``k*y - sum(m) = sum of the k smallest``, with ``m_i >= y - v_i`` and ``m >= 0``.
    """
    v = np.asarray(v, dtype=float)
    y = float(sorted_ascending(v)[k - 1])
    return y, np.maximum(0.0, y - v)


def auxiliary_system_feasible(v: Sequence[float], c: float, k: int) -> bool:
    """Does some ``(y, m)`` satisfy ``k*y - sum(m) >= c``, ``m_i >= y - v_i``, ``m >= 0``? (dense LP)"""
    v = np.asarray(v, dtype=float)
    n = len(v)
    # variables: y (free), m_1..m_n
    A = np.zeros((1 + n, 1 + n))
    A[0, 0] = k
    A[0, 1:] = -1.0
    A[1:, 0] = -1.0
    A[1:, 1:] = np.eye(n)
    b = np.concatenate([[c], -v])
    lp = DenseLP(np.zeros(1 + n), A, [Sense.GE] * (1 + n), b, lower=[None] + [0.0] * n)
    return solve_dense_lp(lp).optimal


# ---------------------------------------------------------------------------
# columns of the linearized program


def _row_index(t: int, n: int, l: int, i: int) -> int:
    """Dual coordinate of ``v_{l,i}`` (``l`` 1-based, ``i`` 0-based)."""
    return t + (l - 1) * n + i


def state_column(state: StateRecord, t: int, n: int) -> Column:
    """Column of ``x_s``: ``u_i(s)`` in every second-block row, cost 1."""
    a = np.zeros(t * (n + 1))
    u = np.asarray(state.utilities, dtype=float)
    for l in range(1, t + 1):
        a[_row_index(t, n, l, 0) : _row_index(t, n, l, 0) + n] = u
    return Column(("x", state.handle), a, 1.0)


def auxiliary_columns(t: int, n: int) -> list[Column]:
    """Columns of ``y_l`` and ``m_{l,i}``; their dual rows are checked directly by the separation oracle."""
    d = t * (n + 1)
    cols = []
    for l in range(1, t + 1):
        a = np.zeros(d)
        a[l - 1] = float(l)
        a[_row_index(t, n, l, 0) : _row_index(t, n, l, 0) + n] = -1.0
        cols.append(Column(("y", l), a, 0.0))
    for l in range(1, t + 1):
        for i in range(n):
            a = np.zeros(d)
            a[l - 1] = -1.0
            a[_row_index(t, n, l, i)] = 1.0
            cols.append(Column(("m", l, i), a, 0.0))
    return cols


def primal_rhs(ctx: ProgramContext) -> np.ndarray:
    return np.concatenate([ctx.prefix_targets(), np.zeros(ctx.t * ctx.n)])


@dataclass
class P3Solution:
    """Sparse solution of the linearized program: sub-probabilities on states plus auxiliaries."""

    x: dict[str, float]
    y: np.ndarray
    m: np.ndarray
    registry: dict[str, StateRecord] = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return math.fsum(self.x.values())

    def residuals(self, ctx: ProgramContext) -> np.ndarray:
        """Slack of every row; negative entries are violations."""
        E = np.zeros(ctx.n)
        for h, p in self.x.items():
            E += p * np.asarray(self.registry[h].utilities, dtype=float)
        Z = ctx.prefix_targets()
        first = np.arange(1, ctx.t + 1) * self.y - self.m.sum(axis=1) - Z
        second = self.m - self.y[:, None] + E[None, :]
        return np.concatenate([first, second.ravel()])

    def sub_distribution(self, n: int) -> SparseDistribution:
        return SparseDistribution(dict(self.x), {h: self.registry[h] for h in self.x}, n)


def full_p3_lp(states: Sequence[StateRecord], ctx: ProgramContext) -> DenseLP:
    """The whole linearized program with one explicit column per state (for small instances)."""
    t, n = ctx.t, ctx.n
    cols = [state_column(s, t, n) for s in states] + auxiliary_columns(t, n)
    A = np.column_stack([c.a for c in cols])
    return DenseLP(np.array([c.cost for c in cols]), A, [Sense.GE] * A.shape[0], primal_rhs(ctx))
