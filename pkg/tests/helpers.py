"""Instance generators and oracle hooks shared by the test modules."""

from __future__ import annotations

import numpy as np

from leximin_lottery.apps import AllocationInstance, BudgetInstance, ExplicitInstance, GiveawayInstance
from leximin_lottery.core import StateRecord


def two_state_fixture() -> list[StateRecord]:
    """Two agents; s1 gives both 10, s2 gives agent 2 alone 1000."""
    return [StateRecord("s1", (10.0, 10.0)), StateRecord("s2", (0.0, 1000.0))]


def random_explicit(rng: np.random.Generator, n_choices=(2, 3), max_states=8, top=10) -> ExplicitInstance:
    n = int(rng.choice(n_choices))
    k = int(rng.integers(1, max_states + 1))
    table = tuple(tuple(float(v) for v in rng.integers(0, top + 1, n)) for _ in range(k))
    return ExplicitInstance(n, tuple(f"s{j + 1}" for j in range(k)), table)


def random_additive(rng: np.random.Generator, n=3, m=4, top=10) -> AllocationInstance:
    values = tuple(tuple(float(v) for v in rng.integers(0, top + 1, m)) for _ in range(n))
    return AllocationInstance(n, m, values=values)


def random_coverage(rng: np.random.Generator, n=2, m=4, elements=5, top=10) -> AllocationInstance:
    covers = tuple(
        tuple(sorted(rng.choice(elements, size=int(rng.integers(1, 3)), replace=False).tolist())) for _ in range(m)
    )
    weights = tuple(tuple(float(v) for v in rng.integers(0, top + 1, elements)) for _ in range(n))
    return AllocationInstance(n, m, covers=covers, element_weights=weights)


def random_giveaway(rng: np.random.Generator, max_groups=5, max_capacity=10) -> GiveawayInstance:
    while True:
        cap = int(rng.integers(2, max_capacity + 1))
        n = int(rng.integers(2, max_groups + 1))
        sizes = tuple(int(v) for v in rng.integers(1, cap + 1, n))
        if sum(sizes) > cap:
            return GiveawayInstance(sizes, cap)


def random_budget(rng: np.random.Generator, max_projects=6, max_budget=12, voters=(2, 3)) -> BudgetInstance:
    budget = int(rng.integers(3, max_budget + 1))
    p = int(rng.integers(2, max_projects + 1))
    costs = tuple(int(v) for v in rng.integers(1, budget + 1, p))
    n = int(rng.choice(voters))
    utilities = tuple(tuple(float(v) for v in rng.integers(0, 6, p)) for _ in range(n))
    return BudgetInstance(costs, budget, utilities)


def false_approvals(rate: float, seed: int):
    """Separation wrapper that turns a violation into an approval with probability ``rate``."""
    rng = np.random.default_rng(seed)

    def wrap(separation):
        def oracle(y):
            answer = separation(y)
            if answer is not None and rng.random() < rate:
                return None
            return answer

        return oracle

    return wrap


def sorted_gap(a, b) -> float:
    return float(np.max(np.abs(np.sort(np.asarray(a, dtype=float)) - np.sort(np.asarray(b, dtype=float)))))


def random_covering_lp(rng: np.random.Generator, max_cols=6, max_rows=4):
    """``min c.x, A x >= b, x >= 0`` with every row coverable, so both sides are feasible and bounded."""
    from leximin_lottery.lp import DenseLP, Sense

    cols = int(rng.integers(1, max_cols + 1))
    rows = int(rng.integers(1, max_rows + 1))
    A = rng.integers(0, 6, (rows, cols)).astype(float)
    for i in range(rows):
        if not A[i].any():
            A[i, rng.integers(cols)] = float(rng.integers(1, 6))
    c = rng.integers(1, 11, cols).astype(float)
    b = rng.integers(0, 11, rows).astype(float)
    return DenseLP(c=c, A=A, senses=[Sense.GE] * rows, b=b)


def covering_separation(lp, beta=0.0, tau=1e-7, wrapper=None):
    """Dual separation for a covering LP: nonnegativity first, then the most violated column.

    ``beta`` relaxes approvals to ``A^T y <= (1 + beta) c``.
    """
    from leximin_lottery.lp.ellipsoid import Column, Violation

    columns = [Column(("x", j), lp.A[:, j].copy(), float(lp.c[j])) for j in range(lp.n_vars)]

    def separation(y):
        y = np.asarray(y, dtype=float)
        if np.any(y < -tau):
            return Violation(nonneg_index=int(np.argmin(y)))
        excess = [col.a @ y - (1.0 + beta) * col.cost for col in columns]
        j = int(np.argmax(excess))
        if excess[j] > tau:
            return Violation(column=columns[j])
        return None

    return separation if wrapper is None else wrapper(separation), columns


def dual_box_upper(lp) -> np.ndarray:
    """Per-coordinate bound on the dual region ``A^T y <= c, y >= 0``."""
    upper = np.empty(len(lp.b))
    for i in range(len(lp.b)):
        upper[i] = min(lp.c[j] / lp.A[i, j] for j in range(lp.n_vars) if lp.A[i, j] > 0)
    return upper
