"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Only meant for the small programs this package builds (tens of rows and
columns); no sparsity, no bounded-variable tricks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TAU_LP = 1e-7
_PIVOT_TOL = 1e-10


class Sense(str, enum.Enum):
    GE = ">="
    LE = "<="
    EQ = "="


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class DenseLP:
    """``min``/``max`` c.x subject to rows ``A_i . x (sense_i) b_i``.

    ``lower`` holds per-variable lower bounds; ``None`` (or -inf) marks a free variable.
    """

    c: np.ndarray
    A: np.ndarray
    senses: Sequence[Sense]
    b: np.ndarray
    maximize: bool = False
    lower: Optional[Sequence[Optional[float]]] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, len(self.c))
        self.b = np.asarray(self.b, dtype=float)
        self.senses = [Sense(s) for s in self.senses]
        if self.A.shape[0] != len(self.b) or len(self.senses) != len(self.b):
            raise ValueError("rows of A, b and senses disagree")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError("non-finite coefficients")
        if self.lower is None:
            self.lower = [0.0] * len(self.c)

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Signed slack per row; negative means violated."""
        ax = self.A @ x
        out = np.empty(len(self.b))
        for k, s in enumerate(self.senses):
            if s is Sense.GE:
                out[k] = ax[k] - self.b[k]
            elif s is Sense.LE:
                out[k] = self.b[k] - ax[k]
            else:
                out[k] = -abs(ax[k] - self.b[k])
        return out

    def is_feasible(self, x: np.ndarray, tol: float = TAU_LP) -> bool:
        lb = np.array([-np.inf if l is None else l for l in self.lower])
        return bool(np.all(x >= lb - tol) and np.all(self.residuals(x) >= -tol))


@dataclass
class LPResult:
    status: Status
    x: Optional[np.ndarray] = None
    value: Optional[float] = None
    # dual multipliers per row for the problem as stated (>= rows nonneg when minimizing)
    duals: Optional[np.ndarray] = None
    pivots: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Tableau:
    """Standard form tableau: min c.x, A x = b, x >= 0, b >= 0."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.m, self.n = A.shape
        self.T = np.zeros((self.m + 1, self.n + 1))
        self.T[: self.m, : self.n] = A
        self.T[: self.m, -1] = b
        self.basis = [-1] * self.m
        self.pivots = 0

    def set_objective(self, c: np.ndarray) -> None:
        self.T[-1, :] = 0.0
        self.T[-1, : len(c)] = c
        for r, j in enumerate(self.basis):
            if self.T[-1, j] != 0.0:
                self.T[-1, :] -= self.T[-1, j] * self.T[r, :]

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r, :] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r, :])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.pivots += 1

    def run(self, allowed: np.ndarray, max_pivots: int) -> Status:
        """Bland's rule: lowest-index improving column, lowest-index basic variable on ratio ties."""
        T = self.T
        while self.pivots < max_pivots:
            reduced = T[-1, : self.n]
            cand = np.nonzero((reduced < -_PIVOT_TOL) & allowed)[0]
            if cand.size == 0:
                return Status.OPTIMAL
            j = int(cand[0])
            col = T[: self.m, j]
            rows = np.nonzero(col > _PIVOT_TOL)[0]
            if rows.size == 0:
                return Status.UNBOUNDED
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
            r = int(min(ties, key=lambda k: self.basis[k]))
            self.pivot(r, j)
        raise RuntimeError("simplex pivot limit reached")


def solve_dense_lp(lp: DenseLP, max_pivots: int = 50_000) -> LPResult:
    """Solve a small dense LP exactly (up to float round-off) by two-phase simplex.

    Infeasible and unbounded programs are reported through ``status``.
    """
    n = lp.n_vars
    # variable substitution: shifted lower bounds, free variables split in two
    cols = []  # (orig index, sign)
    shift = np.zeros(n)
    for j, l in enumerate(lp.lower):
        if l is None or l == -np.inf:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
        else:
            shift[j] = l
            cols.append((j, 1.0))
    A0 = np.column_stack([lp.A[:, j] * s for j, s in cols]) if cols else np.zeros((len(lp.b), 0))
    c0 = np.array([lp.c[j] * s for j, s in cols])
    if lp.maximize:
        c0 = -c0
    b0 = lp.b - lp.A @ shift

    m = len(b0)
    # slacks for inequalities, then flip rows to get b >= 0
    n_slack = sum(1 for s in lp.senses if s is not Sense.EQ)
    A1 = np.zeros((m, A0.shape[1] + n_slack))
    A1[:, : A0.shape[1]] = A0
    k = A0.shape[1]
    for r, s in enumerate(lp.senses):
        if s is Sense.GE:
            A1[r, k] = -1.0
            k += 1
        elif s is Sense.LE:
            A1[r, k] = 1.0
            k += 1
    row_sign = np.where(b0 < 0, -1.0, 1.0)
    A1 *= row_sign[:, None]
    b1 = b0 * row_sign
    n1 = A1.shape[1]

    # phase 1 with one artificial per row
    tab = _Tableau(np.hstack([A1, np.eye(m)]), b1)
    tab.basis = list(range(n1, n1 + m))
    phase1 = np.concatenate([np.zeros(n1), np.ones(m)])
    tab.set_objective(phase1)
    allowed = np.ones(n1 + m, dtype=bool)
    tab.run(allowed, max_pivots)
    infeas = -tab.T[-1, -1]
    if infeas > 1e-9 * (1.0 + np.abs(b1).max(initial=0.0)):
        return LPResult(Status.INFEASIBLE, pivots=tab.pivots, info={"phase1": infeas})

    # drive remaining artificials out of the basis where possible
    for r in range(m):
        if tab.basis[r] >= n1:
            row = tab.T[r, :n1]
            nz = np.nonzero(np.abs(row) > 1e-9)[0]
            if nz.size:
                tab.pivot(r, int(nz[0]))
    allowed = np.concatenate([np.ones(n1, dtype=bool), np.zeros(m, dtype=bool)])
    cost = np.concatenate([c0, np.zeros(n1 - len(c0)), np.zeros(m)])
    tab.set_objective(cost)
    status = tab.run(allowed, max_pivots)
    if status is Status.UNBOUNDED:
        return LPResult(Status.UNBOUNDED, pivots=tab.pivots)

    z = np.zeros(n1 + m)
    for r, j in enumerate(tab.basis):
        z[j] = tab.T[r, -1]
    x = shift.copy()
    for pos, (j, s) in enumerate(cols):
        x[j] += s * z[pos]
    value = float(lp.c @ x)

    # artificial columns have zero phase-2 cost, so their reduced costs are -pi
    pi = -tab.T[-1, n1 : n1 + m]
    duals = pi * row_sign
    if lp.maximize:
        duals = -duals
    return LPResult(Status.OPTIMAL, x=x, value=value, duals=duals, pivots=tab.pivots)


def dual_of(lp: DenseLP) -> DenseLP:
    """Dual of ``min c.x, A x >= b, x >= 0`` (the only form the tests need)."""
    if lp.maximize or any(s is not Sense.GE for s in lp.senses) or any(l != 0.0 for l in lp.lower):
        raise ValueError("dual_of expects min c.x s.t. A x >= b, x >= 0")
    return DenseLP(
        c=lp.b,
        A=lp.A.T,
        senses=[Sense.LE] * lp.n_vars,
        b=lp.c,
        maximize=True,
    )
