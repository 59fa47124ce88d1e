"""Ellipsoid method on a dual LP driven by an approximate separation oracle.

The primal has few rows and possibly astronomically many columns::

    (P)  min c.x   s.t.  A x >= b,  x >= 0
    (D)  max b.y   s.t.  A^T y <= c, y >= 0

The ellipsoid runs over the dual variables ``y``. Every dual constraint is a
primal column; the columns that triggered feasibility cuts are collected, the
primal restricted to them is solved exactly, and the zero-padded solution is
a sparse approximate optimum of (P).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Optional, Sequence

import numpy as np

from .simplex import TAU_LP, DenseLP, Sense, Status, solve_dense_lp

TAU_PSD = 1e-9


class NoFeasiblePoint(RuntimeError):
    """The ellipsoid never visited an approximately feasible center."""


class ReducedPrimalInfeasible(RuntimeError):
    """The primal restricted to the cut columns has no feasible point."""


@dataclass(frozen=True)
class Column:
    """One primal variable, i.e. one dual constraint ``a.y <= cost``."""

    key: Hashable
    a: np.ndarray
    cost: float


@dataclass(frozen=True)
class Violation:
    """Separation answer for an infeasible point.

    ``column`` is set when the violated dual row is a primal column; a bare
    nonnegativity violation ``y_k < 0`` carries ``nonneg_index`` instead.
    """

    column: Optional[Column] = None
    nonneg_index: Optional[int] = None

    def halfspace(self, dim: int) -> tuple[np.ndarray, float]:
        if self.column is not None:
            return self.column.a, self.column.cost
        a = np.zeros(dim)
        a[self.nonneg_index] = -1.0
        return a, 0.0

    @property
    def row_id(self) -> Hashable:
        return self.column.key if self.column is not None else ("nonneg", self.nonneg_index)


# None means "approximately feasible"
SeparationOracle = Callable[[np.ndarray], Optional[Violation]]


@dataclass
class CutRecord:
    iteration: int
    kind: str  # "feasibility" | "optimality" | "certificate"
    row_id: Hashable
    point: np.ndarray
    value: float  # objective b.y at the point


@dataclass
class CutLog:
    records: list[CutRecord] = field(default_factory=list)
    columns: dict[Hashable, Column] = field(default_factory=dict)

    def feasibility_cuts(self) -> list[CutRecord]:
        return [r for r in self.records if r.kind == "feasibility"]

    def cut_columns(self) -> list[Column]:
        return list(self.columns.values())

    def lines(self) -> Iterable[str]:
        for r in self.records:
            yield f"{r.iteration}\t{r.kind}\t{r.row_id}\t{r.value:.12g}"


@dataclass
class EllipsoidParams:
    iterations: Optional[int] = None  # cap; derived from the schedule when None
    k_factor: float = 8.0
    value_tolerance: float = 1e-7
    tau_lp: float = TAU_LP
    deep_feasibility_cuts: bool = False
    track_volume: bool = False


@dataclass
class EllipsoidResult:
    point: np.ndarray
    value: float
    log: CutLog
    iterations: int
    volume_log: list[float]
    # set when a restricted-primal dual optimum passed the separation oracle
    primal: Optional["SparsePrimal"] = None

    @property
    def certified(self) -> bool:
        return self.primal is not None


def iteration_cap(dim: int, radius: float, params: EllipsoidParams) -> int:
    if params.iterations is not None:
        return int(params.iterations)
    ratio = max(radius / params.value_tolerance, math.e)
    return int(math.ceil(params.k_factor * dim * dim * math.log(ratio)))


def box_ellipsoid(upper: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Smallest axis-aligned ellipsoid containing the box ``0 <= y <= upper``."""
    upper = np.asarray(upper, dtype=float)
    d = len(upper)
    center = upper / 2.0
    half = np.maximum(upper / 2.0, 1e-12) * 1.001
    shape = np.diag(d * half**2)
    return center, shape


def ellipsoid_solve(
    separation: SeparationOracle,
    objective: Sequence[float],
    center: np.ndarray,
    shape: np.ndarray,
    params: EllipsoidParams | None = None,
    certify_with: Optional[Sequence[Column]] = None,
) -> EllipsoidResult:
    """Maximize ``objective . y`` over the dual region described by ``separation``.

    Feasibility cuts keep ``a.y <= cost`` for the violated row; optimality cuts
    keep ``b.y >= b.y_k`` through the current center. Returns the best
    approximately feasible center. Stops at the iteration cap, or earlier once
    the ellipsoid cannot contain a point more than ``value_tolerance`` better
    than the incumbent.

    With ``certify_with`` (columns always present in the restricted primal),
    the restricted primal is re-solved whenever the set of cut columns grows.
    If its optimal dual passes ``separation``, that dual is approximately
    feasible and optimal for a relaxation of the dual program, so the run stops
    with ``result.primal`` set. A violated state row found this way joins the
    cut columns (logged as a ``certificate`` record).
    """
    params = params or EllipsoidParams()
    b = np.asarray(objective, dtype=float)
    x = np.array(center, dtype=float)
    P = np.array(shape, dtype=float)
    # the ellipsoid is kept as {x + L u : |u| <= 1} with P = L L^T; updating the
    # factor keeps it positive definite long after P itself would lose precision
    L = np.linalg.cholesky(P)
    d = len(x)
    radius = math.sqrt(float(np.max(np.diag(P))))
    cap = iteration_cap(d, radius, params)
    log = CutLog()
    best_point: Optional[np.ndarray] = None
    best_value = -math.inf
    logdet = [2.0 * float(np.linalg.slogdet(L)[1])] if params.track_volume else []
    debug = os.environ.get("LEXIMIN_LOG")

    expand = math.sqrt(d * d / (d * d - 1.0)) if d > 1 else 0.0

    checked = -1

    def certify(k: int) -> Optional[SparsePrimal]:
        nonlocal checked
        checked = len(log.columns)
        try:
            primal = recover_sparse_primal(log, certify_with, b)
        except ReducedPrimalInfeasible:
            return None
        y_rp = np.maximum(primal.duals, 0.0)
        answer = separation(y_rp)
        if answer is None:
            return primal
        if answer.column is not None and answer.column.key not in log.columns:
            log.columns[answer.column.key] = answer.column
            log.records.append(CutRecord(k, "certificate", answer.row_id, y_rp, float(b @ y_rp)))
        return None

    def finish(k: int, primal: Optional[SparsePrimal] = None) -> EllipsoidResult:
        if debug:
            with open(debug, "a") as fh:
                for line in log.lines():
                    fh.write(line + "\n")
        if primal is not None:
            y_rp = np.maximum(primal.duals, 0.0)
            return EllipsoidResult(y_rp, float(b @ y_rp), log, k, logdet, primal)
        if best_point is None:
            raise NoFeasiblePoint(f"no approximately feasible center in {k} iterations")
        return EllipsoidResult(best_point, best_value, log, k, logdet)

    if certify_with is not None:
        primal = certify(0)
        if primal is not None:
            return finish(0, primal)

    k = 0
    for k in range(1, cap + 1):
        if certify_with is not None and len(log.columns) > checked:
            primal = certify(k)
            if primal is not None:
                return finish(k, primal)
        violation = separation(x)
        value = float(b @ x)
        if violation is not None:
            a, rhs = violation.halfspace(d)
            kind = "feasibility"
            if violation.column is not None:
                log.columns.setdefault(violation.column.key, violation.column)
            depth_num = float(a @ x - rhs)
            log.records.append(CutRecord(k, kind, violation.row_id, x.copy(), value))
        else:
            if value > best_value:
                best_value, best_point = value, x.copy()
            a = -b
            depth_num = 0.0
            log.records.append(CutRecord(k, "optimality", None, x.copy(), value))
            if not np.any(a):
                break

        La = L.T @ a
        root = float(np.linalg.norm(La))
        if root <= TAU_PSD:
            break
        w = La / root
        g = L @ w
        depth = depth_num / root if params.deep_feasibility_cuts and violation is not None else 0.0
        depth = min(max(depth, 0.0), 0.999)
        if d == 1:
            # an interval: keep the part between x - g and x - depth * g
            x = x - 0.5 * (1.0 + depth) * g
            L = L * (0.5 * (1.0 - depth))
        else:
            x = x - (1.0 + d * depth) / (d + 1.0) * g
            # P' = r^2 (P - coef g g^T) written as L' = r L (I - beta w w^T)
            beta = 1.0 - math.sqrt((d - 1.0) * (1.0 - depth) / ((d + 1.0) * (1.0 + depth)))
            L = expand * math.sqrt(1.0 - depth * depth) * (L - beta * np.outer(g, w))
        if params.track_volume:
            logdet.append(2.0 * float(np.linalg.slogdet(L)[1]))

        if best_point is not None and np.any(b):
            reach = float(b @ x) + float(np.linalg.norm(L.T @ b))
            if reach <= best_value + params.value_tolerance * (1.0 + abs(best_value)):
                break

    return finish(k)


@dataclass
class SparsePrimal:
    values: dict[Hashable, float]
    objective: float
    columns: list[Column]
    dual_value: float
    duals: np.ndarray


def recover_sparse_primal(
    log: CutLog,
    always_included: Sequence[Column],
    rhs: Sequence[float],
) -> SparsePrimal:
    """Solve the primal restricted to the cut columns plus ``always_included``.

    Every column absent from the restricted program is implicitly zero, so
    the result is feasible for the full primal whenever it exists.
    """
    columns: dict[Hashable, Column] = {c.key: c for c in always_included}
    for col in log.cut_columns():
        columns.setdefault(col.key, col)
    cols = list(columns.values())
    b = np.asarray(rhs, dtype=float)
    if not cols:
        if np.all(b <= 0):
            return SparsePrimal({}, 0.0, [], 0.0, np.zeros(len(b)))
        raise ReducedPrimalInfeasible("no columns available")
    A = np.column_stack([c.a for c in cols])
    lp = DenseLP(
        c=np.array([c.cost for c in cols]),
        A=A,
        senses=[Sense.GE] * len(b),
        b=b,
    )
    res = solve_dense_lp(lp)
    if res.status is Status.INFEASIBLE:
        raise ReducedPrimalInfeasible("restricted primal is infeasible")
    if res.status is not Status.OPTIMAL:
        raise RuntimeError(f"restricted primal returned {res.status}")
    values = {c.key: float(v) for c, v in zip(cols, res.x)}
    return SparsePrimal(values, float(res.value), cols, float(res.duals @ b), res.duals)
