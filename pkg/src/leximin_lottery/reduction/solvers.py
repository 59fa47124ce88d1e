"""Separation oracle for the dual program and the sparse solvers built on it.

The chain, innermost first:

* :class:`D3Separation` checks the polynomially many auxiliary dual rows
  directly and delegates the exponentially many state rows to the black-box;
* :func:`solve_p3_sparse` runs the ellipsoid on the dual with that oracle and
  recovers a sparse primal solution from the cut states;
* :func:`solve_p2_sparse` keeps only the state weights;
* :func:`weak_feasibility_oracle` turns a sub-probability of total mass at most
  one into a lottery by padding the degenerate state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from ..blackbox import BlackBox
from ..core import DEGENERATE_HANDLE, TAU_DIST, SparseDistribution, StateRecord, degenerate_state
from ..lp import TAU_LP
from ..lp.ellipsoid import (
    CutLog,
    EllipsoidParams,
    ReducedPrimalInfeasible,
    SeparationOracle,
    Violation,
    box_ellipsoid,
    ellipsoid_solve,
    recover_sparse_primal,
)
from .programs import DualPoint, P3Solution, ProgramContext, auxiliary_columns, primal_rhs, state_column

log = logging.getLogger(__name__)


@dataclass
class DualBox:
    """Coordinate-wise upper bounds containing the optimal dual points.

    ``agent_caps[i]`` bounds ``sum_l v_{l,i}``: some state gives agent ``i``
    utility ``u > 0``, and its dual row forces ``sum_l v_{l,i} * u <= 1``.
    Agents no state serves get ``zero_cap``.
    """

    agent_caps: np.ndarray
    zero_cap: float

    @classmethod
    def from_probe_states(cls, probes: list[StateRecord], n: int) -> "DualBox":
        best = np.zeros(n)
        for s in probes:
            best = np.maximum(best, np.asarray(s.utilities, dtype=float))
        pos = best > 0
        caps = np.where(pos, 1.0 / np.where(pos, best, 1.0), 0.0)
        zero_cap = float(n * caps.max()) if pos.any() else 1.0
        caps = np.where(pos, caps, zero_cap)
        return cls(caps, zero_cap)

    def upper(self, t: int, n: int) -> np.ndarray:
        """Box ``0 <= (q, v) <= upper`` for a program with ``t`` prefix rows.

        From ``l*q_l <= sum_i v_{l,i}`` and ``v_{l,i} <= q_l``: ``q_l`` is at
        most the positive-agent caps divided by ``l - k0`` (``k0`` agents no
        state serves), and ``v_{l,i} <= min(q_l, cap_i)``.
        """
        served = self.agent_caps[self.agent_caps < self.zero_cap]
        k0 = n - len(served)
        total = float(served.sum())
        q = np.empty(t)
        for l in range(1, t + 1):
            q[l - 1] = total / (l - k0) if l > k0 else max(total, self.zero_cap)
        v = np.minimum(q[:, None], self.agent_caps[None, :])
        return np.concatenate([q, v.ravel()])


@dataclass
class SeparationStats:
    calls: int = 0
    blackbox_calls: int = 0
    direct_violations: int = 0
    state_violations: int = 0
    approvals: int = 0


class D3Separation:
    """Approximate separation for the dual of the linearized program.

    A point is declared approximately feasible when no auxiliary row is
    violated by more than ``tau`` and the state the black-box returns for
    weights ``c_i = sum_l v_{l,i}`` has weighted welfare at most ``1 + tau``.
    In that case every state row holds up to the black-box's factor ``1/alpha``.
    """

    def __init__(self, ctx: ProgramContext, blackbox: BlackBox, tau: float = TAU_LP):
        self.ctx = ctx
        self.blackbox = blackbox
        self.tau = tau
        self.aux = auxiliary_columns(ctx.t, ctx.n)
        self._aux_A = np.array([c.a for c in self.aux])
        self.registry: dict[str, StateRecord] = {}
        self.stats = SeparationStats()

    def __call__(self, y: np.ndarray) -> Optional[Violation]:
        self.stats.calls += 1
        y = np.asarray(y, dtype=float)
        worst_neg = int(np.argmin(y))
        aux_excess = self._aux_A @ y  # every auxiliary row has cost 0
        worst_aux = int(np.argmax(aux_excess)) if len(aux_excess) else -1
        neg_gap = -y[worst_neg]
        aux_gap = aux_excess[worst_aux] if worst_aux >= 0 else -np.inf
        if max(neg_gap, aux_gap) > self.tau:
            self.stats.direct_violations += 1
            if neg_gap >= aux_gap:
                return Violation(nonneg_index=worst_neg)
            return Violation(column=self.aux[worst_aux])

        point = DualPoint.unpack(y, self.ctx.t, self.ctx.n)
        weights = np.maximum(point.agent_weights(), 0.0)
        state = self.blackbox.solve(weights)
        self.stats.blackbox_calls += 1
        if state.welfare(weights) > 1.0 + self.tau:
            self.stats.state_violations += 1
            self.registry.setdefault(state.handle, state)
            return Violation(column=state_column(state, self.ctx.t, self.ctx.n))
        self.stats.approvals += 1
        return None


def separation_oracle_d3(
    point: Union[DualPoint, np.ndarray], ctx: ProgramContext, blackbox: BlackBox, tau: float = TAU_LP
) -> Optional[Violation]:
    """One-shot form of :class:`D3Separation`: ``None`` means approximately feasible."""
    y = point.pack() if isinstance(point, DualPoint) else np.asarray(point, dtype=float)
    return D3Separation(ctx, blackbox, tau)(y)


@dataclass
class SparseSolverParams:
    """Knobs for one sparse solve of the linearized program."""

    ellipsoid: EllipsoidParams = field(default_factory=EllipsoidParams)
    tau_lp: float = TAU_LP
    tau_dist: float = TAU_DIST
    # stop as soon as the restricted program's dual optimum passes the separation oracle
    certificate: bool = True
    # test hook: wraps the separation oracle (e.g. to inject false approvals)
    separation_wrapper: Optional[Callable[[SeparationOracle], SeparationOracle]] = None


@dataclass
class P3Run:
    """A sparse solution plus what it took to get it."""

    solution: Optional[P3Solution]
    log: CutLog
    iterations: int
    dual_value: float
    certified: bool
    stats: SeparationStats


def solve_p3_sparse(
    ctx: ProgramContext,
    blackbox: BlackBox,
    dual_box: DualBox,
    params: Optional[SparseSolverParams] = None,
    seed_states: tuple[StateRecord, ...] = (),
) -> P3Run:
    """Approximately optimal sparse solution of the linearized program at ``ctx``.

    ``seed_states`` are offered to the restricted primal from the start (their
    columns are feasible columns of the full program, so any solution using them
    stays feasible). Returns ``solution=None`` when the restricted primal over
    the collected states is infeasible.
    """
    params = params or SparseSolverParams()
    t, n = ctx.t, ctx.n
    separation = D3Separation(ctx, blackbox, params.tau_lp)
    oracle: SeparationOracle = separation
    if params.separation_wrapper is not None:
        oracle = params.separation_wrapper(separation)
    b = primal_rhs(ctx)
    fixed = auxiliary_columns(t, n)
    registry: dict[str, StateRecord] = {}
    for s in seed_states:
        registry[s.handle] = s
        fixed.append(state_column(s, t, n))

    center, shape = box_ellipsoid(dual_box.upper(t, n))
    result = ellipsoid_solve(
        oracle,
        b,
        center,
        shape,
        params.ellipsoid,
        certify_with=fixed if params.certificate else None,
    )
    registry.update(separation.registry)
    try:
        primal = result.primal if result.primal is not None else recover_sparse_primal(result.log, fixed, b)
    except ReducedPrimalInfeasible:
        return P3Run(None, result.log, result.iterations, result.value, result.certified, separation.stats)

    x: dict[str, float] = {}
    y = np.zeros(t)
    m = np.zeros((t, n))
    for key, val in primal.values.items():
        if key[0] == "x":
            if val > 0:
                x[key[1]] = x.get(key[1], 0.0) + val
        elif key[0] == "y":
            y[key[1] - 1] = val
        else:
            m[key[1] - 1, key[2]] = val
    sol = P3Solution(x, y, m, {h: registry[h] for h in x})
    return P3Run(sol, result.log, result.iterations, result.value, result.certified, separation.stats)


def solve_p2_sparse(
    ctx: ProgramContext,
    blackbox: BlackBox,
    dual_box: DualBox,
    params: Optional[SparseSolverParams] = None,
    seed_states: tuple[StateRecord, ...] = (),
) -> tuple[Optional[SparseDistribution], P3Run]:
    """The state part of :func:`solve_p3_sparse` as a sub-probability distribution."""
    run = solve_p3_sparse(ctx, blackbox, dual_box, params, seed_states)
    if run.solution is None:
        return None, run
    return run.solution.sub_distribution(ctx.n), run


@dataclass
class Feasible:
    x: SparseDistribution
    run: P3Run


@dataclass
class InfeasibleUnderXalpha:
    run: P3Run
    mass: float  # total mass the sparse solver needed (inf when it found no solution)


def pad_with_degenerate(x: SparseDistribution, tau: float = TAU_DIST) -> SparseDistribution:
    """Complete a sub-probability to a lottery with the degenerate state.

    A total slightly above one (within ``tau``) is rescaled; a padding weight
    within ``tau`` of zero is dropped.
    """
    total = x.total
    weights = dict(x.weights)
    registry = dict(x.registry)
    if total > 1.0:
        weights = {h: p / total for h, p in weights.items()}
        total = 1.0
    rest = 1.0 - total
    if rest > tau or DEGENERATE_HANDLE in weights:
        weights[DEGENERATE_HANDLE] = weights.get(DEGENERATE_HANDLE, 0.0) + rest
        registry.setdefault(DEGENERATE_HANDLE, degenerate_state(x.n))
    elif rest > 0:
        # spread the sliver proportionally instead of keeping a near-zero entry
        weights = {h: p / total for h, p in weights.items()}
    return SparseDistribution(weights, registry, x.n)


def weak_feasibility_oracle(
    ctx: ProgramContext,
    blackbox: BlackBox,
    dual_box: DualBox,
    params: Optional[SparseSolverParams] = None,
    seed_states: tuple[StateRecord, ...] = (),
) -> Union[Feasible, InfeasibleUnderXalpha]:
    """Decide whether the target ``z_t`` is reachable, in the weak sense.

    ``Feasible`` carries a lottery meeting every prefix target, ``z_t``
    included. ``InfeasibleUnderXalpha`` certifies that no lottery placing mass
    at most ``alpha`` off the degenerate state reaches ``z_t``.
    """
    params = params or SparseSolverParams()
    x, run = solve_p2_sparse(ctx, blackbox, dual_box, params, seed_states)
    if x is None:
        return InfeasibleUnderXalpha(run, math.inf)
    mass = x.total
    if mass <= 1.0 + params.tau_dist:
        return Feasible(pad_with_degenerate(x, params.tau_dist), run)
    return InfeasibleUnderXalpha(run, mass)
