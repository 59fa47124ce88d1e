"""Command-line entry point.

Modes:

``solve``
    run the pipeline and print the lottery, expected utilities and per-round log;
``oracle``
    compute the exact leximin optimum by enumeration (small instances);
``compare``
    run both and report the sorted vectors side by side with the verdict;
``verify``
    check a candidate lottery (``--candidate``, a result document) against the
    oracle, or the pipeline's own output when no candidate is given.

Exit status: 0 ok, 2 unreadable input or bad options, 3 instance or pipeline
invariant violated, 4 solver failure, 5 verification failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .apps import SOLVERS, IncompatibleSolver, Instance, InstanceError, build_blackbox, decode_state, load_instance
from .blackbox import SimulatedRandomizedBlackBox
from .core import (
    DEGENERATE_HANDLE,
    EnumerationCapExceeded,
    SparseDistribution,
    StateRecord,
    degenerate_state,
    expected_utilities,
    sorted_ascending,
)
from .lp.ellipsoid import EllipsoidParams, NoFeasiblePoint
from .oracle import DEFAULT_STATE_CAP, brute_force_leximin, enumerate_states, verify_output
from .reduction import PipelineParams, SparseSolverParams, UpperBoundBelowWarmStart, leximin_main_loop

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVARIANT = 3
EXIT_SOLVER = 4
EXIT_VERIFY = 5

log = logging.getLogger("leximin_lottery")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    instance: str
    mode: str = "solve"
    solver: str = "exhaustive"
    fptas_eps: float = 0.1
    alpha_sim: Optional[float] = None
    success_prob: Optional[float] = None
    eps: float = 1e-6
    seed: int = 0
    out: Optional[str] = None
    candidate: Optional[str] = None
    figures: Optional[str] = None
    state_cap: int = DEFAULT_STATE_CAP
    ellipsoid: EllipsoidParams = field(default_factory=EllipsoidParams)
    certificate: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise CliError(EXIT_PARSE, f"--eps must be positive, got {self.eps}")


def _num(x: float) -> float:
    """Round to 12 significant digits so documents are stable and readable."""
    return float(f"{x:.12g}")


def _nums(xs) -> list[float]:
    return [_num(float(v)) for v in xs]


def lottery_entries(instance: Instance, x: SparseDistribution) -> list[dict]:
    rows = []
    for state, p in sorted(x.items(), key=lambda sp: (-sp[1], sp[0].handle)):
        payload = state.payload if not state.is_degenerate else None
        rows.append(
            {
                "handle": state.handle,
                "probability": _num(p),
                "payload": list(payload) if isinstance(payload, tuple) else payload,
                "utilities": _nums(state.utilities),
                "outcome": decode_state(instance, state),
            }
        )
    return rows


def lottery_from_entries(instance: Instance, entries: Sequence[dict]) -> SparseDistribution:
    """Rebuild a lottery from result-document entries, recomputing utilities from payloads.

    An entry whose handle does not match its payload keeps the claimed data,
    so verification flags it instead of silently repairing it.
    """
    pairs = []
    for e in entries:
        payload = e.get("payload")
        if e["handle"] == DEGENERATE_HANDLE or payload is None:
            record = degenerate_state(instance.n)
        else:
            try:
                record = instance.record(tuple(payload) if isinstance(payload, list) else payload)
            except (TypeError, ValueError):
                record = None
            if record is None or record.handle != e["handle"]:
                record = StateRecord(e["handle"], tuple(e.get("utilities", [0.0] * instance.n)), payload)
        pairs.append((record, float(e["probability"])))
    return SparseDistribution.from_pairs(pairs, instance.n)


def _load(config: RunConfig) -> Instance:
    try:
        with open(config.instance) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read instance: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"instance is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CliError(EXIT_PARSE, "instance document must be a JSON object")
    try:
        return load_instance(doc)
    except InstanceError as exc:
        raise CliError(EXIT_INVARIANT, f"invalid instance: {exc}") from exc


def _blackbox(config: RunConfig, instance: Instance):
    try:
        bb = build_blackbox(instance, config.solver, config.fptas_eps, config.state_cap)
    except IncompatibleSolver as exc:
        raise CliError(EXIT_PARSE, str(exc)) from exc
    except EnumerationCapExceeded as exc:
        raise CliError(EXIT_SOLVER, str(exc)) from exc
    if config.alpha_sim is not None or config.success_prob is not None:
        try:
            bb = SimulatedRandomizedBlackBox(bb, config.success_prob or 1.0, config.alpha_sim)
        except ValueError as exc:
            raise CliError(EXIT_PARSE, str(exc)) from exc
    return bb


def _solve(config: RunConfig, instance: Instance, blackbox) -> dict:
    params = PipelineParams(
        eps=config.eps,
        seed=config.seed,
        solver=SparseSolverParams(ellipsoid=config.ellipsoid, certificate=config.certificate),
    )
    try:
        report = leximin_main_loop(instance.n, blackbox, params)
    except AssertionError as exc:
        raise CliError(EXIT_INVARIANT, f"pipeline invariant violated: {exc}") from exc
    except (NoFeasiblePoint, UpperBoundBelowWarmStart, RuntimeError) as exc:
        raise CliError(EXIT_SOLVER, f"solver failure: {exc}") from exc
    x = report.distribution
    E = report.expected
    return {
        "solver": {
            "name": blackbox.name,
            "alpha": _num(blackbox.alpha),
            "success_probability": _num(blackbox.success_probability),
            "repetitions": report.repetitions,
        },
        "parameters": {"eps": _num(report.eps), "seed": config.seed, "iteration_cap": report.iteration_cap},
        "lottery": lottery_entries(instance, x),
        "expected_utilities": _nums(E),
        "sorted_expected": _nums(sorted_ascending(E)),
        "rounds": [
            {
                "t": r.t,
                "z": _num(r.z),
                "probes": len(r.probes),
                "cuts": r.cuts,
                "ellipsoid_iterations": r.ellipsoid_iterations,
                "blackbox_calls": r.blackbox_calls,
            }
            for r in report.rounds
        ],
        "blackbox_calls": report.blackbox_calls,
        "support_size": len(x.support),
        "support_cap": report.support_cap,
        "_distribution": x,
    }


def _oracle(config: RunConfig, instance: Instance) -> tuple[SparseDistribution, list[float]]:
    try:
        x, E = brute_force_leximin(enumerate_states(instance, config.state_cap))
    except EnumerationCapExceeded as exc:
        raise CliError(EXIT_SOLVER, str(exc)) from exc
    except RuntimeError as exc:
        raise CliError(EXIT_SOLVER, f"oracle failure: {exc}") from exc
    return x, list(E)


def run(config: RunConfig) -> tuple[int, dict]:
    """Execute one CLI run; returns the exit status and the result document."""
    instance = _load(config)
    doc: dict = {"schema_version": SCHEMA_VERSION, "mode": config.mode, "instance": instance.to_document()}
    status = EXIT_OK
    if config.mode == "oracle":
        x, E = _oracle(config, instance)
        doc.update(
            {
                "lottery": lottery_entries(instance, x),
                "expected_utilities": _nums(E),
                "sorted_expected": _nums(sorted_ascending(E)),
            }
        )
        return status, doc

    blackbox = _blackbox(config, instance)
    verify_eps = instance.n * config.eps
    if config.mode == "verify" and config.candidate:
        try:
            with open(config.candidate) as fh:
                cand_doc = json.load(fh)
            candidate = lottery_from_entries(instance, cand_doc["lottery"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CliError(EXIT_PARSE, f"cannot read candidate lottery: {exc}") from exc
    else:
        solved = _solve(config, instance, blackbox)
        candidate = solved.pop("_distribution")
        doc.update(solved)
        if config.mode == "solve":
            return status, doc

    _, E_opt = _oracle(config, instance)
    verdict = verify_output(instance, candidate, blackbox.alpha, verify_eps, oracle_expected=E_opt)
    doc["comparison"] = {
        "alpha": _num(blackbox.alpha),
        "eps": _num(verify_eps),
        "pipeline_sorted": _nums(sorted_ascending(expected_utilities(candidate))),
        "oracle_sorted": _nums(sorted_ascending(E_opt)),
        "target_sorted": _nums(verdict.target_sorted),
    }
    doc["verdict"] = {
        "passed": verdict.passed,
        "valid_distribution": verdict.valid,
        "support_feasible": verdict.support_feasible,
        "approximation": verdict.approximation,
        "failures": verdict.failures,
    }
    if not verdict.passed:
        status = EXIT_VERIFY
    return status, doc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="leximin-lottery",
        description="Leximin-fair lotteries over outcomes from a utilitarian welfare solver.",
    )
    p.add_argument("--instance", required=True, help="instance JSON document")
    p.add_argument("--mode", choices=["solve", "verify", "oracle", "compare"], default="solve")
    p.add_argument("--solver", choices=SOLVERS, default="exhaustive")
    p.add_argument("--fptas-eps", type=float, default=0.1, help="accuracy of knapsack-fptas (alpha = 1 - eps)")
    p.add_argument("--alpha-sim", type=float, help="advertised factor of the simulated randomized wrapper")
    p.add_argument("--success-prob", type=float, help="per-call success probability of the simulated wrapper")
    p.add_argument("--eps", type=float, default=1e-6, help="binary-search width per round")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the result document here instead of stdout")
    p.add_argument("--candidate", help="verify mode: result document whose lottery is checked")
    p.add_argument("--figures", metavar="DIR", help="also render PNG figures of the result into DIR")
    p.add_argument("--state-cap", type=int, default=DEFAULT_STATE_CAP, help="enumeration cap for exhaustive/oracle")
    g = p.add_argument_group("ellipsoid")
    g.add_argument("--k-factor", type=float, default=8.0, help="iteration cap factor c_K in c_K d^2 log(R/tol)")
    g.add_argument("--iterations", type=int, help="fixed iteration cap (overrides the schedule)")
    g.add_argument("--value-tolerance", type=float, default=1e-7)
    g.add_argument("--tau-lp", type=float, default=1e-7)
    g.add_argument("--deep-cuts", action="store_true", help="deep instead of central feasibility cuts")
    g.add_argument(
        "--no-certificate",
        action="store_true",
        help="never stop early on a certified restricted-primal dual; run the ellipsoid to its stopping rule",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        instance=args.instance,
        mode=args.mode,
        solver=args.solver,
        fptas_eps=args.fptas_eps,
        alpha_sim=args.alpha_sim,
        success_prob=args.success_prob,
        eps=args.eps,
        seed=args.seed,
        out=args.out,
        candidate=args.candidate,
        figures=args.figures,
        state_cap=args.state_cap,
        ellipsoid=EllipsoidParams(
            iterations=args.iterations,
            k_factor=args.k_factor,
            value_tolerance=args.value_tolerance,
            tau_lp=args.tau_lp,
            deep_feasibility_cuts=args.deep_cuts,
        ),
        certificate=not args.no_certificate,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = config_from_args(args)
        status, doc = run(config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    text = json.dumps(doc, indent=2) + "\n"
    if config.out:
        with open(config.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if config.figures:
        from .report import write_figures

        for path in write_figures(doc, config.figures):
            log.info("wrote %s", path)
    if status == EXIT_VERIFY:
        print("error: verification failed: " + "; ".join(doc["verdict"]["failures"]), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
