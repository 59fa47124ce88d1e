"""Application front-ends: indivisible-goods allocation, giveaway lotteries, participatory budgeting.

Each instance knows how to turn a payload (its own outcome encoding) into a
:class:`StateRecord`, how to check a record, how to list all of its states
(for the oracle), and how to describe a state to a person. Payload encodings
are canonical, so equal outcomes always get equal handles:

* allocation -- tuple of owner indices, one per good;
* giveaway -- sorted tuple of admitted group indices;
* budget -- sorted tuple of funded project indices;
* explicit -- the state's label.

Indices are 0-based inside payloads; human-readable descriptions count from 1.
An empty giveaway or budget outcome *is* the degenerate state.

Instance documents (JSON)::

    {"kind": "allocation", "agents": 3, "goods": 4, "values": [[...4 numbers...], ...]}
    {"kind": "allocation", "agents": 2, "goods": 4, "valuation": "coverage",
     "covers": [[0, 1], [1], [2, 3], [3]],          # elements each good covers
     "element_weights": [[...], [...]]}              # per agent, per element
    {"kind": "giveaway", "sizes": [2, 2, 3], "capacity": 4}
    {"kind": "budget", "agents": 2, "costs": [3, 5], "budget": 6,
     "utilities": [[1, 0], [2, 4]]}                  # per voter, per project
    {"kind": "explicit", "agents": 2, "states": [[10, 10], [0, 1000]]}
"""

from __future__ import annotations

import abc
import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import jsonschema
import numpy as np

from .blackbox import (
    BlackBox,
    ExhaustiveBlackBox,
    FunctionBlackBox,
    greedy_additive_allocate,
    greedy_submodular_allocate,
    knapsack_exact,
    knapsack_fptas,
)
from .core import DEGENERATE_HANDLE, EnumerationCapExceeded, StateRecord, degenerate_state

SOLVERS = ("exhaustive", "greedy-additive", "greedy-submodular", "knapsack-exact", "knapsack-fptas")


class InstanceError(ValueError):
    """The instance document is malformed or violates an instance invariant."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class IncompatibleSolver(ValueError):
    """The requested black-box does not apply to this kind of instance."""


def state_handle(kind: str, payload: Any) -> str:
    digest = hashlib.sha256(json.dumps([kind, payload], separators=(",", ":")).encode()).hexdigest()
    return f"{kind[0]}{digest[:15]}"


def _one_based(ids: Sequence[int]) -> str:
    return "{" + ",".join(str(i + 1) for i in ids) + "}"


class Instance(abc.ABC):
    """Common behaviour of the application instances."""

    kind: str
    n: int

    @abc.abstractmethod
    def canonical(self, payload: Any) -> Any:
        """Normalize a payload (sort, tuple-ize); raises ValueError when malformed."""

    @abc.abstractmethod
    def utilities_of(self, payload: Any) -> tuple[float, ...]: ...

    @abc.abstractmethod
    def is_feasible_payload(self, payload: Any) -> bool: ...

    @abc.abstractmethod
    def payloads(self) -> Any:
        """Iterate over every feasible non-empty payload."""

    @abc.abstractmethod
    def state_count(self) -> int:
        """Cheap upper bound on the number of payloads, checked before enumerating."""

    @abc.abstractmethod
    def describe(self, payload: Any) -> dict: ...

    @abc.abstractmethod
    def to_document(self) -> dict: ...

    def is_empty(self, payload: Any) -> bool:
        return False

    def record(self, payload: Any) -> StateRecord:
        payload = self.canonical(payload)
        if self.is_empty(payload):
            return degenerate_state(self.n)
        return StateRecord(state_handle(self.kind, payload), self.utilities_of(payload), payload)

    def is_feasible_record(self, record: StateRecord) -> bool:
        """The record is the degenerate state, or a feasible payload with matching handle and utilities."""
        if record.is_degenerate:
            return all(u == 0 for u in record.utilities) and len(record.utilities) == self.n
        try:
            payload = self.canonical(record.payload)
        except (TypeError, ValueError):
            return False
        if not self.is_feasible_payload(payload):
            return False
        again = self.record(payload)
        return again.handle == record.handle and again.utilities == tuple(record.utilities)

    def enumerate_states(self, cap: int) -> list[StateRecord]:
        if self.state_count() + 1 > cap:
            raise EnumerationCapExceeded(f"{self.kind} instance has up to {self.state_count()} states, cap is {cap}")
        return [self.record(p) for p in self.payloads()]


def decode_state(instance: Instance, record: StateRecord) -> dict:
    """Human-readable outcome of a state; the degenerate state is the empty outcome."""
    if record.is_degenerate:
        return {"empty": True, "text": "empty outcome"}
    if not instance.is_feasible_record(record):
        raise ValueError(f"state {record.handle} does not belong to this {instance.kind} instance")
    return instance.describe(record.payload)


@dataclass(frozen=True)
class AllocationInstance(Instance):
    """``m`` indivisible goods; every good goes to exactly one of ``n`` agents.

    Utilities are either additive (``values[i][g]``) or weighted coverage:
    good ``g`` covers the elements ``covers[g]`` and agent ``i`` values a
    bundle at the total ``element_weights[i][e]`` of the elements it covers.
    """

    n: int
    m: int
    values: Optional[tuple[tuple[float, ...], ...]] = None
    covers: Optional[tuple[tuple[int, ...], ...]] = None
    element_weights: Optional[tuple[tuple[float, ...], ...]] = None
    kind: str = "allocation"

    @property
    def additive(self) -> bool:
        return self.values is not None

    @property
    def additive_values(self) -> np.ndarray:
        if self.values is None:
            raise AttributeError("coverage allocation has no additive value table")
        return np.array(self.values, dtype=float).reshape(self.n, self.m)

    def bundle_value(self, agent: int, goods: frozenset) -> float:
        if self.values is not None:
            return math.fsum(self.values[agent][g] for g in goods)
        covered = set()
        for g in goods:
            covered.update(self.covers[g])
        return math.fsum(self.element_weights[agent][e] for e in sorted(covered))

    def canonical(self, payload):
        owners = tuple(int(a) for a in payload)
        if len(owners) != self.m:
            raise ValueError(f"allocation needs one owner per good ({self.m}), got {len(owners)}")
        return owners

    def is_feasible_payload(self, payload) -> bool:
        return len(payload) == self.m and all(0 <= a < self.n for a in payload)

    def utilities_of(self, payload) -> tuple[float, ...]:
        bundles = [frozenset(g for g, a in enumerate(payload) if a == i) for i in range(self.n)]
        return tuple(float(self.bundle_value(i, bundles[i])) for i in range(self.n))

    def payloads(self):
        return itertools.product(range(self.n), repeat=self.m)

    def state_count(self) -> int:
        return self.n**self.m

    def describe(self, payload) -> dict:
        bundles = {str(i + 1): [g + 1 for g, a in enumerate(payload) if a == i] for i in range(self.n)}
        text = "; ".join(f"agent {i} gets {_one_based([g - 1 for g in b]) if b else '{}'}" for i, b in bundles.items())
        return {"bundles": bundles, "text": text}

    def to_document(self) -> dict:
        doc: dict[str, Any] = {"kind": self.kind, "agents": self.n, "goods": self.m}
        if self.values is not None:
            doc["values"] = [list(r) for r in self.values]
        else:
            doc["valuation"] = "coverage"
            doc["covers"] = [list(c) for c in self.covers]
            doc["element_weights"] = [list(w) for w in self.element_weights]
        return doc


class _SubsetInstance(Instance):
    """Shared code for knapsack-shaped instances (pick a subset of items within a capacity)."""

    item_weights: tuple[int, ...]
    capacity: int

    def canonical(self, payload):
        ids = tuple(sorted(int(j) for j in payload))
        if len(set(ids)) != len(ids):
            raise ValueError("repeated item in subset")
        return ids

    def is_empty(self, payload) -> bool:
        return len(payload) == 0

    def is_feasible_payload(self, payload) -> bool:
        if any(not 0 <= j < len(self.item_weights) for j in payload):
            return False
        return sum(self.item_weights[j] for j in payload) <= self.capacity

    def payloads(self):
        for r in range(1, len(self.item_weights) + 1):
            for subset in itertools.combinations(range(len(self.item_weights)), r):
                if self.is_feasible_payload(subset):
                    yield subset

    def state_count(self) -> int:
        return 2 ** len(self.item_weights)

    @abc.abstractmethod
    def item_values(self, weights: Sequence[float]) -> np.ndarray: ...


@dataclass(frozen=True)
class GiveawayInstance(_SubsetInstance):
    """Groups of sizes ``w_i`` compete for ``W`` seats; a group is admitted whole or not at all.

    Agent ``i`` is group ``i``: utility 1 when admitted, 0 otherwise.
    """

    sizes: tuple[int, ...]
    capacity: int
    kind: str = "giveaway"

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def item_weights(self) -> tuple[int, ...]:
        return self.sizes

    def utilities_of(self, payload) -> tuple[float, ...]:
        chosen = set(payload)
        return tuple(1.0 if i in chosen else 0.0 for i in range(self.n))

    def item_values(self, weights: Sequence[float]) -> np.ndarray:
        return np.asarray(weights, dtype=float)

    def describe(self, payload) -> dict:
        load = sum(self.sizes[j] for j in payload)
        return {
            "admitted": [j + 1 for j in payload],
            "load": load,
            "capacity": self.capacity,
            "text": f"groups {_one_based(payload)} admitted, load {load}/{self.capacity}",
        }

    def to_document(self) -> dict:
        return {"kind": self.kind, "agents": self.n, "sizes": list(self.sizes), "capacity": self.capacity}


@dataclass(frozen=True)
class BudgetInstance(_SubsetInstance):
    """Projects with integer costs, a budget, and additive voter utilities over funded projects."""

    costs: tuple[int, ...]
    budget: int
    utilities: tuple[tuple[float, ...], ...]  # voter x project
    kind: str = "budget"

    @property
    def n(self) -> int:
        return len(self.utilities)

    @property
    def item_weights(self) -> tuple[int, ...]:
        return self.costs

    @property
    def capacity(self) -> int:
        return self.budget

    def utilities_of(self, payload) -> tuple[float, ...]:
        return tuple(math.fsum(row[p] for p in payload) for row in self.utilities)

    def item_values(self, weights: Sequence[float]) -> np.ndarray:
        return pb_item_values(self, weights)

    def describe(self, payload) -> dict:
        cost = sum(self.costs[p] for p in payload)
        return {
            "funded": [p + 1 for p in payload],
            "cost": cost,
            "budget": self.budget,
            "text": f"projects {_one_based(payload)} funded, cost {cost}/{self.budget}",
        }

    def to_document(self) -> dict:
        return {
            "kind": self.kind,
            "agents": self.n,
            "costs": list(self.costs),
            "budget": self.budget,
            "utilities": [list(r) for r in self.utilities],
        }


def pb_item_values(instance: BudgetInstance, weights: Sequence[float]) -> np.ndarray:
    """Weighted value of each project: ``sum_i c_i * u_i(p)``."""
    c = np.asarray(weights, dtype=float)
    U = np.array(instance.utilities, dtype=float).reshape(instance.n, len(instance.costs))
    if c.shape != (instance.n,):
        raise ValueError(f"expected {instance.n} weights, got {c.shape}")
    return c @ U


@dataclass(frozen=True)
class ExplicitInstance(Instance):
    """A plain table of states, one utility vector per labelled state."""

    n: int
    labels: tuple[str, ...]
    table: tuple[tuple[float, ...], ...]
    kind: str = "explicit"

    def canonical(self, payload):
        if payload not in self.labels:
            raise ValueError(f"unknown state label {payload!r}")
        return payload

    def is_feasible_payload(self, payload) -> bool:
        return payload in self.labels

    def utilities_of(self, payload) -> tuple[float, ...]:
        return self.table[self.labels.index(payload)]

    def record(self, payload) -> StateRecord:
        payload = self.canonical(payload)
        return StateRecord(payload, self.utilities_of(payload), payload)

    def payloads(self):
        return iter(self.labels)

    def state_count(self) -> int:
        return len(self.labels)

    def describe(self, payload) -> dict:
        return {"state": payload, "text": f"state {payload}"}

    def to_document(self) -> dict:
        return {
            "kind": self.kind,
            "agents": self.n,
            "states": [{"label": l, "utilities": list(u)} for l, u in zip(self.labels, self.table)],
        }


# ---------------------------------------------------------------------------
# loading

_NUM = {"type": "number", "minimum": 0}
_INT_POS = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["allocation", "giveaway", "budget", "explicit"]}},
    "allOf": [
        {
            "if": {"properties": {"kind": {"const": "allocation"}}},
            "then": {
                "required": ["agents", "goods"],
                "properties": {
                    "agents": _INT_POS,
                    "goods": {"type": "integer", "minimum": 0},
                    "valuation": {"enum": ["additive", "coverage"]},
                    "values": {"type": "array", "items": {"type": "array", "items": _NUM}},
                    "covers": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
                    "element_weights": {"type": "array", "items": {"type": "array", "items": _NUM}},
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "giveaway"}}},
            "then": {
                "required": ["sizes", "capacity"],
                "properties": {
                    "agents": _INT_POS,
                    "sizes": {"type": "array", "minItems": 1, "items": _INT_POS},
                    "capacity": _INT_POS,
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "budget"}}},
            "then": {
                "required": ["costs", "budget", "utilities"],
                "properties": {
                    "agents": _INT_POS,
                    "costs": {"type": "array", "items": _INT_POS},
                    "budget": _INT_POS,
                    "utilities": {"type": "array", "minItems": 1, "items": {"type": "array", "items": _NUM}},
                },
            },
        },
        {
            "if": {"properties": {"kind": {"const": "explicit"}}},
            "then": {
                "required": ["agents", "states"],
                "properties": {
                    "agents": _INT_POS,
                    "states": {
                        "type": "array",
                        "items": {
                            "oneOf": [
                                {"type": "array", "items": _NUM},
                                {
                                    "type": "object",
                                    "required": ["utilities"],
                                    "properties": {"label": {"type": "string"}, "utilities": {"type": "array", "items": _NUM}},
                                },
                            ]
                        },
                    },
                },
            },
        },
    ],
}


def _strict_ints(doc: dict, fields: Sequence[str]) -> list[str]:
    # the schema's "integer" accepts 4.0; the knapsack contract wants real integers
    problems = []
    for f in fields:
        val = doc.get(f)
        items = val if isinstance(val, list) else [val]
        for k, v in enumerate(items):
            if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
                where = f"{f}[{k}]" if isinstance(val, list) else f
                problems.append(f"{where}: must be an integer, got {v!r}")
    return problems


def load_instance(document: dict) -> Instance:
    """Validate an instance document and build the instance.

    Raises :class:`InstanceError` listing every problem found, each prefixed
    with the offending field.
    """
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        raise InstanceError(
            [f"{'/'.join(str(p) for p in e.absolute_path) or '<document>'}: {e.message}" for e in errors]
        )
    kind = document["kind"]
    if kind == "allocation":
        return _load_allocation(document)
    if kind == "giveaway":
        return _load_giveaway(document)
    if kind == "budget":
        return _load_budget(document)
    return _load_explicit(document)


def _load_allocation(doc: dict) -> AllocationInstance:
    n, m = doc["agents"], doc["goods"]
    valuation = doc.get("valuation", "coverage" if "covers" in doc else "additive")
    problems = []
    if valuation == "additive":
        values = doc.get("values")
        if values is None:
            raise InstanceError(["values: required for additive valuations"])
        if len(values) != n:
            problems.append(f"values: expected {n} rows (one per agent), got {len(values)}")
        for i, row in enumerate(values):
            if len(row) != m:
                problems.append(f"values/{i}: expected {m} entries (one per good), got {len(row)}")
        if problems:
            raise InstanceError(problems)
        return AllocationInstance(n, m, values=tuple(tuple(float(v) for v in r) for r in values))
    covers, weights = doc.get("covers"), doc.get("element_weights")
    if covers is None or weights is None:
        raise InstanceError(["covers/element_weights: both required for coverage valuations"])
    if len(covers) != m:
        problems.append(f"covers: expected {m} entries (one per good), got {len(covers)}")
    if len(weights) != n:
        problems.append(f"element_weights: expected {n} rows (one per agent), got {len(weights)}")
    width = {len(w) for w in weights}
    if len(width) > 1:
        problems.append("element_weights: rows differ in length")
    elements = width.pop() if width else 0
    for g, cov in enumerate(covers):
        for e in cov:
            if e >= elements:
                problems.append(f"covers/{g}: element {e} out of range (have {elements})")
    if problems:
        raise InstanceError(problems)
    return AllocationInstance(
        n,
        m,
        covers=tuple(tuple(sorted(set(c))) for c in covers),
        element_weights=tuple(tuple(float(v) for v in r) for r in weights),
    )


def _load_giveaway(doc: dict) -> GiveawayInstance:
    problems = _strict_ints(doc, ["sizes", "capacity"])
    if problems:
        raise InstanceError(problems)
    sizes, cap = doc["sizes"], doc["capacity"]
    if "agents" in doc and doc["agents"] != len(sizes):
        problems.append(f"agents: {doc['agents']} disagrees with {len(sizes)} group sizes")
    for i, w in enumerate(sizes):
        if w > cap:
            problems.append(f"sizes/{i}: group exceeds capacity ({w} > {cap})")
    if sum(sizes) <= cap:
        problems.append(f"sizes: total {sum(sizes)} fits the capacity {cap}; nothing to decide")
    if problems:
        raise InstanceError(problems)
    return GiveawayInstance(tuple(sizes), cap)


def _load_budget(doc: dict) -> BudgetInstance:
    problems = _strict_ints(doc, ["costs", "budget"])
    if problems:
        raise InstanceError(problems)
    costs, utilities = doc["costs"], doc["utilities"]
    if "agents" in doc and doc["agents"] != len(utilities):
        problems.append(f"agents: {doc['agents']} disagrees with {len(utilities)} utility rows")
    for i, row in enumerate(utilities):
        if len(row) != len(costs):
            problems.append(f"utilities/{i}: expected {len(costs)} entries (one per project), got {len(row)}")
    if problems:
        raise InstanceError(problems)
    return BudgetInstance(tuple(costs), doc["budget"], tuple(tuple(float(v) for v in r) for r in utilities))


def _load_explicit(doc: dict) -> ExplicitInstance:
    n = doc["agents"]
    labels, table, problems = [], [], []
    for k, entry in enumerate(doc["states"]):
        if isinstance(entry, dict):
            label, utils = entry.get("label", f"s{k + 1}"), entry["utilities"]
        else:
            label, utils = f"s{k + 1}", entry
        if len(utils) != n:
            problems.append(f"states/{k}: expected {n} utilities, got {len(utils)}")
        if label == DEGENERATE_HANDLE or label in labels:
            problems.append(f"states/{k}: label {label!r} is reserved or repeated")
        labels.append(label)
        table.append(tuple(float(u) for u in utils))
    if problems:
        raise InstanceError(problems)
    return ExplicitInstance(n, tuple(labels), tuple(table))


def load_instance_file(path: str) -> Instance:
    with open(path) as fh:
        return load_instance(json.load(fh))


# ---------------------------------------------------------------------------
# black-box wiring


def build_blackbox(instance: Instance, solver: str, fptas_eps: float = 0.1, state_cap: int = 5000) -> BlackBox:
    """The utilitarian black-box ``solver`` for ``instance``.

    ``exhaustive`` works for every kind (small instances only); the greedy
    solvers need an allocation instance (``greedy-additive`` an additive
    one); the knapsack solvers need a giveaway or budget instance.
    """
    if solver == "exhaustive":
        bb = ExhaustiveBlackBox(instance.enumerate_states(state_cap), instance.n)
        return bb
    if solver in ("greedy-additive", "greedy-submodular"):
        if not isinstance(instance, AllocationInstance):
            raise IncompatibleSolver(f"{solver} needs an allocation instance, got {instance.kind}")
        if solver == "greedy-additive":
            if not instance.additive:
                raise IncompatibleSolver("greedy-additive needs additive valuations")
            return FunctionBlackBox(instance.n, lambda c: greedy_additive_allocate(instance, c), 1.0, solver)
        return FunctionBlackBox(instance.n, lambda c: greedy_submodular_allocate(instance, c), 0.5, solver)
    if solver in ("knapsack-exact", "knapsack-fptas"):
        if not isinstance(instance, _SubsetInstance):
            raise IncompatibleSolver(f"{solver} needs a giveaway or budget instance, got {instance.kind}")
        if solver == "knapsack-exact":

            def exact(c):
                return instance.record(knapsack_exact(instance.item_values(c), instance.item_weights, instance.capacity))

            return FunctionBlackBox(instance.n, exact, 1.0, solver)
        if not 0 < fptas_eps < 1:
            raise IncompatibleSolver(f"fptas eps must lie in (0, 1), got {fptas_eps}")

        def fptas(c):
            return instance.record(
                knapsack_fptas(instance.item_values(c), instance.item_weights, instance.capacity, fptas_eps)
            )

        return FunctionBlackBox(instance.n, fptas, 1.0 - fptas_eps, f"{solver}({fptas_eps:g})")
    raise IncompatibleSolver(f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}")
