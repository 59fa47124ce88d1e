"""Leximin-fair lotteries from a utilitarian welfare black-box.

Given any procedure that (approximately) maximizes a weighted sum of agent
utilities over deterministic outcomes, :func:`leximin_main_loop` computes a
sparse lottery over outcomes whose expected-utility vector is an
alpha-leximin-approximation, where alpha is the procedure's own factor.
"""

from .apps import (
    AllocationInstance,
    BudgetInstance,
    ExplicitInstance,
    GiveawayInstance,
    InstanceError,
    build_blackbox,
    decode_state,
    load_instance,
    pb_item_values,
)
from .blackbox import (
    BlackBox,
    BoostedBlackBox,
    DowngradedBlackBox,
    ExhaustiveBlackBox,
    SimulatedRandomizedBlackBox,
    compute_repetitions,
    expand_virtual_states,
    knapsack_exact,
    knapsack_fptas,
)
from .core import (
    Preference,
    SparseDistribution,
    StateRecord,
    classify_candidate,
    downgrade,
    expected_utilities,
    leximin_compare,
    upgrade,
    verify_alpha_leximin_approx,
)
from .oracle import brute_force_leximin, enumerate_states, verify_output
from .reduction import PipelineParams, RunReport, leximin_main_loop, shallow_solve

__version__ = "0.1.0"

__all__ = [
    "AllocationInstance",
    "BlackBox",
    "BoostedBlackBox",
    "BudgetInstance",
    "DowngradedBlackBox",
    "ExhaustiveBlackBox",
    "ExplicitInstance",
    "GiveawayInstance",
    "InstanceError",
    "PipelineParams",
    "Preference",
    "RunReport",
    "SimulatedRandomizedBlackBox",
    "SparseDistribution",
    "StateRecord",
    "brute_force_leximin",
    "build_blackbox",
    "classify_candidate",
    "compute_repetitions",
    "decode_state",
    "downgrade",
    "enumerate_states",
    "expand_virtual_states",
    "expected_utilities",
    "knapsack_exact",
    "knapsack_fptas",
    "leximin_compare",
    "leximin_main_loop",
    "load_instance",
    "pb_item_values",
    "shallow_solve",
    "upgrade",
    "verify_alpha_leximin_approx",
    "verify_output",
]
