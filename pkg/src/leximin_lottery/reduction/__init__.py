"""The reduction from leximin lotteries to a utilitarian black-box."""

from .main_loop import (
    PipelineParams,
    Probe,
    RoundRecord,
    RunReport,
    UpperBoundBelowWarmStart,
    leximin_main_loop,
    probe_blackbox_box,
    shallow_solve,
)
from .programs import (
    DualPoint,
    P3Solution,
    ProgramContext,
    auxiliary_system_feasible,
    full_p3_lp,
    linearization_witness,
    p1_feasible,
    p1_objective,
    p2_feasible,
)
from .solvers import (
    D3Separation,
    DualBox,
    Feasible,
    InfeasibleUnderXalpha,
    SparseSolverParams,
    pad_with_degenerate,
    separation_oracle_d3,
    solve_p2_sparse,
    solve_p3_sparse,
    weak_feasibility_oracle,
)

__all__ = [
    "D3Separation",
    "DualBox",
    "DualPoint",
    "Feasible",
    "InfeasibleUnderXalpha",
    "P3Solution",
    "PipelineParams",
    "Probe",
    "ProgramContext",
    "RoundRecord",
    "RunReport",
    "SparseSolverParams",
    "UpperBoundBelowWarmStart",
    "auxiliary_system_feasible",
    "full_p3_lp",
    "leximin_main_loop",
    "linearization_witness",
    "p1_feasible",
    "p1_objective",
    "p2_feasible",
    "pad_with_degenerate",
    "probe_blackbox_box",
    "separation_oracle_d3",
    "shallow_solve",
    "solve_p2_sparse",
    "solve_p3_sparse",
    "weak_feasibility_oracle",
]
