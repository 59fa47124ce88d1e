from .simplex import DenseLP, LPResult, Sense, Status, TAU_LP, dual_of, solve_dense_lp

__all__ = ["DenseLP", "LPResult", "Sense", "Status", "TAU_LP", "dual_of", "solve_dense_lp"]
