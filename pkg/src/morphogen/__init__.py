"""Stationary bulk/surface morphogen transport with receptor and glypican binding."""
from .discretization import Grid1D, Grid2D, build_grid1d, build_grid2d
from .linear import LinearSubproblem, SolverOptions, solve_coupled_linear
from .model import ModelParams, derive_constants, eval_H, reference_params, recover_complexes
from .picard import PicardOptions, StationarySolution, solve_stationary_1d, solve_stationary_2d

__version__ = "0.1.0"

__all__ = [
    "Grid1D",
    "Grid2D",
    "build_grid1d",
    "build_grid2d",
    "LinearSubproblem",
    "SolverOptions",
    "solve_coupled_linear",
    "ModelParams",
    "derive_constants",
    "eval_H",
    "reference_params",
    "recover_complexes",
    "PicardOptions",
    "StationarySolution",
    "solve_stationary_1d",
    "solve_stationary_2d",
]
