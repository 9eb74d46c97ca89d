"""Riemannian inexact variable-metric proximal linearization solver.

Minimizes f(x) + reg(F(x)) over smooth embedded matrix manifolds by
inexactly solving strongly convex tangent-space models through their duals,
with a semismooth Newton-CG or accelerated dual-gradient inner solver.
"""

from .blocks import Blocks
from .driver import (
    RunResult,
    RunStatus,
    SolverConfig,
    StationarityCertificate,
    run,
    stationarity_measure,
)
from .manifolds import Sphere, Stiefel, SymplecticStiefel
from .problems import (
    CompositeProblem,
    gen_data_pca,
    gen_data_psd_type1,
    gen_data_ssc,
    make_group_pca,
    make_psd,
    make_ssc,
    validate_derivatives,
)
from .prox import FrobeniusNorm, L1Norm, RowGroupNorm, SeparableSum
from .subsolver import apg_solve, make_subproblem, sncg_solve

__all__ = [
    "Blocks",
    "CompositeProblem",
    "FrobeniusNorm",
    "L1Norm",
    "RowGroupNorm",
    "RunResult",
    "RunStatus",
    "SeparableSum",
    "SolverConfig",
    "Sphere",
    "StationarityCertificate",
    "Stiefel",
    "SymplecticStiefel",
    "apg_solve",
    "gen_data_pca",
    "gen_data_psd_type1",
    "gen_data_ssc",
    "make_group_pca",
    "make_psd",
    "make_ssc",
    "make_subproblem",
    "run",
    "sncg_solve",
    "stationarity_measure",
    "validate_derivatives",
]

__version__ = "0.1.0"
