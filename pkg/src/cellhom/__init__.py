"""Periodic cell problems for fully nonlinear elliptic equations.

Finite-difference correctors on the torus, the effective operator and its
structural probes, invariant measures, exterior asymptotics and a Liouville
decomposition checker.
"""

from .cell import CellProblem, CellSolution, SolverOptions, residual_norm, solve_cell
from .effective import (
    EffectiveOperator,
    concavity_probe,
    convexity_probe,
    effective,
    ellipticity_probe,
    reilly_check,
    solvability_check,
)
from .errors import CellhomError, SolverError, ValidationError
from .exterior import (
    Asymptote,
    ExteriorProblem,
    barrier_check,
    build_barrier,
    decay_fit,
    solve_exterior,
)
from .fields import FieldExpr, check_periodic, parse_field
from .grid import (
    GridFunction,
    TorusGrid,
    discrete_hessian,
    dump_grid_function,
    hessian_field,
    load_grid_function,
    make_grid,
    mean,
    second_difference,
)
from .liouville import SampledSolution, blow_down, decompose, fit_quadratic, verify_decomposition
from .measure import linear_effective, solve_invariant_measure
from .operators import (
    BellmanMax,
    BellmanMin,
    HessianSigmaK,
    LinearNondivergence,
    PucciMinus,
    PucciPlus,
    Trace,
    eval_operator,
    linearize,
    make_operator,
    sigma_k,
)

__version__ = "0.1.0"

__all__ = [
    "Asymptote",
    "BellmanMax",
    "BellmanMin",
    "CellProblem",
    "CellSolution",
    "CellhomError",
    "EffectiveOperator",
    "ExteriorProblem",
    "FieldExpr",
    "GridFunction",
    "HessianSigmaK",
    "LinearNondivergence",
    "PucciMinus",
    "PucciPlus",
    "SampledSolution",
    "SolverError",
    "SolverOptions",
    "TorusGrid",
    "Trace",
    "ValidationError",
    "barrier_check",
    "blow_down",
    "build_barrier",
    "check_periodic",
    "concavity_probe",
    "convexity_probe",
    "decay_fit",
    "decompose",
    "discrete_hessian",
    "dump_grid_function",
    "effective",
    "ellipticity_probe",
    "eval_operator",
    "fit_quadratic",
    "hessian_field",
    "linear_effective",
    "linearize",
    "load_grid_function",
    "make_grid",
    "make_operator",
    "mean",
    "parse_field",
    "reilly_check",
    "residual_norm",
    "second_difference",
    "sigma_k",
    "solvability_check",
    "solve_cell",
    "solve_exterior",
    "solve_invariant_measure",
    "verify_decomposition",
]
