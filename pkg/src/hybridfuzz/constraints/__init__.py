from .abstraction import Box, Polytope, interval_abstraction, polyhedral_abstraction
from .linear import Atom, LinExpr, PathCondition, parse_atom, parse_path_condition
from .sampling import (
    DEFAULT_BOX_SAMPLES,
    DEFAULT_POLY_SAMPLES,
    DegeneratePolytope,
    InfeasibleAbstraction,
    SampleBatch,
    sample_box,
    sample_polytope,
)
from .solver import SAT, UNKNOWN, UNSAT, SolveBudget, SolveResult, solve

__all__ = [
    "Atom",
    "Box",
    "DEFAULT_BOX_SAMPLES",
    "DEFAULT_POLY_SAMPLES",
    "DegeneratePolytope",
    "InfeasibleAbstraction",
    "LinExpr",
    "PathCondition",
    "Polytope",
    "SAT",
    "SampleBatch",
    "SolveBudget",
    "SolveResult",
    "UNKNOWN",
    "UNSAT",
    "interval_abstraction",
    "parse_atom",
    "parse_path_condition",
    "polyhedral_abstraction",
    "sample_box",
    "sample_polytope",
    "solve",
]
