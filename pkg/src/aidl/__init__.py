"""Constraint-based 2D CAD from a small declarative language.

Programs describe a tree of structures holding geometry and design-intent
constraints; the solver compiles the constraints to residual equations and
solves them hierarchically, and the result is combined into solid/hole faces.
"""

from .constraints import ConstraintSpec, LoweredConstraint, finalize_deferred, lower, suggest
from .diagnostics import Code, Diagnostic
from .expr import DomainError, Parameter, differentiate, evaluate, pin_branches
from .geobool import combine_scene
from .lang import compile_file, compile_source, format_model, parse_text
from .model import Structure, bounding_box, validate
from .solver import NewtonConfig, SolveOutcome, newton_solve, iterated_solve, solve_model

__all__ = [
    "Code", "ConstraintSpec", "Diagnostic", "DomainError", "LoweredConstraint", "NewtonConfig",
    "Parameter", "SolveOutcome", "Structure", "bounding_box", "combine_scene", "compile_file",
    "compile_source", "differentiate", "evaluate", "finalize_deferred", "format_model",
    "iterated_solve", "lower", "newton_solve", "parse_text", "pin_branches", "solve_model",
    "suggest", "validate",
]
