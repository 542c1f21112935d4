"""Problem files, expressions and built-in Hamiltonians."""

from .builtins import REGISTRY, builtin, lift_comparison, lift_second_order
from .expr import ExprError, compile_expr, evaluate, parse_expr
from .spec import (
    ProblemError,
    ProblemSpec,
    build_op,
    build_problem,
    comparison_paths,
    linear_path,
    matrix_path,
    parse_problem,
    serialize,
)
from .validate import FDReport, fd_validate

__all__ = [
    "REGISTRY",
    "ExprError",
    "FDReport",
    "ProblemError",
    "ProblemSpec",
    "build_op",
    "build_problem",
    "builtin",
    "comparison_paths",
    "compile_expr",
    "evaluate",
    "fd_validate",
    "lift_comparison",
    "lift_second_order",
    "linear_path",
    "matrix_path",
    "parse_expr",
    "parse_problem",
    "serialize",
]
