"""Hamilton-Jacobi treatment of singular and reparametrized Lagrangians."""

from .errors import NumericalError, ToolkitError, UnsupportedModelError, ValidationError
from .expr import Expr, parse, simplify, to_text
from .model import LagrangianModel, analyze, euler_lagrange, load_model

__all__ = [
    "Expr",
    "LagrangianModel",
    "NumericalError",
    "ToolkitError",
    "UnsupportedModelError",
    "ValidationError",
    "analyze",
    "euler_lagrange",
    "load_model",
    "parse",
    "simplify",
    "to_text",
]
