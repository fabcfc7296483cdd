"""Bundled deterministic solver for linear integer/real constraint scripts."""

from .main import Interpreter, ScriptError, main, solve_text
from .sexpr import SexprError, parse_all, rational_sexpr

__all__ = [
    "Interpreter",
    "ScriptError",
    "SexprError",
    "main",
    "parse_all",
    "rational_sexpr",
    "solve_text",
]
