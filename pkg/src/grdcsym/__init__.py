"""Lie point-symmetry analysis of generalized reaction-diffusion-convection equations."""

__version__ = "0.1.0"

from .calculus import collect, diff, instantiate, reconstruct, substitute
from .determining import (
    EvolutionPDE, build_evolution, build_grdc, criterion_residual, extract_system,
    solve_ansatz, structural_reduce, verify_generator,
)
from .expr import Expr, Fn, Num, Sym, exp, ln, simplify, sqrt, symbols
from .jet import JetContext, VectorField, apply_prolonged, characteristic, prolong_coeff, total_d
from .lang import deserialize, load_problem, parse, render, serialize
from .numeric import equiv_oracle, eval_num
from .reduction import (
    InvariantPair, autonomous_reduce, characteristics_solve, reduce, separable_solve,
    verify_invariants,
)

__all__ = [
    "collect", "diff", "instantiate", "reconstruct", "substitute",
    "EvolutionPDE", "build_evolution", "build_grdc", "criterion_residual", "extract_system",
    "solve_ansatz", "structural_reduce", "verify_generator",
    "Expr", "Fn", "Num", "Sym", "exp", "ln", "simplify", "sqrt", "symbols",
    "JetContext", "VectorField", "apply_prolonged", "characteristic", "prolong_coeff", "total_d",
    "deserialize", "load_problem", "parse", "render", "serialize",
    "equiv_oracle", "eval_num",
    "InvariantPair", "autonomous_reduce", "characteristics_solve", "reduce", "separable_solve",
    "verify_invariants",
]
