"""Floating-point evaluation and the random-point equivalence oracle.

Evaluation walks the raw tree, never the simplified form, so the oracle stays
independent of the rewriting code it is used to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SamplingExhausted, UnboundSymbol
from .expr import Add, Apply, Expr, Fn, Mul, Num, Pow, Sym, as_expr, leaf_name

VAR_BOX = (0.2, 2.0)
PARAM_BOX = (0.2, 2.0)  # magnitude; the sign is drawn separately
RETRIES = 7


def eval_num(e, assignment) -> float:
    """Evaluate ``e`` in IEEE doubles.

    ``assignment`` maps leaf names (see ``leaf_name``) to floats.
    """
    return _eval(as_expr(e), assignment, {})


def _eval(e: Expr, a, memo) -> float:
    hit = memo.get(id(e))
    if hit is not None:
        return hit[1]
    if isinstance(e, Num):
        v = float(e.value)
    elif isinstance(e, (Sym, Fn)):
        key = leaf_name(e)
        try:
            v = float(a[key])
        except KeyError:
            raise UnboundSymbol(f"no value for {key}") from None
    elif isinstance(e, Add):
        v = math.fsum(_eval(t, a, memo) for t in e.terms)
    elif isinstance(e, Mul):
        v = 1.0
        for f in e.factors:
            v *= _eval(f, a, memo)
    elif isinstance(e, Pow):
        v = _power(_eval(e.base, a, memo), _eval(e.exponent, a, memo))
    elif isinstance(e, Apply):
        x = _eval(e.arg, a, memo)
        if e.fname == "exp":
            try:
                v = math.exp(x)
            except OverflowError:
                raise DomainError(f"exp overflow at {x}") from None
        elif x <= 0:
            raise DomainError(f"{e.fname} of non-positive value {x}")
        elif e.fname == "ln":
            v = math.log(x)
        else:
            v = math.sqrt(x)
    else:
        raise TypeError(f"unknown node {e!r}")
    if not math.isfinite(v):
        raise DomainError("non-finite intermediate value")
    memo[id(e)] = (e, v)
    return v


def _power(b: float, x: float) -> float:
    if b == 0.0 and x < 0:
        raise DomainError("division by zero")
    if b < 0 and not float(x).is_integer():
        raise DomainError(f"fractional power of negative base {b}")
    try:
        return b**x
    except (OverflowError, ZeroDivisionError) as exc:
        raise DomainError(str(exc)) from None


def leaves(*exprs) -> list:
    out = set()
    for e in exprs:
        out |= as_expr(e).free_symbols()
    return sorted(out, key=lambda s: s._key)


def sample_point(names_vars, names_params, rng: np.random.Generator) -> dict:
    """One point of the sampling box: variables in [0.2, 2], parameters in
    [-2, -0.2] U [0.2, 2]."""
    point = {}
    for n in names_vars:
        point[n] = float(rng.uniform(*VAR_BOX))
    for n in names_params:
        mag = float(rng.uniform(*PARAM_BOX))
        point[n] = mag if rng.random() < 0.5 else -mag
    return point


def split_leaves(exprs, params=(), fixed=None):
    """Partition leaf names into (variables, parameters) for sampling.

    Unknown-function symbols and declared parameters get the signed box.
    """
    fixed = fixed or {}
    params = set(params)
    var_names, par_names = [], []
    for leaf in leaves(*exprs):
        name = leaf_name(leaf)
        if name in fixed:
            continue
        if isinstance(leaf, Fn) or name in params:
            par_names.append(name)
        else:
            var_names.append(name)
    return var_names, par_names


def sample_evaluate(exprs, rng, var_names, par_names, fixed=None, retries=RETRIES):
    """Draw a point where every expression evaluates; returns (point, values)."""
    for _ in range(retries + 1):
        point = sample_point(var_names, par_names, rng)
        if fixed:
            point.update(fixed)
        try:
            return point, [eval_num(e, point) for e in exprs]
        except DomainError:
            continue
    raise SamplingExhausted(f"no admissible point after {retries} retries")


@dataclass
class Verdict:
    equivalent: bool
    max_scaled: float
    points: int
    seed: int
    tol: float
    witness: dict | None = field(default=None)

    def __bool__(self):
        return self.equivalent


def scaled_error(v1: float, v2: float) -> float:
    return abs(v1 - v2) / (1.0 + max(abs(v1), abs(v2)))


def equiv_oracle(e1, e2, trials: int = 100, tol: float = 1e-9, seed: int = 0,
                 params=(), fixed=None) -> Verdict:
    """Compare two expressions at random points of the sampling box.

    Equivalent iff |e1 - e2| <= tol * (1 + max(|e1|, |e2|)) at every point.
    ``fixed`` pins some leaves to given values.
    """
    e1, e2 = as_expr(e1), as_expr(e2)
    rng = np.random.default_rng(seed)
    var_names, par_names = split_leaves([e1, e2], params, fixed)
    worst = 0.0
    witness = None
    for _ in range(trials):
        point, (v1, v2) = sample_evaluate([e1, e2], rng, var_names, par_names, fixed)
        err = scaled_error(v1, v2)
        if witness is None or err > worst:
            worst, witness = err, point
    ok = worst <= tol
    return Verdict(ok, worst, trials, seed, tol, None if ok else witness)


def proportional(e1, e2, trials: int = 200, tol: float = 1e-9, seed: int = 0,
                 params=(), max_den: int = 64):
    """Is e2 = c * e1 for a small nonzero rational c?  Returns (Verdict, c).

    c is read off at the first sampled point where e1 is not small, rounded to
    a fraction with denominator at most ``max_den``, then confirmed by
    ``equiv_oracle``.
    """
    from fractions import Fraction

    from .expr import Num, simplify

    e1, e2 = as_expr(e1), as_expr(e2)
    rng = np.random.default_rng(seed + 7919)
    var_names, par_names = split_leaves([e1, e2], params)
    c = None
    for _ in range(20):
        _, (v1, v2) = sample_evaluate([e1, e2], rng, var_names, par_names)
        if abs(v1) > 1e-6:
            c = Fraction(v2 / v1).limit_denominator(max_den)
            break
    if c is None or c == 0:
        c = Fraction(1)
    verdict = equiv_oracle(simplify(Num(c) * e1), e2, trials, tol, seed, params)
    return verdict, c


def max_scaled_residual(e, trials=100, seed=0, params=(), fixed=None):
    """Largest |e| / (1 + |e|) over sampled points, with the worst point."""
    e = as_expr(e)
    rng = np.random.default_rng(seed)
    var_names, par_names = split_leaves([e], params, fixed)
    worst, witness = 0.0, None
    for _ in range(trials):
        point, (v,) = sample_evaluate([e], rng, var_names, par_names, fixed)
        err = abs(v) / (1.0 + abs(v))
        if witness is None or err > worst:
            worst, witness = err, point
    return worst, witness


__all__ = [
    "eval_num", "equiv_oracle", "proportional", "Verdict", "max_scaled_residual",
    "sample_point", "sample_evaluate", "split_leaves", "leaves", "scaled_error",
]
