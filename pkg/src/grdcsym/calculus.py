"""Differentiation, substitution and coefficient collection on expressions."""

from __future__ import annotations

from fractions import Fraction

from .errors import CyclicBinding, NotPolynomialInVars
from .expr import (
    Expr, Fn, Sym, as_expr, from_poly, leaf_name, pconst,
    pdiff, pmul, psubstitute, rebuild_atom, rename_fn_args, simplify, to_poly,
)


def _name(s) -> str:
    if isinstance(s, str):
        return s
    if isinstance(s, Sym):
        return s.name
    raise TypeError(f"expected a symbol, got {s!r}")


def diff(e, s, times: int = 1) -> Expr:
    """Partial derivative, all other symbols held fixed.

    Unknown functions differentiate through their multi-index when ``s`` is one
    of their arguments and vanish otherwise.
    """
    s = _name(s)
    p = to_poly(as_expr(e))
    cache = {}
    for _ in range(times):
        p = pdiff(p, s, cache)
    return from_poly(p)


def substitute(e, bindings) -> Expr:
    """Simultaneous substitution followed by simplification.

    Keys are symbol names, ``Sym`` or ``Fn`` nodes.  A binding for a symbol that
    is an argument of an unknown function renames that argument, which is only
    possible when the replacement is itself a symbol.
    """
    e = as_expr(e)
    table = {}
    for k, v in bindings.items():
        if isinstance(k, str):
            k = Sym(k)
        table[k] = as_expr(v)
    if not table:
        return simplify(e)
    bound = {leaf_name(k) for k in table}
    for k, v in table.items():
        clash = bound & v.free_names()
        if clash:
            raise CyclicBinding(
                f"replacement for {leaf_name(k)} mentions bound symbol(s) {sorted(clash)}"
            )
    renames = {k.name: v for k, v in table.items() if isinstance(k, Sym)}
    bound_names = frozenset(bound)
    memo = {}

    def sub_poly(x: Expr):
        if not (x.free_names() & bound_names):
            return None
        return psubstitute(to_poly(x), mapper, memo)

    def mapper(atom):
        if atom in table:
            return to_poly(table[atom])
        if isinstance(atom, Fn):
            if any(a in renames for a in atom.args):
                return to_poly(rename_fn_args(atom, renames))
            return None
        if isinstance(atom, Sym):
            return None
        return rebuild_atom(atom, sub_poly)

    return from_poly(psubstitute(to_poly(e), mapper, memo))


def instantiate(e, functions) -> Expr:
    """Replace unknown functions by concrete expressions in their arguments.

    ``functions`` maps a function name to an expression; every derivative
    symbol of that function is replaced by the matching partial derivative.
    """
    e = as_expr(e)
    table = {name: as_expr(v) for name, v in functions.items()}
    memo = {}

    def sub_poly(x: Expr):
        return psubstitute(to_poly(x), mapper, memo)

    def mapper(atom):
        if isinstance(atom, Fn):
            if atom.name not in table:
                return None
            p = to_poly(table[atom.name])
            cache = {}
            for var, n in zip(atom.args, atom.d):
                for _ in range(n):
                    p = pdiff(p, var, cache)
            return p
        if isinstance(atom, Sym):
            return None
        return rebuild_atom(atom, sub_poly)

    return from_poly(psubstitute(to_poly(e), mapper, memo))


def rewrite_derivatives(e, rules) -> Expr:
    """Apply rules ``Fn -> Expr`` to every derivative at or above the rule's index.

    Rules are ``(fn, replacement, include_self)``.  A rule for phi_u sends
    phi_uu to d/du of the replacement and phi_xu to d/dx of it; phi_u itself
    is replaced only when ``include_self`` is true.
    """
    e = as_expr(e)
    memo = {}

    def sub_poly(x: Expr):
        return psubstitute(to_poly(x), mapper, memo)

    def mapper(atom):
        if isinstance(atom, Fn):
            for fn, repl, include_self in rules:
                if fn.name != atom.name or fn.args != atom.args:
                    continue
                extra = [a - b for a, b in zip(atom.d, fn.d)]
                if min(extra) < 0:
                    continue
                if not any(extra) and not include_self:
                    continue
                p = to_poly(as_expr(repl))
                cache = {}
                for var, n in zip(atom.args, extra):
                    for _ in range(n):
                        p = pdiff(p, var, cache)
                return p
            return None
        if isinstance(atom, Sym):
            return None
        return rebuild_atom(atom, sub_poly)

    return from_poly(psubstitute(to_poly(e), mapper, memo))


def _atom_mentions(atom, names) -> bool:
    return bool(atom.free_names() & names)


def collect(e, vars) -> list:
    """Coefficients of the distinct monomials in ``vars``.

    Returns ``[(monomial, coefficient), ...]`` sorted by monomial; coefficients
    are nonzero and free of ``vars``.  Raises ``NotPolynomialInVars`` when a
    variable appears with a negative or fractional power or inside another
    function.
    """
    names = frozenset(_name(v) for v in vars)
    groups = {}
    for mono, c in to_poly(as_expr(e)).items():
        inside, outside = [], []
        for a, ex in mono:
            if isinstance(a, Sym) and a.name in names:
                if ex < 0 or Fraction(ex).denominator != 1:
                    raise NotPolynomialInVars(f"{a.name} appears with power {ex}")
                inside.append((a, ex))
            elif _atom_mentions(a, names):
                raise NotPolynomialInVars(f"variable occurs inside {from_poly({((a, 1),): 1})}")
            else:
                outside.append((a, ex))
        key = tuple(inside)
        g = groups.setdefault(key, {})
        g[tuple(outside)] = g.get(tuple(outside), 0) + c
    out = []
    for key, coeff in groups.items():
        coeff = {m: c for m, c in coeff.items() if c}
        if not coeff:
            continue
        out.append((from_poly({key: 1}), from_poly(coeff)))
    out.sort(key=lambda mc: mc[0]._key)
    return out


def reconstruct(pairs) -> Expr:
    """Inverse of ``collect``: the simplified sum of monomial*coefficient."""
    p = {}
    for m, c in pairs:
        for mono, v in pmul(to_poly(m), to_poly(c)).items():
            p[mono] = p.get(mono, 0) + v
    return from_poly({m: v for m, v in p.items() if v})


def denominator_multiplier(e, skip=frozenset()) -> Expr:
    """Smallest monomial clearing every negative integer power in ``e``.

    Atoms whose names are in ``skip`` are ignored.
    """
    need = {}
    for mono in to_poly(as_expr(e)):
        for a, ex in mono:
            if ex < 0 and Fraction(ex).denominator == 1:
                if isinstance(a, Sym) and a.name in skip:
                    continue
                need[a] = max(need.get(a, 0), -ex)
    if not need:
        return from_poly(pconst(1))
    mono = tuple(sorted(need.items(), key=lambda p: p[0]._key))
    return from_poly({mono: 1})


def is_constant(e) -> bool:
    return not as_expr(e).free_symbols()


def degree(e, var) -> int:
    """Highest power of ``var`` (must occur polynomially)."""
    var = _name(var)
    best = 0
    for m, _ in collect(e, [var]):
        for mono in to_poly(m):
            for _, ex in mono:
                best = max(best, int(ex))
    return best


__all__ = [
    "diff", "substitute", "instantiate", "rewrite_derivatives", "collect",
    "reconstruct", "denominator_multiplier", "is_constant", "degree",
]
