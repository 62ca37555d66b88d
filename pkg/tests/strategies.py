"""Hypothesis strategies for random expression trees.

Generated trees stay inside the sampling box of the numeric oracle: negative
powers, ln and sqrt are only applied to strictly positive subtrees, and exp only
to small products, so evaluation never hits a pole or overflows.
"""

from fractions import Fraction

from hypothesis import strategies as st

from grdcsym.expr import Add, Apply, Fn, Mul, Num, Pow, Sym

VARS = ("x", "t", "u")
PARAMS = ("a", "b")
F_ARGS = ("x", "u")

variables = st.sampled_from([Sym(v) for v in VARS])
params = st.sampled_from([Sym(p) for p in PARAMS])
small_ints = st.integers(-4, 4).map(Num)
rationals = st.builds(Fraction, st.integers(-6, 6), st.integers(1, 5)).map(Num)
floats = st.sampled_from([0.5, 1.25, 2.5, 0.125]).map(Num)
positive_consts = st.builds(Fraction, st.integers(1, 6), st.integers(1, 4)).map(Num)
unknowns = st.builds(lambda i, j: Fn("f", F_ARGS, (i, j)), st.integers(0, 2), st.integers(0, 2))


def _positive_extend(children):
    return st.one_of(
        st.builds(lambda a, b: Add((a, b)), children, children),
        st.builds(lambda a, b: Mul((a, b)), children, children),
        st.builds(lambda a, b: Mul((a, Pow(b, Num(-1)))), children, children),
        children.map(lambda a: Apply("sqrt", a)),
    )


positive = st.recursive(st.one_of(variables, positive_consts), _positive_extend, max_leaves=4)


def _extend(children, pos):
    small = st.one_of(variables, params, small_ints)
    return st.one_of(
        st.builds(lambda a, b: Add((a, b)), children, children),
        st.builds(lambda a, b: Add((a, Mul((Num(-1), b)))), children, children),
        st.builds(lambda a, b: Mul((a, b)), children, children),
        st.builds(lambda a, n: Pow(a, Num(n)), children, st.integers(0, 3)),
        st.builds(lambda a, n: Pow(a, Num(n)), pos, st.integers(-2, -1)),
        st.builds(lambda a, b: Apply("exp", Mul((a, b, Num(Fraction(1, 2))))), small, small),
        pos.map(lambda a: Apply("ln", a)),
        pos.map(lambda a: Apply("sqrt", a)),
    )


def expressions(with_unknowns: bool = True, with_params: bool = True, with_floats: bool = False,
                max_leaves: int = 8):
    """Random trees over x, t, u, optionally parameters a, b and f(x, u) derivatives."""
    base = [variables, small_ints, rationals, positive]
    if with_params:
        base.append(params)
    if with_unknowns:
        base.append(unknowns)
    if with_floats:
        base.append(floats)
    return st.recursive(st.one_of(*base), lambda c: _extend(c, positive), max_leaves=max_leaves)


JET_COORDS = ("u_x", "u_t", "u_xx", "u_xt", "u_tt")


@st.composite
def jet_polynomials(draw, max_terms: int = 4):
    """Sums of (coefficient in x, t, u, f) * (monomial in jets up to order 2)."""
    coeff = expressions(with_params=False, max_leaves=3)
    terms = []
    for _ in range(draw(st.integers(1, max_terms))):
        c = draw(coeff)
        powers = draw(st.lists(st.integers(0, 2), min_size=len(JET_COORDS),
                               max_size=len(JET_COORDS)))
        factors = [c] + [Pow(Sym(j), Num(n)) for j, n in zip(JET_COORDS, powers) if n]
        terms.append(Mul(tuple(factors)))
    return Add(tuple(terms))
