import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from grdcsym.calculus import diff, instantiate, substitute
from grdcsym.catalog import CASES, KPP_REDUCTIONS, PRINTED_REDUCTIONS, PRINTED_INVARIANTS, same_ode
from grdcsym.determining import pde_from_problem
from grdcsym.errors import (
    NotAutonomous, NotSelfSimilar, NotSeparable, UnsupportedFieldStructure,
    UnsupportedInvariantForm,
)
from grdcsym.expr import Num, Sym, simplify
from grdcsym.jet import VectorField
from grdcsym.lang import parse, parse_with_functions, problem_from_dict
from grdcsym.numeric import equiv_oracle, eval_num
from grdcsym.reduction import (
    FormalIntegral, InvariantPair, ReducedODE, W, W1, W2, autonomous_reduce, characteristics_solve,
    implicit_differentiation_check, jacobian_rank2, r_only_oracle, reduce, reduction_soundness,
    separable_solve, verify_invariants,
)


def P(text):
    return parse(text)


def V(xi, eta, phi):
    return VectorField(P(xi), P(eta), P(phi))


def case_pde(cid):
    return pde_from_problem(problem_from_dict(CASES[cid].problem))


def generator(cid, label):
    return next(g for g in CASES[cid].generators if g.label == label).field()


def test_invariant_pair_metadata():
    inv = InvariantPair.of(P("t"), P("u + b*ln(x)"))
    assert inv.A == Num(1) and inv.B == simplify(P("b*ln(x)"))
    inv = InvariantPair.of(P("x*t"), P("x*u"))
    assert inv.A == Sym("x") and inv.B == Num(0)


@pytest.mark.parametrize("r, w", [("x*u", "u"), ("x", "u^2"), ("x", "x"), ("x", "2*x + 0*u")])
def test_invariant_pair_rejects(r, w):
    with pytest.raises(UnsupportedInvariantForm):
        InvariantPair.of(P(r), P(w))


def test_dependent_invariants_detected():
    inv = InvariantPair.of(P("x"), P("u"), check_rank=False)
    assert jacobian_rank2(inv)
    bad = InvariantPair(P("x"), P("x*u"), P("x"), Num(0))
    assert jacobian_rank2(bad)
    with pytest.raises(UnsupportedInvariantForm):
        InvariantPair.of(P("x*t"), P("x^2*t^2 + 0*u"))


def test_verify_invariants_examples():
    rep = verify_invariants(V("x", "-t", "-u"), InvariantPair.of(P("x*t"), P("x*u")))
    assert rep.exact and rep.passed and rep.rank2
    assert verify_invariants(V("0", "1", "0"), InvariantPair.of(P("x"), P("u"))).exact
    rep = verify_invariants(V("0", "exp(a*t)", "a*exp(a*t)"), InvariantPair.of(P("x"), P("u - a*t")))
    assert rep.exact and rep.x_of_w == Num(0)


def test_verify_invariants_failure_has_witness():
    rep = verify_invariants(V("1", "0", "0"), InvariantPair.of(P("x"), P("u")))
    assert not rep.passed and rep.witness is not None


@pytest.mark.parametrize("row", PRINTED_INVARIANTS, ids=lambda r: f"{r.case}-{r.generator}")
def test_table_two_rows_are_exact(row):
    X = generator(row.case, row.generator)
    rep = verify_invariants(X, InvariantPair.of(P(row.r), P(row.w)))
    assert rep.exact and rep.rank2


def test_characteristics_examples():
    inv = characteristics_solve(V("x", "-t", "-u"))
    assert (str(inv.r), str(inv.w)) == ("t*x", "u*x")
    inv = characteristics_solve(V("0", "1", "0"))
    assert (str(inv.r), str(inv.w)) == ("x", "u")
    inv = characteristics_solve(V("-x*exp(b*t)/b", "0", "exp(b*t)"))
    assert inv.r == Sym("t") and inv.w == simplify(P("u + b*ln(x)"))


def test_characteristics_unsupported():
    with pytest.raises(UnsupportedFieldStructure):
        characteristics_solve(V("0", "0", "0"))
    with pytest.raises(UnsupportedFieldStructure):
        characteristics_solve(V("x + t", "1", "u^2"))


structured = st.tuples(
    st.sampled_from(["0", "1", "x", "-2*x", "x^2", "3*x^(1/2)"]),
    st.sampled_from(["0", "1", "t", "-t", "2*t"]),
    st.sampled_from(["0", "1", "u", "-u", "exp(t)", "x"]),
)


@settings(max_examples=150)
@given(structured)
def test_characteristics_output_verifies(comps):
    X = V(*comps)
    try:
        inv = characteristics_solve(X)
    except UnsupportedFieldStructure:
        return
    rep = verify_invariants(X, inv)
    assert rep.passed and rep.rank2


# -- reduction ----------------------------------------------------------------

def kpp():
    return case_pde("KPP-II")


def K(text):
    return parse_with_functions(text, declared={"gamma", "b", "W", "W_r", "W_rr", "c"})[0]


def test_kpp_time_translation_reduction():
    ode = reduce(kpp(), InvariantPair.of(P("x"), P("u")))
    assert ode.R == simplify(K(KPP_REDUCTIONS["time"][2]))
    assert ode.order == 2 and ode.status == "symbolic"
    assert ode.multiplier == simplify(P("-1/b"))
    assert reduction_soundness(ode)[0]


def test_kpp_space_translation_reduction():
    ode = reduce(kpp(), InvariantPair.of(P("t"), P("u")))
    assert ode.R == simplify(K(KPP_REDUCTIONS["space"][2]))
    assert ode.order == 1


def case_b_ode():
    return reduce(case_pde("B"), InvariantPair.of(P("x*t"), P("x*u")))


def test_case_b_chain_rule():
    ode = case_b_ode()
    assert ode.ansatz["u_t"] == W1
    assert ode.ansatz["u_x"] == simplify(P("(x*t*W_r - W)/x^2"))
    assert equiv_oracle(ode.ansatz["u_x"], parse(PRINTED_REDUCTIONS[0].ansatz["u_x"]))


def test_case_b_reduction_sound_and_self_similar():
    ode = case_b_ode()
    ok, worst = reduction_soundness(ode, trials=100)
    assert ok and worst <= 1e-9
    assert r_only_oracle(ode, trials=100)[0]
    assert not (ode.R.free_names() & {"x", "t", "u"})


def test_case_b_reduction_independent_check():
    """Plug a concrete W(s) into u = W(x t)/x and differentiate directly."""
    ode = case_b_ode()
    s = Sym("s")
    Wc = P("s^2 + 1/(1 + s)")
    u = substitute(Wc, {"s": P("x*t")}) * P("x^-1")
    derivs = {"u": u, "u_t": diff(u, "t"), "u_x": diff(u, "x"), "u_xx": diff(u, "x", 2)}
    direct = substitute(case_pde("B").delta, derivs)
    jet = {"W": Wc, "W_r": diff(Wc, "s"), "W_rr": diff(Wc, "s", 2)}
    via_ode = substitute(ode.R, {**jet, "r": s})
    via_ode = simplify(ode.multiplier * substitute(via_ode, {"s": P("x*t")}))
    assert equiv_oracle(direct, via_ode, trials=100, params=("a", "b"))
    assert s not in via_ode.free_symbols()


def test_case_b_printed_equation_differs():
    ode = case_b_ode()
    printed = parse(PRINTED_REDUCTIONS[0].printed)
    assert not same_ode(ode.R, printed, params=("a", "b"))[0]


def test_case_c_is_not_self_similar():
    with pytest.raises(NotSelfSimilar) as info:
        reduce(case_pde("C"), InvariantPair.of(P("t"), P("u + b*ln(x)")))
    assert info.value.witnesses  # pairs of points sharing r


def test_reduce_unsupported_r():
    with pytest.raises(UnsupportedInvariantForm):
        reduce(kpp(), InvariantPair.of(P("x + t"), P("u")))


# -- autonomous and separable -------------------------------------------------

def test_autonomous_kpp():
    ode = autonomous_reduce(reduce(kpp(), InvariantPair.of(P("x"), P("u"))))
    assert ode.R == simplify(K(KPP_REDUCTIONS["autonomous"]))
    assert ode.order == 1 and ode.independent == Sym("c")


def test_autonomous_trivial_and_errors():
    assert str(autonomous_reduce(ReducedODE(W2, 2)).R) == "F*F_c"
    with pytest.raises(NotAutonomous):
        autonomous_reduce(ReducedODE(simplify(W2 - Sym("r")), 2))
    with pytest.raises(NotAutonomous):
        autonomous_reduce(ReducedODE(simplify(W1 - W), 1))


def test_autonomous_round_trip_logistic():
    """Integrate W'' = gamma W W' + f(W) directly and via F(c) = W'."""
    gamma, w0, p0, r_end = 0.7, 0.3, 0.8, 0.5
    ode = autonomous_reduce(reduce(kpp(), InvariantPair.of(P("x"), P("u"))))
    logistic = {"f": P("c*(1 - c)")}
    F, Fc = ode.unknown
    R = substitute(instantiate(ode.R, logistic), {Fc: Sym("Fp"), F: Sym("Fv")})
    slope = simplify(-substitute(R, {"Fp": Num(0)}) * diff(R, "Fp") ** -1)

    def rhs_F(c, y):
        return [eval_num(slope, {"c": c, "Fv": y[0], "gamma": gamma})]

    def rhs_W(r, y):
        w, p = y
        return [p, gamma * w * p + w * (1 - w)]

    direct = solve_ivp(rhs_W, (0, r_end), [w0, p0], rtol=1e-12, atol=1e-14)
    w_end, p_end = direct.y[:, -1]
    via_F = solve_ivp(rhs_F, (w0, w_end), [p0], rtol=1e-12, atol=1e-14)
    assert abs(via_F.y[0, -1] - p_end) <= 1e-6


def test_separable_kpp_quadrature():
    space = reduce(kpp(), InvariantPair.of(P("t"), P("u")))
    q = separable_solve(space)
    expect = parse_with_functions("-b/f(c1)", declared={"b", "c1"})[0]
    assert q.integrand == simplify(expect)
    assert q.render() == "r - Integral(-b/f, c1, W) + c2 = 0"
    ok, worst = implicit_differentiation_check(q, trials=100, rel_tol=1e-7)
    assert ok and worst <= 1e-7


def test_separable_trivial_and_errors():
    q = separable_solve(ReducedODE(simplify(W1 - 1), 1))
    assert q.elementary() == simplify(P("r - W + c2"))
    with pytest.raises(NotSeparable):
        separable_solve(ReducedODE(simplify(W1 - Sym("r")), 1))
    with pytest.raises(NotSeparable):
        separable_solve(ReducedODE(simplify(W1 * W1 - W), 1))
    with pytest.raises(NotSeparable):
        separable_solve(ReducedODE(W2, 2))


def test_formal_integral_numeric():
    c1 = Sym("c1")
    fi = FormalIntegral(c1 * c1, c1, Sym("W"))
    assert abs(fi.evaluate({"W": 1.0}, 0.0) - 1 / 3) < 1e-12
    assert fi.render() == "Integral(c1^2, c1, W)"
    assert np.isfinite(fi.evaluate({"W": 2.0}, 0.5))
