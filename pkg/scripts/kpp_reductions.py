"""KPP-type reductions: travelling-wave ODEs, the autonomous first-order form,
the separable quadrature, and a numerical cross-check of the reduced ODE."""

import argparse

from scipy.integrate import solve_ivp

from grdcsym.calculus import diff, instantiate, substitute
from grdcsym.catalog import CASES
from grdcsym.determining import pde_from_problem
from grdcsym.expr import Num, Sym, simplify
from grdcsym.lang import parse, problem_from_dict, render
from grdcsym.numeric import eval_num
from grdcsym.reduction import (
    InvariantPair, autonomous_reduce, implicit_differentiation_check, reduce, separable_solve,
)


def logistic_check(auto, gamma=0.7, w0=0.3, p0=0.8, r_end=0.5):
    """Integrate W'' = gamma*W*W' + W(1-W) directly, then integrate the
    first-order form for F(c) = W' from w0 to W(r_end); return |F - W'|."""
    F, Fc = auto.unknown
    R = substitute(instantiate(auto.R, {"f": parse("c*(1 - c)")}), {Fc: Sym("Fp"), F: Sym("Fv")})
    slope = simplify(-substitute(R, {"Fp": Num(0)}) * diff(R, "Fp") ** -1)

    def rhs_W(_, y):
        return [y[1], gamma * y[0] * y[1] + y[0] * (1 - y[0])]

    def rhs_F(c, y):
        return [eval_num(slope, {"c": c, "Fv": y[0], "gamma": gamma})]

    w_end, p_end = solve_ivp(rhs_W, (0, r_end), [w0, p0], rtol=1e-12, atol=1e-14).y[:, -1]
    via_F = solve_ivp(rhs_F, (w0, w_end), [p0], rtol=1e-12, atol=1e-14).y[0, -1]
    return abs(via_F - p_end)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    pde = pde_from_problem(problem_from_dict(CASES["KPP-II"].problem))
    time_ode = reduce(pde, InvariantPair.of(parse("x"), parse("u")), seed=args.seed)
    space_ode = reduce(pde, InvariantPair.of(parse("t"), parse("u")), seed=args.seed)
    print(f"r = x, W = u : {render(time_ode.R, True)} = 0   (multiplier {render(time_ode.multiplier)})")
    print(f"r = t, W = u : {render(space_ode.R, True)} = 0   (multiplier {render(space_ode.multiplier)})")

    auto = autonomous_reduce(time_ode)
    print(f"W_r = F(W)   : {render(auto.R, True)} = 0")

    q = separable_solve(space_ode)
    ok, worst = implicit_differentiation_check(q, seed=args.seed)
    print(f"quadrature   : {q.render()}")
    print(f"implicit differentiation check: {'ok' if ok else 'FAILED'} (max {worst:.1e})")
    print(f"logistic cross-check, max difference: {logistic_check(auto):.1e}")


if __name__ == "__main__":
    main()
