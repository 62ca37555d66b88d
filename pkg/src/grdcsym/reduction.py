"""Differential invariants, characteristic systems and similarity reduction.

A reduction is driven by an invariant pair (r, w) with r free of u and w
affine in u.  Substituting u = (W(r) - B)/A into the equation gives a
residual in x, t, W and its r-derivatives; the reduction succeeds when that
residual is a multiple of an expression in r and the W-jet alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from .calculus import collect, diff, instantiate, substitute
from .errors import (
    DomainError, NotAutonomous, NotSelfSimilar, NotSeparable, SamplingExhausted,
    UnsupportedFieldStructure, UnsupportedInvariantForm, UnsupportedSubstitution,
)
from .expr import Expr, Fn, Num, Sym, as_expr, exp, from_poly, ln, simplify, to_poly
from .jet import VectorField
from .numeric import (
    VAR_BOX, eval_num, max_scaled_residual, sample_evaluate, sample_point,
    scaled_error, split_leaves,
)

SX, ST, SU = Sym("x"), Sym("t"), Sym("u")
W, W1, W2 = Sym("W"), Sym("W_r"), Sym("W_rr")
R_SYM = Sym("r")
W_JET = (W, W1, W2)


def depends_on(e, name: str) -> bool:
    """True when ``name`` occurs as a symbol or as an unknown-function argument."""
    for leaf in as_expr(e).free_symbols():
        if isinstance(leaf, Sym) and leaf.name == name:
            return True
        if isinstance(leaf, Fn) and name in leaf.args:
            return True
    return False


def _free_of(e, *names) -> bool:
    return not any(depends_on(e, n) for n in names)


# ---------------------------------------------------------------------------
# invariant pairs

@dataclass(frozen=True)
class InvariantPair:
    """(r, w) with r = r(x, t) and w = A(x, t) u + B(x, t)."""

    r: Expr
    w: Expr
    A: Expr
    B: Expr

    @classmethod
    def of(cls, r, w, check_rank: bool = True, seed: int = 0) -> "InvariantPair":
        r, w = simplify(as_expr(r)), simplify(as_expr(w))
        if depends_on(r, "u"):
            raise UnsupportedInvariantForm("r must not depend on u")
        A = diff(w, "u")
        if depends_on(A, "u") or not to_poly(A):
            raise UnsupportedInvariantForm("w must be affine in u with nonzero slope")
        B = simplify(w - A * SU)
        pair = cls(r, w, A, B)
        if check_rank and not jacobian_rank2(pair, seed=seed):
            raise UnsupportedInvariantForm("r and w are functionally dependent")
        return pair


def jacobian_rank2(inv: InvariantPair, points: int = 20, seed: int = 0,
                   rel_tol: float = 1e-8, params=()) -> bool:
    """Rank of d(r, w)/d(x, t, u) is 2 at every sampled point."""
    grads = [[diff(e, v) for v in ("x", "t", "u")] for e in (inv.r, inv.w)]
    flat = [g for row in grads for g in row]
    rng = np.random.default_rng(seed)
    var_names, par_names = split_leaves(flat + [inv.r, inv.w], params)
    for _ in range(points):
        _, vals = sample_evaluate(flat, rng, var_names, par_names)
        s = np.linalg.svd(np.array(vals).reshape(2, 3), compute_uv=False)
        if s[0] == 0 or s[1] <= rel_tol * s[0]:
            return False
    return True


@dataclass
class InvariantReport:
    x_of_r: Expr
    x_of_w: Expr
    exact: bool
    max_scaled: float
    passed: bool
    rank2: bool
    seed: int
    tol: float
    witness: dict | None = None

    def __bool__(self):
        return self.passed


def verify_invariants(X: VectorField, inv: InvariantPair, tol: float = 1e-8, seed: int = 42,
                      trials: int = 100, params=()) -> InvariantReport:
    """X(r) and X(w) vanish, symbolically or at sampled points."""
    xr, xw = X.apply(inv.r), X.apply(inv.w)
    exact = not to_poly(xr) and not to_poly(xw)
    worst, witness = 0.0, None
    if not exact:
        for e in (xr, xw):
            if to_poly(e):
                m, wit = max_scaled_residual(e, trials, seed, params)
                if m > worst or witness is None:
                    worst, witness = m, wit
    passed = exact or worst <= tol
    rank2 = jacobian_rank2(inv, seed=seed, params=params)
    return InvariantReport(xr, xw, exact, worst, passed and rank2, rank2, seed, tol,
                           None if passed else witness)


# ---------------------------------------------------------------------------
# characteristic systems

def _integrate_power(e: Expr, v: str):
    """Antiderivative in ``v`` of a sum of terms c * v^p, c free of v.

    Returns (non-logarithmic part, coefficient of ln v).
    """
    poly, logc = {}, {}
    for mono, c in to_poly(e).items():
        p, rest = Fraction(0), []
        for a, ex in mono:
            if isinstance(a, Sym) and a.name == v:
                p = Fraction(ex)
            elif depends_on(from_poly({((a, 1),): 1}), v):
                raise UnsupportedFieldStructure(f"cannot integrate {e} in {v}")
            else:
                rest.append((a, ex))
        rest = tuple(rest)
        if p == -1:
            logc[rest] = logc.get(rest, 0) + c
        else:
            term = {tuple(sorted(rest + ((Sym(v), p + 1),), key=lambda t: t[0]._key)): c / (p + 1)}
            for m, k in term.items():
                poly[m] = poly.get(m, 0) + k
    clean = lambda d: from_poly({m: k for m, k in d.items() if k})
    return clean(poly), clean(logc)


def _antiderivative(e: Expr, v: str) -> Expr:
    plain, logc = _integrate_power(e, v)
    return simplify(plain + logc * ln(Sym(v)))


def characteristics_solve(X: VectorField, seed: int = 0) -> InvariantPair:
    """Invariants of X from dx/xi = dt/eta = du/phi for the structured family.

    Supported: components that split variable by variable (xi in x, eta in t,
    phi in u or free of u), with t-dependent factors allowed in xi and phi
    when eta vanishes.  The first invariant is u-free; the second is affine in u.
    """
    xi, eta, phi = X.components()
    zx, zt = not to_poly(xi), not to_poly(eta)
    for comp, label in ((xi, "xi"), (eta, "eta")):
        if depends_on(comp, "u"):
            raise UnsupportedFieldStructure(f"{label} depends on u")
    if zx and zt:
        raise UnsupportedFieldStructure("xi = eta = 0 leaves no u-dependent invariant")

    if zx:
        r, lead, other_fixed = SX, "t", True
    elif zt:
        r, lead, other_fixed = ST, "x", True
    else:
        if not _free_of(xi, "t") or not _free_of(eta, "x"):
            raise UnsupportedFieldStructure("dx/xi = dt/eta does not separate")
        r = _pair_invariant(simplify(xi ** -1), "x", simplify(eta ** -1), "t")
        lead, other_fixed = "x", False
    lead_comp = xi if lead == "x" else eta
    other = "t" if lead == "x" else "x"

    if not to_poly(phi):
        w = SU
    else:
        ratio = simplify(phi * lead_comp ** -1)
        if not other_fixed and depends_on(ratio, other):
            raise UnsupportedFieldStructure("du/phi does not separate")
        if _free_of(ratio, "u"):
            w = simplify(SU - _antiderivative(ratio, lead))
        else:
            g = simplify(ratio * SU ** -1)
            if depends_on(g, "u"):
                raise UnsupportedFieldStructure("phi is neither free of u nor linear in u")
            plain, logc = _integrate_power(g, lead)
            w = SU
            if to_poly(logc):
                w = w * Sym(lead) ** (-logc)
            if to_poly(plain):
                w = w * exp(-plain)
            w = simplify(w)
    try:
        pair = InvariantPair.of(r, w, seed=seed)
    except UnsupportedInvariantForm as exc:
        raise UnsupportedFieldStructure(str(exc)) from None
    if not verify_invariants(X, pair, seed=seed):
        raise UnsupportedFieldStructure("derived invariants failed verification")
    return pair


def _pair_invariant(gx: Expr, x: str, gt: Expr, t: str) -> Expr:
    """First integral of dx * gx(x) = dt * gt(t), written multiplicatively when
    both antiderivatives are pure logarithms."""
    px, lx = _integrate_power(gx, x)
    pt, lt = _integrate_power(gt, t)
    if not to_poly(px) and not to_poly(pt) and to_poly(lx) and to_poly(lt):
        # lx ln x - lt ln t = const  ->  x * t^(-lt/lx)
        return simplify(Sym(x) * Sym(t) ** simplify(-lt * lx ** -1))
    return simplify(px + lx * ln(Sym(x)) - pt - lt * ln(Sym(t)))


# ---------------------------------------------------------------------------
# reduction

@dataclass
class ReducedODE:
    """R(r, W, W_r, W_rr) = 0 together with how it was obtained."""

    R: Expr
    order: int
    invariants: InvariantPair | None = None
    ansatz: dict = field(default_factory=dict)  # "u", "u_t", "u_x", "u_xx" -> Expr
    multiplier: Expr = Num(1)  # in x, t: residual under the ansatz = multiplier * R
    ansatz_residual: Expr | None = None
    status: str = "symbolic"  # or "oracle-certified"
    independent: Sym = R_SYM
    unknown: tuple = W_JET
    params: tuple = ()


def _jet_total(e: Expr, v: str, r: Expr) -> Expr:
    """d/dv of an expression in (x, t, W, W_r, W_rr) with W = W(r(x, t))."""
    rv = diff(r, v)
    out = diff(e, v)
    for lo, hi in ((W, W1), (W1, W2)):
        d = diff(e, lo)
        if to_poly(d):
            out = out + rv * hi * d
    if to_poly(diff(e, W2)):
        raise UnsupportedInvariantForm("third derivative of W needed")
    return simplify(out)


def ansatz_derivatives(inv: InvariantPair) -> dict:
    """u, u_t, u_x, u_xx under u = (W(r) - B)/A, by the chain rule."""
    u = simplify((W - inv.B) * inv.A ** -1)
    ux = _jet_total(u, "x", inv.r)
    return {
        "u": u,
        "u_t": _jet_total(u, "t", inv.r),
        "u_x": ux,
        "u_xx": _jet_total(ux, "x", inv.r),
    }


def _elimination(r: Expr):
    """(variable kept, binding eliminating the other one) for r = x*t, t or x."""
    if r == ST:
        return "x", {"t": R_SYM}
    if r == SX:
        return "t", {"x": R_SYM}
    if not to_poly(simplify(r - SX * ST)):
        return "x", {"t": R_SYM * SX ** -1}
    raise UnsupportedInvariantForm(f"no elimination rule for r = {r}")


def _top_derivative(e: Expr):
    for s in (W2, W1):
        if s.name in e.free_names():
            return s
    return None


def _pure_part(c: Expr, v: str) -> Expr:
    """Product of the factors of a single-term ``c`` that involve only ``v``
    or numbers."""
    p = to_poly(c)
    if len(p) != 1:
        return c
    (mono, coef), = p.items()
    keep = tuple((a, ex) for a, ex in mono
                 if from_poly({((a, 1),): 1}).free_names() <= {v})
    return from_poly({keep: coef})


def reduce(pde, inv: InvariantPair, tol: float = 1e-9, seed: int = 42,
           trials: int = 100) -> ReducedODE:
    """Reduce ``pde`` to an ODE for W(r) using the invariants ``inv``.

    The multiplier is the part of the top-derivative coefficient that carries
    the surviving independent variable.  When the quotient is not symbolically
    free of that variable but the independence oracle certifies it, the
    variable is pinned to 1 and the result is flagged ``oracle-certified``.
    """
    kept, elim = _elimination(inv.r)
    ans = ansatz_derivatives(inv)
    bindings = {k: v for k, v in ans.items() if k in pde.delta.free_names() or k == "u"}
    try:
        resid = substitute(pde.delta, bindings)
    except UnsupportedSubstitution as exc:
        raise UnsupportedInvariantForm(str(exc)) from None
    if any(depends_on(resid, n) for n in ("u", "u_t", "u_x", "u_xx", "u_xt", "u_tt")):
        raise UnsupportedInvariantForm("unknown-function arguments could not be rewritten")
    E = substitute(resid, elim)
    top = _top_derivative(E)
    if top is None:
        raise UnsupportedInvariantForm("the reduced residual has no derivative of W")
    coeff = dict((m, c) for m, c in collect(E, [top]))
    lead = coeff.get(top)
    if lead is None:
        raise UnsupportedInvariantForm(f"{top.name} does not occur linearly")
    mu_kept = _pure_part(lead, kept) if len(to_poly(lead)) == 1 else Num(1)
    if len(to_poly(lead)) == 1 and _free_of(lead, kept, "W", "W_r"):
        mu_kept = lead
    R = simplify(E * mu_kept ** -1)
    status = "symbolic"
    params = tuple(pde.param_names)
    if depends_on(R, kept):
        verdict, witnesses = independence_oracle(R, kept, trials, seed, params, tol)
        if not verdict:
            raise NotSelfSimilar(
                f"reduced residual depends on {kept} at fixed r", witnesses)
        R = substitute(R, {kept: Num(1)})
        status = "oracle-certified"
    back = {"r": inv.r}
    mu = substitute(mu_kept, back)
    order = 2 if W2.name in R.free_names() else 1
    return ReducedODE(R, order, inv, ans, mu, resid, status, R_SYM, W_JET, params)


def independence_oracle(R: Expr, kept: str, trials: int = 100, seed: int = 42, params=(),
                        tol: float = 1e-9):
    """Compare R at pairs of points sharing r and the W-jet but not ``kept``."""
    rng = np.random.default_rng(seed)
    var_names, par_names = split_leaves([R], params, {kept: 1.0})
    witnesses = []
    for _ in range(trials):
        for _attempt in range(8):
            point = sample_point(var_names, par_names, rng)
            a = float(rng.uniform(*VAR_BOX))
            b = float(rng.uniform(*VAR_BOX))
            try:
                v1 = eval_num(R, {**point, kept: a})
                v2 = eval_num(R, {**point, kept: b})
                break
            except DomainError:
                continue
        else:
            raise SamplingExhausted("no admissible point for the independence oracle")
        if scaled_error(v1, v2) > tol:
            witnesses.append(({**point, kept: a}, {**point, kept: b}))
            if len(witnesses) >= 2:
                return False, witnesses
    return not witnesses, witnesses


def r_only_oracle(ode: ReducedODE, trials: int = 100, seed: int = 42, tol: float = 1e-9):
    """Residual under the ansatz divided by the multiplier, compared at pairs
    of (x, t) points sharing the same r."""
    kept, elim = _elimination(ode.invariants.r)
    quotient = substitute(simplify(ode.ansatz_residual * ode.multiplier ** -1), elim)
    return independence_oracle(quotient, kept, trials, seed, ode.params, tol)


def reduction_soundness(ode: ReducedODE, trials: int = 100, seed: int = 42, tol: float = 1e-9):
    """max over samples of |residual - mu R| / (1 + |mu R|) with r = r(x, t)."""
    inv = ode.invariants
    rhs = simplify(ode.multiplier * substitute(ode.R, {"r": inv.r}))
    lhs = ode.ansatz_residual
    rng = np.random.default_rng(seed)
    var_names, par_names = split_leaves([lhs, rhs], ode.params)
    worst = 0.0
    for _ in range(trials):
        _, (a, b) = sample_evaluate([lhs, rhs], rng, var_names, par_names)
        worst = max(worst, abs(a - b) / (1.0 + abs(b)))
    return worst <= tol, worst


# ---------------------------------------------------------------------------
# autonomous and separable first-order reductions

def autonomous_reduce(ode: ReducedODE, name: str = "F") -> ReducedODE:
    """W_r = F(W), W_rr = F'(W) F(W): a first-order ODE for F in c = W."""
    R = ode.R
    if depends_on(R, ode.independent.name) or ode.order != 2:
        raise NotAutonomous("needs a second-order ODE free of the independent variable")
    used = {leaf.name for leaf in R.free_symbols() if isinstance(leaf, Fn)}
    while name in used:
        name += "1"
    c = Sym("c")
    F = Fn(name, ("c",))
    out = substitute(R, {"W_r": F, "W_rr": F.deriv("c") * F})
    out = substitute(out, {"W": c})
    return ReducedODE(out, 1, ode.invariants, dict(ode.ansatz), ode.multiplier,
                      ode.ansatz_residual, ode.status, c, (F, F.deriv("c")), ode.params)


@dataclass(frozen=True)
class FormalIntegral:
    """Unevaluated antiderivative of ``integrand`` in ``var`` up to ``upper``."""

    integrand: Expr
    var: Sym
    upper: Expr

    def render(self) -> str:
        from .lang import render
        return f"Integral({render(self.integrand)}, {self.var.name}, {render(self.upper)})"

    def evaluate(self, assignment: dict, lower: float) -> float:
        """Definite integral from ``lower`` to the upper limit, numerically."""
        hi = eval_num(self.upper, assignment)
        g = lambda s: eval_num(self.integrand, {**assignment, self.var.name: s})
        val, _ = quad(g, lower, hi, epsabs=1e-10, epsrel=1e-12, limit=200)
        return val


@dataclass
class Quadrature:
    """Implicit solution r - Integral(G, c1, W) + c2 = 0."""

    integral: FormalIntegral
    independent: Sym
    constant: Sym
    source: ReducedODE | None = None

    @property
    def integrand(self) -> Expr:
        return self.integral.integrand

    def render(self) -> str:
        return f"{self.independent.name} - {self.integral.render()} + {self.constant.name} = 0"

    def elementary(self) -> Expr | None:
        """Closed form when the integrand is a polynomial in the dummy variable."""
        c1 = self.integral.var.name
        try:
            anti = _antiderivative(self.integrand, c1)
        except UnsupportedFieldStructure:
            return None
        if "ln" in repr(anti) or any(isinstance(leaf, Fn) for leaf in self.integrand.free_symbols()):
            return None
        anti = substitute(anti, {c1: self.integral.upper})
        return simplify(self.independent - anti + self.constant)


def separable_solve(ode: ReducedODE) -> Quadrature:
    """W_r = G(W) integrated as r - Integral(1/G(c1), c1, W) + c2 = 0."""
    R = ode.R
    if ode.order != 1 or depends_on(R, ode.independent.name):
        raise NotSeparable("needs a first-order ODE free of the independent variable")
    try:
        parts = dict(collect(R, [W1]))
    except Exception as exc:
        raise NotSeparable(f"W_r does not enter polynomially: {exc}") from None
    if set(parts) - {W1, Num(1)}:
        raise NotSeparable("the ODE is not linear in W_r")
    a = parts.get(W1)
    b = parts.get(Num(1), Num(0))
    if a is None or depends_on(a, "W_r") or depends_on(b, "W_r"):
        raise NotSeparable("W_r coefficient missing")
    if not to_poly(b):
        raise NotSeparable("W_r = 0 has only constant solutions")
    c1 = Sym("c1")
    # a W_r + b = 0  =>  W_r = G(W) = -b/a, integrand 1/G
    integrand = substitute(simplify(-a * b ** -1), {"W": c1})
    return Quadrature(FormalIntegral(integrand, c1, W), ode.independent, Sym("c2"), ode)


def _test_functions(exprs, rng) -> dict:
    """Concrete positive stand-ins alpha + beta s^2 for one-argument unknown functions."""
    s = Sym("s")
    table = {}
    for e in exprs:
        for leaf in e.free_symbols():
            if isinstance(leaf, Fn) and leaf.name not in table:
                if len(leaf.args) != 1:
                    raise NotSeparable(f"cannot sample {leaf.label}: more than one argument")
                alpha = Fraction(float(rng.uniform(0.5, 2.0))).limit_denominator(1000)
                beta = Fraction(float(rng.uniform(0.2, 1.0))).limit_denominator(1000)
                table[leaf.name] = alpha + beta * s * s
    return table


def _with_test_functions(e: Expr, table: dict) -> Expr:
    concrete = {}
    for leaf in e.free_symbols():
        if isinstance(leaf, Fn) and leaf.name in table:
            concrete[leaf.name] = substitute(table[leaf.name], {"s": Sym(leaf.args[0])})
    return instantiate(e, concrete) if concrete else e


def implicit_differentiation_check(q: Quadrature, trials: int = 100, seed: int = 42,
                                   rel_tol: float = 1e-7, h: float = 1e-3):
    """Differentiate the implicit relation numerically and compare with the ODE.

    Unknown functions become random positive quadratics.  The derivative of the
    formal integral in its upper limit uses a five-point stencil over numeric
    quadrature; then r - Phi(W) + c2 = 0 gives W_r = 1/Phi'(W), which must
    satisfy the source ODE.  Returns (passed, worst scaled error).
    """
    rng = np.random.default_rng(seed)
    table = _test_functions([q.integrand, q.source.R], rng)
    integrand = _with_test_functions(q.integrand, table)
    R = _with_test_functions(q.source.R, table)
    skip = {"W", "W_r", q.integral.var.name, q.independent.name}
    params = sorted((integrand.free_names() | R.free_names()) - skip)
    slope_coeff = diff(R, "W_r")
    worst = 0.0
    for _ in range(trials):
        point = sample_point(["W"], params, rng)
        w0 = point["W"]

        def phi(wv):
            return FormalIntegral(integrand, q.integral.var, Num(wv)).evaluate(point, 0.5 * w0)

        dphi = (-phi(w0 + 2 * h) + 8 * phi(w0 + h) - 8 * phi(w0 - h) + phi(w0 - 2 * h)) / (12 * h)
        slope = 1.0 / dphi
        at = {**point, "W_r": slope}
        val = eval_num(R, at)
        size = abs(eval_num(slope_coeff, at) * slope)
        worst = max(worst, abs(val) / (1.0 + size))
    return worst <= rel_tol, worst


__all__ = [
    "InvariantPair", "InvariantReport", "verify_invariants", "jacobian_rank2",
    "characteristics_solve", "ReducedODE", "ansatz_derivatives", "reduce",
    "independence_oracle", "r_only_oracle", "reduction_soundness", "autonomous_reduce", "FormalIntegral",
    "Quadrature", "separable_solve", "implicit_differentiation_check",
]
