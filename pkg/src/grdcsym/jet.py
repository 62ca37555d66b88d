"""Jet coordinates, total derivatives and prolongation of point vector fields."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import OrderOverflow
from .expr import Expr, Sym, as_expr, from_poly, padd, pdiff, pmul, patom, simplify, to_poly
from .lang import JET_RE

X, T, U = Sym("x"), Sym("t"), Sym("u")


def jet_name(ix: int, it: int, dep: str = "u") -> str:
    """Canonical coordinate name, x-indices first: ``u_xxt``."""
    if ix == it == 0:
        return dep
    return f"{dep}_{'x' * ix}{'t' * it}"


def jet_index(name: str):
    """(ix, it) for a jet coordinate name, ``(0, 0)`` for u, else None."""
    if name == "u":
        return (0, 0)
    m = JET_RE.match(name)
    if not m or not (m.group(1) or m.group(2)):
        return None
    return (len(m.group(1)), len(m.group(2)))


def as_index(J) -> tuple:
    """Accept ``"xt"``, ``("x", "t")`` or ``(1, 1)``."""
    if isinstance(J, str):
        if set(J) - {"x", "t"}:
            raise ValueError(f"bad multi-index {J!r}")
        return (J.count("x"), J.count("t"))
    J = tuple(J)
    if len(J) == 2 and all(isinstance(n, int) for n in J):
        return J
    return (sum(1 for v in J if v == "x"), sum(1 for v in J if v == "t"))


@dataclass(frozen=True)
class JetContext:
    """Two independent variables, one dependent; jets up to ``max_order``."""

    independent: tuple = ("x", "t")
    dependent: str = "u"
    max_order: int = 3

    def coord(self, ix: int, it: int) -> Sym:
        if ix + it > self.max_order:
            raise OrderOverflow(f"jet order {ix + it} exceeds {self.max_order}")
        return Sym(jet_name(ix, it, self.dependent))

    def coords(self, min_order: int = 1, max_order: int | None = None) -> list:
        top = self.max_order if max_order is None else max_order
        return [
            self.coord(n - it, it)
            for n in range(min_order, top + 1)
            for it in range(n + 1)
        ]

    def jets_in(self, e) -> dict:
        """``{(ix, it): Sym}`` for u and every jet coordinate occurring in ``e``."""
        out = {}
        for leaf in as_expr(e).free_symbols():
            if isinstance(leaf, Sym):
                idx = jet_index(leaf.name)
                if idx is not None:
                    out[idx] = leaf
        return out

    def order_of(self, e) -> int:
        idx = self.jets_in(e)
        return max((a + b for a, b in idx), default=0)


DEFAULT_CONTEXT = JetContext()


def _step(idx, v):
    ix, it = idx
    return (ix + 1, it) if v == "x" else (ix, it + 1)


def total_d_poly(p, v: str, ctx: JetContext, cache=None):
    if cache is None:
        cache = {}
    out = pdiff(p, v, cache)
    present = set()
    dep = ctx.dependent
    for mono in p:
        for a, _ in mono:
            for leaf in a.free_symbols():
                if isinstance(leaf, Sym):
                    idx = jet_index(leaf.name)
                    if idx is not None:
                        present.add(idx)
                elif dep in leaf.args:
                    present.add((0, 0))
    for idx in sorted(present):
        nxt = _step(idx, v)
        if nxt[0] + nxt[1] > ctx.max_order:
            raise OrderOverflow(
                f"D_{v} of {jet_name(*idx)} needs order {nxt[0] + nxt[1]} > {ctx.max_order}"
            )
        dp = pdiff(p, jet_name(*idx, ctx.dependent), cache)
        if dp:
            out = padd(out, pmul(patom(ctx.coord(*nxt)), dp))
    return out


def total_d(e, v, ctx: JetContext = DEFAULT_CONTEXT) -> Expr:
    """Total derivative D_v on jet space (v is x or t)."""
    v = v.name if isinstance(v, Sym) else v
    if v not in ctx.independent:
        raise ValueError(f"{v!r} is not an independent variable")
    return from_poly(total_d_poly(to_poly(as_expr(e)), v, ctx))


def total_d_multi(e, J, ctx: JetContext = DEFAULT_CONTEXT) -> Expr:
    ix, it = as_index(J)
    p = to_poly(as_expr(e))
    for _ in range(ix):
        p = total_d_poly(p, "x", ctx)
    for _ in range(it):
        p = total_d_poly(p, "t", ctx)
    return from_poly(p)


@dataclass(frozen=True)
class VectorField:
    """X = xi d/dx + eta d/dt + phi d/du with components in (x, t, u)."""

    xi: Expr
    eta: Expr
    phi: Expr

    def __post_init__(self):
        for name in ("xi", "eta", "phi"):
            e = simplify(as_expr(getattr(self, name)))
            object.__setattr__(self, name, e)
            for leaf in e.free_symbols():
                if isinstance(leaf, Sym):
                    idx = jet_index(leaf.name)
                    if idx is not None and idx != (0, 0):
                        raise ValueError(f"{name} contains jet coordinate {leaf.name}")

    @classmethod
    def of(cls, xi=0, eta=0, phi=0):
        return cls(as_expr(xi), as_expr(eta), as_expr(phi))

    def components(self):
        return (self.xi, self.eta, self.phi)

    def __add__(self, other):
        return VectorField(self.xi + other.xi, self.eta + other.eta, self.phi + other.phi)

    def scale(self, c):
        c = as_expr(c)
        return VectorField(c * self.xi, c * self.eta, c * self.phi)

    def apply(self, e) -> Expr:
        """Action on a function of (x, t, u): xi e_x + eta e_t + phi e_u."""
        p = to_poly(as_expr(e))
        out = {}
        for comp, v in zip(self.components(), ("x", "t", "u")):
            d = pdiff(p, v)
            if d:
                out = padd(out, pmul(to_poly(comp), d))
        return from_poly(out)

    def is_zero(self) -> bool:
        return all(not to_poly(c) for c in self.components())


def characteristic(X: VectorField) -> Expr:
    """Q = phi - xi u_x - eta u_t."""
    return simplify(X.phi - X.xi * Sym("u_x") - X.eta * Sym("u_t"))


def prolong_coeff(X: VectorField, J, ctx: JetContext = DEFAULT_CONTEXT) -> Expr:
    """phi^J = D_J Q + xi u_{J,x} + eta u_{J,t}."""
    ix, it = as_index(J)
    if ix + it + 1 > ctx.max_order:
        raise OrderOverflow(f"phi^J for |J|={ix + it} needs jets of order {ix + it + 1}")
    q = total_d_multi(characteristic(X), (ix, it), ctx)
    return simplify(q + X.xi * ctx.coord(ix + 1, it) + X.eta * ctx.coord(ix, it + 1))


def prolong_coeff_recursive(X: VectorField, J, ctx: JetContext = DEFAULT_CONTEXT) -> Expr:
    """Same coefficient through phi^{J,v} = D_v phi^J - (D_v xi) u_{J,x} - (D_v eta) u_{J,t}."""
    ix, it = as_index(J)
    steps = ["x"] * ix + ["t"] * it
    coeff = X.phi
    cur = (0, 0)
    for v in steps:
        nxt_x = _step(cur, "x")
        nxt_t = _step(cur, "t")
        coeff = simplify(
            total_d(coeff, v, ctx)
            - total_d(X.xi, v, ctx) * ctx.coord(*nxt_x)
            - total_d(X.eta, v, ctx) * ctx.coord(*nxt_t)
        )
        cur = _step(cur, v)
    return coeff


@dataclass(frozen=True)
class ProlongedField:
    base: VectorField
    coeffs: dict = field(default_factory=dict)  # (ix, it) -> Expr

    def __getitem__(self, J):
        return self.coeffs[as_index(J)]


def prolong(X: VectorField, order: int = 2, ctx: JetContext = DEFAULT_CONTEXT) -> ProlongedField:
    coeffs = {}
    for n in range(1, order + 1):
        for it in range(n + 1):
            coeffs[(n - it, it)] = prolong_coeff(X, (n - it, it), ctx)
    return ProlongedField(X, coeffs)


def apply_prolonged(X: VectorField, e, ctx: JetContext = DEFAULT_CONTEXT, order: int = 2) -> Expr:
    """X^(order) applied to ``e``; only the coefficients ``e`` needs are built."""
    e = as_expr(e)
    jets = ctx.jets_in(e)
    top = max((a + b for a, b in jets), default=0)
    if top > order:
        raise OrderOverflow(f"expression has order {top} > {order}")
    p = to_poly(e)
    out = {}
    for comp, v in zip(X.components(), ("x", "t", "u")):
        d = pdiff(p, v)
        if d:
            out = padd(out, pmul(to_poly(comp), d))
    for idx in sorted(jets):
        if idx == (0, 0):
            continue
        d = pdiff(p, jet_name(*idx, ctx.dependent))
        if d:
            out = padd(out, pmul(to_poly(prolong_coeff(X, idx, ctx)), d))
    return from_poly(out)
