"""Infinitesimal criterion, determining systems and ansatz-based solving."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .calculus import collect, denominator_multiplier, reconstruct, rewrite_derivatives, substitute
from .errors import AssumptionMissing, IllegalDependence, RankDeficientSampling, ResidualOrderLeak
from .expr import Expr, Fn, Num, Sym, as_expr, from_poly, simplify, to_poly
from .jet import DEFAULT_CONTEXT, JetContext, VectorField, apply_prolonged, jet_index, total_d
from .numeric import max_scaled_residual, sample_evaluate, split_leaves

INFINITESIMALS = ("xi", "eta", "phi")
U_X, U_T, U_XX, U_XT, U_TT = (Sym(n) for n in ("u_x", "u_t", "u_xx", "u_xt", "u_tt"))


def general_field(args=("x", "t", "u")) -> VectorField:
    """X with unknown components xi(x,t,u), eta(x,t,u), phi(x,t,u)."""
    return VectorField(*(Fn(n, args) for n in INFINITESIMALS))


@dataclass
class EvolutionPDE:
    """u_t = rhs(x, t, u, u_x, u_xx); ``delta`` is u_t - rhs."""

    rhs: Expr
    params: dict = field(default_factory=dict)  # name -> nonzero flag
    provenance: tuple = ("evolution",)
    assumptions: dict = field(default_factory=dict)  # function name -> nonzero flag
    name: str = ""

    def __post_init__(self):
        self.rhs = simplify(self.rhs)
        for leaf in self.rhs.free_symbols():
            if isinstance(leaf, Sym):
                idx = jet_index(leaf.name)
                if idx is not None and idx[1] > 0:
                    raise IllegalDependence(f"right-hand side contains {leaf.name}")
        self.delta = simplify(U_T - self.rhs)

    @property
    def param_names(self) -> tuple:
        return tuple(self.params)

    @property
    def nonzero(self) -> frozenset:
        out = {p for p, nz in self.params.items() if nz}
        out |= {f for f, nz in self.assumptions.items() if nz}
        return frozenset(out)


def _check_xu(e, label):
    for leaf in e.free_symbols():
        if isinstance(leaf, Sym):
            if leaf.name == "t" or (jet_index(leaf.name) not in (None, (0, 0))):
                raise IllegalDependence(f"{label} depends on {leaf.name}")
        elif isinstance(leaf, Fn) and ("t" in leaf.args or any(
                jet_index(a) not in (None, (0, 0)) for a in leaf.args)):
            raise IllegalDependence(f"{label} depends on t or derivatives through {leaf.label}")


def build_grdc(f, h, k, params=None, assumptions=None, name="", ctx: JetContext = DEFAULT_CONTEXT):
    """u_t = (f u_x)_x + h u_x + k with f, h, k functions of (x, u)."""
    f, h, k = (simplify(as_expr(v)) for v in (f, h, k))
    for e, label in ((f, "f"), (h, "h"), (k, "k")):
        _check_xu(e, label)
    rhs = simplify(total_d(f * U_X, "x", ctx) + h * U_X + k)
    if assumptions is None:
        assumptions = {f.name: True} if isinstance(f, Fn) else {}
    return EvolutionPDE(rhs, dict(params or {}), ("grdc", f, h, k), dict(assumptions), name)


def build_evolution(rhs, params=None, assumptions=None, name=""):
    return EvolutionPDE(as_expr(rhs), dict(params or {}), ("evolution",), dict(assumptions or {}), name)


# ---------------------------------------------------------------------------
# criterion

def _evolution_substitution(pde: EvolutionPDE, residual: Expr) -> Expr:
    names = residual.free_names()
    bindings = {}
    if "u_t" in names:
        bindings["u_t"] = pde.rhs
    if "u_xt" in names:
        bindings["u_xt"] = total_d(pde.rhs, "x")
    if "u_tt" in names:
        ctx4 = JetContext(max_order=4)
        rhs_x = total_d(pde.rhs, "x", ctx4)
        dt = total_d(pde.rhs, "t", ctx4)
        bindings["u_tt"] = substitute(dt, {
            "u_t": pde.rhs, "u_xt": rhs_x, "u_xxt": total_d(rhs_x, "x", ctx4),
        })
    if not bindings:
        return residual
    return substitute(residual, bindings)


def criterion_residual(pde: EvolutionPDE, X: VectorField, mode: str = "evolution",
                       ctx: JetContext = DEFAULT_CONTEXT) -> Expr:
    """X^(2) applied to u_t - rhs.

    ``free`` keeps u_t, u_xt, u_tt as independent coordinates.  ``evolution``
    restricts to solutions by replacing them with rhs and its derivatives; the
    only third-order coordinate that may survive is the parametric u_xxx.
    """
    if mode not in ("free", "evolution"):
        raise ValueError(f"unknown mode {mode!r}")
    res = apply_prolonged(X, pde.delta, ctx)
    if mode == "free":
        return res
    res = _evolution_substitution(pde, res)
    leaks = sorted(n for n in res.free_names()
                   if (idx := jet_index(n)) is not None and idx[1] > 0)
    if leaks:
        raise ResidualOrderLeak(f"time derivatives survive restriction: {leaks}")
    return res


def third_order_part(residual, ctx: JetContext = DEFAULT_CONTEXT) -> list:
    """(monomial, coefficient) rows that involve a third-order coordinate."""
    third = [c.name for c in ctx.coords(3, 3)]
    present = [n for n in third if n in as_expr(residual).free_names()]
    if not present:
        return []
    return [(m, c) for m, c in collect(residual, present) if m.free_names()]


@dataclass
class DeterminingSystem:
    rows: list  # (monomial, coefficient) pairs, each coefficient = 0
    multiplier: Expr
    mode: str
    variables: tuple = ()
    cleared: Expr | None = None  # multiplier * residual

    def __len__(self):
        return len(self.rows)

    def monomials(self):
        return [m for m, _ in self.rows]

    def coefficient(self, monomial) -> Expr:
        monomial = simplify(as_expr(monomial))
        for m, c in self.rows:
            if m == monomial:
                return c
        return Num(0)

    def reconstruct(self) -> Expr:
        return reconstruct(self.rows)


def extract_system(residual, mode: str = "evolution", ctx: JetContext = DEFAULT_CONTEXT) -> DeterminingSystem:
    """Split the cleared residual into coefficients of jet monomials."""
    residual = simplify(as_expr(residual))
    jets = [c.name for c in ctx.coords(1)]
    mult = denominator_multiplier(residual)
    cleared = simplify(mult * residual) if to_poly(mult) != {(): 1} else residual
    present = [n for n in jets if n in cleared.free_names()]
    rows = collect(cleared, present)
    return DeterminingSystem(rows, mult, mode, tuple(present), cleared)


# ---------------------------------------------------------------------------
# structural reduction

@dataclass
class StructuralReduction:
    facts: list  # derivative symbols shown to vanish
    equations: list  # remaining (monomial, coefficient) rows
    rewrites: list  # (symbol, replacement) used on higher derivatives
    original: DeterminingSystem


def _infinitesimal_factor(mono, nonzero, names):
    """If ``mono`` is (nonzero stuff) * single infinitesimal derivative, return it."""
    target = None
    for a, e in mono:
        if isinstance(a, Fn) and a.name in names:
            if target is not None or e <= 0:
                return None
            target = a
        elif isinstance(a, Fn) and a.order == 0 and a.name in nonzero:
            continue
        elif isinstance(a, Sym) and a.name in nonzero:
            continue
        else:
            return None
    return target


def _linear_relation(coeff: Expr, names):
    """Constant-coefficient linear relation among infinitesimal derivatives."""
    p = to_poly(coeff)
    terms = []
    for mono, c in p.items():
        if len(mono) != 1:
            return None
        a, e = mono[0]
        if not (isinstance(a, Fn) and a.name in names and e == 1):
            return None
        terms.append((a, c))
    return terms if len(terms) >= 2 else None


def structural_reduce(sys: DeterminingSystem, assumptions, infinitesimals=INFINITESIMALS,
                      max_rounds: int = 20) -> StructuralReduction:
    """Deduce vanishing derivatives from one-term rows and simplify the rest.

    ``assumptions`` maps names (e.g. ``"f"``) to a nonzero flag.  A row
    ``c * f * eta_x`` with f nonzero yields the fact eta_x = 0, which also
    kills every higher derivative of eta_x.  A row that is a constant-
    coefficient relation such as phi_u - eta_t is kept as an equation and used
    to rewrite the higher derivatives of its phi term.
    """
    if "f" not in assumptions:
        raise AssumptionMissing("structural reduction needs an assumption on f")
    if not assumptions["f"]:
        return StructuralReduction([], list(sys.rows), [], sys)
    nonzero = frozenset(n for n, nz in assumptions.items() if nz)
    names = frozenset(infinitesimals)
    order = {n: i for i, n in enumerate(infinitesimals)}
    facts, rewrites = [], []
    rows = list(sys.rows)
    for _ in range(max_rounds):
        changed = False
        for _, c in rows:
            p = to_poly(c)
            if len(p) != 1:
                continue
            (mono, _), = p.items()
            target = _infinitesimal_factor(mono, nonzero, names)
            if target is not None and target not in facts:
                facts.append(target)
                changed = True
        for _, c in rows:
            rel = _linear_relation(c, names)
            if rel is None:
                continue
            a, ca = max(rel, key=lambda tc: (order[tc[0].name], -tc[0].order))
            if any(r[0] == a for r in rewrites):
                continue
            rest = simplify(sum((from_poly({((b, 1),): -cb / ca}) for b, cb in rel if b != a), Num(0)))
            rewrites.append((a, rest))
            changed = True
        rules = [(fct, Num(0), True) for fct in facts] + [(a, r, False) for a, r in rewrites]
        new_rows = []
        for m, c in rows:
            c2 = c
            for _ in range(max_rounds):
                nxt = rewrite_derivatives(c2, rules)
                if nxt == c2:
                    break
                c2 = nxt
            if to_poly(c2):
                new_rows.append((m, c2))
        if new_rows != rows:
            changed = True
        rows = new_rows
        if not changed:
            break
    return StructuralReduction(facts, rows, rewrites, sys)


# ---------------------------------------------------------------------------
# verification and ansatz solving

@dataclass
class VerificationReport:
    residual: Expr
    max_scaled: float
    seed: int
    points: int
    tol: float
    passed: bool
    symbolic_zero: bool
    notes: list = field(default_factory=list)
    witness: dict | None = None

    def __bool__(self):
        return self.passed


def verify_generator(pde: EvolutionPDE, X: VectorField, tol: float = 1e-8, seed: int = 42,
                     trials: int = 100) -> VerificationReport:
    """Evolution-mode residual, decided symbolically or by the oracle."""
    res = criterion_residual(pde, X, "evolution")
    if not to_poly(res):
        return VerificationReport(res, 0.0, seed, 0, tol, True, True)
    worst, witness = max_scaled_residual(res, trials, seed, pde.param_names)
    passed = worst <= tol
    notes = [] if passed else [f"scaled residual {worst:.3e} exceeds {tol:.1e}"]
    return VerificationReport(res, worst, seed, trials, tol, passed, False, notes,
                              None if passed else witness)


def _basis_fields(bases):
    fields = []
    for comp in ("xi", "eta", "phi"):
        for b in bases.get(comp, ()):
            kw = {comp: as_expr(b)}
            fields.append(VectorField.of(**kw))
    return fields


def rationalize(v: float, max_den: int = 64, tol: float = 1e-8):
    """Nearest small rational when within ``tol``, else the float itself."""
    fr = Fraction(v).limit_denominator(max_den)
    if abs(float(fr) - v) <= tol:
        return fr
    return v


def nullspace(M: np.ndarray, rel_tol: float = 1e-8) -> np.ndarray:
    """Columns spanning the numeric nullspace, in reduced row-echelon form."""
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rel_tol * smax)) if smax > 0 else 0
    N = vt[rank:].T  # n x d
    if N.shape[1] == 0:
        return N
    return _rref_columns(N)


def _rref_columns(N: np.ndarray) -> np.ndarray:
    """Row-reduce the basis so each vector has a unit pivot (stable choice)."""
    A = N.T.copy()  # d x n
    d, n = A.shape
    row = 0
    for col in range(n):
        if row == d:
            break
        piv = row + int(np.argmax(np.abs(A[row:, col])))
        if abs(A[piv, col]) < 1e-10:
            continue
        A[[row, piv]] = A[[piv, row]]
        A[row] /= A[row, col]
        for r in range(d):
            if r != row:
                A[r] -= A[r, col] * A[row]
        row += 1
    A[np.abs(A) < 1e-12] = 0.0
    return A.T


@dataclass
class AnsatzResult:
    fields: list
    reports: list
    rank: int
    unknowns: int
    seed: int


def solve_ansatz(pde: EvolutionPDE, bases, tol: float = 1e-8, seed: int = 42,
                 rank_tol: float = 1e-8, attempts: int = 3, oversample: int = 3) -> list:
    """Symmetries in the span of the given bases (see ``solve_ansatz_full``)."""
    return solve_ansatz_full(pde, bases, tol, seed, rank_tol, attempts, oversample).fields


def solve_ansatz_full(pde: EvolutionPDE, bases, tol: float = 1e-8, seed: int = 42,
                      rank_tol: float = 1e-8, attempts: int = 3, oversample: int = 3) -> AnsatzResult:
    """Find every X = sum a_i X_i with X_i from the bases satisfying the criterion.

    The residual is linear in the unknown constants, so each basis field's
    residual is sampled at random jet points and the nullspace of the sample
    matrix is taken.  Parameters are pinned to one draw per attempt; unknown
    function values are redrawn at every point.
    """
    fields = _basis_fields(bases)
    n = len(fields)
    if n == 0:
        return AnsatzResult([], [], 0, 0, seed)
    residuals = [criterion_residual(pde, X, "evolution") for X in fields]
    last_error = None
    for attempt in range(attempts + 1):
        s = seed + attempt
        rng = np.random.default_rng(s)
        var_names, par_names = split_leaves(residuals, pde.param_names)
        pinned_params = [p for p in par_names if p in pde.params]
        per_point = [p for p in par_names if p not in pde.params]
        fixed, _ = sample_evaluate([], rng, [], pinned_params)
        rows = []
        for _ in range(max(oversample * n, n + 1)):
            _, vals = sample_evaluate(residuals, rng, var_names, per_point, fixed)
            rows.append(vals)
        M = np.array(rows, dtype=float)
        scale = np.linalg.norm(M, axis=0)
        scale[scale == 0] = 1.0
        N = nullspace(M / scale, rank_tol)
        vectors = N / scale[:, None] if N.size else N
        out, reports, ok = [], [], True
        for j in range(vectors.shape[1] if vectors.size else 0):
            v = vectors[:, j]
            piv = np.flatnonzero(np.abs(v) > 1e-12)
            v = v / v[piv[0]] if piv.size else v
            coeffs = [rationalize(float(c)) for c in v]
            X = _combine(fields, coeffs)
            rep = verify_generator(pde, X, tol, s)
            if not rep.passed:
                ok = False
                last_error = f"nullspace vector {j} failed verification ({rep.max_scaled:.2e})"
                break
            out.append(X)
            reports.append(rep)
        if ok:
            rank = n - len(out)
            return AnsatzResult(out, reports, rank, n, s)
    raise RankDeficientSampling(last_error or "sampling did not determine the nullspace")


def _combine(fields, coeffs) -> VectorField:
    xi, eta, phi = Num(0), Num(0), Num(0)
    for X, c in zip(fields, coeffs):
        if c == 0:
            continue
        cn = Num(c)
        xi = xi + cn * X.xi
        eta = eta + cn * X.eta
        phi = phi + cn * X.phi
    return VectorField(xi, eta, phi)


def pde_from_problem(prob) -> EvolutionPDE:
    """EvolutionPDE for a parsed ``ProblemFile``."""
    if prob.form == "grdc":
        return build_grdc(prob.f, prob.h, prob.k, params=prob.params, name=prob.name)
    return build_evolution(prob.rhs, params=prob.params, name=prob.name)


def problem_fields(prob) -> list:
    return [VectorField(*g) for g in prob.generators]
