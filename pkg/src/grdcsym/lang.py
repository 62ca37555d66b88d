"""Text grammar, canonical printer, JSON wire format and problem files.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := number | ident | ident '(' expr {',' expr} ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so ``-u^2``
is ``-(u^2)`` while ``u^-1`` is ``u^(-1)``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ExprSyntaxError, MalformedDocument, SchemaError, UnknownIdentifier
from .expr import (
    APPLY_NAMES, MINUS_ONE, Add, Apply, Expr, Fn, Mul, Num, Pow, Sym, as_expr, simplify,
)

BASE_SYMBOLS = frozenset({"x", "t", "u"})
JET_RE = re.compile(r"u_(x*)(t*)$")
MAX_JET_ORDER = 4


def is_jet_name(name: str) -> bool:
    m = JET_RE.match(name)
    return bool(m) and 0 < len(m.group(1)) + len(m.group(2)) <= MAX_JET_ORDER


def is_builtin(name: str) -> bool:
    return name in BASE_SYMBOLS or is_jet_name(name)


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<pow2>\*\*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "pow2":
            raise ExprSyntaxError("'**' is not an operator", line, col, hint="use '^' for powers")
        if kind == "ws":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = pos + tok.rfind("\n") + 1
        else:
            out.append(Token(kind, tok, line, col))
        pos = m.end()
    col = pos - line_start + 1
    out.append(Token("end", "", line, col))
    return out


# ---------------------------------------------------------------------------
# parser

def _split_derivative(name: str, functions: dict):
    """Resolve ``f_xu`` against declared functions; returns an ``Fn`` or None."""
    if "_" not in name:
        return None
    base, suffix = name.split("_", 1)
    args = functions.get(base)
    if args is None or not suffix:
        return None
    d = [0] * len(args)
    i = 0
    order = sorted(range(len(args)), key=lambda j: -len(args[j]))
    while i < len(suffix):
        for j in order:
            a = args[j]
            if suffix.startswith(a, i):
                d[j] += 1
                i += len(a)
                break
        else:
            return None
    return Fn(base, args, d)


class Parser:
    def __init__(self, text: str, declared=None, functions=None):
        self.tokens = tokenize(text)
        self.i = 0
        self.declared = None if declared is None else set(declared)
        self.functions = dict(functions or {})

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, message, tok=None, hint=None):
        tok = tok or self.tok
        return ExprSyntaxError(message, tok.line, tok.col, hint)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind not in ("op",):
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            hint = "use explicit '*' for products" if self.tok.kind in ("ident", "num") or self.tok.text == "(" else None
            raise self.error(f"unexpected {self.tok.text!r}", hint=hint)
        return e

    def expr(self):
        terms = [self.term()]
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            t = self.term()
            terms.append(t if op == "+" else _negate(t))
        return terms[0] if len(terms) == 1 else Add(terms)

    def term(self):
        factors = [self.unary()]
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            f = self.unary()
            factors.append(f if op == "*" else Pow(f, MINUS_ONE))
        return factors[0] if len(factors) == 1 else Mul(factors)

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return _negate(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            raise self.error("unary '+' is not allowed")
        return self.power()

    def power(self):
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return Pow(base, self.unary())
        return base

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            if any(ch in tok.text for ch in ".eE"):
                return Num(float(tok.text))
            return Num(int(tok.text))
        if tok.kind == "ident":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(tok)
            return self.identifier(tok)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected {tok.text!r}")

    def call(self, tok):
        self.expect("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        name = tok.text
        if name in APPLY_NAMES:
            if len(args) != 1:
                raise self.error(f"{name} takes one argument", tok)
            return Apply(name, args[0])
        if not all(isinstance(a, Sym) for a in args):
            raise self.error("unknown-function arguments must be plain symbols", tok)
        arg_names = tuple(a.name for a in args)
        base = name.split("_", 1)[0]
        known = self.functions.get(base)
        if known is not None and known != arg_names:
            raise self.error(f"function {base!r} redeclared with different arguments", tok)
        self.functions[base] = arg_names
        fn = _split_derivative(name, self.functions) if "_" in name else Fn(name, arg_names)
        if fn is None:
            raise self.error(f"cannot read derivative index of {name!r}", tok)
        return fn

    def identifier(self, tok):
        name = tok.text
        if name in APPLY_NAMES:
            raise self.error(f"{name} needs an argument list", tok)
        if is_builtin(name):
            return Sym(name)
        if name in self.functions:
            return Fn(name, self.functions[name])
        fn = _split_derivative(name, self.functions)
        if fn is not None:
            return fn
        if self.declared is None or name in self.declared:
            return Sym(name)
        raise UnknownIdentifier(name, tok.line, tok.col)


def _negate(e: Expr) -> Expr:
    if isinstance(e, Num):
        return Num(-e.value)
    return Mul((MINUS_ONE, e))


def parse(text: str, declared=None, functions=None) -> Expr:
    """Parse expression text into a raw (unsimplified) tree.

    ``declared`` restricts plain identifiers to the given names plus x, t, u
    and jet coordinates; ``None`` accepts any identifier as a symbol.
    ``functions`` maps unknown-function names to argument tuples so that
    ``f`` and ``f_xu`` resolve without call syntax.
    """
    return Parser(text, declared, functions).parse()


def parse_with_functions(text: str, declared=None, functions=None):
    """Like ``parse`` but also returns the function table seen while parsing."""
    p = Parser(text, declared, functions)
    return p.parse(), p.functions


def functions_of(*exprs) -> dict:
    """Unknown-function declarations ``{name: args}`` used by the expressions."""
    out = {}
    for e in exprs:
        for leaf in as_expr(e).free_symbols():
            if isinstance(leaf, Fn):
                out[leaf.name] = leaf.args
    return out


# ---------------------------------------------------------------------------
# printer

PREC_ADD, PREC_MUL, PREC_POW, PREC_ATOM = 1, 2, 3, 4


def _num_text(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def render(e, full_functions: bool = False) -> str:
    """Canonical text for ``e``: the simplified form, printed deterministically."""
    return _Printer(full_functions).show(simplify(as_expr(e)))[0]


class _Printer:
    def __init__(self, full):
        self.full = full

    def show(self, e):
        """Return (text, precedence, negative) where negative means a leading '-'."""
        if isinstance(e, Num):
            v = e.value
            if v < 0:
                text = _num_text(-v) if not isinstance(v, float) else repr(-v)
                inner = PREC_MUL if (not isinstance(v, float) and v.denominator != 1) else PREC_ATOM
                return "-" + text, min(inner, PREC_MUL), True
            if not isinstance(v, float) and v.denominator != 1:
                return _num_text(v), PREC_MUL, False
            return _num_text(v), PREC_ATOM, False
        if isinstance(e, Sym):
            return e.name, PREC_ATOM, False
        if isinstance(e, Fn):
            if self.full:
                return f"{e.label}({','.join(e.args)})", PREC_ATOM, False
            return e.label, PREC_ATOM, False
        if isinstance(e, Apply):
            return f"{e.fname}({self.show(e.arg)[0]})", PREC_ATOM, False
        if isinstance(e, Add):
            return self.show_add(e)
        if isinstance(e, Mul):
            return self.show_mul(e.factors)
        if isinstance(e, Pow):
            x = e.exponent
            if isinstance(x, Num) and not x.is_float and x.value < 0:
                return self.show_mul((e,))
            return self.show_pow(e)
        raise TypeError(e)

    def wrap(self, e, prec, allow_negative=False):
        text, p, neg = self.show(e)
        if p < prec or (neg and not allow_negative):
            return f"({text})"
        return text

    def show_add(self, e):
        if not e.terms:
            return "0", PREC_ATOM, False
        parts = []
        for i, t in enumerate(e.terms):
            text, p, neg = self.show(t)
            if p < PREC_ADD:
                text, neg = f"({text})", False
            if i == 0:
                parts.append(text)
            elif neg:
                parts.append(" - " + text[1:])
            else:
                parts.append(" + " + text)
        if len(parts) == 1:
            return parts[0], PREC_ATOM if not parts[0].startswith("-") else PREC_MUL, parts[0].startswith("-")
        return "".join(parts), PREC_ADD, parts[0].startswith("-")

    def show_mul(self, factors):
        if not factors:
            return "1", PREC_ATOM, False
        sign = 1
        num_coeff, den_coeff = [], []
        numer, denom = [], []
        for f in factors:
            if isinstance(f, Num) and not f.is_float:
                v = f.value
                if v < 0:
                    sign = -sign
                    v = -v
                if v.numerator != 1:
                    num_coeff.append(str(v.numerator))
                if v.denominator != 1:
                    den_coeff.append(str(v.denominator))
            elif isinstance(f, Num):
                v = f.value
                if v < 0:
                    sign = -sign
                    v = -v
                num_coeff.append(repr(v))
            elif (isinstance(f, Pow) and isinstance(f.exponent, Num)
                  and not f.exponent.is_float and f.exponent.value < 0):
                denom.append(self.show_power_parts(f.base, -f.exponent.value))
            else:
                numer.append(self.wrap(f, PREC_MUL))
        top = num_coeff + numer
        bottom = den_coeff + denom
        text = "*".join(top) if top else "1"
        if bottom:
            btext = bottom[0] if len(bottom) == 1 else f"({'*'.join(bottom)})"
            text = f"{text}/{btext}"
        if sign < 0:
            return "-" + text, PREC_MUL, True
        return text, PREC_MUL, False

    def show_power_parts(self, base, n):
        if n == 1:
            return self.wrap(base, PREC_POW)
        if n == Fraction(1, 2):
            return f"sqrt({self.show(base)[0]})"
        return f"{self.wrap(base, PREC_POW + 1)}^{_exp_text(n)}"

    def show_pow(self, e):
        x = e.exponent
        if isinstance(x, Num) and not x.is_float and x.value == Fraction(1, 2):
            return f"sqrt({self.show(e.base)[0]})", PREC_ATOM, False
        base = self.wrap(e.base, PREC_POW + 1)
        if isinstance(x, Num):
            etext = _exp_text(x.value)
        else:
            etext = self.wrap(x, PREC_POW + 1)
        return f"{base}^{etext}", PREC_POW, False


def _exp_text(v) -> str:
    if isinstance(v, float):
        return repr(v) if v >= 0 else f"({repr(v)})"
    if v.denominator == 1:
        return str(v.numerator)
    return f"({v.numerator}/{v.denominator})"


# ---------------------------------------------------------------------------
# wire format

def serialize(e) -> dict:
    """Loss-free tagged-node encoding; ``deserialize`` inverts it exactly."""
    e = as_expr(e)
    if isinstance(e, Num):
        v = e.value
        if isinstance(v, float):
            return {"num": v}
        if v.denominator == 1:
            return {"num": v.numerator}
        return {"rat": [v.numerator, v.denominator]}
    if isinstance(e, Sym):
        return {"sym": e.name}
    if isinstance(e, Fn):
        return {"fn": e.name, "args": list(e.args), "d": list(e.d)}
    if isinstance(e, Add):
        return {"sum": [serialize(t) for t in e.terms]}
    if isinstance(e, Mul):
        return {"prod": [serialize(f) for f in e.factors]}
    if isinstance(e, Pow):
        return {"pow": [serialize(e.base), serialize(e.exponent)]}
    if isinstance(e, Apply):
        return {e.fname: serialize(e.arg)}
    raise TypeError(e)


def deserialize(doc) -> Expr:
    if not isinstance(doc, dict):
        raise MalformedDocument(f"expected an object, got {type(doc).__name__}")
    keys = set(doc)
    if keys == {"fn", "args", "d"}:
        args, d = doc["args"], doc["d"]
        if (not isinstance(doc["fn"], str) or not isinstance(args, list)
                or not isinstance(d, list) or len(args) != len(d)
                or not all(isinstance(a, str) for a in args)
                or not all(isinstance(n, int) and not isinstance(n, bool) and n >= 0 for n in d)):
            raise MalformedDocument(f"bad function node {doc!r}")
        return Fn(doc["fn"], args, d)
    if len(keys) != 1:
        raise MalformedDocument(f"expected exactly one tag, got {sorted(keys)}")
    (tag, val), = doc.items()
    if tag == "num":
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise MalformedDocument(f"bad number {val!r}")
        return Num(val)
    if tag == "rat":
        if (not isinstance(val, list) or len(val) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in val) or val[1] == 0):
            raise MalformedDocument(f"bad rational {val!r}")
        return Num(Fraction(val[0], val[1]))
    if tag == "sym":
        if not isinstance(val, str) or not val:
            raise MalformedDocument(f"bad symbol {val!r}")
        return Sym(val)
    if tag in ("sum", "prod"):
        if not isinstance(val, list):
            raise MalformedDocument(f"{tag} needs a list")
        kids = [deserialize(v) for v in val]
        return Add(kids) if tag == "sum" else Mul(kids)
    if tag == "pow":
        if not isinstance(val, list) or len(val) != 2:
            raise MalformedDocument("pow needs [base, exponent]")
        return Pow(deserialize(val[0]), deserialize(val[1]))
    if tag in APPLY_NAMES:
        return Apply(tag, deserialize(val))
    raise MalformedDocument(f"unknown tag {tag!r}")


def dumps(e) -> str:
    return json.dumps(serialize(e), sort_keys=True, separators=(",", ":"))


def loads(text: str) -> Expr:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(str(exc)) from None
    return deserialize(doc)


# ---------------------------------------------------------------------------
# problem files

PROBLEM_KEYS = ("name", "form", "f", "h", "k", "rhs", "params", "generators", "invariants", "bases")


@dataclass
class ProblemFile:
    name: str
    form: str
    f: Expr | None = None
    h: Expr | None = None
    k: Expr | None = None
    rhs: Expr | None = None
    params: dict = field(default_factory=dict)  # symbol -> nonzero flag
    generators: list = field(default_factory=list)  # (xi, eta, phi) triples
    invariants: list = field(default_factory=list)  # (r, w) pairs
    bases: dict = field(default_factory=dict)  # "xi"/"eta"/"phi" -> [Expr]
    functions: dict = field(default_factory=dict)

    @property
    def nonzero(self) -> frozenset:
        return frozenset(p for p, nz in self.params.items() if nz)


def _parse_field(text, path, declared, functions):
    if not isinstance(text, str):
        raise SchemaError(path, f"expected expression text, got {type(text).__name__}")
    try:
        e, fns = parse_with_functions(text, declared, functions)
    except UnknownIdentifier as exc:
        raise SchemaError(path, f"undeclared symbol {exc.name!r}") from exc
    functions.update(fns)
    return e


def problem_from_dict(doc) -> ProblemFile:
    if not isinstance(doc, dict):
        raise SchemaError("$", "problem document must be an object")
    unknown = sorted(set(doc) - set(PROBLEM_KEYS))
    if unknown:
        raise SchemaError(f"$.{unknown[0]}", "unknown key")
    name = doc.get("name")
    if not isinstance(name, str):
        raise SchemaError("$.name", "required string")
    form = doc.get("form")
    if form not in ("grdc", "evolution"):
        raise SchemaError("$.form", "must be 'grdc' or 'evolution'")
    params = {}
    for i, p in enumerate(doc.get("params", [])):
        if not isinstance(p, dict) or set(p) - {"symbol", "nonzero"} or "symbol" not in p:
            raise SchemaError(f"$.params[{i}]", "expected {symbol, nonzero}")
        s = p["symbol"]
        if not isinstance(s, str) or not re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", s) or is_builtin(s) or s in APPLY_NAMES:
            raise SchemaError(f"$.params[{i}].symbol", f"bad parameter name {s!r}")
        nz = p.get("nonzero", False)
        if not isinstance(nz, bool):
            raise SchemaError(f"$.params[{i}].nonzero", "must be a boolean")
        params[s] = nz
    declared = set(params)
    functions = {}
    prob = ProblemFile(name=name, form=form, params=params)
    if form == "grdc":
        for key in ("f", "h", "k"):
            if key not in doc:
                raise SchemaError(f"$.{key}", "required for form 'grdc'")
            setattr(prob, key, _parse_field(doc[key], f"$.{key}", declared, functions))
        if "rhs" in doc:
            raise SchemaError("$.rhs", "not allowed for form 'grdc'")
    else:
        if "rhs" not in doc:
            raise SchemaError("$.rhs", "required for form 'evolution'")
        for key in ("f", "h", "k"):
            if key in doc:
                raise SchemaError(f"$.{key}", "not allowed for form 'evolution'")
        prob.rhs = _parse_field(doc["rhs"], "$.rhs", declared, functions)
    for i, g in enumerate(doc.get("generators", [])):
        if not isinstance(g, dict) or set(g) != {"xi", "eta", "phi"}:
            raise SchemaError(f"$.generators[{i}]", "expected {xi, eta, phi}")
        prob.generators.append(tuple(
            _parse_field(g[c], f"$.generators[{i}].{c}", declared, functions)
            for c in ("xi", "eta", "phi")
        ))
    for i, inv in enumerate(doc.get("invariants", [])):
        if not isinstance(inv, dict) or set(inv) != {"r", "w"}:
            raise SchemaError(f"$.invariants[{i}]", "expected {r, w}")
        prob.invariants.append(tuple(
            _parse_field(inv[c], f"$.invariants[{i}].{c}", declared, functions)
            for c in ("r", "w")
        ))
    bases = doc.get("bases", {})
    if not isinstance(bases, dict) or set(bases) - {"xi", "eta", "phi"}:
        raise SchemaError("$.bases", "expected an object with keys among xi, eta, phi")
    for c, items in bases.items():
        if not isinstance(items, list):
            raise SchemaError(f"$.bases.{c}", "expected a list")
        prob.bases[c] = [
            _parse_field(s, f"$.bases.{c}[{i}]", declared, functions)
            for i, s in enumerate(items)
        ]
    prob.functions = functions
    return prob


def load_problem(path) -> ProblemFile:
    """Read and validate a JSON problem file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return problem_from_dict(doc)


def problem_to_dict(prob: ProblemFile) -> dict:
    doc = {"name": prob.name, "form": prob.form}
    if prob.form == "grdc":
        for key in ("f", "h", "k"):
            doc[key] = render(getattr(prob, key), full_functions=True)
    else:
        doc["rhs"] = render(prob.rhs, full_functions=True)
    doc["params"] = [{"symbol": s, "nonzero": nz} for s, nz in prob.params.items()]
    if prob.generators:
        doc["generators"] = [
            {"xi": render(a, True), "eta": render(b, True), "phi": render(c, True)}
            for a, b, c in prob.generators
        ]
    if prob.invariants:
        doc["invariants"] = [{"r": render(r, True), "w": render(w, True)} for r, w in prob.invariants]
    if prob.bases:
        doc["bases"] = {c: [render(b, True) for b in items] for c, items in prob.bases.items()}
    return doc
