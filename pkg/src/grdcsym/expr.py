"""Immutable expression trees and their expanded canonical form.

Every node is hashable and compares structurally.  ``simplify`` maps a tree
onto a sparse polynomial over *atoms* (symbols, unknown-function symbols,
``exp``/``ln`` applications, and powers that cannot be distributed) with
exact ``Fraction`` coefficients, then rebuilds a sorted tree from it.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

from .errors import UnsupportedSubstitution

__all__ = [
    "Expr", "Num", "Sym", "Fn", "Add", "Mul", "Pow", "Apply",
    "sym", "symbols", "num", "exp", "ln", "sqrt", "as_expr",
    "simplify", "is_zero", "ZERO", "ONE",
]

APPLY_NAMES = ("exp", "ln", "sqrt")


class Expr:
    """Base node.  Subclasses fill ``_key``, a tuple that fixes the total order."""

    __slots__ = ("_key", "_hash", "_poly", "_canon", "_free")

    def _init(self, key):
        self._key = key
        self._hash = hash(key)
        self._poly = None
        self._canon = False
        self._free = None

    # structural identity
    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return self._hash == other._hash and self._key == other._key

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def sort_key(self):
        return self._key

    # raw (unsimplified) constructors
    def __add__(self, other):
        return Add((self, as_expr(other)))

    def __radd__(self, other):
        return Add((as_expr(other), self))

    def __sub__(self, other):
        return Add((self, Mul((MINUS_ONE, as_expr(other)))))

    def __rsub__(self, other):
        return Add((as_expr(other), Mul((MINUS_ONE, self))))

    def __mul__(self, other):
        return Mul((self, as_expr(other)))

    def __rmul__(self, other):
        return Mul((as_expr(other), self))

    def __truediv__(self, other):
        return Mul((self, Pow(as_expr(other), MINUS_ONE)))

    def __rtruediv__(self, other):
        return Mul((as_expr(other), Pow(self, MINUS_ONE)))

    def __pow__(self, other):
        return Pow(self, as_expr(other))

    def __rpow__(self, other):
        return Pow(as_expr(other), self)

    def __neg__(self):
        return Mul((MINUS_ONE, self))

    def __pos__(self):
        return self

    def __repr__(self):
        from .lang import render

        return f"<{type(self).__name__} {render(self)}>"

    def __str__(self):
        from .lang import render

        return render(self)

    @property
    def children(self) -> tuple:
        return ()

    def free_symbols(self) -> frozenset:
        """Leaves (``Sym`` and ``Fn`` nodes) occurring in the tree."""
        if self._free is None:
            out = set()
            for c in self.children:
                out |= c.free_symbols()
            self._free = frozenset(out)
        return self._free

    def free_names(self) -> frozenset:
        return frozenset(leaf_name(s) for s in self.free_symbols())

    def has(self, *names) -> bool:
        fn = self.free_names()
        return any(n in fn for n in names)


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, float):
            self.value = value
            self._init((0, value, 1))
        else:
            self.value = Fraction(value)
            self._init((0, self.value, 0))
        self._free = frozenset()

    @property
    def is_float(self):
        return isinstance(self.value, float)


class Sym(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._init((1, name))
        self._free = frozenset((self,))


class Fn(Expr):
    """Unknown function of plain symbols, with a derivative multi-index.

    ``Fn("f", ("x", "u"), (1, 1))`` is f_xu; the multi-index is stored per
    argument so mixed partials commute by construction.
    """

    __slots__ = ("name", "args", "d")

    def __init__(self, name: str, args, d=None):
        args = tuple(args)
        d = tuple(d) if d is not None else (0,) * len(args)
        if len(d) != len(args):
            raise ValueError("derivative index must match the argument list")
        self.name = name
        self.args = args
        self.d = d
        self._init((2, name, args, d))
        self._free = frozenset((self,))

    @property
    def order(self) -> int:
        return sum(self.d)

    @property
    def label(self) -> str:
        """Short name such as ``f_xu``."""
        suffix = "".join(a * n for a, n in zip(self.args, self.d))
        return f"{self.name}_{suffix}" if suffix else self.name

    @property
    def base(self) -> "Fn":
        return Fn(self.name, self.args)

    def deriv(self, var: str, times: int = 1) -> "Fn":
        i = self.args.index(var)
        d = list(self.d)
        d[i] += times
        return Fn(self.name, self.args, d)


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        self.terms = tuple(as_expr(t) for t in terms)
        self._init((3, 0, tuple(t._key for t in self.terms)))

    @property
    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        self.factors = tuple(as_expr(f) for f in factors)
        self._init((3, 1, tuple(f._key for f in self.factors)))

    @property
    def children(self):
        return self.factors


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        self.base = as_expr(base)
        self.exponent = as_expr(exponent)
        self._init((3, 2, self.base._key, self.exponent._key))

    @property
    def children(self):
        return (self.base, self.exponent)


class Apply(Expr):
    """Application of one of ``exp``, ``ln``, ``sqrt``."""

    __slots__ = ("fname", "arg")

    def __init__(self, fname: str, arg):
        if fname not in APPLY_NAMES:
            raise ValueError(f"unsupported function {fname!r}")
        self.fname = fname
        self.arg = as_expr(arg)
        self._init((3, 3, APPLY_NAMES.index(fname), self.arg._key))

    @property
    def children(self):
        return (self.arg,)


ZERO = Num(0)
ONE = Num(1)
MINUS_ONE = Num(-1)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction, float, Rational)):
        return Num(value)
    if isinstance(value, str):
        if value.isidentifier():
            return Sym(value)
        from .lang import parse  # expression text

        return parse(value)
    raise TypeError(f"cannot convert {value!r} to an expression")


def num(value) -> Num:
    return Num(value)


def sym(name: str) -> Sym:
    return Sym(name)


def symbols(names: str):
    return tuple(Sym(n) for n in names.replace(",", " ").split())


def exp(e) -> Apply:
    return Apply("exp", e)


def ln(e) -> Apply:
    return Apply("ln", e)


def sqrt(e) -> Apply:
    return Apply("sqrt", e)


def leaf_name(leaf: Expr) -> str:
    """Assignment key of a leaf: the symbol name or e.g. ``f_xu(x,u)``."""
    if isinstance(leaf, Sym):
        return leaf.name
    if isinstance(leaf, Fn):
        return f"{leaf.label}({','.join(leaf.args)})"
    raise TypeError(f"{leaf!r} is not a leaf")


# ---------------------------------------------------------------------------
# polynomial layer
#
# A poly is a dict {mono: coeff}; a mono is a tuple of (atom, exponent) pairs
# sorted by atom key with nonzero Fraction exponents; coefficients are nonzero
# Fractions or floats.  Polys handed out by ``to_poly`` are shared: never
# mutate them.

def _mono_key(mono):
    return tuple((a._key, e) for a, e in mono)


def _mono_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for a, e in m2:
        s = d.get(a, 0) + e
        if s:
            d[a] = s
        else:
            del d[a]
    return tuple(sorted(d.items(), key=lambda p: p[0]._key))


def padd(p, q, scale=1):
    out = dict(p)
    for m, c in q.items():
        s = out.get(m, 0) + c * scale
        if s:
            out[m] = s
        else:
            out.pop(m, None)
    return out


def _acc(out, m, c):
    s = out.get(m, 0) + c
    if s:
        out[m] = s
    else:
        out.pop(m, None)


def _has_sum_atom(p) -> bool:
    return any(isinstance(a, Add) for m in p for a, _ in m)


def _expand_sum_atoms(p):
    """Multiply out sum atoms that ended up with a positive integer exponent.

    Sums are atoms only under negative or fractional powers; a product such as
    sqrt(x+t)*sqrt(x+t) must come back as the expanded x + t.
    """
    out = {}
    for m, c in p.items():
        keep, expand = [], []
        for a, e in m:
            if isinstance(a, Add) and e > 0 and Fraction(e).denominator == 1:
                expand.append((a, int(e)))
            else:
                keep.append((a, e))
        if not expand:
            _acc(out, m, c)
            continue
        term = {tuple(keep): c}
        for a, e in expand:
            term = pmul(term, ppow(to_poly(a), Fraction(e)))
        for m2, c2 in term.items():
            _acc(out, m2, c2)
    return out


def pmul(p, q):
    if len(p) > len(q):
        p, q = q, p
    out = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            _acc(out, _mono_mul(m1, m2), c1 * c2)
    if out and _has_sum_atom(p) and _has_sum_atom(q):
        out = _expand_sum_atoms(out)
    return out


def pscale(p, c):
    if not c:
        return {}
    return {m: v * c for m, v in p.items()}


def pconst(c):
    return {(): c} if c else {}


def patom(atom, e=1):
    return {((atom, Fraction(e)),): 1}


def pconst_value(p):
    """Return the numeric value if ``p`` is a constant, else None."""
    if not p:
        return Fraction(0)
    if len(p) == 1 and () in p:
        return p[()]
    return None


def _exact_root(c: Fraction, q: int):
    if c < 0:
        return None
    out = []
    for part in (c.numerator, c.denominator):
        r = round(part ** (1.0 / q))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand**q == part:
                out.append(cand)
                break
        else:
            return None
    return Fraction(out[0], out[1])


def _num_pow(c, n):
    """c**n for numbers, or None when no exact value exists."""
    if isinstance(c, float) or isinstance(n, float):
        if c < 0 and not float(n).is_integer():
            return None
        if c == 0 and n < 0:
            raise ZeroDivisionError("0 raised to a negative power")
        return float(c) ** float(n)
    if n.denominator == 1:
        return c ** int(n)
    root = _exact_root(c, n.denominator)
    if root is None:
        return None
    return root ** n.numerator


def ppow(p, n):
    """Power of a poly by a numeric exponent ``n``."""
    if isinstance(n, float) and n.is_integer():
        n = Fraction(int(n))
    if not p:
        if n > 0:
            return {}
        if n == 0:
            return pconst(1)
        raise ZeroDivisionError("0 raised to a non-positive power")
    if n == 0:
        return pconst(1)
    if len(p) == 1:
        (m, c), = p.items()
        if isinstance(n, float):
            if not m and c > 0:
                return pconst(float(c) ** n)
            return patom(Pow(from_poly(p), Num(n)))
        if n.denominator == 1:
            cn = c ** int(n) if isinstance(c, float) else Fraction(c) ** int(n)
            out = {tuple((a, e * n) for a, e in m): cn}
            return _expand_sum_atoms(out) if _has_sum_atom(out) else out
        if c > 0:
            mono = tuple((a, e * n) for a, e in m)
            cn = _num_pow(c, n)
            if cn is not None:
                return _expand_sum_atoms({mono: cn})
            out = patom(Pow(Num(c), Num(n)))
            return pmul({mono: 1}, out) if mono else out
        if not m:
            return patom(Pow(Num(c), Num(n)))
        return patom(from_poly(p), n)
    if not isinstance(n, float) and n.denominator == 1 and n > 0:
        out = pconst(1)
        base = p
        k = int(n)
        while k:
            if k & 1:
                out = pmul(out, base)
            k >>= 1
            if k:
                base = pmul(base, base)
        return out
    if isinstance(n, float):
        return patom(Pow(from_poly(p), Num(n)))
    return patom(from_poly(p), n)


def to_poly(e: Expr):
    if e._poly is not None:
        return e._poly
    p = _to_poly(e)
    e._poly = p
    return p


def _to_poly(e):
    if isinstance(e, Num):
        return pconst(e.value)
    if isinstance(e, (Sym, Fn)):
        return patom(e)
    if isinstance(e, Add):
        out = {}
        for t in e.terms:
            for m, c in to_poly(t).items():
                _acc(out, m, c)
        return out
    if isinstance(e, Mul):
        out = pconst(1)
        for f in e.factors:
            out = pmul(out, to_poly(f))
            if not out:
                break
        return out
    if isinstance(e, Pow):
        pe = to_poly(e.exponent)
        n = pconst_value(pe)
        if _is_negative_int(n) and isinstance(e.base, (Mul, Pow)):
            return _int_power(e.base, n)
        pb = to_poly(e.base)
        if n is not None:
            return ppow(pb, n)
        if pconst_value(pb) == 1:
            return pconst(1)
        return patom(Pow(from_poly(pb), from_poly(pe)))
    if isinstance(e, Apply):
        pa = to_poly(e.arg)
        if e.fname == "sqrt":
            return ppow(pa, Fraction(1, 2))
        v = pconst_value(pa)
        if e.fname == "exp":
            if v == 0:
                return pconst(1)
            if isinstance(v, float):
                return pconst(math.exp(v))
            return patom(Apply("exp", from_poly(pa)))
        if v == 1:
            return {}
        if isinstance(v, float) and v > 0:
            return pconst(math.log(v))
        return patom(Apply("ln", from_poly(pa)))
    raise TypeError(f"unknown node {e!r}")


def _is_negative_int(n) -> bool:
    return n is not None and not isinstance(n, float) and n < 0 and n.denominator == 1


def _int_power(node, n):
    """node**n for integer n, distributed over products and nested powers.

    Keeps 1/(a*(x+t)^2) as a^-1 * (x+t)^-2 instead of inverting the expanded
    product, so the printed form of a canonical expression reparses to it.
    """
    if isinstance(node, Mul):
        out = pconst(1)
        for f in node.factors:
            out = pmul(out, _int_power(f, n))
        return out
    if isinstance(node, Pow):
        k = pconst_value(to_poly(node.exponent))
        if k is not None and not isinstance(k, float):
            m = k * n
            if m.denominator == 1 and isinstance(node.base, (Mul, Pow)):
                return _int_power(node.base, m)
            return ppow(to_poly(node.base), m)
    return ppow(to_poly(node), n)


def _factor_node(atom, e):
    if e == 1:
        return atom
    return Pow(atom, Num(e))


def _term_node(mono, c):
    factors = [_factor_node(a, e) for a, e in mono]
    factors.sort(key=lambda f: f._key)
    if c != 1 or not factors:
        factors.insert(0, Num(c))
    if len(factors) == 1:
        return factors[0]
    return Mul(factors)


def from_poly(p) -> Expr:
    terms = [_term_node(m, c) for m, c in p.items()]
    if not terms:
        out = Num(0)
    elif len(terms) == 1:
        out = terms[0]
    else:
        terms.sort(key=lambda t: t._key)
        out = Add(terms)
    out._poly = p
    out._canon = True
    return out


def simplify(e) -> Expr:
    """Canonical expanded form; idempotent and numerically value-preserving."""
    e = as_expr(e)
    if e._canon:
        return e
    out = from_poly(to_poly(e))
    if out == e:
        e._canon = True
        return e
    return out


def is_zero(e) -> bool:
    return not to_poly(as_expr(e))


# ---------------------------------------------------------------------------
# calculus on polys

def _atom_diff(atom, s: str, cache):
    key = (atom, s)
    hit = cache.get(key)
    if hit is not None:
        return hit
    if isinstance(atom, Sym):
        out = pconst(1) if atom.name == s else {}
    elif isinstance(atom, Fn):
        out = patom(atom.deriv(s)) if s in atom.args else {}
    elif isinstance(atom, Apply):
        dg = pdiff(to_poly(atom.arg), s, cache)
        if not dg:
            out = {}
        elif atom.fname == "exp":
            out = pmul(patom(atom), dg)
        else:  # ln
            out = pmul(dg, ppow(to_poly(atom.arg), Fraction(-1)))
    elif isinstance(atom, Pow):
        pb = to_poly(atom.base)
        pe = to_poly(atom.exponent)
        db = pdiff(pb, s, cache)
        de = pdiff(pe, s, cache)
        n = pconst_value(pe)
        if n is not None:
            out = pmul(pscale(db, n), ppow(pb, n - 1)) if db else {}
        elif not db and not de:
            out = {}
        else:
            # d(b^e) = b^e (e' ln b + e b'/b)
            inner = {}
            if de:
                inner = pmul(de, to_poly(Apply("ln", atom.base)))
            if db:
                inner = padd(inner, pmul(pmul(pe, db), ppow(pb, Fraction(-1))))
            out = pmul(patom(atom), inner)
    elif isinstance(atom, Add):
        out = pdiff(to_poly(atom), s, cache)
    else:
        raise TypeError(f"unexpected atom {atom!r}")
    cache[key] = out
    return out


def pdiff(p, s: str, cache=None):
    if cache is None:
        cache = {}
    out = {}
    for mono, c in p.items():
        for i, (a, e) in enumerate(mono):
            da = _atom_diff(a, s, cache)
            if not da:
                continue
            if e == 1:
                rest = mono[:i] + mono[i + 1:]
            else:
                rest = mono[:i] + ((a, e - 1),) + mono[i + 1:]
            for m2, c2 in da.items():
                _acc(out, _mono_mul(rest, m2), c * e * c2)
    return out


def atom_free_names(atom) -> frozenset:
    return atom.free_names()


def psubstitute(p, mapper, cache=None):
    """Rebuild ``p`` with every atom replaced by ``mapper(atom)`` (a poly or None)."""
    if cache is None:
        cache = {}
    out = {}
    for mono, c in p.items():
        acc = pconst(c)
        changed = False
        kept = []
        for a, e in mono:
            rp = cache.get(a, _MISSING)
            if rp is _MISSING:
                rp = mapper(a)
                cache[a] = rp
            if rp is None:
                kept.append((a, e))
            else:
                changed = True
                acc = pmul(acc, rp if e == 1 else ppow(rp, e))
                if not acc:
                    break
        if not changed:
            _acc(out, mono, c)
            continue
        if not acc:
            continue
        if kept:
            acc = pmul(acc, {tuple(kept): 1})
        for m, v in acc.items():
            _acc(out, m, v)
    return out


_MISSING = object()


def rebuild_atom(atom, fpoly):
    """Apply ``fpoly`` (Expr -> poly) inside a compound atom; None if unchanged."""
    if isinstance(atom, Apply):
        pa = fpoly(atom.arg)
        if pa is None:
            return None
        return to_poly(Apply(atom.fname, from_poly(pa)))
    if isinstance(atom, Pow):
        pb = fpoly(atom.base)
        pe = fpoly(atom.exponent)
        if pb is None and pe is None:
            return None
        b = from_poly(pb) if pb is not None else atom.base
        x = from_poly(pe) if pe is not None else atom.exponent
        return to_poly(Pow(b, x))
    if isinstance(atom, Add):
        return fpoly(atom)
    return None


def rename_fn_args(atom: Fn, renames: dict) -> Fn:
    args = []
    for a in atom.args:
        r = renames.get(a)
        if r is None:
            args.append(a)
        elif isinstance(r, Sym):
            args.append(r.name)
        else:
            raise UnsupportedSubstitution(
                f"argument {a!r} of {atom.label} bound to a non-symbol"
            )
    return Fn(atom.name, args, atom.d)
