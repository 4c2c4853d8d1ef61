"""Immutable symbolic expressions.

Parsing, serialization, differentiation, a normal-form simplifier, compiled
floating-point evaluation and a two-tier zero test.

Grammar accepted by :func:`parse`::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right associative
    atom   := number | name | func "(" expr ")" | "(" expr ")"
    func   := sin | cos | exp | ln

Simplifier rewrite set (nothing else, in particular no trig/exp/ln identities):

* constant folding over exact rationals;
* 0/1 identities (``x+0``, ``x*1``, ``x*0``, ``x^0``, ``x^1``);
* expansion of products and small positive integer powers of sums;
* like-term collection, terms ordered by symbol name then degree;
* combination of powers of the same base (``x^a * x^b -> x^(a+b)``), with
  non-integer exponents only combined on a bare atom;
* a sum in a denominator becomes an opaque factor after its common monomial
  and leading coefficient are pulled out.
"""

from __future__ import annotations

import math
import re
import zlib
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DivisionByZeroError,
    DomainError,
    EvaluationError,
    ExprSyntaxError,
    UnboundSymbolError,
    UnknownFunctionError,
)

FUNCTIONS = ("sin", "cos", "exp", "ln")
UNARY = ("neg",) + FUNCTIONS
BINARY = ("add", "mul", "div", "pow")

_ARITY = {"const": 0, "sym": 0, **{op: 1 for op in UNARY}, **{op: 2 for op in BINARY}}


class Expr:
    """A node of an expression tree.

    ``op`` is one of ``const``, ``sym``, ``neg``, ``sin``, ``cos``, ``exp``,
    ``ln``, ``add``, ``mul``, ``div``, ``pow``.  Constants carry a
    :class:`~fractions.Fraction` in ``value``; symbols carry their name.
    Operator overloads build raw (unsimplified) trees.
    """

    __slots__ = ("op", "args", "value", "_hash")

    def __init__(self, op: str, args: tuple = (), value=None):
        if op not in _ARITY:
            raise ValueError(f"unknown node kind {op!r}")
        if len(args) != _ARITY[op]:
            raise ValueError(f"{op} takes {_ARITY[op]} children, got {len(args)}")
        if op == "const":
            value = _to_fraction(value)
        elif op == "sym" and not isinstance(value, str):
            raise TypeError("symbol name must be a string")
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "args", tuple(args))
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "_hash", hash((op, value, self.args)))

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr) or self._hash != other._hash:
            return False
        return self.op == other.op and self.value == other.value and self.args == other.args

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    def __str__(self):
        return to_text(self)

    # construction sugar
    def __add__(self, other):
        return Expr("add", (self, as_expr(other)))

    def __radd__(self, other):
        return Expr("add", (as_expr(other), self))

    def __sub__(self, other):
        return Expr("add", (self, Expr("neg", (as_expr(other),))))

    def __rsub__(self, other):
        return Expr("add", (as_expr(other), Expr("neg", (self,))))

    def __mul__(self, other):
        return Expr("mul", (self, as_expr(other)))

    def __rmul__(self, other):
        return Expr("mul", (as_expr(other), self))

    def __truediv__(self, other):
        return Expr("div", (self, as_expr(other)))

    def __rtruediv__(self, other):
        return Expr("div", (as_expr(other), self))

    def __pow__(self, other):
        return Expr("pow", (self, as_expr(other)))

    def __rpow__(self, other):
        return Expr("pow", (as_expr(other), self))

    def __neg__(self):
        return Expr("neg", (self,))

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    def is_zero_const(self) -> bool:
        return self.op == "const" and self.value == 0


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a numeric constant")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("constants must be finite")
        # shortest decimal repr, so 0.1 stays 1/10
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot make a constant from {value!r}")


def const(value) -> Expr:
    return Expr("const", (), value)


def sym(name: str) -> Expr:
    return Expr("sym", (), name)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(x)


def func(name: str, arg) -> Expr:
    if name not in FUNCTIONS:
        raise UnknownFunctionError(f"unknown function {name!r}", 0)
    return Expr(name, (as_expr(arg),))


def sin(x):
    return func("sin", x)


def cos(x):
    return func("cos", x)


def exp(x):
    return func("exp", x)


def ln(x):
    return func("ln", x)


ZERO = const(0)
ONE = const(1)
MINUS_ONE = const(-1)


def add_all(terms: Iterable[Expr]) -> Expr:
    """Left-folded sum; the empty sum is 0."""
    acc = None
    for t in terms:
        acc = t if acc is None else Expr("add", (acc, t))
    return ZERO if acc is None else acc


def mul_all(factors: Iterable[Expr]) -> Expr:
    acc = None
    for f in factors:
        acc = f if acc is None else Expr("mul", (acc, f))
    return ONE if acc is None else acc


def _spine(e: Expr, op: str) -> list[Expr]:
    """Operands of a left-nested chain of ``op``, iteratively."""
    out = []
    while e.op == op:
        out.append(e.args[1])
        e = e.args[0]
    out.append(e)
    out.reverse()
    return out


@lru_cache(maxsize=None)
def symbols(e: Expr) -> frozenset:
    if e.op == "sym":
        return frozenset((e.value,))
    if e.op == "const":
        return frozenset()
    if e.op in ("add", "mul"):
        acc = set()
        for part in _spine(e, e.op):
            acc |= symbols(part)
        return frozenset(acc)
    acc = set()
    for a in e.args:
        acc |= symbols(a)
    return frozenset(acc)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace symbols by expressions (no simplification)."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    if not mapping:
        return e
    keys = frozenset(mapping)
    cache: dict = {}

    def go(node):
        if not (symbols(node) & keys):
            return node
        hit = cache.get(node)
        if hit is not None:
            return hit
        if node.op == "sym":
            out = mapping[node.value]
        elif node.op in ("add", "mul"):
            parts = _spine(node, node.op)
            acc = go(parts[0])
            for p in parts[1:]:
                acc = Expr(node.op, (acc, go(p)))
            out = acc
        else:
            out = Expr(node.op, tuple(go(a) for a in node.args))
        cache[node] = out
        return out

    return go(e)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)|([A-Za-z_][A-Za-z0-9_]*)|(.))", re.DOTALL)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m.group(0).strip() == "" and m.end() == len(text):
            break
        start = m.start(m.lastindex) if m.lastindex else m.end()
        num, name, other = m.groups()
        if num is not None:
            tokens.append(("num", num, start))
        elif name is not None:
            tokens.append(("name", name, start))
        else:
            if other not in "+-*/^()":
                raise ExprSyntaxError(f"unexpected character {other!r}", start)
            tokens.append((other, other, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind):
        tok = self.take()
        if tok[0] != kind:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExprSyntaxError(f"expected {kind!r}, found {what}", tok[2])
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            node = Expr("add", (node, rhs if op == "+" else Expr("neg", (rhs,))))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.unary()
            node = Expr("mul" if op == "*" else "div", (node, rhs))
        return node

    def unary(self):
        if self.peek()[0] == "-":
            self.take()
            return Expr("neg", (self.unary(),))
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            return Expr("pow", (base, self.unary()))
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return const(Fraction(text if not text.startswith(".") else "0" + text))
        if kind == "name":
            if self.peek()[0] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Expr(text, (arg,))
            return sym(text)
        if kind == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {what}", pos)


def parse(text: str) -> Expr:
    """Parse expression source text into a tree."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    p = _Parser(text)
    node = p.expr()
    tok = p.peek()
    if tok[0] != "end":
        raise ExprSyntaxError(f"unexpected {tok[1]!r}", tok[2])
    return node


# ---------------------------------------------------------------------------
# serialization

def _decimal_text(q: Fraction) -> str | None:
    d = q.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d != 1:
        return None
    text = format(Decimal(q.numerator) / Decimal(q.denominator), "f")
    return text


def _const_text(q: Fraction) -> tuple[str, int]:
    """Text and precedence level of a constant."""
    if q.denominator == 1:
        text, prec = str(abs(q.numerator)), 5
    else:
        dec = _decimal_text(abs(q))
        if dec is not None:
            text, prec = dec, 5
        else:
            text, prec = f"{abs(q.numerator)}/{q.denominator}", 2
    if q < 0:
        return "-" + text, (3 if prec == 5 else 2)
    return text, prec


def _prec(e: Expr) -> int:
    if e.op == "const":
        return _const_text(e.value)[1]
    return {"add": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}.get(e.op, 5)


def _wrap(e: Expr, paren: bool) -> str:
    s = to_text(e)
    return f"({s})" if paren else s


@lru_cache(maxsize=None)
def to_text(e: Expr) -> str:
    """Serialize to the input grammar.

    Parsing the text of a parsed tree rebuilds that tree.  Trees holding
    negative constants (as produced by :func:`simplify`) come back with
    ``neg`` nodes instead, which simplify to the original.
    """
    op = e.op
    if op == "const":
        return _const_text(e.value)[0]
    if op == "sym":
        return e.value
    if op == "add":
        parts = _spine(e, "add")
        out = [_wrap(parts[0], False)]
        for p in parts[1:]:
            if p.op == "neg":
                out.append(" - " + _wrap(p.args[0], _prec(p.args[0]) <= 1))
            else:
                text = _wrap(p, _prec(p) <= 1)
                out.append(" - " + text[1:] if text.startswith("-") else " + " + text)
        return "".join(out)
    if op in ("mul", "div"):
        a, b = e.args
        sign = "*" if op == "mul" else "/"
        return _wrap(a, _prec(a) < 2) + sign + _wrap(b, _prec(b) <= 2)
    if op == "neg":
        a = e.args[0]
        return "-" + _wrap(a, _prec(a) < 3)
    if op == "pow":
        a, b = e.args
        return _wrap(a, _prec(a) < 5) + "^" + _wrap(b, _prec(b) < 4)
    return f"{op}({to_text(e.args[0])})"


# ---------------------------------------------------------------------------
# differentiation

def differentiate(e: Expr, name: str) -> Expr:
    """Exact partial derivative with respect to symbol ``name``, simplified."""
    return simplify(_diff(e, name))


def _diff(e: Expr, s: str) -> Expr:
    if s not in symbols(e):
        return ZERO
    op = e.op
    if op == "sym":
        return ONE
    if op == "add":
        return add_all(_diff(p, s) for p in _spine(e, "add") if s in symbols(p))
    if op == "neg":
        return Expr("neg", (_diff(e.args[0], s),))
    if op == "mul":
        a, b = e.args
        terms = []
        if s in symbols(a):
            terms.append(Expr("mul", (_diff(a, s), b)))
        if s in symbols(b):
            terms.append(Expr("mul", (a, _diff(b, s))))
        return add_all(terms)
    if op == "div":
        a, b = e.args
        terms = []
        if s in symbols(a):
            terms.append(Expr("div", (_diff(a, s), b)))
        if s in symbols(b):
            terms.append(
                Expr("neg", (Expr("div", (Expr("mul", (a, _diff(b, s))), Expr("pow", (b, const(2))))),))
            )
        return add_all(terms)
    if op == "pow":
        b, x = e.args
        if s not in symbols(x):
            # n*b^(n-1)*b'
            return mul_all([x, Expr("pow", (b, Expr("add", (x, MINUS_ONE)))), _diff(b, s)])
        if s not in symbols(b):
            return mul_all([e, Expr("ln", (b,)), _diff(x, s)])
        return Expr("mul", (e, add_all([
            Expr("mul", (_diff(x, s), Expr("ln", (b,)))),
            Expr("div", (Expr("mul", (x, _diff(b, s))), b)),
        ])))
    a = e.args[0]
    da = _diff(a, s)
    if op == "sin":
        return Expr("mul", (Expr("cos", (a,)), da))
    if op == "cos":
        return Expr("neg", (Expr("mul", (Expr("sin", (a,)), da)),))
    if op == "exp":
        return Expr("mul", (e, da))
    if op == "ln":
        return Expr("div", (da, a))
    raise AssertionError(op)


# ---------------------------------------------------------------------------
# simplification: a Laurent-polynomial normal form over atoms
#
# poly: dict monomial -> Fraction coefficient (zero coefficients never stored)
# monomial: tuple of (atom, Fraction exponent) sorted by _atom_key

_MAX_EXPAND = 6


@lru_cache(maxsize=None)
def _atom_key(atom: Expr):
    if atom.op == "sym":
        return (0, atom.value)
    return (1, to_text(atom))


def _mono_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    exps = dict(m1)
    for atom, k in m2:
        v = exps.get(atom, 0) + k
        if v == 0:
            exps.pop(atom, None)
        else:
            exps[atom] = v
    return tuple(sorted(exps.items(), key=lambda it: _atom_key(it[0])))


def _mono_pow(m, n):
    return tuple((a, k * n) for a, k in m)


def _padd(p1, p2, scale=1):
    out = dict(p1)
    for m, c in p2.items():
        v = out.get(m, 0) + scale * c
        if v == 0:
            out.pop(m, None)
        else:
            out[m] = v
    return out


def _pmul(p1, p2):
    out = {}
    for m1, c1 in p1.items():
        for m2, c2 in p2.items():
            m = _mono_mul(m1, m2)
            v = out.get(m, 0) + c1 * c2
            if v == 0:
                out.pop(m, None)
            else:
                out[m] = v
    return out


def _pconst(c):
    return {(): Fraction(c)} if c != 0 else {}


def _patom(atom, k=1):
    return {((atom, Fraction(k)),): Fraction(1)}


def _mono_sort_key(m):
    return (len(m) == 0, tuple((_atom_key(a), -k) for a, k in m))


def _sorted_terms(p):
    return sorted(p.items(), key=lambda it: _mono_sort_key(it[0]))


def _content(p):
    """Common monomial factor of all terms (min exponent of shared atoms)."""
    monos = list(p)
    common = set(a for a, _ in monos[0])
    for m in monos[1:]:
        common &= set(a for a, _ in m)
    if not common:
        return ()
    g = []
    for atom in common:
        g.append((atom, min(dict(m)[atom] for m in monos)))
    return tuple(sorted(g, key=lambda it: _atom_key(it[0])))


def _sum_atom_poly(p, n):
    """Poly for ``p**n`` where ``p`` has several terms and ``n`` is kept opaque."""
    g = _content(p)
    ginv = _mono_pow(g, -1)
    q = {_mono_mul(m, ginv): c for m, c in p.items()}
    lead = _sorted_terms(q)[0][1]
    q = {m: c / lead for m, c in q.items()}
    base = _from_poly(q)
    mono = _mono_mul(_mono_pow(g, n), ((base, Fraction(n)),))
    return {mono: Fraction(lead) ** n}


def _pinv(p):
    if not p:
        return _patom(Expr("pow", (ZERO, MINUS_ONE)))
    if len(p) == 1:
        (m, c), = p.items()
        return {_mono_pow(m, -1): 1 / c}
    return _sum_atom_poly(p, -1)


def _ppow(base_poly, base_expr, n: Fraction):
    if n == 0:
        return _pconst(1)
    if not base_poly:
        if n > 0:
            return {}
        return _patom(Expr("pow", (ZERO, const(n))))
    if n.denominator == 1:
        k = int(n)
        if len(base_poly) == 1:
            (m, c), = base_poly.items()
            return {_mono_pow(m, k): c ** k}
        if 0 < k <= _MAX_EXPAND:
            out = base_poly
            for _ in range(k - 1):
                out = _pmul(out, base_poly)
            return out
        if k > 0:
            return _patom(Expr("pow", (_from_poly(base_poly), const(k))))
        return _sum_atom_poly(base_poly, k)
    # fractional exponent: only fold onto a bare atom
    if len(base_poly) == 1:
        (m, c), = base_poly.items()
        if c == 1 and len(m) == 1 and m[0][1] == 1:
            return {((m[0][0], n),): Fraction(1)}
        if m == () and c == 1:
            return _pconst(1)
        if c > 0 and m == ():
            return _patom(Expr("pow", (const(c), const(n))))
    return _patom(Expr("pow", (_from_poly(base_poly), const(n))))


@lru_cache(maxsize=None)
def _poly(e: Expr):
    op = e.op
    if op == "const":
        return _pconst(e.value)
    if op == "sym":
        return _patom(e)
    if op == "add":
        out = {}
        for part in _spine(e, "add"):
            out = _padd(out, _poly(part))
        return out
    if op == "neg":
        return {m: -c for m, c in _poly(e.args[0]).items()}
    if op == "mul":
        out = _pconst(1)
        for part in _spine(e, "mul"):
            out = _pmul(out, _poly(part))
            if not out:
                break
        return out
    if op == "div":
        num = _poly(e.args[0])
        if not num:
            # 0/x: keep division by literal zero visible
            den = _poly(e.args[1])
            return {} if den else _patom(Expr("pow", (ZERO, MINUS_ONE)))
        return _pmul(num, _pinv(_poly(e.args[1])))
    if op == "pow":
        bp = _poly(e.args[0])
        xp = _poly(e.args[1])
        if not xp:
            return _pconst(1)
        if len(xp) == 1 and () in xp:
            return _ppow(bp, e.args[0], xp[()])
        return _patom(Expr("pow", (_from_poly(bp), _from_poly(xp))))
    # elementary functions
    arg = simplify(e.args[0])
    if arg.op == "const" and arg.value == 0:
        return {"sin": {}, "cos": _pconst(1), "exp": _pconst(1)}.get(op, _patom(Expr(op, (arg,))))
    if op == "ln" and arg.op == "const" and arg.value == 1:
        return {}
    return _patom(Expr(op, (arg,)))


def _is_sum_atom(atom: Expr) -> bool:
    return atom.op == "add" or (atom.op == "neg" and atom.args[0].op == "add")


def _factor(atom: Expr, k: Fraction) -> Expr:
    return atom if k == 1 else Expr("pow", (atom, const(k)))


def _term(c: Fraction, m, signed: bool = False) -> Expr:
    """Product for ``|c| * m``; with ``signed`` a negative ``c`` is folded
    into a leading constant when one is printed anyway."""
    num, den = [], []
    for atom, k in m:
        if k > 0:
            num.append(_factor(atom, k))
        elif _is_sum_atom(atom) and k != -1:
            num.append(Expr("pow", (atom, const(k))))
        else:
            den.append(_factor(atom, -k))
    mag = abs(c)
    if mag != 1:
        if _decimal_text(mag) is not None:
            num.insert(0, const(c if signed else mag))
        else:
            if mag.numerator != 1:
                num.insert(0, const(mag.numerator))
            den.insert(0, const(mag.denominator))
    body = mul_all(num)
    if den:
        body = Expr("div", (body, mul_all(den)))
    return body


def _from_poly(p) -> Expr:
    if not p:
        return ZERO
    acc = None
    for m, c in _sorted_terms(p):
        if acc is None:
            t = _term(c, m, signed=True)
            folded = c < 0 and abs(c) != 1 and _decimal_text(abs(c)) is not None
            acc = Expr("neg", (t,)) if c < 0 and not folded else t
            continue
        t = _term(c, m)
        acc = Expr("add", (acc, Expr("neg", (t,)) if c < 0 else t))
    if acc.op == "neg" and acc.args[0].op == "const":
        return const(-acc.args[0].value)
    return acc


@lru_cache(maxsize=None)
def simplify(e: Expr) -> Expr:
    """Rewrite into the canonical normal form described in the module docstring."""
    return _from_poly(_poly(e))


def monic(e: Expr) -> Expr:
    """``e`` divided by the coefficient of its leading term (canonical order)."""
    p = _poly(e)
    if not p:
        return ZERO
    lead = _sorted_terms(p)[0][1]
    return _from_poly({m: c / lead for m, c in p.items()})


def additive_terms(e: Expr) -> list[Expr]:
    """Top-level summands of a simplified expression (sign folded in)."""
    if e.op != "add":
        return [e]
    return _spine(e, "add")


# ---------------------------------------------------------------------------
# evaluation

def _safe_pow(a, b):
    if a < 0 and not float(b).is_integer():
        raise ValueError("negative base with non-integer exponent")
    return a ** b


def _safe_ln(a):
    if a <= 0:
        raise ValueError("ln of non-positive argument")
    return math.log(a)


_NAMESPACE = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": math.exp,
    "_ln": _safe_ln,
    "_pow": _safe_pow,
}


def _code(e: Expr, names: Mapping[str, str]) -> str:
    op = e.op
    if op == "const":
        v = float(e.value)
        return f"({v!r})" if v < 0 else repr(v)
    if op == "sym":
        return names[e.value]
    if op == "add":
        parts = _spine(e, "add")
        out = [_code(parts[0], names)]
        for p in parts[1:]:
            if p.op == "neg":
                out.append(" - " + _code(p.args[0], names))
            else:
                out.append(" + " + _code(p, names))
        return "(" + "".join(out) + ")"
    if op == "mul":
        return "(" + " * ".join(_code(p, names) for p in _spine(e, "mul")) + ")"
    if op == "div":
        return f"({_code(e.args[0], names)} / {_code(e.args[1], names)})"
    if op == "neg":
        return f"(-{_code(e.args[0], names)})"
    if op == "pow":
        b, x = e.args
        if x.op == "const" and x.value.denominator == 1:
            return f"({_code(b, names)} ** {int(x.value)})"
        return f"_pow({_code(b, names)}, {_code(x, names)})"
    return f"_{op}({_code(e.args[0], names)})"


@lru_cache(maxsize=4096)
def _compile(exprs: tuple, names: tuple) -> Callable:
    argnames = {n: f"_a{i}" for i, n in enumerate(names)}
    body = ", ".join(_code(e, argnames) for e in exprs)
    src = f"def _f({', '.join(argnames.values())}):\n    return ({body}{',' if len(exprs) == 1 else ''})\n"
    ns = dict(_NAMESPACE)
    exec(compile(src, "<hjequiv-expr>", "exec"), ns)
    return ns["_f"]


def compile_exprs(exprs: Sequence[Expr], names: Sequence[str]) -> Callable:
    """Compile expressions into ``f(*values) -> tuple[float, ...]``.

    ``names`` fixes the positional argument order; every symbol of every
    expression must be among them.  The compiled function raises
    ``ZeroDivisionError``, ``ValueError`` or ``OverflowError`` on failure;
    :func:`evaluate` translates those into toolkit errors.
    """
    exprs = tuple(exprs)
    names = tuple(names)
    missing = set().union(*(symbols(e) for e in exprs)) - set(names) if exprs else set()
    if missing:
        raise UnboundSymbolError(sorted(missing)[0])
    return _compile(exprs, names)


def evaluate(e: Expr, binding: Mapping[str, float]) -> float:
    """Floating-point value of ``e`` at ``binding``."""
    names = tuple(sorted(symbols(e)))
    for n in names:
        if n not in binding:
            raise UnboundSymbolError(n)
    f = _compile((e,), names)
    try:
        return f(*(float(binding[n]) for n in names))[0]
    except ZeroDivisionError as exc:
        raise DivisionByZeroError(f"division by zero evaluating {to_text(e)}") from exc
    except ValueError as exc:
        raise DomainError(f"{exc} evaluating {to_text(e)}") from exc
    except OverflowError as exc:
        raise EvaluationError(f"overflow evaluating {to_text(e)}") from exc


# ---------------------------------------------------------------------------
# zero testing

ZERO_TOL = 1e-9
DENOMINATOR_FLOOR = 1e-6

_samples_var: ContextVar[int] = ContextVar("hjequiv_samples", default=50)
_seed_var: ContextVar[int] = ContextVar("hjequiv_seed", default=0)


@contextmanager
def sampling(samples: int | None = None, seed: int | None = None):
    """Override the sample count and base seed used by numeric tests."""
    tokens = []
    if samples is not None:
        tokens.append((_samples_var, _samples_var.set(int(samples))))
    if seed is not None:
        tokens.append((_seed_var, _seed_var.set(int(seed))))
    try:
        yield
    finally:
        for var, tok in reversed(tokens):
            var.reset(tok)


def default_samples() -> int:
    return _samples_var.get()


def rng_for(tag: str) -> np.random.Generator:
    """Deterministic generator keyed by ``tag`` and the active base seed."""
    return np.random.default_rng([zlib.crc32(tag.encode()), _seed_var.get()])


def _denominators(e: Expr) -> list[Expr]:
    out = []
    stack = [e]
    seen = set()
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        if n.op == "div":
            out.append(n.args[1])
        elif n.op == "pow" and n.args[1].op == "const" and n.args[1].value < 0:
            out.append(n.args[0])
        elif n.op == "ln":
            out.append(n.args[0])
        stack.extend(n.args)
    return out


@dataclass(frozen=True)
class ZeroTest:
    """Outcome of :func:`is_identically_zero`.

    ``verdict`` is ``"symbolic-zero"``, ``"numeric-zero"`` or ``"nonzero"``.
    A nonzero verdict carries the binding at which the value was seen.
    """

    verdict: str
    witness: dict | None = None
    value: float | None = None
    checked: int = 0

    @property
    def is_zero(self) -> bool:
        return self.verdict != "nonzero"

    def to_dict(self):
        return {"verdict": self.verdict, "witness": self.witness, "value": self.value}


def is_identically_zero(e: Expr, samples: int | None = None, low: float = -2.0,
                        high: float = 2.0) -> ZeroTest:
    """Two-tier identity test.

    Symbolic when the simplifier reduces ``e`` to 0.  Otherwise ``e`` is
    evaluated at random points, uniform in ``[low, high]`` per symbol; points
    where a denominator falls below 1e-6 in magnitude, or where evaluation
    fails, are redrawn.  A point passes when ``|e| <= 1e-9 * max(1, S)``,
    ``S`` being the sum of the magnitudes of the top-level terms (so that
    cancellation between large terms is judged relative to their size).
    A false "numeric-zero" needs a nonzero function that is below tolerance
    at every independently drawn point.
    """
    s = simplify(e)
    if s.is_zero_const():
        return ZeroTest("symbolic-zero")
    n = default_samples() if samples is None else samples
    names = tuple(sorted(symbols(s)))
    terms = additive_terms(s)
    dens = _denominators(s)
    f = _compile(tuple(terms) + tuple(dens), names)
    nt = len(terms)
    rng = rng_for(to_text(s))
    checked = 0
    for _ in range(n):
        for attempt in range(200):
            x = rng.uniform(low, high, size=len(names))
            if attempt >= 100:
                x = np.abs(x)
            try:
                vals = f(*x.tolist())
            except (ZeroDivisionError, ValueError, OverflowError):
                continue
            if any(abs(d) < DENOMINATOR_FLOOR for d in vals[nt:]):
                continue
            if not all(math.isfinite(v) for v in vals[:nt]):
                continue
            break
        else:
            continue
        checked += 1
        total = math.fsum(vals[:nt])
        scale = math.fsum(abs(v) for v in vals[:nt])
        if abs(total) > ZERO_TOL * max(1.0, scale):
            return ZeroTest("nonzero", dict(zip(names, x.tolist())), total, checked)
    if checked == 0:
        return ZeroTest("nonzero", None, None, 0)
    return ZeroTest("numeric-zero", None, None, checked)
