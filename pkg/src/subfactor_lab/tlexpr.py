"""Expression grammar for planar-diagram arithmetic.

Terms: E1..E7, jw(n), rot(x), tr(x), the loop parameter (δ or delta),
rational literals, +, -, *, / (by scalars), and the convolution ∘ (ASCII
alias @).  Evaluation is exact; the loop parameter stays symbolic unless a
numeric value is supplied afterwards.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from subfactor_lab.scalars import DeltaPolynomial, RationalFunction, quantum_integer
from subfactor_lab.tl import DELTA, TLElement, comultiply, compose, jones_wenzl, markov_trace, rotate


class ParseError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>jw|rot|tr|delta|E\d+|δ)|(?P<op>[()+\-*/@∘,]))"
)


@dataclass
class Token:
    kind: str
    text: str
    pos: int


def tokenize(src: str) -> list[Token]:
    out, pos = [], 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            if src[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {src[pos]!r}", pos)
        if m.group("num"):
            out.append(Token("num", m.group("num"), m.start()))
        elif m.group("name"):
            out.append(Token("name", m.group("name"), m.start()))
        else:
            out.append(Token("op", m.group("op"), m.start()))
        pos = m.end()
    return out


class _Parser:
    """Recursive descent over +,-, then *,∘,/, then unary minus and atoms."""

    def __init__(self, tokens: list[Token], src: str):
        self.tokens = tokens
        self.i = 0
        self.src = src

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, kind=None, text=None):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of expression", len(self.src))
        if kind is not None and t.kind != kind:
            raise ParseError(f"expected {kind}, found {t.text!r}", t.pos)
        if text is not None and t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.pos)
        self.i += 1
        return t

    def parse(self):
        v = self.expr()
        t = self.peek()
        if t is not None:
            raise ParseError(f"trailing input {t.text!r}", t.pos)
        return v

    def expr(self):
        v = self.term()
        while (t := self.peek()) is not None and t.kind == "op" and t.text in "+-":
            self.take()
            w = self.term()
            v = _add(v, w, t) if t.text == "+" else _add(v, _neg(w), t)
        return v

    def term(self):
        v = self.factor()
        while (t := self.peek()) is not None and t.kind == "op" and t.text in "*/@∘":
            self.take()
            w = self.factor()
            if t.text == "*":
                v = _mul(v, w, t)
            elif t.text == "/":
                v = _div(v, w, t)
            else:
                v = _comult(v, w, t)
        return v

    def factor(self):
        t = self.peek()
        if t is not None and t.kind == "op" and t.text == "-":
            self.take()
            return _neg(self.factor())
        return self.atom()

    def atom(self):
        t = self.take()
        if t.kind == "num":
            return RationalFunction(Fraction(int(t.text)))
        if t.kind == "op" and t.text == "(":
            v = self.expr()
            self.take("op", ")")
            return v
        if t.kind == "name":
            name = t.text
            if name in ("delta", "δ"):
                return DELTA
            if name.startswith("E"):
                i = int(name[1:])
                if not 1 <= i <= 7:
                    raise ParseError(f"generator index {i} out of range 1..7", t.pos)
                return ("gen", i, t.pos)
            if name == "jw":
                self.take("op", "(")
                arg = self.take("num")
                self.take("op", ")")
                n = int(arg.text)
                if n < 1:
                    raise ParseError("jw needs a positive box size", arg.pos)
                return jones_wenzl(n)
            if name in ("rot", "tr"):
                self.take("op", "(")
                v = self.expr()
                self.take("op", ")")
                v = _materialize(v, 2 if name == "rot" else None)
                if name == "rot":
                    if not isinstance(v, TLElement):
                        raise ParseError("rot needs a diagram element", t.pos)
                    if v.n != 2:
                        raise ParseError("rot is defined on 2-boxes only", t.pos)
                    return rotate(v)
                if isinstance(v, TLElement):
                    return markov_trace(v)
                return v
        raise ParseError(f"unexpected token {t.text!r}", t.pos)


def _box_size(v):
    if isinstance(v, TLElement):
        return v.n
    if isinstance(v, tuple) and v[0] == "gen":
        return None
    return None


def _materialize(v, n):
    """Resolve deferred generators once a box size is known."""
    if isinstance(v, tuple) and v[0] == "gen":
        size = n if n is not None else v[1] + 1
        if v[1] >= size:
            raise ParseError(
                f"generator E{v[1]} needs box size at least {v[1] + 1}", v[2]
            )
        return TLElement.generator(size, v[1])
    return v


def _unify(a, b, tok):
    na, nb = _box_size(a), _box_size(b)
    n = None
    for cand in (na, nb):
        if cand is not None:
            n = cand if n is None else max(n, cand)
    if isinstance(a, tuple) and isinstance(b, tuple):
        n = max(a[1], b[1]) + 1
    a = _materialize(a, n)
    b = _materialize(b, n)
    if isinstance(a, TLElement) and isinstance(b, TLElement) and a.n != b.n:
        raise ParseError(f"box size mismatch {a.n} vs {b.n}", tok.pos)
    return a, b


def _add(a, b, tok):
    a, b = _unify(a, b, tok)
    if isinstance(a, TLElement) and not isinstance(b, TLElement):
        b = TLElement.identity(a.n).scale(b)
    if isinstance(b, TLElement) and not isinstance(a, TLElement):
        a = TLElement.identity(b.n).scale(a)
    return a + b


def _neg(a):
    if isinstance(a, tuple) and a[0] == "gen":
        a = _materialize(a, None)
    return -a if not isinstance(a, RationalFunction) else -a


def _mul(a, b, tok):
    a, b = _unify(a, b, tok)
    if isinstance(a, TLElement) and isinstance(b, TLElement):
        return compose(a, b)
    return a * b


def _div(a, b, tok):
    a, b = _unify(a, b, tok)
    if isinstance(b, TLElement):
        raise ParseError("division by a diagram element is undefined", tok.pos)
    return a / b


def _comult(a, b, tok):
    a, b = _unify(a, b, tok)
    a = _materialize(a, 2)
    b = _materialize(b, 2)
    if not isinstance(a, TLElement):
        a = TLElement.identity(2).scale(a)
    if not isinstance(b, TLElement):
        b = TLElement.identity(2).scale(b)
    if a.n != 2 or b.n != 2:
        raise ParseError("the convolution is defined on 2-boxes only", tok.pos)
    return comultiply(a, b)


def evaluate_expression(src: str, delta_value=None):
    """Parse and evaluate; returns a TLElement or a RationalFunction.

    With a numeric delta_value the result coefficients (or scalar) are
    specialized, rejecting values where a needed quantum integer vanishes.
    """
    tokens = tokenize(src)
    if not tokens:
        raise ParseError("empty expression", 0)
    value = _Parser(tokens, src).parse()
    value = _materialize(value, None)
    if delta_value is None:
        return value
    dv = Fraction(delta_value) if not isinstance(delta_value, float) else delta_value
    if isinstance(value, RationalFunction):
        return value(dv)
    return value.coefficients_at(dv)
