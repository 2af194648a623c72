"""Exact scalar arithmetic: quadratic extensions of Q and rational functions in the loop parameter."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Union

import mpmath

Rational = Union[int, Fraction]


def _is_squarefree(n: int) -> bool:
    n = abs(n)
    k = 2
    while k * k <= n:
        if n % (k * k) == 0:
            return False
        k += 1
    return True


def rational_sqrt(x: Fraction) -> Fraction | None:
    """Exact square root of a nonnegative rational, or None if irrational."""
    if x < 0:
        return None
    p, q = x.numerator, x.denominator
    rp, rq = math.isqrt(p), math.isqrt(q)
    if rp * rp == p and rq * rq == q:
        return Fraction(rp, rq)
    return None


class QuadraticNumber:
    """Element a + b*sqrt(d) of the quadratic field Q(sqrt(d)).

    d is a fixed squarefree integer, d not in {0, 1}.  Negative d gives an
    imaginary quadratic field; ordering is then undefined but conjugation
    acts as complex conjugation.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a: Rational, b: Rational = 0, d: int = 2) -> None:
        if d in (0, 1) or not _is_squarefree(d):
            raise ValueError(f"d must be a squarefree integer != 0, 1; got {d}")
        object.__setattr__(self, "a", Fraction(a))
        object.__setattr__(self, "b", Fraction(b))
        object.__setattr__(self, "d", d)

    def __setattr__(self, name, value):
        raise AttributeError("QuadraticNumber is immutable")

    @classmethod
    def from_rational(cls, x: Rational, d: int = 2) -> QuadraticNumber:
        return cls(Fraction(x), 0, d)

    def _coerce(self, other) -> QuadraticNumber | None:
        if isinstance(other, QuadraticNumber):
            if other.d != self.d and other.b != 0 and self.b != 0:
                raise ValueError(f"mixed radicands {self.d} and {other.d}")
            if other.d != self.d:
                # one side is rational; move it into this field
                if other.b == 0:
                    return QuadraticNumber(other.a, 0, self.d)
                return None
            return other
        if isinstance(other, (int, Fraction)):
            return QuadraticNumber(Fraction(other), 0, self.d)
        return None

    # -- ring/field operations ------------------------------------------------

    def __add__(self, other):
        if isinstance(other, QuadraticNumber) and other.d == self.d:
            return QuadraticNumber(self.a + other.a, self.b + other.b, self.d)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if o.d != self.d:
            return o.__radd__(self)
        return QuadraticNumber(self.a + o.a, self.b + o.b, self.d)

    __radd__ = __add__

    def __neg__(self) -> QuadraticNumber:
        return QuadraticNumber(-self.a, -self.b, self.d)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, QuadraticNumber) and other.d == self.d:
            o = other
        else:
            o = self._coerce(other)
            if o is None:
                return NotImplemented
            if o.d != self.d:
                return NotImplemented
        if self.b == 0:
            if o.b == 0:
                return QuadraticNumber(self.a * o.a, 0, self.d)
            return QuadraticNumber(self.a * o.a, self.a * o.b, self.d)
        if o.b == 0:
            return QuadraticNumber(self.a * o.a, self.b * o.a, self.d)
        return QuadraticNumber(
            self.a * o.a + self.d * self.b * o.b,
            self.a * o.b + self.b * o.a,
            self.d,
        )

    __rmul__ = __mul__

    def inverse(self) -> QuadraticNumber:
        n = self.a * self.a - self.d * self.b * self.b
        if n == 0:
            if self.is_zero():
                raise ZeroDivisionError("division by zero")
            raise ZeroDivisionError("norm zero is impossible for squarefree d")
        return QuadraticNumber(self.a / n, -self.b / n, self.d)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k: int) -> QuadraticNumber:
        if k < 0:
            return self.inverse() ** (-k)
        out = QuadraticNumber(1, 0, self.d)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- involutions ----------------------------------------------------------

    def conjugate(self) -> QuadraticNumber:
        """Galois conjugate a - b*sqrt(d)."""
        return QuadraticNumber(self.a, -self.b, self.d)

    def complex_conjugate(self) -> QuadraticNumber:
        """Complex conjugation: identity for d > 0, Galois conjugate for d < 0."""
        return self if self.d > 0 else self.conjugate()

    # -- predicates and ordering ----------------------------------------------

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def is_rational(self) -> bool:
        return self.b == 0

    @property
    def rational_part(self) -> Fraction:
        return self.a

    def as_rational(self) -> Fraction:
        if self.b != 0:
            raise ValueError(f"{self} is not rational")
        return self.a

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            return self.b == 0 and self.a == other
        if isinstance(other, QuadraticNumber):
            if self.d == other.d:
                return self.a == other.a and self.b == other.b
            return self.b == 0 and other.b == 0 and self.a == other.a
        return NotImplemented

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.d))

    def sign(self) -> int:
        """Sign under the real embedding with sqrt(d) > 0 (requires d > 0)."""
        if self.d < 0:
            raise ValueError("no ordering on an imaginary quadratic field")
        a, b = self.a, self.b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return 1 if b > 0 else -1
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare a^2 against d b^2
        cmp = a * a - self.d * b * b
        big_is_a = cmp > 0
        if cmp == 0:
            raise ArithmeticError("unreachable for squarefree d")
        if a > 0:
            return 1 if big_is_a else -1
        return -1 if big_is_a else 1

    def __lt__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return (self - o).sign() < 0

    def __le__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return (self - o).sign() <= 0

    def __gt__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return (self - o).sign() > 0

    def __ge__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return (self - o).sign() >= 0

    # -- square roots ---------------------------------------------------------

    def sqrt(self) -> QuadraticNumber | None:
        """Exact square root within the same field, or None."""
        if self.d > 0 and self.sign() < 0:
            return None
        if self.b == 0:
            if self.a >= 0:
                r = rational_sqrt(self.a)
                if r is not None:
                    return QuadraticNumber(r, 0, self.d)
            if (self.a >= 0) == (self.d > 0):
                r = rational_sqrt(self.a / self.d)
                if r is not None:
                    return QuadraticNumber(0, r, self.d)
            return None
        # solve (x + y sqrt(d))^2 = a + b sqrt(d)
        disc = self.a * self.a - self.d * self.b * self.b
        s = rational_sqrt(disc)
        if s is None:
            return None
        for t in ((self.a + s) / 2, (self.a - s) / 2):
            x = rational_sqrt(t)
            if x is not None and x != 0:
                y = self.b / (2 * x)
                cand = QuadraticNumber(x, y, self.d)
                if cand * cand == self:
                    if self.d < 0 or cand.sign() >= 0:
                        return cand
                    return -cand
        return None

    # -- numeric evaluation ---------------------------------------------------

    def evaluate(self, precision: int = 53) -> mpmath.mpf:
        return evaluate(self, precision=precision)

    def __float__(self) -> float:
        return float(self.evaluate(60))

    # -- formatting -------------------------------------------------------------

    def _radical_str(self) -> str:
        return f"√{self.d}" if self.d > 0 else f"√({self.d})"

    def __str__(self) -> str:
        if self.b == 0:
            return str(self.a)
        if self.b.denominator == 1:
            babs = abs(self.b.numerator)
            bs = self._radical_str() if babs == 1 else f"{babs}{self._radical_str()}"
        else:
            bs = f"({abs(self.b)}){self._radical_str()}"
        sign = "-" if self.b < 0 else "+"
        if self.a == 0:
            return f"-{bs}" if self.b < 0 else bs
        return f"{self.a}{sign}{bs}"

    def __repr__(self) -> str:
        return f"QuadraticNumber({self.a!r}, {self.b!r}, {self.d})"


class DeltaPolynomial:
    """Polynomial over Q in the loop parameter delta, stored by ascending coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()) -> None:
        cs = [Fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    def __setattr__(self, name, value):
        raise AttributeError("DeltaPolynomial is immutable")

    @classmethod
    def constant(cls, c: Rational) -> DeltaPolynomial:
        return cls((Fraction(c),))

    @classmethod
    def delta(cls) -> DeltaPolynomial:
        return cls((0, 1))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def leading(self) -> Fraction:
        if not self.coeffs:
            raise ValueError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = DeltaPolynomial.constant(other)
        if not isinstance(other, DeltaPolynomial):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def _coerce(self, other) -> DeltaPolynomial | None:
        if isinstance(other, DeltaPolynomial):
            return other
        if isinstance(other, (int, Fraction)):
            return DeltaPolynomial.constant(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        n = max(len(self.coeffs), len(o.coeffs))
        a = list(self.coeffs) + [Fraction(0)] * (n - len(self.coeffs))
        for i, c in enumerate(o.coeffs):
            a[i] += c
        return DeltaPolynomial(a)

    __radd__ = __add__

    def __neg__(self):
        return DeltaPolynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if not self.coeffs or not o.coeffs:
            return DeltaPolynomial()
        out = [Fraction(0)] * (len(self.coeffs) + len(o.coeffs) - 1)
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            for j, e in enumerate(o.coeffs):
                out[i + j] += c * e
        return DeltaPolynomial(out)

    __rmul__ = __mul__

    def __divmod__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if o.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        den = o.coeffs
        q = [Fraction(0)] * max(0, len(rem) - len(den) + 1)
        lead = den[-1]
        for top in range(len(rem) - 1, len(den) - 2, -1):
            f = rem[top] / lead
            if f == 0:
                continue
            q[top - len(den) + 1] = f
            for j, c in enumerate(den):
                rem[top - len(den) + 1 + j] -= f * c
        return DeltaPolynomial(q), DeltaPolynomial(rem)

    def __mod__(self, other):
        return divmod(self, other)[1]

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def monic(self) -> DeltaPolynomial:
        if self.is_zero():
            return self
        inv = 1 / self.leading()
        return DeltaPolynomial(tuple(c * inv for c in self.coeffs))

    def gcd(self, other: DeltaPolynomial) -> DeltaPolynomial:
        a, b = self, other
        while not b.is_zero():
            a, b = b, a % b
        if a.is_zero():
            return a
        return a.monic()

    def derivative(self) -> DeltaPolynomial:
        return DeltaPolynomial(tuple(i * c for i, c in enumerate(self.coeffs) if i))

    def __call__(self, x):
        """Horner evaluation; x may be rational, QuadraticNumber, float, or mpf."""
        if not self.coeffs:
            return 0 * x if not isinstance(x, (int, Fraction)) else Fraction(0)
        acc = self.coeffs[-1] + 0 * x
        for c in reversed(self.coeffs[:-1]):
            acc = acc * x + c
        return acc

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for i in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[i]
            if c == 0:
                continue
            if i == 0:
                term = str(abs(c))
            else:
                mag = abs(c)
                coeff = "" if mag == 1 else (str(mag) if mag.denominator == 1 else f"({mag})")
                term = f"{coeff}δ" + (f"^{i}" if i > 1 else "")
            if not parts:
                parts.append(("-" if c < 0 else "") + term)
            else:
                parts.append((" - " if c < 0 else " + ") + term)
        return "".join(parts)

    def __repr__(self) -> str:
        return f"DeltaPolynomial({list(self.coeffs)!r})"


class RationalFunction:
    """Quotient of delta-polynomials in canonical form (monic denominator, coprime)."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=None) -> None:
        if isinstance(num, RationalFunction):
            if den is not None:
                raise ValueError("cannot combine a RationalFunction with a denominator")
            object.__setattr__(self, "num", num.num)
            object.__setattr__(self, "den", num.den)
            return
        if not isinstance(num, DeltaPolynomial):
            num = DeltaPolynomial.constant(num)
        if den is None:
            den = DeltaPolynomial.constant(1)
        elif not isinstance(den, DeltaPolynomial):
            den = DeltaPolynomial.constant(den)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        g = num.gcd(den)
        if not g.is_zero() and g.degree > 0:
            num = num // g
            den = den // g
        lead = den.leading()
        if lead != 1:
            inv = 1 / lead
            num = num * inv
            den = den * inv
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, name, value):
        raise AttributeError("RationalFunction is immutable")

    @classmethod
    def delta(cls) -> RationalFunction:
        return cls(DeltaPolynomial.delta())

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def as_polynomial(self) -> DeltaPolynomial:
        if not self.is_polynomial():
            raise ValueError(f"{self} is not a polynomial")
        return self.num

    def _coerce(self, other) -> RationalFunction | None:
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, (int, Fraction, DeltaPolynomial)):
            return RationalFunction(other)
        return None

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.num == o.num and self.den == o.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return RationalFunction(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return RationalFunction(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if o.is_zero():
            raise ZeroDivisionError("division by zero rational function")
        return RationalFunction(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, k: int):
        if k < 0:
            return (1 / self) ** (-k)
        out = RationalFunction(1)
        for _ in range(k):
            out = out * self
        return out

    def __call__(self, x):
        d = self.den(x)
        if (isinstance(d, (int, Fraction)) and d == 0) or (
            isinstance(d, QuadraticNumber) and d.is_zero()
        ):
            raise ZeroDivisionError(f"denominator vanishes at delta = {x}")
        if isinstance(d, (float, mpmath.mpf)) and d == 0:
            raise ZeroDivisionError(f"denominator vanishes at delta = {x}")
        n = self.num(x)
        if isinstance(d, (int, Fraction)) and isinstance(n, (int, Fraction)):
            return Fraction(n) / Fraction(d)
        return n / d

    def __str__(self) -> str:
        if self.is_polynomial():
            return str(self.num)
        ns = str(self.num)
        ds = str(self.den)
        if self.num.degree > 0 and len([c for c in self.num.coeffs if c != 0]) > 1:
            ns = f"({ns})"
        if len([c for c in self.den.coeffs if c != 0]) > 1:
            ds = f"({ds})"
        return f"{ns}/{ds}"

    def __repr__(self) -> str:
        return f"RationalFunction({self.num!r}, {self.den!r})"


@lru_cache(maxsize=None)
def quantum_integer(n: int) -> DeltaPolynomial:
    """Chebyshev-type quantum integer [n]: [0]=0, [1]=1, [n+1] = delta*[n] - [n-1]."""
    if n < 0:
        raise ValueError("quantum integer index must be nonnegative")
    if n == 0:
        return DeltaPolynomial()
    if n == 1:
        return DeltaPolynomial.constant(1)
    return DeltaPolynomial.delta() * quantum_integer(n - 1) - quantum_integer(n - 2)


def evaluate(x, delta_value=None, precision: int = 53):
    """Evaluate an exact scalar to an mpf at the requested binary precision.

    Results are correctly rounded to within 2 ulp.  DeltaPolynomial and
    RationalFunction values require delta_value.
    """
    if precision < 53:
        raise ValueError("precision must be at least 53 bits")
    with mpmath.workprec(precision + 20):
        if isinstance(x, QuadraticNumber):
            hi = mpmath.mpf(x.a.numerator) / x.a.denominator
            if x.b != 0:
                if x.d < 0:
                    raise ValueError("cannot evaluate an imaginary quadratic to a real")
                hi += (mpmath.mpf(x.b.numerator) / x.b.denominator) * mpmath.sqrt(x.d)
            val = hi
        elif isinstance(x, (DeltaPolynomial, RationalFunction)):
            if delta_value is None:
                raise ValueError("delta_value required to evaluate a delta expression")
            dv = delta_value
            if isinstance(dv, QuadraticNumber):
                dv = evaluate(dv, precision=precision + 20)
            elif isinstance(dv, Fraction):
                dv = mpmath.mpf(dv.numerator) / dv.denominator
            else:
                dv = mpmath.mpf(dv)
            val = x(dv)
        elif isinstance(x, (int, Fraction)):
            x = Fraction(x)
            val = mpmath.mpf(x.numerator) / x.denominator
        else:
            val = mpmath.mpf(x)
    with mpmath.workprec(precision):
        return +val
