"""Exact Temperley-Lieb diagram calculus on k-boxes.

Diagrams live on a disc with 2n marked boundary points read counterclockwise:
bottom points 0..n-1 left to right, then top points n..2n-1 right to left,
so the top point directly above bottom position i carries label 2n-1-i.
Closed loops never appear in stored diagrams; they are absorbed as powers of
the loop parameter delta, kept symbolic as a rational function.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

from subfactor_lab.scalars import (
    DeltaPolynomial,
    QuadraticNumber,
    RationalFunction,
    quantum_integer,
)

DELTA = RationalFunction.delta()


def _coerce_scalar(c) -> RationalFunction:
    if isinstance(c, RationalFunction):
        return c
    if isinstance(c, (int, Fraction, DeltaPolynomial)):
        return RationalFunction(c)
    raise TypeError(f"cannot use {type(c).__name__} as a diagram coefficient")


class PlanarDiagram:
    """Noncrossing perfect matching of the 2n boundary points of an n-box."""

    __slots__ = ("n", "pairs", "partner", "_hash")

    def __init__(self, n: int, pairs: Iterable[tuple[int, int]]) -> None:
        pairs = tuple(sorted(tuple(sorted(p)) for p in pairs))
        partner = [-1] * (2 * n)
        if len(pairs) != n:
            raise ValueError(f"expected {n} chords, got {len(pairs)}")
        for a, b in pairs:
            if not (0 <= a < 2 * n and 0 <= b < 2 * n) or a == b:
                raise ValueError(f"bad chord ({a},{b}) for box size {n}")
            if partner[a] != -1 or partner[b] != -1:
                raise ValueError("not a perfect matching")
            partner[a], partner[b] = b, a
        for (a, b) in pairs:
            for (c, d) in pairs:
                if a < c < b < d:
                    raise ValueError(f"chords ({a},{b}) and ({c},{d}) cross")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "partner", tuple(partner))
        object.__setattr__(self, "_hash", hash((n, pairs)))

    def __setattr__(self, name, value):
        raise AttributeError("PlanarDiagram is immutable")

    def __eq__(self, other):
        return (
            isinstance(other, PlanarDiagram)
            and self.n == other.n
            and self.pairs == other.pairs
        )

    def __hash__(self):
        return self._hash

    def __str__(self) -> str:
        return "[" + ",".join(f"({a},{b})" for a, b in self.pairs) + "]"

    __repr__ = __str__

    def relabel(self, sigma) -> PlanarDiagram:
        return PlanarDiagram(self.n, [(sigma(a), sigma(b)) for a, b in self.pairs])


@lru_cache(maxsize=None)
def identity_diagram(n: int) -> PlanarDiagram:
    return PlanarDiagram(n, [(i, 2 * n - 1 - i) for i in range(n)])


@lru_cache(maxsize=None)
def cup_cap_diagram(n: int, i: int) -> PlanarDiagram:
    """Diagram of the generator E_i (1-indexed, 1 <= i <= n-1)."""
    if not 1 <= i <= n - 1:
        raise ValueError(f"generator index {i} out of range for box size {n}")
    pairs = [(i - 1, i), (2 * n - 1 - i, 2 * n - i)]
    for j in range(n):
        if j not in (i - 1, i):
            pairs.append((j, 2 * n - 1 - j))
    return PlanarDiagram(n, pairs)


@lru_cache(maxsize=None)
def all_diagrams(n: int) -> tuple[PlanarDiagram, ...]:
    """All noncrossing perfect matchings on 2n points (Catalan(n) of them)."""

    def matchings(points: tuple[int, ...]):
        if not points:
            yield ()
            return
        first = points[0]
        for k in range(1, len(points), 2):
            left = points[1:k]
            right = points[k + 1 :]
            for lm in matchings(left):
                for rm in matchings(right):
                    yield ((first, points[k]),) + lm + rm

    return tuple(PlanarDiagram(n, m) for m in matchings(tuple(range(2 * n))))


def _compose_diagrams(x: PlanarDiagram, y: PlanarDiagram) -> tuple[PlanarDiagram, int]:
    """Stack x above y, gluing x's bottom row to y's top row.

    Returns the resulting diagram and the number of closed loops formed.
    """
    n = x.n
    m = 2 * n
    # nodes: 0..2n-1 are y's points, 2n..4n-1 are x's points (offset by 2n)
    glue = {}
    for i in range(n):
        a = m + i          # x bottom point i
        b = m - 1 - i      # y top point above position i
        glue[a] = b
        glue[b] = a

    def pair_of(node: int) -> int:
        if node < m:
            return y.partner[node]
        return m + x.partner[node - m]

    boundary = {i: i for i in range(n)}    # y bottom -> result bottom
    for j in range(n):
        boundary[m + n + j] = n + j        # x top -> result top

    visited = set()
    pairs = []
    for start in boundary:
        if start in visited:
            continue
        node = start
        visited.add(node)
        while True:
            node = pair_of(node)
            visited.add(node)
            if node in boundary:
                pairs.append((boundary[start], boundary[node]))
                break
            node = glue[node]
            visited.add(node)
    loops = 0
    for node in glue:
        if node in visited:
            continue
        loops += 1
        cur = node
        while cur not in visited:
            visited.add(cur)
            nxt = pair_of(cur)
            visited.add(nxt)
            cur = glue[nxt]
    return PlanarDiagram(n, pairs), loops


@lru_cache(maxsize=None)
def _compose_cached(x: PlanarDiagram, y: PlanarDiagram):
    return _compose_diagrams(x, y)


def _closure_loops(d: PlanarDiagram) -> int:
    """Loops formed when each bottom point is joined to the top point above it."""
    n = d.n
    visited = [False] * (2 * n)
    loops = 0
    for start in range(2 * n):
        if visited[start]:
            continue
        loops += 1
        cur = start
        while not visited[cur]:
            visited[cur] = True
            cur = d.partner[cur]
            visited[cur] = True
            cur = 2 * n - 1 - cur
    return loops


class TLElement:
    """Formal linear combination of planar diagrams of one box size."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[PlanarDiagram, object] | None = None) -> None:
        clean = {}
        if terms:
            for d, c in terms.items():
                if d.n != n:
                    raise ValueError(f"diagram box size {d.n} != element box size {n}")
                c = _coerce_scalar(c)
                if not c.is_zero():
                    clean[d] = c
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("TLElement is immutable")

    # -- constructors -----------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> TLElement:
        return cls(n, {})

    @classmethod
    def identity(cls, n: int) -> TLElement:
        return cls(n, {identity_diagram(n): RationalFunction(1)})

    @classmethod
    def generator(cls, n: int, i: int) -> TLElement:
        return cls(n, {cup_cap_diagram(n, i): RationalFunction(1)})

    @classmethod
    def from_diagram(cls, d: PlanarDiagram) -> TLElement:
        return cls(d.n, {d: RationalFunction(1)})

    # -- linear structure ---------------------------------------------------------

    def _check(self, other: TLElement) -> None:
        if self.n != other.n:
            raise ValueError(f"box size mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction, DeltaPolynomial, RationalFunction)):
            other = _coerce_scalar(other) * TLElement.identity(self.n)
        if not isinstance(other, TLElement):
            return NotImplemented
        self._check(other)
        terms = dict(self.terms)
        for d, c in other.terms.items():
            terms[d] = terms.get(d, RationalFunction(0)) + c
        return TLElement(self.n, terms)

    __radd__ = __add__

    def __neg__(self):
        return TLElement(self.n, {d: -c for d, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, DeltaPolynomial, RationalFunction)):
            other = _coerce_scalar(other) * TLElement.identity(self.n)
        if not isinstance(other, TLElement):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> TLElement:
        c = _coerce_scalar(c)
        return TLElement(self.n, {d: c * v for d, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, DeltaPolynomial, RationalFunction)):
            return self.scale(other)
        if not isinstance(other, TLElement):
            return NotImplemented
        return compose(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, DeltaPolynomial, RationalFunction)):
            return self.scale(other)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction, DeltaPolynomial, RationalFunction)):
            return self.scale(1 / _coerce_scalar(other))
        return NotImplemented

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = _coerce_scalar(other) * TLElement.identity(self.n)
        if not isinstance(other, TLElement):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def coefficient(self, d: PlanarDiagram) -> RationalFunction:
        return self.terms.get(d, RationalFunction(0))

    # -- involutions and evaluations ------------------------------------------------

    def adjoint(self) -> TLElement:
        """Reflection across the horizontal axis (the * operation)."""
        n = self.n
        sigma = lambda i: 2 * n - 1 - i
        return TLElement(self.n, {d.relabel(sigma): c for d, c in self.terms.items()})

    def coefficients_at(self, delta_value) -> dict[PlanarDiagram, object]:
        """Specialize all coefficients at a numeric loop parameter."""
        return {d: c(delta_value) for d, c in self.terms.items()}

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for d in sorted(self.terms, key=lambda d: d.pairs):
            c = self.terms[d]
            parts.append(f"({c}) * {d}")
        return " + ".join(parts)

    __repr__ = __str__


def _denominator_lcm(x: TLElement) -> DeltaPolynomial:
    out = DeltaPolynomial.constant(1)
    for c in x.terms.values():
        g = out.gcd(c.den)
        out = (out * c.den) // g if not g.is_zero() else out * c.den
    return out


def compose(x: TLElement, y: TLElement) -> TLElement:
    """Diagram product: stack x above y; each closed loop contributes delta.

    Coefficients are pushed over a common denominator first so the inner
    double loop runs on plain polynomials (one gcd per output term instead
    of one per product).
    """
    if x.n != y.n:
        raise ValueError(f"box size mismatch: {x.n} vs {y.n}")
    lx, ly = _denominator_lcm(x), _denominator_lcm(y)
    xs = [(d, (c * lx).as_polynomial()) for d, c in x.terms.items()]
    ys = [(d, (c * ly).as_polynomial()) for d, c in y.terms.items()]
    terms: dict[PlanarDiagram, DeltaPolynomial] = {}
    dpow = [DeltaPolynomial.constant(1)]
    for dx, cx in xs:
        for dy, cy in ys:
            d, loops = _compose_cached(dx, dy)
            while loops >= len(dpow):
                dpow.append(dpow[-1] * DeltaPolynomial.delta())
            c = cx * cy * dpow[loops] if loops else cx * cy
            if d in terms:
                terms[d] = terms[d] + c
            else:
                terms[d] = c
    den = lx * ly
    return TLElement(x.n, {d: RationalFunction(c, den) for d, c in terms.items()})


def markov_trace(x: TLElement) -> RationalFunction:
    """Close every strand around the boundary; Tr(identity on n strands) = delta^n."""
    total = RationalFunction(0)
    for d, c in x.terms.items():
        total = total + c * DELTA ** _closure_loops(d)
    return total


def rotate(x: TLElement) -> TLElement:
    """One-click rotation (Fourier transform) on 2-boxes; four clicks is the identity."""
    if x.n != 2:
        raise ValueError("rotation is only defined on 2-boxes")
    sigma = lambda i: (i + 1) % 4
    return TLElement(2, {d.relabel(sigma): c for d, c in x.terms.items()})


def comultiply(x: TLElement, y: TLElement) -> TLElement:
    """Convolution product on 2-boxes, normalized so that e∘e = (1/delta)e
    for the cup-cap projection e = E_1/delta."""
    if x.n != 2 or y.n != 2:
        raise ValueError("comultiplication is only defined on 2-boxes")
    # rotate is its own inverse on 2-boxes, so this is F^{-1}(F(x) F(y))
    return rotate(compose(rotate(x), rotate(y)))


@lru_cache(maxsize=None)
def jones_wenzl(n: int) -> TLElement:
    """Wenzl idempotent p_n: the projection killed by every cup-cap generator."""
    if n < 1:
        raise ValueError("box size must be positive")
    if n == 1:
        return TLElement.identity(1)
    prev = jones_wenzl(n - 1)
    p = _include(prev)
    ratio = RationalFunction(quantum_integer(n - 1), quantum_integer(n))
    e = TLElement.generator(n, n - 1)
    return p - ratio * compose(compose(p, e), p)


def _include(x: TLElement) -> TLElement:
    """Add a vertical strand on the right: TL_n -> TL_(n+1)."""
    n = x.n

    def sigma(i):
        return i if i < n else i + 2

    terms = {}
    for d, c in x.terms.items():
        pairs = [(sigma(a), sigma(b)) for a, b in d.pairs]
        pairs.append((n, n + 1))
        terms[PlanarDiagram(n + 1, pairs)] = c
    return TLElement(n + 1, terms)


def cup_cap_projection() -> TLElement:
    """The normalized cup-cap 2-box e = E_1/delta."""
    return TLElement.generator(2, 1) / DELTA


def is_biprojection(q: TLElement) -> tuple[bool, dict]:
    """Test whether a 2-box is a biprojection.

    True iff q is a self-adjoint idempotent dominating the cup-cap projection
    whose rotation is a positive scalar multiple of a projection.  Diagnostics
    carry the rotation scalar and the exchange-relation residual over the
    diagram basis.
    """
    if q.n != 2:
        raise ValueError("biprojection test requires a 2-box")
    diag: dict = {}
    is_proj = compose(q, q) == q and q.adjoint() == q
    diag["is_projection"] = is_proj
    e = cup_cap_projection()
    dominates = compose(q, e) == e and compose(e, q) == e
    diag["dominates_cup_cap"] = dominates
    r = rotate(q)
    scalar = None
    rot_ok = False
    if not r.is_zero():
        rr = compose(r, r)
        d0 = next(iter(r.terms))
        c0 = r.terms[d0]
        scalar = rr.coefficient(d0) / c0
        if not scalar.is_zero() and rr == r.scale(scalar):
            p = r.scale(1 / scalar)
            # positivity of the scalar under the real embedding, away from
            # small roots: sign at a large loop parameter
            sign_val = scalar(Fraction(100))
            rot_ok = p.adjoint() == p and sign_val > 0
    diag["rotation_scalar"] = None if scalar is None else str(scalar)
    diag["rotation_is_projection_multiple"] = rot_ok
    residual_zero = True
    residual = RationalFunction(0)
    for x in (TLElement.identity(2), TLElement.generator(2, 1)):
        lhs = compose(q, comultiply(q, x))
        rhs = comultiply(q, compose(q, x))
        dterms = (lhs - rhs).terms
        if dterms:
            residual_zero = False
            for c in dterms.values():
                residual = residual + c * c
    diag["exchange_residual_zero"] = residual_zero
    diag["exchange_residual_at_3"] = float(residual(Fraction(3)))
    return bool(is_proj and dominates and rot_ok), diag
