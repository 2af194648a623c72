"""Field-generic dense linear algebra over exact scalars or floats.

Matrices are numpy arrays: dtype=object holding Fraction/QuadraticNumber
entries in exact mode, dtype=float64 in float mode.  All pivoting and zero
tests go through a Field object so the same algorithms serve both modes.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from subfactor_lab.scalars import QuadraticNumber, rational_sqrt


class RationalField:
    """Exact rationals (Fraction entries)."""

    exact = True
    d = None

    @property
    def zero(self):
        return Fraction(0)

    @property
    def one(self):
        return Fraction(1)

    def from_fraction(self, x):
        return Fraction(x)

    def conj(self, x):
        return x

    def is_zero(self, x) -> bool:
        return x == 0

    def eq(self, x, y) -> bool:
        return x == y

    def to_float(self, x) -> float:
        return float(x)

    def sqrt(self, x):
        return rational_sqrt(Fraction(x))

    def abs_key(self, x) -> float:
        # pivot quality; exact fields only distinguish zero from nonzero
        return 0.0 if x == 0 else 1.0

    def __repr__(self):
        return "RationalField()"


class QuadraticField(RationalField):
    """Exact field Q(sqrt(d)) with QuadraticNumber entries."""

    def __init__(self, d: int):
        self._d = d

    @property
    def d(self):
        return self._d

    @property
    def zero(self):
        return QuadraticNumber(0, 0, self._d)

    @property
    def one(self):
        return QuadraticNumber(1, 0, self._d)

    def from_fraction(self, x):
        if isinstance(x, QuadraticNumber):
            if x.d != self._d and x.b != 0:
                raise ValueError(f"cannot place {x} into Q(sqrt({self._d}))")
            return QuadraticNumber(x.a, x.b if x.d == self._d else 0, self._d)
        return QuadraticNumber(Fraction(x), 0, self._d)

    def conj(self, x):
        if isinstance(x, QuadraticNumber):
            return x.complex_conjugate()
        return x

    def is_zero(self, x) -> bool:
        if isinstance(x, QuadraticNumber):
            return x.is_zero()
        return x == 0

    def to_float(self, x) -> float:
        return float(x) if isinstance(x, QuadraticNumber) else float(Fraction(x))

    def sqrt(self, x):
        return self.from_fraction(x).sqrt()

    def __repr__(self):
        return f"QuadraticField({self._d})"


class FloatField:
    """numpy float64 entries with tolerance-based zero tests."""

    exact = False
    d = None

    def __init__(self, tol: float = 1e-9):
        self.tol = tol

    @property
    def zero(self):
        return 0.0

    @property
    def one(self):
        return 1.0

    def from_fraction(self, x):
        if isinstance(x, QuadraticNumber):
            return float(x)
        return float(Fraction(x))

    def conj(self, x):
        return x

    def is_zero(self, x) -> bool:
        return abs(x) < self.tol

    def eq(self, x, y) -> bool:
        return abs(x - y) < self.tol

    def to_float(self, x) -> float:
        return float(x)

    def sqrt(self, x):
        return math.sqrt(x) if x > 0 else (0.0 if abs(x) < self.tol else None)

    def abs_key(self, x) -> float:
        return abs(x)

    def __repr__(self):
        return f"FloatField(tol={self.tol})"


# -- matrix helpers ---------------------------------------------------------------


def matrix(field, rows) -> np.ndarray:
    if field.exact:
        return np.array(
            [[field.from_fraction(v) for v in row] for row in rows], dtype=object
        )
    return np.array([[field.to_float(_plain(v)) for v in row] for row in rows], dtype=float)


def _plain(v):
    if isinstance(v, QuadraticNumber):
        return float(v)
    return v


def zeros(field, m, n=None) -> np.ndarray:
    n = m if n is None else n
    if field.exact:
        return np.full((m, n), field.zero, dtype=object)
    return np.zeros((m, n))


def eye(field, n) -> np.ndarray:
    out = zeros(field, n)
    for i in range(n):
        out[i, i] = field.one
    return out


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.dot(a, b)


def dagger(field, a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    at = a.T
    if field.exact and field.d is not None and field.d < 0:
        return np.array(
            [[field.conj(at[i, j]) for j in range(at.shape[1])] for i in range(at.shape[0])],
            dtype=object,
        )
    return at.copy()

def trace(field, a: np.ndarray):
    t = field.zero
    for i in range(a.shape[0]):
        t = t + a[i, i]
    return t


def is_zero_matrix(field, a: np.ndarray) -> bool:
    return all(field.is_zero(v) for v in a.reshape(-1))


def mats_equal(field, a: np.ndarray, b: np.ndarray) -> bool:
    return is_zero_matrix(field, a - b)


def scalar_mul(c, a: np.ndarray) -> np.ndarray:
    return a * c


def to_float_matrix(field, a: np.ndarray) -> np.ndarray:
    if not field.exact:
        return np.asarray(a, dtype=float)
    return np.array(
        [[field.to_float(a[i, j]) for j in range(a.shape[1])] for i in range(a.shape[0])],
        dtype=float,
    )


def max_abs(field, a: np.ndarray) -> float:
    return max((abs(field.to_float(v)) for v in a.reshape(-1)), default=0.0)


def trace_product(field, a: np.ndarray, b: np.ndarray):
    """Trace(a b) without forming the product; skips zero entries in a."""
    if not field.exact:
        return float(np.einsum("ij,ji->", a, b))
    t = field.zero
    m, n = a.shape
    for i in range(m):
        for j in range(n):
            v = a[i, j]
            if not field.is_zero(v):
                t = t + v * b[j, i]
    return t


# -- incremental span with coordinates ------------------------------------------------


class SpanBasis:
    """Incremental row-space basis that can express members over the kept vectors."""

    def __init__(self, field, length: int):
        self.field = field
        self.length = length
        self.rows: list[np.ndarray] = []        # reduced vectors
        self.pivots: list[int] = []
        self.exprs: list[list] = []             # row i = sum_j exprs[i][j] * kept[j]
        self.kept: list[np.ndarray] = []
        self.attached: list = []

    @property
    def dim(self) -> int:
        return len(self.rows)

    def _reduce(self, v: np.ndarray):
        f = self.field
        r = np.array(v, dtype=object if f.exact else float).reshape(-1)
        if r.shape[0] != self.length:
            raise ValueError("vector length mismatch")
        coeffs = [f.zero] * len(self.kept)
        for i, (row, piv) in enumerate(zip(self.rows, self.pivots)):
            c = r[piv]
            if f.is_zero(c):
                continue
            c = c / row[piv]
            r = r - row * c
            for j, e in enumerate(self.exprs[i]):
                coeffs[j] = coeffs[j] + c * e
        return r, coeffs

    def _pivot_of(self, r: np.ndarray):
        f = self.field
        if f.exact:
            for idx in range(self.length):
                if not f.is_zero(r[idx]):
                    return idx
            return None
        idx = int(np.argmax(np.abs(r)))
        scale = max(1.0, float(np.max(np.abs(r)))) if r.size else 1.0
        return idx if abs(r[idx]) > f.tol * max(1.0, scale) else None

    def add(self, v: np.ndarray, attach=None) -> bool:
        """Add a vector; returns True if it enlarged the span."""
        r, coeffs = self._reduce(v)
        piv = self._pivot_of(r)
        if piv is None:
            return False
        self.rows.append(r)
        self.pivots.append(piv)
        # expression of the reduced row over kept originals, including itself
        expr = [-c for c in coeffs] + [self.field.one]
        self.exprs.append(expr)
        for older in self.exprs[:-1]:
            older.append(self.field.zero)
        self.kept.append(np.array(v, dtype=object if self.field.exact else float).reshape(-1))
        self.attached.append(attach)
        return True

    def contains(self, v: np.ndarray) -> bool:
        r, _ = self._reduce(v)
        return self._pivot_of(r) is None

    def coordinates(self, v: np.ndarray):
        """Coefficients over the kept original vectors, or None if outside the span."""
        r, coeffs = self._reduce(v)
        if self._pivot_of(r) is not None:
            return None
        return coeffs


# -- elimination-based solvers ----------------------------------------------------------


def _forward_eliminate(field, a: np.ndarray):
    """Row-reduce in place (on a copy); returns (matrix, pivot column list)."""
    f = field
    m = np.array(a, dtype=object if f.exact else float)
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        best, best_key = None, 0.0
        for i in range(r, rows):
            k = f.abs_key(m[i, c])
            if k > best_key:
                best, best_key = i, k
            if f.exact and best is not None:
                break
        if best is None or f.is_zero(m[best, c]):
            continue
        if best != r:
            m[[r, best]] = m[[best, r]]
        inv = f.one / m[r, c]
        m[r] = m[r] * inv
        for i in range(rows):
            if i != r and not f.is_zero(m[i, c]):
                m[i] = m[i] - m[r] * m[i, c]
        pivots.append(c)
        r += 1
    return m, pivots


def nullspace(field, a: np.ndarray) -> list[np.ndarray]:
    """Basis of {x : a x = 0}."""
    m, pivots = _forward_eliminate(field, a)
    cols = a.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    out = []
    for fc in free:
        v = np.full(cols, field.zero, dtype=object) if field.exact else np.zeros(cols)
        v[fc] = field.one
        for r, pc in enumerate(pivots):
            v[pc] = -m[r, fc]
        out.append(v)
    return out


def solve(field, a: np.ndarray, b: np.ndarray):
    """One solution of a x = b, or None if inconsistent."""
    rows, cols = a.shape
    aug = zeros(field, rows, cols + 1)
    aug[:, :cols] = a
    aug[:, cols] = b.reshape(-1)
    m, pivots = _forward_eliminate(field, aug)
    for r in range(len(pivots)):
        if pivots[r] == cols:
            return None
    for r in range(rows):
        if all(field.is_zero(m[r, c]) for c in range(cols)) and not field.is_zero(m[r, cols]):
            return None
    x = np.full(cols, field.zero, dtype=object) if field.exact else np.zeros(cols)
    for r, pc in enumerate(pivots):
        if pc < cols:
            x[pc] = m[r, cols]
    return x


def inverse(field, a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    aug = zeros(field, n, 2 * n)
    aug[:, :n] = a
    aug[:, n:] = eye(field, n)
    m, pivots = _forward_eliminate(field, aug)
    if pivots[:n] != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return m[:, n:]


def char_poly(field, a: np.ndarray) -> list:
    """Characteristic polynomial coefficients, ascending, monic of degree n.

    Faddeev-LeVerrier; valid over any field of characteristic zero.
    """
    n = a.shape[0]
    coeffs = [field.zero] * (n + 1)
    coeffs[n] = field.one
    m = eye(field, n)
    c = field.one
    for k in range(1, n + 1):
        m = mul(a, m)
        c = -(trace(field, m) / field.from_fraction(k))
        if k < n:
            for i in range(n):
                m[i, i] = m[i, i] + c
        coeffs[n - k] = c
    return coeffs


def poly_roots_exact(field, coeffs: list):
    """Split a monic field polynomial into roots found in the field.

    Returns (roots list with multiplicity, leftover coefficients ascending).
    Rational roots are found by divisor search; degree-2 leftovers by the
    quadratic formula when the discriminant is a square in the field.
    """
    cs = list(coeffs)
    roots = []

    def as_fraction(x):
        if isinstance(x, QuadraticNumber):
            if not x.is_rational():
                return None
            return x.rational_part
        return Fraction(x)

    def eval_at(poly, x):
        acc = field.zero
        for c in reversed(poly):
            acc = acc * x + c
        return acc

    def deflate(poly, root):
        # synthetic division by (x - root); remainder is known to vanish
        out = [field.zero] * (len(poly) - 1)
        out[-1] = poly[-1]
        for i in range(len(poly) - 2, 0, -1):
            out[i - 1] = poly[i] + out[i] * root
        return out

    changed = True
    while changed and len(cs) > 1:
        changed = False
        fracs = [as_fraction(c) for c in cs]
        if all(v is not None for v in fracs):
            den = math.lcm(*[v.denominator for v in fracs]) if fracs else 1
            ints = [int(v * den) for v in fracs]
            lead, const = ints[-1], ints[0]
            if const == 0:
                roots.append(field.zero)
                cs = cs[1:]
                changed = True
                continue
            for p in _divisors(abs(const)):
                for q in _divisors(abs(lead)):
                    for sgn in (1, -1):
                        cand = field.from_fraction(Fraction(sgn * p, q))
                        if field.is_zero(eval_at(cs, cand)):
                            roots.append(cand)
                            cs = deflate(cs, cand)
                            changed = True
                            break
                    if changed:
                        break
                if changed:
                    break
        if not changed and len(cs) == 3:
            a2, a1, a0 = cs[2], cs[1], cs[0]
            disc = a1 * a1 - field.from_fraction(4) * a2 * a0
            s = field.sqrt(disc) if not isinstance(disc, Fraction) else field.sqrt(disc)
            if s is not None:
                inv = field.one / (field.from_fraction(2) * a2)
                roots.append((-a1 + s) * inv)
                roots.append((-a1 - s) * inv)
                cs = [field.one]
                changed = True
    return roots, cs


def _divisors(n: int):
    out = []
    k = 1
    while k * k <= n:
        if n % k == 0:
            out.append(k)
            if k != n // k:
                out.append(n // k)
        k += 1
    return sorted(out)
