"""Concrete *-algebras of matrices with a fixed trace, and their GNS spaces.

An algebra is stored as a linear basis of matrices acting on a representation
space.  The representation space may carry a nontrivial positive Gram matrix;
the star operation is always the adjoint with respect to that inner product.
Traces are linear functionals x -> Trace(W x) for a fixed weight matrix W.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from subfactor_lab import linalg
from subfactor_lab.linalg import SpanBasis, dagger, eye, is_zero_matrix, mats_equal, mul, trace, zeros


class AlgebraError(ValueError):
    pass


class FieldSplitError(AlgebraError):
    """The block structure does not split over the chosen scalar field."""


def vec(m: np.ndarray) -> np.ndarray:
    return m.reshape(-1)


class MultiMatrixAlgebra:
    """Unital *-closed span of matrices with a fixed faithful trace.

    Parameters
    ----------
    field : scalar field (exact or float)
    basis_or_generators : list of square matrices over the field
    trace_matrix : W with tau(x) = Trace(W x); defaults to normalized trace
    gram : inner product matrix of the representation space (None = standard)
    unitary_group : optional list of unitaries of the algebra whose
        conjugation average implements the trace-preserving expectation onto
        relative commutants
    complete : if True, close the given matrices under products, adjoints,
        and the identity before storing the basis
    """

    def __init__(self, field, basis_or_generators, trace_matrix=None, gram=None,
                 unitary_group=None, complete=False, name="", known_center=None):
        self.field = field
        self._known_center = known_center
        mats = [np.array(m, dtype=object if field.exact else float) for m in basis_or_generators]
        if not mats:
            raise AlgebraError("an algebra needs at least one generator")
        self.rep_dim = mats[0].shape[0]
        for m in mats:
            if m.shape != (self.rep_dim, self.rep_dim):
                raise AlgebraError("generators must be square matrices of equal size")
        self.gram = gram
        self._gram_inv = None if gram is None else linalg.inverse(field, gram)
        if complete:
            mats = self._complete(mats)
        self._span = SpanBasis(field, self.rep_dim * self.rep_dim)
        self.basis: list[np.ndarray] = []
        for m in mats:
            if self._span.add(vec(m), attach=m):
                self.basis.append(m)
        if trace_matrix is None:
            trace_matrix = eye(field, self.rep_dim) * field.from_fraction(
                Fraction(1, self.rep_dim)
            )
        self.trace_matrix = trace_matrix
        self.unitary_group = unitary_group
        self.name = name
        self._blocks = None
        self._commutant = None
        self._minimal_cache: dict = {}

    # -- elementary structure ---------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.basis)

    def one(self) -> np.ndarray:
        return eye(self.field, self.rep_dim)

    def star(self, x: np.ndarray) -> np.ndarray:
        xd = dagger(self.field, x)
        if self.gram is None:
            return xd
        return mul(self._gram_inv, mul(xd, self.gram))

    def trace(self, x: np.ndarray):
        t = self.field.zero
        w = self.trace_matrix
        for i in range(self.rep_dim):
            for j in range(self.rep_dim):
                wij = w[i, j]
                if not self.field.is_zero(wij):
                    t = t + wij * x[j, i]
        return t

    def inner(self, x: np.ndarray, y: np.ndarray):
        """<x, y> = tau(y* x)."""
        return self.trace(mul(self.star(y), x))

    def norm2_float(self, x: np.ndarray) -> float:
        return float(abs(self.field.to_float(self.inner(x, x)))) ** 0.5

    def contains(self, x: np.ndarray) -> bool:
        return self._span.contains(vec(x))

    def coords(self, x: np.ndarray):
        return self._span.coordinates(vec(x))

    def element(self, coeffs) -> np.ndarray:
        out = zeros(self.field, self.rep_dim)
        for c, b in zip(coeffs, self.basis):
            out = out + b * c
        return out

    def random_element(self, rng, span=4) -> np.ndarray:
        f = self.field
        out = zeros(f, self.rep_dim)
        for b in self.basis:
            c = Fraction(rng.randint(-span, span))
            if c:
                out = out + b * f.from_fraction(c)
        return out

    def _complete(self, mats):
        f = self.field
        work = [eye(f, self.rep_dim)]
        work += mats
        work += [self.star(m) for m in mats]
        span = SpanBasis(f, self.rep_dim**2)
        kept = []
        for m in work:
            if span.add(vec(m)):
                kept.append(m)
        changed = True
        while changed:
            changed = False
            for a in list(kept):
                for b in list(kept):
                    p = mul(a, b)
                    if span.add(vec(p)):
                        kept.append(p)
                        changed = True
        return kept

    def validate(self) -> None:
        f = self.field
        if not self.contains(self.one()):
            raise AlgebraError("algebra is not unital")
        for b in self.basis:
            if not self.contains(self.star(b)):
                raise AlgebraError("algebra is not *-closed")
            for c in self.basis:
                if not self.contains(mul(b, c)):
                    raise AlgebraError("span is not closed under products")
        one_t = self.trace(self.one())
        if not f.eq(one_t, f.one):
            raise AlgebraError(f"trace is not normalized: tau(1) = {one_t}")
        for b in self.basis:
            for c in self.basis:
                if not f.eq(self.trace(mul(b, c)), self.trace(mul(c, b))):
                    raise AlgebraError("trace is not tracial on the basis")

    # -- commutant and center ------------------------------------------------------

    def commutant_basis(self) -> list[np.ndarray]:
        """Basis of the commutant inside all operators on the representation space."""
        if self._commutant is not None:
            return self._commutant
        f = self.field
        d = self.rep_dim
        if self.unitary_group is not None:
            cands = []
            for i in range(d):
                for j in range(d):
                    m = zeros(f, d)
                    m[i, j] = f.one
                    cands.append(average_conjugation(self, m))
            span = SpanBasis(f, d * d)
            out = []
            for m in cands:
                if span.add(vec(m)):
                    out.append(m)
            self._commutant = out
            return out
        # [T, g] = 0 for each basis element, as linear constraints on T entries
        cols = d * d
        mat_rows = []
        for g in self.basis:
            block = zeros(f, cols, cols)
            for i in range(d):
                for j in range(d):
                    idx = i * d + j
                    for k in range(d):
                        block[idx, i * d + k] = block[idx, i * d + k] + g[k, j]
                        block[idx, k * d + j] = block[idx, k * d + j] - g[i, k]
            mat_rows.append(block)
        big = np.concatenate(mat_rows, axis=0)
        sols = linalg.nullspace(f, big)
        self._commutant = [s.reshape(d, d) for s in sols]
        return self._commutant

    def center_basis(self) -> list[np.ndarray]:
        if self._known_center is not None:
            return self._known_center
        # constraint generation: solve commutation against a few basis elements,
        # then add violated constraints until the candidate space stabilizes
        f = self.field
        n = self.dim
        active = list(self.basis[: min(3, n)])
        while True:
            rows = []
            for g in active:
                block = zeros(f, self.rep_dim**2, n)
                for j, b in enumerate(self.basis):
                    comm = mul(b, g) - mul(g, b)
                    block[:, j] = vec(comm)
                rows.append(block)
            big = np.concatenate(rows, axis=0)
            sols = linalg.nullspace(f, big)
            cands = [self.element(s) for s in sols]
            violated = None
            for g in self.basis:
                if any(not is_zero_matrix(f, mul(z, g) - mul(g, z)) for z in cands):
                    violated = g
                    break
            if violated is None:
                self._known_center = cands
                return cands
            active.append(violated)

    def central_idempotents(self) -> list[np.ndarray]:
        """Minimal central idempotents, or FieldSplitError if the field is too small."""
        if self._blocks is not None:
            return [b["idempotent"] for b in self._blocks]
        f = self.field
        zc = self.center_basis()
        c = len(zc)
        if c == 1:
            return [self.one()]
        for attempt in range(6):
            gen = zeros(f, self.rep_dim)
            for i, z in enumerate(zc):
                coeff = f.from_fraction(Fraction((i + 1) ** (attempt + 1) % 97 + i + 1))
                gen = gen + z * coeff
            powers = SpanBasis(f, self.rep_dim**2)
            pw = eye(f, self.rep_dim)
            plist = [pw]
            while powers.add(vec(pw)):
                pw = mul(pw, gen)
                plist.append(pw)
            coords = powers.coordinates(vec(pw))
            minpoly = [-x for x in coords] + [f.one]
            roots, leftover = linalg.poly_roots_exact(f, minpoly)
            if len(leftover) > 1 or len(roots) != len(minpoly) - 1 or len(set(map(str, roots))) != len(roots):
                continue
            if len(roots) != c:
                continue
            idems = []
            for r in roots:
                p = eye(f, self.rep_dim)
                for s in roots:
                    if s is r:
                        continue
                    p = mul(p, gen - eye(f, self.rep_dim) * s) * (f.one / (r - s))
                idems.append(p)
            ok = all(
                mats_equal(f, mul(p, p), p) and mats_equal(f, self.star(p), p)
                for p in idems
            )
            total = zeros(f, self.rep_dim)
            for p in idems:
                total = total + p
            if ok and mats_equal(f, total, self.one()):
                return idems
        raise FieldSplitError(
            "could not split the center into idempotents over the scalar field"
        )

    def block_info(self) -> list[dict]:
        """Per-block data: central idempotent, matrix size, multiplicity, trace weight."""
        if self._blocks is not None:
            return self._blocks
        f = self.field
        idems = self.central_idempotents()
        blocks = []
        for z in idems:
            cut = SpanBasis(f, self.rep_dim**2)
            bdim = 0
            for b in self.basis:
                if cut.add(vec(mul(z, mul(b, z)))):
                    bdim += 1
            n2 = bdim
            n = round(n2**0.5)
            if n * n != n2:
                raise FieldSplitError(
                    f"block of dimension {n2} is not a full matrix algebra over the field"
                )
            rank = trace(f, z)
            rank_f = f.to_float(rank)
            rank_i = round(rank_f)
            if abs(rank_f - rank_i) > 1e-9 or rank_i % n != 0:
                raise FieldSplitError("central idempotent rank incompatible with block size")
            mult = rank_i // n
            w = self.trace(z) * (f.one / f.from_fraction(n))
            blocks.append({"idempotent": z, "size": n, "multiplicity": mult, "weight": w})
        self._blocks = blocks
        return blocks

    def block_rank_profile(self, p: np.ndarray) -> list[int]:
        """Matrix rank of a projection inside each block."""
        f = self.field
        out = []
        for blk in self.block_info():
            t = f.to_float(trace(f, mul(blk["idempotent"], p)))
            r = t / blk["multiplicity"]
            ri = round(r)
            if abs(r - ri) > 1e-9:
                raise AlgebraError("projection has non-integer block rank")
            out.append(ri)
        return out

    # -- projections -----------------------------------------------------------------

    def is_projection(self, p: np.ndarray) -> bool:
        return mats_equal(self.field, mul(p, p), p) and mats_equal(
            self.field, self.star(p), p
        )

    def subspace_projection(self, vectors) -> np.ndarray:
        """S-orthogonal projection onto the span of coordinate vectors of V."""
        f = self.field
        cols = [np.asarray(v).reshape(-1) for v in vectors]
        span = SpanBasis(f, self.rep_dim)
        keep = [v for v in cols if span.add(v)]
        if not keep:
            return zeros(f, self.rep_dim)
        B = np.stack(keep, axis=1)
        Bd = dagger(f, B)
        S = self.gram if self.gram is not None else eye(f, self.rep_dim)
        G = mul(Bd, mul(S, B))
        Ginv = linalg.inverse(f, G)
        return mul(B, mul(Ginv, mul(Bd, S)))

    def minimal_projection_under(self, r: np.ndarray, commutant=None) -> np.ndarray | None:
        """A minimal projection of the algebra dominated by the projection r."""
        f = self.field
        if is_zero_matrix(f, r):
            return None
        if commutant is None:
            commutant = self.commutant_basis()
        d = self.rep_dim
        # cyclic vectors must sit inside a single central block, otherwise the
        # projection onto the commutant orbit straddles blocks
        idems = self.central_idempotents()
        candidates = []
        for z in idems:
            zr = mul(z, r)
            for i in range(d):
                e = zeros(f, d, 1)
                e[i, 0] = f.one
                candidates.append(mul(zr, e))
            for i in range(d - 1):
                e = zeros(f, d, 1)
                e[i, 0] = f.one
                e[i + 1, 0] = f.one
                candidates.append(mul(zr, e))
        best = None
        for xi in candidates:
            if all(f.is_zero(v) for v in xi.reshape(-1)):
                continue
            ws = [mul(c, xi).reshape(-1) for c in commutant]
            p = self.subspace_projection(ws)
            if not mats_equal(f, mul(p, r), p):
                continue
            corner = SpanBasis(f, d * d)
            cdim = 0
            for b in self.basis:
                if corner.add(vec(mul(p, mul(b, p)))):
                    cdim += 1
            if cdim == 1:
                return p
            if best is None or cdim < best[0]:
                best = (cdim, p)
        return None

    def minimal_decomposition(self, p: np.ndarray, commutant=None) -> list[np.ndarray]:
        """Orthogonal minimal projections summing to p."""
        f = self.field
        pieces = []
        rem = p
        guard = 4 * self.rep_dim
        while not is_zero_matrix(f, rem) and guard > 0:
            guard -= 1
            q = self.minimal_projection_under(rem, commutant=commutant)
            if q is None:
                raise AlgebraError("could not refine projection into minimal pieces")
            pieces.append(q)
            rem = rem - q
        if not is_zero_matrix(f, rem):
            raise AlgebraError("projection refinement did not terminate")
        return pieces

    def _block_index(self, p: np.ndarray) -> int:
        f = self.field
        for i, blk in enumerate(self.block_info()):
            if not is_zero_matrix(f, mul(blk["idempotent"], p)):
                return i
        raise AlgebraError("zero projection has no block")

    def link_minimal(self, p: np.ndarray, q: np.ndarray) -> np.ndarray | None:
        """Partial isometry v with v* v = p, v v* = q, for equivalent minimal p, q."""
        f = self.field
        if mats_equal(f, p, q):
            return p
        for b in self.basis:
            x = mul(q, mul(b, p))
            if is_zero_matrix(f, x):
                continue
            g = mul(self.star(x), x)
            # corner around a minimal projection is one-dimensional: g = c p
            c = None
            for i in range(self.rep_dim):
                for j in range(self.rep_dim):
                    if not f.is_zero(p[i, j]):
                        c = g[i, j] / p[i, j]
                        break
                if c is not None:
                    break
            if c is None or f.is_zero(c):
                continue
            if not mats_equal(f, g, p * c):
                continue
            s = f.sqrt(c)
            if s is None:
                continue
            v = x * (f.one / s)
            if mats_equal(f, mul(self.star(v), v), p) and mats_equal(f, mul(v, self.star(v)), q):
                return v
        return None

    def link_projections(self, p: np.ndarray, q: np.ndarray) -> np.ndarray | None:
        """Partial isometry v with v* v = p, v v* = q for equivalent projections."""
        f = self.field
        if mats_equal(f, p, q):
            return p
        ps = self.minimal_decomposition(p)
        qs = self.minimal_decomposition(q)
        if len(ps) != len(qs):
            return None
        used = [False] * len(qs)
        v = zeros(f, self.rep_dim)
        for fp in ps:
            bi = self._block_index(fp)
            linked = False
            for k, fq in enumerate(qs):
                if used[k] or self._block_index(fq) != bi:
                    continue
                piece = self.link_minimal(fp, fq)
                if piece is not None:
                    v = v + piece
                    used[k] = True
                    linked = True
                    break
            if not linked:
                return None
        return v

    def projection_of_trace(self, r: np.ndarray, target, pieces=None) -> np.ndarray | None:
        """Projection of exact trace `target` dominated by r, or None.

        Greedy over minimal pieces of r, scanning blocks by descending matrix
        size with ties broken by block index.
        """
        f = self.field
        if pieces is None:
            pieces = self.minimal_decomposition(r)
        blocks = self.block_info()
        order = sorted(
            range(len(pieces)),
            key=lambda i: (-blocks[self._block_index(pieces[i])]["size"],
                           self._block_index(pieces[i])),
        )
        def search(idx, acc, remaining):
            if f.is_zero(remaining):
                return acc
            if f.exact and isinstance(remaining, Fraction) and remaining < 0:
                return None
            if idx >= len(order):
                return None
            piece = pieces[order[idx]]
            w = self.trace(piece)
            with_piece = None
            take = remaining - w
            ok = (take >= 0) if f.exact and not isinstance(take, float) else f.to_float(take) > -1e-9
            if ok:
                with_piece = search(idx + 1, acc + [piece], take)
            if with_piece is not None:
                return with_piece
            return search(idx + 1, acc, remaining)

        sel = search(0, [], target)
        if sel is None:
            return None
        out = zeros(f, self.rep_dim)
        for piece in sel:
            out = out + piece
        return out


def average_conjugation(algebra: MultiMatrixAlgebra, x: np.ndarray) -> np.ndarray:
    """Average u x u* over the algebra's finite spanning group of unitaries."""
    group = algebra.unitary_group
    if group is None:
        raise AlgebraError("no unitary spanning group is attached to this algebra")
    f = algebra.field
    acc = zeros(f, algebra.rep_dim)
    for u in group:
        acc = acc + mul(u, mul(x, algebra.star(u)))
    return acc * f.from_fraction(Fraction(1, len(group)))


class GNSSpace:
    """L^2 of an algebra with respect to its trace.

    Coordinates are coefficients over the algebra's basis; the Gram matrix is
    S[i, j] = tau(b_i* b_j).  Left and right multiplication act as matrices in
    these coordinates, and J is the antilinear map sending hat(x) to hat(x*).
    """

    def __init__(self, algebra: MultiMatrixAlgebra):
        self.algebra = algebra
        f = algebra.field
        self.field = f
        n = algebra.dim
        self.dim = n
        S = zeros(f, n)
        wstars = [mul(algebra.trace_matrix, algebra.star(bi)) for bi in algebra.basis]
        for i in range(n):
            for j, bj in enumerate(algebra.basis):
                S[i, j] = linalg.trace_product(f, wstars[i], bj)
        self.gram = S
        self.gram_inv = linalg.inverse(f, S)
        self._left_cache: dict = {}

    def hat(self, x: np.ndarray) -> np.ndarray:
        c = self.algebra.coords(x)
        if c is None:
            raise AlgebraError("element is not in the algebra")
        arr = np.array(c, dtype=object if self.field.exact else float)
        return arr

    def element(self, v) -> np.ndarray:
        return self.algebra.element(list(v))

    def left_matrix(self, x: np.ndarray) -> np.ndarray:
        f = self.field
        cols = [self.hat(mul(x, b)) for b in self.algebra.basis]
        return np.stack(cols, axis=1)

    def right_matrix(self, x: np.ndarray) -> np.ndarray:
        cols = [self.hat(mul(b, x)) for b in self.algebra.basis]
        return np.stack(cols, axis=1)

    def inner(self, u, v):
        """<u, v> = tau(element(v)* element(u))."""
        f = self.field
        out = f.zero
        Su = mul(self.gram, np.asarray(u).reshape(-1, 1))
        vv = np.asarray(v).reshape(-1)
        for i in range(self.dim):
            out = out + f.conj(vv[i]) * Su[i, 0]
        return out

    def adjoint_op(self, T: np.ndarray) -> np.ndarray:
        return mul(self.gram_inv, mul(dagger(self.field, T), self.gram))

    def projection_onto_elements(self, elements) -> np.ndarray:
        vectors = [self.hat(x) for x in elements]
        return self.projection_onto(vectors)

    def projection_onto(self, vectors) -> np.ndarray:
        F, C = self.projection_factors(vectors)
        if F is None:
            return zeros(self.field, self.dim)
        return mul(F, C)

    def projection_factors(self, vectors):
        """Rank factorization (F, C) of the S-orthogonal projection onto a span."""
        f = self.field
        span = SpanBasis(f, self.dim)
        keep = [np.asarray(v).reshape(-1) for v in vectors if span.add(np.asarray(v).reshape(-1))]
        if not keep:
            return None, None
        B = np.stack(keep, axis=1)
        Bd = dagger(f, B)
        BdS = mul(Bd, self.gram)
        G = mul(BdS, B)
        Ginv = linalg.inverse(f, G)
        return mul(B, Ginv), BdS

    def J(self, v) -> np.ndarray:
        x = self.element(v)
        return self.hat(self.algebra.star(x))

    def operator_trace(self, T: np.ndarray):
        return trace(self.field, T)
