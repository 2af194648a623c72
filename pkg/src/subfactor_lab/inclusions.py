"""Finite-dimensional inclusion engine.

Builds concrete inclusions N inside M of multi-matrix algebras with a Markov
trace, the associated basic construction on L^2(M), the second tower level,
relative commutants, Pimsner-Popa bases, projections onto product subspaces,
the Fourier transform between the first two relative commutants, and unitaries
extending partial isometries that compress the subalgebra into itself.

Exact scalar fields are used throughout; structural constructions (bases,
block splittings, partial isometries) are exact-mode only, while identity
checking also runs over floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from subfactor_lab import linalg
from subfactor_lab.algebras import (
    AlgebraError,
    GNSSpace,
    MultiMatrixAlgebra,
    vec,
)
from subfactor_lab.linalg import (
    SpanBasis,
    eye,
    is_zero_matrix,
    mats_equal,
    mul,
    trace,
    zeros,
)


class InclusionError(ValueError):
    def __init__(self, message, obstruction=None):
        super().__init__(message)
        self.obstruction = obstruction


@dataclass
class TowerElement:
    """Operator on a tower level, tagged with the level and a trace cache."""

    matrix: np.ndarray
    level: str              # "M1" or "M2"
    tower: object           # BasicConstruction or TowerStep
    _tr: object = None

    def Tr(self):
        if self._tr is None:
            fn = self.tower.Tr if self.level == "M1" else self.tower.Tr2
            object.__setattr__(self, "_tr", fn(self.matrix))
        return self._tr


class Inclusion:
    """A unital *-subalgebra N of M, sharing M's representation and trace."""

    def __init__(self, M: MultiMatrixAlgebra, N: MultiMatrixAlgebra, name="",
                 pp_hint=None):
        if M.field is not N.field:
            raise InclusionError("ambient and subalgebra must share a scalar field")
        if M.rep_dim != N.rep_dim:
            raise InclusionError("ambient and subalgebra must act on the same space")
        self.M = M
        self.N = N
        self.field = M.field
        self.name = name
        self.pp_hint = pp_hint
        self._bc = None
        self._lambda = None
        self._index = None
        # conditional expectation data
        f = self.field
        k = N.dim
        self._nstars = [mul(M.trace_matrix, M.star(b)) for b in N.basis]
        G = zeros(f, k)
        for i in range(k):
            for j, bj in enumerate(N.basis):
                G[i, j] = linalg.trace_product(f, self._nstars[i], bj)
        self._ngram_inv = linalg.inverse(f, G)

    def validate(self):
        f = self.field
        if not self.M.contains(self.M.one()):
            raise InclusionError("ambient algebra is not unital")
        if not self.N.contains(self.M.one()):
            raise InclusionError("subalgebra does not contain the ambient identity")
        for b in self.N.basis:
            if not self.M.contains(b):
                raise InclusionError("subalgebra is not contained in the ambient algebra")
            if not self.N.contains(self.M.star(b)):
                raise InclusionError("subalgebra is not *-closed")

    # -- inclusion matrix and index -------------------------------------------------

    def inclusion_matrix(self) -> list[list[int]]:
        """Integer matrix of restriction multiplicities, N blocks by M blocks."""
        if self._lambda is not None:
            return self._lambda
        f = self.field
        nb = self.N.block_info()
        mb = self.M.block_info()
        lam = []
        for cb in nb:
            row = []
            for bb in mb:
                t = f.to_float(trace(f, mul(cb["idempotent"], bb["idempotent"])))
                val = t / (cb["size"] * bb["multiplicity"])
                vi = round(val)
                if abs(val - vi) > 1e-9:
                    raise InclusionError("non-integer restriction multiplicity")
                row.append(vi)
            lam.append(row)
        self._lambda = lam
        return lam

    def connected(self) -> bool:
        lam = self.inclusion_matrix()
        rows, cols = len(lam), len(lam[0])
        seen_r, seen_c = {0}, set()
        frontier = [("r", 0)]
        while frontier:
            kind, i = frontier.pop()
            if kind == "r":
                for j in range(cols):
                    if lam[i][j] and j not in seen_c:
                        seen_c.add(j)
                        frontier.append(("c", j))
            else:
                for r in range(rows):
                    if lam[r][i] and r not in seen_r:
                        seen_r.add(r)
                        frontier.append(("r", r))
        return len(seen_r) == rows and len(seen_c) == cols

    def index(self):
        """The squared norm of the inclusion matrix, as an exact field scalar."""
        if self._index is not None:
            return self._index
        f = self.field
        lam = self.inclusion_matrix()
        rows, cols = len(lam), len(lam[0])
        ltl = [
            [
                f.from_fraction(sum(lam[r][i] * lam[r][j] for r in range(rows)))
                for j in range(cols)
            ]
            for i in range(cols)
        ]
        mat = np.array(ltl, dtype=object)
        cp = linalg.char_poly(f, mat)
        roots, leftover = linalg.poly_roots_exact(f, cp)
        if len(leftover) > 1:
            raise InclusionError(
                "Perron-Frobenius eigenvalue does not lie in the scalar field"
            )
        self._index = max(roots, key=f.to_float)
        return self._index

    def markov_data(self):
        """(index, per-block trace weights of M) with the Markov condition verified."""
        f = self.field
        if not self.connected():
            raise InclusionError("disconnected inclusion has no canonical Markov trace")
        idx = self.index()
        lam = self.inclusion_matrix()
        mb = self.M.block_info()
        nb = self.N.block_info()
        s = [b["weight"] for b in mb]
        # Markov condition: Lambda^T Lambda s = index * s
        for i in range(len(s)):
            acc = f.zero
            for j in range(len(s)):
                coef = sum(lam[r][i] * lam[r][j] for r in range(len(lam)))
                acc = acc + f.from_fraction(coef) * s[j]
            if not f.eq(acc, idx * s[i]):
                raise InclusionError("trace weights do not satisfy the Markov condition")
        # restriction consistency: N weights are Lambda s
        for c, cb in enumerate(nb):
            acc = f.zero
            for j in range(len(s)):
                acc = acc + f.from_fraction(lam[c][j]) * s[j]
            if not f.eq(acc, cb["weight"]):
                raise InclusionError("subalgebra trace is not the restriction of the ambient trace")
        return idx, s

    # -- conditional expectation ---------------------------------------------------

    def cond_expect(self, x: np.ndarray) -> np.ndarray:
        """Trace-preserving conditional expectation of M onto N."""
        f = self.field
        if not self.M.contains(x):
            raise InclusionError("element is not in the ambient algebra")
        rhs = np.array(
            [linalg.trace_product(f, ws, x) for ws in self._nstars],
            dtype=object if f.exact else float,
        )
        coeffs = mul(self._ngram_inv, rhs.reshape(-1, 1)).reshape(-1)
        return self.N.element(list(coeffs))

    def basic_construction(self) -> "BasicConstruction":
        if self._bc is None:
            self._bc = BasicConstruction(self)
        return self._bc


class BasicConstruction:
    """The algebra generated by M and the Jones projection on L^2(M).

    The commutant of the right N-action realizes it concretely; its canonical
    trace Tr is represented as T -> Trace(T R) for a central weight operator R
    solved from Tr(x e_N y) = tau(x y).
    """

    def __init__(self, inc: Inclusion):
        self.inc = inc
        f = inc.field
        self.field = f
        self.gns = GNSSpace(inc.M)
        self.dim = self.gns.dim
        nhats = [self.gns.hat(b) for b in inc.N.basis]
        self._eN_F, self._eN_C = self.gns.projection_factors(nhats)
        self.e_N = mul(self._eN_F, self._eN_C)
        self.lams = [self.gns.left_matrix(b) for b in inc.M.basis]
        self._m1_basis = None
        self._m1_algebra = None
        self._n_commutant = None
        self._tower = None
        self._solve_trace()

    def lam(self, x: np.ndarray) -> np.ndarray:
        return self.gns.left_matrix(x)

    def rho(self, x: np.ndarray) -> np.ndarray:
        return self.gns.right_matrix(x)

    def star_op(self, T: np.ndarray) -> np.ndarray:
        return self.gns.adjoint_op(T)

    def _solve_trace(self):
        inc, f = self.inc, self.field
        zs = inc.N.central_idempotents()
        Ks = [self.rho(z) for z in zs]
        basis = inc.M.basis
        lams = self.lams
        # Tr(x e_N y rho(z)) with e_N = F C factored: Trace(C lam(y) K lam(x) F)
        AF = [mul(L, self._eN_F) for L in lams]
        CLK = [[mul(mul(self._eN_C, L), K) for K in Ks] for L in lams]
        W = inc.M.trace_matrix
        WB = [mul(W, b) for b in basis]

        def lhs_entry(i, j, c):
            return linalg.trace_product(f, CLK[j][c], AF[i])

        rows, rhs = [], []
        pairs = [(i, j) for i in range(len(basis)) for j in range(len(basis))]
        span = SpanBasis(f, len(Ks))
        for (i, j) in pairs:
            lhs_row = [lhs_entry(i, j, c) for c in range(len(Ks))]
            rows.append(lhs_row)
            rhs.append(linalg.trace_product(f, WB[i], basis[j]))
            span.add(np.array(lhs_row, dtype=object if f.exact else float))
            if span.dim == len(Ks) and len(rows) >= 2 * len(Ks) + 2:
                break
        A = np.array(rows, dtype=object if f.exact else float)
        b = np.array(rhs, dtype=object if f.exact else float)
        sol = linalg.solve(f, A, b)
        if sol is None:
            raise InclusionError(
                "no trace on the basic construction satisfies Tr(x e y) = tau(xy); "
                "the inclusion trace is not Markov"
            )
        R = zeros(f, self.dim)
        for c, K in zip(sol, Ks):
            R = R + K * c
        self.trace_operator = R
        for (i, j) in pairs:
            got = f.zero
            for c, s in enumerate(sol):
                got = got + s * lhs_entry(i, j, c)
            want = linalg.trace_product(f, WB[i], basis[j])
            if not f.eq(got, want):
                raise InclusionError(
                    "trace extension is inconsistent; the inclusion trace is not Markov"
                )
        self.tr_one = trace(f, R)

    def Tr(self, T: np.ndarray):
        return trace(self.field, mul(T, self.trace_operator))

    # -- the algebra M1 ----------------------------------------------------------------

    def m1_basis(self) -> list[np.ndarray]:
        """Linear basis of <M, e_N> as operators, built from x e_N y and M itself."""
        if self._m1_basis is not None:
            return self._m1_basis
        f = self.field
        lams = self.lams
        span = SpanBasis(f, self.dim**2)
        out = []
        for a in lams:
            ae = mul(a, self.e_N)
            for b in lams:
                m = mul(ae, b)
                if span.add(vec(m)):
                    out.append(m)
        for a in lams:
            if span.add(vec(a)):
                out.append(a)
        self._m1_basis = out
        return out

    def m1_algebra(self) -> MultiMatrixAlgebra:
        if self._m1_algebra is not None:
            return self._m1_algebra
        f = self.field
        idx = self.tr_one
        w = self.trace_operator * (f.one / idx)
        alg = MultiMatrixAlgebra(
            f,
            self.m1_basis(),
            trace_matrix=w,
            gram=self.gns.gram,
            name=f"<{self.inc.name or 'M'}, e>",
        )
        self._m1_algebra = alg
        return alg

    def n_commutant(self) -> list[np.ndarray]:
        """Basis of the relative commutant of N in <M, e_N>."""
        if self._n_commutant is not None:
            return self._n_commutant
        self._n_commutant = self.commutant_in_m1(self.inc.N)
        return self._n_commutant

    def commutant_in_m1(self, A: MultiMatrixAlgebra) -> list[np.ndarray]:
        """Basis of A' intersect <M, e_N> for a subalgebra A of M."""
        f = self.field
        basis = self.m1_basis()
        if A.unitary_group is not None:
            us = [(self.lam(u), self.lam(self.inc.M.star(u))) for u in A.unitary_group]
            span = SpanBasis(f, self.dim**2)
            out = []
            invn = f.from_fraction(Fraction(1, len(us)))
            for T in basis:
                acc = zeros(f, self.dim)
                for u, ustar in us:
                    acc = acc + mul(u, mul(T, ustar))
                acc = acc * invn
                if span.add(vec(acc)):
                    out.append(acc)
            return out
        lams = [self.lam(g) for g in A.basis]
        n = len(basis)
        blocks = []
        for g in lams:
            block = zeros(f, self.dim**2, n)
            for j, T in enumerate(basis):
                block[:, j] = vec(mul(T, g) - mul(g, T))
            blocks.append(block)
        big = np.concatenate(blocks, axis=0)
        sols = linalg.nullspace(f, big)
        out = []
        for s in sols:
            acc = zeros(f, self.dim)
            for c, T in zip(s, basis):
                acc = acc + T * c
            out.append(acc)
        return out

    def expectation_onto(self, ops: list[np.ndarray], T: np.ndarray) -> np.ndarray:
        """Tr-orthogonal projection of T onto the span of the given operators."""
        f = self.field
        span = SpanBasis(f, self.dim**2)
        kept = [o for o in ops if span.add(vec(o))]
        k = len(kept)
        G = zeros(f, k)
        stars = [self.star_op(o) for o in kept]
        for i in range(k):
            for j in range(k):
                G[i, j] = self.Tr(mul(stars[i], kept[j]))
        rhs = np.array(
            [self.Tr(mul(stars[i], T)) for i in range(k)],
            dtype=object if f.exact else float,
        )
        coeffs = mul(linalg.inverse(f, G), rhs.reshape(-1, 1)).reshape(-1)
        out = zeros(f, self.dim)
        for c, o in zip(coeffs, kept):
            out = out + o * c
        return out

    def tower(self) -> "TowerStep":
        if self._tower is None:
            self._tower = TowerStep(self)
        return self._tower


class TowerStep:
    """Second basic construction M subset M1 subset M2, realized on L^2(M1)."""

    def __init__(self, bc: BasicConstruction):
        self.bc = bc
        f = bc.field
        self.field = f
        self.m1 = bc.m1_algebra()
        self.gns2 = GNSSpace(self.m1)
        self.dim = self.gns2.dim
        self.m_hat = [bc.lam(b) for b in bc.inc.M.basis]
        self.e_M = self.gns2.projection_onto_elements(self.m_hat)
        self.e_1 = self.lam2(bc.e_N)
        self._solve_trace2()

    def lam2(self, x: np.ndarray) -> np.ndarray:
        return self.gns2.left_matrix(x)

    def rho2(self, x: np.ndarray) -> np.ndarray:
        return self.gns2.right_matrix(x)

    # left/right composition by operators outside M1, as long as the products
    # stay inside M1 (e.g. right multiplications by elements of M)
    lam2_general = lam2
    rho2_general = rho2

    def star_op2(self, T: np.ndarray) -> np.ndarray:
        return self.gns2.adjoint_op(T)

    def _solve_trace2(self):
        f = self.field
        bc = self.bc
        zs = self.m1.central_idempotents()
        Ks = [self.rho2(z) for z in zs]
        basis = self.m1.basis
        rows, rhs = [], []
        span = SpanBasis(f, len(Ks))
        count = 0
        for i in range(len(basis)):
            for j in range(len(basis)):
                li = self.lam2(basis[i])
                lj = self.lam2(basis[j])
                row = [trace(f, mul(mul(li, mul(self.e_M, lj)), K)) for K in Ks]
                rows.append(row)
                # Tr on M1 of the product, scaled back from the normalized trace
                rhs.append(self.m1.trace(mul(basis[i], basis[j])) * bc.tr_one)
                count += 1
                span.add(np.array(row, dtype=object if f.exact else float))
                if span.dim == len(Ks) and count >= 2 * len(Ks) + 4:
                    break
            else:
                continue
            break
        A = np.array(rows, dtype=object if f.exact else float)
        b = np.array(rhs, dtype=object if f.exact else float)
        sol = linalg.solve(f, A, b)
        if sol is None:
            raise InclusionError("no Markov trace on the second tower level")
        R = zeros(f, self.dim)
        for c, K in zip(sol, Ks):
            R = R + K * c
        self.trace_operator = R
        self.tr_one = trace(f, R)

    def Tr2(self, T: np.ndarray):
        return trace(self.field, mul(T, self.trace_operator))


class FourierCalculus:
    """The rotation between the first two relative commutants.

    The transform sends x in N' cap M1 to the operator on L^2(M1) acting by
    right-multiplication sandwiches weighted by the matrix of x over a
    Pimsner-Popa basis:

        F(x) : y -> sum_{j,k} Tr(x lam_k e_N lam_j*) rho(lam_j) y rho(lam_k)*

    F(e_N) is the identity, F is a linear bijection onto M' cap M2, and
    F(x)F(y) = F(x o y) defines the coproduct up to the cup-cap calibration
    x o y = F^{-1}(F(x)F(y))/delta.

    The textbook description delta^3 E_{M' cap M2}(x e_1 e_2) collapses at
    finite scale (its kernel is {x : x e_N = 0}, nonzero whenever the first
    Jones projection lacks full central support in the commutant), so the
    rotation is realized through the right channel instead; on group models
    both act identically on the elements where the former is faithful.
    """

    def __init__(self, ts: TowerStep, pp: "PimsnerPopaBasis | None" = None):
        self.ts = ts
        bc = ts.bc
        f = ts.field
        self.field = f
        if pp is None:
            pp = pimsner_popa_basis(bc)
        self.pp = pp
        M = bc.inc.M
        k = len(pp.elements)
        self._D = []
        rho_l = [bc.rho(l) for l in pp.elements]
        rho_ls = [bc.rho(M.star(l)) for l in pp.elements]
        lam_l = [bc.lam(l) for l in pp.elements]
        lam_ls = [bc.lam(M.star(l)) for l in pp.elements]
        for j in range(k):
            row = []
            for kk in range(k):
                row.append(mul(lam_l[kk], mul(bc.e_N, lam_ls[j])))
            self._D.append(row)
        # V2 matrices of y -> rho(lam_j) y rho(lam_k)*
        left = [ts.lam2_general(r) for r in rho_l]
        right = [ts.rho2_general(rs) for rs in rho_ls]
        self._P = [[mul(left[j], right[kk]) for kk in range(k)] for j in range(k)]
        self.nc_basis = bc.n_commutant()
        self._span = SpanBasis(f, ts.dim**2)
        self._kept = []
        for b in self.nc_basis:
            img = self.transform(b)
            if self._span.add(vec(img), attach=b):
                self._kept.append(b)
        if self._span.dim != len(self.nc_basis):
            raise InclusionError("the rotation is not injective on the commutant")

    def coefficients(self, x: np.ndarray) -> list[list]:
        """Matrix of x over the basis: c[j][k] = Tr(x lam_k e_N lam_j*)."""
        f = self.field
        bc = self.ts.bc
        k = len(self.pp.elements)
        return [
            [trace(f, mul(mul(x, self._D[j][kk]), bc.trace_operator)) for kk in range(k)]
            for j in range(k)
        ]

    def transform(self, x: np.ndarray) -> np.ndarray:
        """F(x) as an operator on L^2(M1)."""
        f = self.field
        k = len(self.pp.elements)
        out = zeros(f, self.ts.dim)
        c = self.coefficients(x)
        for j in range(k):
            for kk in range(k):
                if not f.is_zero(c[j][kk]):
                    out = out + self._P[j][kk] * c[j][kk]
        return out

    def inverse(self, T: np.ndarray) -> np.ndarray:
        coords = self._span.coordinates(vec(T))
        if coords is None:
            raise InclusionError("operator is outside the image of the rotation")
        out = zeros(self.field, self.ts.bc.dim)
        for c, b in zip(coords, self._kept):
            out = out + b * c
        return out

    def comult_raw(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """F^{-1}(F(y) F(x)); the calibrated coproduct divides this by delta.

        The transform anti-composes right multiplications, so the operator
        product is reversed to make products of intermediate projections land
        on the span of products in the stated order.
        """
        return self.inverse(mul(self.transform(y), self.transform(x)))

    def dual_projection(self, P: MultiMatrixAlgebra) -> np.ndarray:
        """Biprojection at the second tower level attached to an intermediate P:
        F(e_P)/Tr(e_P), an operator on L^2(M1)."""
        bc = self.ts.bc
        e_P = bc.gns.projection_onto_elements(P.basis)
        tr_ep = bc.Tr(e_P)
        return self.transform(e_P) * (self.field.one / tr_ep)

    def comultiply(self, x: np.ndarray, y: np.ndarray) -> TowerElement:
        """Calibrated coproduct comult_raw(x, y)/delta; needs sqrt(index) in the field."""
        f = self.field
        delta = f.sqrt(self.ts.bc.tr_one)
        if delta is None:
            raise InclusionError(
                "sqrt of the index is not in the scalar field; use comult_raw and "
                "carry the delta scaling externally"
            )
        return TowerElement(self.comult_raw(x, y) * (f.one / delta), "M1", self.ts.bc)


# -- Pimsner-Popa bases ----------------------------------------------------------------


@dataclass
class PimsnerPopaBasis:
    elements: list          # lambda_j in M (rep matrices)
    projections: list       # p_j in M1 (operators on L^2(M))
    isometries: list        # v_j in M1
    inclusion: Inclusion


def pimsner_popa_basis(bc: BasicConstruction) -> PimsnerPopaBasis:
    """Basis following the orthogonal-projection construction.

    p_1 = e_N; the p_j are pairwise orthogonal with unit trace (except possibly
    the last), v_j are partial isometries from under e_N onto p_j, and
    lambda_j is the unique element of M with lambda_j e_N = v_j.
    """
    inc = bc.inc
    f = bc.field
    if not f.exact:
        raise InclusionError("Pimsner-Popa bases are constructed in exact mode only")
    idx_f = f.to_float(bc.tr_one)
    k = math.ceil(idx_f - 1e-12)
    one = eye(f, bc.dim)
    if not f.eq(bc.Tr(bc.e_N), f.one):
        raise InclusionError("Tr(e_N) is not 1; trace normalization broken")

    if inc.pp_hint is not None:
        hinted = _pp_from_hint(bc, k)
        if hinted is not None:
            return hinted

    def candidate_lams():
        for L in bc.lams:
            yield L
        n = len(bc.lams)
        for i in range(n):
            for jj in range(i + 1, n):
                yield bc.lams[i] + bc.lams[jj]
        for i in range(n):
            for jj in range(i + 1, n):
                yield bc.lams[i] - bc.lams[jj]

    def isometry_from(seed_op, allow_subprojection):
        """Partial isometry v = x/sqrt(c) from x = seed lam(m) e_N candidates."""
        for L in candidate_lams():
            x = mul(seed_op, mul(L, bc.e_N))
            if is_zero_matrix(f, x):
                continue
            g = mul(bc.star_op(x), x)
            if mats_equal(f, g, bc.e_N):
                return x
            # g = c e_N for a scalar with a square root in the field
            c = None
            for a in range(bc.dim):
                for b_ in range(bc.dim):
                    if not f.is_zero(bc.e_N[a, b_]):
                        c = g[a, b_] / bc.e_N[a, b_]
                        break
                if c is not None:
                    break
            if c is not None and not f.is_zero(c) and mats_equal(f, g, bc.e_N * c):
                s = f.sqrt(c)
                if s is not None:
                    return x * (f.one / s)
            if allow_subprojection and mats_equal(f, mul(g, g), g):
                return x
        return None

    projections = [bc.e_N]
    isometries = [bc.e_N]
    lam_elems = [inc.M.one()]
    remaining = one - bc.e_N
    for j in range(2, k + 1):
        target = (
            f.one
            if j < k or f.eq(bc.tr_one, f.from_fraction(k))
            else bc.tr_one - f.from_fraction(k - 1)
        )
        v = None
        if f.eq(bc.Tr(remaining), target):
            # the rest is one piece; an isometry onto all of it may need a
            # proper subprojection of e_N as its support
            v = isometry_from(remaining, allow_subprojection=True)
            if v is not None and not mats_equal(
                f, mul(v, bc.star_op(v)), remaining
            ):
                v = None
        if v is None:
            v = isometry_from(remaining, allow_subprojection=False)
        if v is None:
            # partition fallback: cut a subprojection of the right trace first
            m1 = bc.m1_algebra()
            rho_n = [bc.rho(b) for b in inc.N.basis]
            try:
                pieces = m1.minimal_decomposition(remaining, commutant=rho_n)
            except AlgebraError as exc:
                raise InclusionError(
                    f"projection partition infeasible: {exc}", obstruction=str(exc)
                )
            p = m1.projection_of_trace(remaining, target / bc.tr_one, pieces=pieces)
            if p is None:
                raise InclusionError(
                    "projection partition infeasible: no subprojection with the "
                    "required trace",
                    obstruction="rank obstruction",
                )
            v = isometry_from(p, allow_subprojection=False)
        if v is None:
            raise InclusionError(
                "no partial isometry from under e_N onto a partition projection",
                obstruction="isometry search exhausted",
            )
        p = mul(v, bc.star_op(v))
        if not f.eq(bc.Tr(p), target) or not mats_equal(f, mul(p, remaining), p):
            raise InclusionError(
                "isometry range does not fit the partition", obstruction="rank obstruction"
            )
        projections.append(p)
        isometries.append(v)
        lam_elems.append(_element_from_ve(bc, v))
        remaining = remaining - p
    if not is_zero_matrix(f, remaining):
        raise InclusionError("projection partition does not sum to the identity")

    basis = PimsnerPopaBasis(lam_elems, projections, isometries, inc)
    _verify_pp(bc, basis)
    return basis


def _pp_from_hint(bc: BasicConstruction, k: int) -> PimsnerPopaBasis | None:
    """Assemble the basis from elements supplied by the scenario builder."""
    inc, f = bc.inc, bc.field
    hint = list(inc.pp_hint)
    if len(hint) != k:
        return None
    ordered = None
    for i, m in enumerate(hint):
        if mats_equal(f, np.array(m, dtype=object), inc.M.one()):
            ordered = [hint[i]] + hint[:i] + hint[i + 1:]
            break
    if ordered is None:
        return None
    isometries, projections = [], []
    for m in ordered:
        L = bc.lam(np.array(m, dtype=object))
        v = mul(L, bc.e_N)
        g = mul(bc.star_op(v), v)
        if not mats_equal(f, g, bc.e_N):
            return None
        isometries.append(v)
        projections.append(mul(v, bc.star_op(v)))
    basis = PimsnerPopaBasis(
        [np.array(m, dtype=object) for m in ordered], projections, isometries, inc
    )
    try:
        _verify_pp(bc, basis)
    except InclusionError:
        return None
    return basis


def _element_from_ve(bc: BasicConstruction, v: np.ndarray) -> np.ndarray:
    """The unique m in M with lam(m) e_N = v e_N (= v)."""
    f = bc.field
    cols = [vec(mul(bc.lam(b), bc.e_N)) for b in bc.inc.M.basis]
    A = np.stack(cols, axis=1)
    sol = linalg.solve(f, A, vec(mul(v, bc.e_N)))
    if sol is None:
        raise InclusionError("partial isometry is not of the form lam(m) e_N")
    return bc.inc.M.element(list(sol))


def _verify_pp(bc: BasicConstruction, basis: PimsnerPopaBasis):
    f = bc.field
    inc = bc.inc
    total = zeros(f, bc.dim)
    for lam_j in basis.elements:
        L = bc.lam(lam_j)
        total = total + mul(L, mul(bc.e_N, bc.star_op(L)))
    if not mats_equal(f, total, eye(f, bc.dim)):
        raise InclusionError("sum of lambda_j e_N lambda_j* is not the identity")
    for i, li in enumerate(basis.elements):
        for j, lj in enumerate(basis.elements):
            if i == j:
                continue
            e = inc.cond_expect(mul(inc.M.star(li), lj))
            if not is_zero_matrix(f, e):
                raise InclusionError("basis elements are not expectation-orthogonal")


def relative_commutant(A: MultiMatrixAlgebra, B: MultiMatrixAlgebra,
                       trace_fn=None) -> list[np.ndarray]:
    """Orthogonalized basis of the commutant of A inside B via a linear solve.

    Vectors are orthogonal for the trace form of B (trace_fn overrides) and
    normalized whenever the norm has a square root in the scalar field.
    """
    f = B.field
    tr = trace_fn or B.trace
    n = B.dim
    blocks = []
    for g in A.basis:
        block = zeros(f, B.rep_dim**2, n)
        for j, b in enumerate(B.basis):
            block[:, j] = vec(mul(b, g) - mul(g, b))
        blocks.append(block)
    big = np.concatenate(blocks, axis=0)
    sols = linalg.nullspace(f, big)
    raw = [B.element(s) for s in sols]
    out = []
    for x in raw:
        for y in out:
            denom = tr(mul(B.star(y), y))
            coef = tr(mul(B.star(y), x)) / denom
            x = x - y * coef
        if is_zero_matrix(f, x):
            continue
        norm2 = tr(mul(B.star(x), x))
        s = f.sqrt(norm2)
        if s is not None and not f.is_zero(s):
            x = x * (f.one / s)
        out.append(x)
    return out


# -- product subspaces -----------------------------------------------------------------


def subspace_projection(bc: BasicConstruction, P: MultiMatrixAlgebra,
                        Q: MultiMatrixAlgebra) -> np.ndarray:
    """Projection of L^2(M) onto the closed span of products p q."""
    _require_intermediate(bc, P)
    _require_intermediate(bc, Q)
    products = []
    for p in P.basis:
        for q in Q.basis:
            products.append(mul(p, q))
    return bc.gns.projection_onto_elements(products)


def _require_intermediate(bc: BasicConstruction, A: MultiMatrixAlgebra):
    inc = bc.inc
    for b in inc.N.basis:
        if not A.contains(b):
            raise InclusionError("algebra does not contain the lower subalgebra")
    for b in A.basis:
        if not inc.M.contains(b):
            raise InclusionError("algebra is not contained in the ambient algebra")


# -- unitaries extending compressing partial isometries ----------------------------------


def dye_unitary(inc: Inclusion, v: np.ndarray) -> np.ndarray:
    """Unitary u in M with u N u* in N and v = u v*v.

    Requires v to be a partial isometry with v N v* in N and v*v in N.  The
    construction partitions the identity into projections of equal trace
    inside N; when the finite-dimensional trace spectrum cannot be cut this
    way the rank obstruction is reported.
    """
    f = inc.field
    M, N = inc.M, inc.N
    if not f.exact:
        raise InclusionError("the unitary extension is constructed in exact mode only")
    vv = mul(M.star(v), v)
    if is_zero_matrix(f, v):
        raise InclusionError("partial isometry must be nonzero")
    if not mats_equal(f, mul(v, vv), v):
        raise InclusionError("input is not a partial isometry")
    if not N.contains(vv):
        raise InclusionError("support projection is not in the subalgebra")
    for b in N.basis:
        if not N.contains(mul(v, mul(b, M.star(v)))):
            raise InclusionError("v N v* is not contained in N")
    one = M.one()
    if mats_equal(f, vv, one):
        return v
    p1 = vv
    q1 = mul(v, M.star(v))
    t = M.trace(p1)
    t_frac = t if isinstance(t, Fraction) else t.as_rational()
    n = int(math.ceil(1 / t_frac))

    def partition(first: np.ndarray) -> list[np.ndarray]:
        parts = [first]
        rem = one - first
        for i in range(2, n):
            p = N.projection_of_trace(rem, t)
            if p is None:
                raise InclusionError(
                    "cannot cut a projection of the required trace inside N",
                    obstruction="rank obstruction",
                )
            parts.append(p)
            rem = rem - p
        parts.append(rem)
        return parts

    ps = partition(p1)
    qs = partition(q1)

    def sub_with_profile(under: np.ndarray, model: np.ndarray) -> np.ndarray:
        profile = N.block_rank_profile(model)
        pieces = N.minimal_decomposition(under)
        chosen = []
        counts = list(profile)
        for piece in pieces:
            b = N._block_index(piece)
            if counts[b] > 0:
                counts[b] -= 1
                chosen.append(piece)
        if any(c > 0 for c in counts):
            raise InclusionError(
                "no subprojection with matching block ranks",
                obstruction="rank obstruction",
            )
        out = zeros(f, N.rep_dim)
        for c in chosen:
            out = out + c
        return out

    ws = [p1]
    for i in range(1, n):
        fi = sub_with_profile(p1, ps[i])
        w = N.link_projections(ps[i], fi)
        if w is None:
            raise InclusionError(
                "projections of equal trace are not equivalent in N",
                obstruction="rank obstruction",
            )
        ws.append(w)
    vs = [q1]
    for i in range(1, n):
        g = mul(v, mul(mul(ws[i], M.star(ws[i])), M.star(v)))
        if not N.contains(g):
            raise InclusionError("intermediate projection escaped the subalgebra")
        vi = N.link_projections(g, qs[i])
        if vi is None:
            raise InclusionError(
                "projections of equal trace are not equivalent in N",
                obstruction="rank obstruction",
            )
        vs.append(vi)
    u = zeros(f, M.rep_dim)
    for i in range(n):
        u = u + mul(vs[i], mul(v, ws[i]))
    if not mats_equal(f, mul(M.star(u), u), one) or not mats_equal(f, mul(u, M.star(u)), one):
        raise InclusionError("constructed element is not unitary")
    for b in N.basis:
        if not N.contains(mul(u, mul(b, M.star(u)))):
            raise InclusionError("constructed unitary does not compress N into itself")
    if not mats_equal(f, mul(u, p1), v):
        raise InclusionError("constructed unitary does not extend the partial isometry")
    return u
