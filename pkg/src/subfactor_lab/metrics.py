"""Singularity analytics for inclusions.

Estimates the two-sided expectation distance in the infinity-to-two norm,
computes the minimal averaged projection and its weight quadratic, evaluates
the strong-singularity constant, computes angle spectra between intermediate
subalgebras and the two-projection matrix model, checks witnesses for the
perturbation theorem, and scans for normalizing unitaries.

Optimization runs over floats (seeded, deterministic); identity verification
runs exactly whenever the inputs are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import mpmath
import numpy as np

from subfactor_lab import linalg
from subfactor_lab.algebras import MultiMatrixAlgebra, vec
from subfactor_lab.inclusions import BasicConstruction, InclusionError, TowerElement
from subfactor_lab.linalg import eye, is_zero_matrix, mats_equal, mul, trace, zeros
from subfactor_lab.scalars import QuadraticNumber


@dataclass
class SingularityReport:
    unitary: object
    k: float
    norm_lower: float
    norm_estimate: float
    h: TowerElement | None = None
    beta: object = None
    alpha_coeffs: tuple | None = None
    ratio: float | None = None
    flags: dict = dc_field(default_factory=dict)

    def to_dict(self):
        return {
            "k": self.k,
            "norm_lower": self.norm_lower,
            "norm_estimate": self.norm_estimate,
            "ratio": self.ratio,
            "flags": dict(self.flags),
        }


@dataclass
class AngleReport:
    eigenvalues: list        # floats, spectrum of e_P e_Q e_P off the bottom space
    eigenvalues_exact: list  # exact scalars or None per eigenvalue
    angles: list             # arccos(sqrt(eig)) in radians
    lambda_min: float

    def to_dict(self):
        return {
            "eigenvalues": self.eigenvalues,
            "eigenvalues_exact": [str(e) if e is not None else None
                                  for e in self.eigenvalues_exact],
            "angles": self.angles,
            "lambda_min": self.lambda_min,
        }


# -- float bridge --------------------------------------------------------------------


class FloatModel:
    """numpy view of an inclusion: representation matrices, trace form, expectations."""

    def __init__(self, bc: BasicConstruction):
        self.bc = bc
        inc = bc.inc
        f = inc.field
        self.M_basis = [linalg.to_float_matrix(f, b) for b in inc.M.basis]
        self.N_basis = [linalg.to_float_matrix(f, b) for b in inc.N.basis]
        self.W = linalg.to_float_matrix(f, inc.M.trace_matrix)
        self.rep_dim = inc.M.rep_dim
        self.index = f.to_float(bc.tr_one)
        G = np.array(
            [[self._inner(a, b) for a in self.N_basis] for b in self.N_basis]
        )
        self.N_gram_inv = np.linalg.inv(G)
        GM = np.array(
            [[self._inner(a, b) for a in self.M_basis] for b in self.M_basis]
        )
        self.M_gram = GM
        self.M_gram_inv = np.linalg.inv(GM)

    def tau(self, x):
        return float(np.trace(self.W @ x))

    def _inner(self, x, y):
        return float(np.trace(self.W @ y.conj().T @ x))

    def norm2(self, x):
        return math.sqrt(max(self._inner(x, x), 0.0))

    def expect_N(self, x):
        rhs = np.array([self._inner(x, n) for n in self.N_basis])
        coeffs = self.N_gram_inv @ rhs
        out = np.zeros_like(x)
        for c, n in zip(coeffs, self.N_basis):
            out += c * n
        return out

    def project_M(self, x):
        rhs = np.array([self._inner(x, m) for m in self.M_basis])
        coeffs = self.M_gram_inv @ rhs
        out = np.zeros_like(x)
        for c, m in zip(coeffs, self.M_basis):
            out += c * m
        return out

    def random_element(self, rng, algebra="M"):
        basis = self.M_basis if algebra == "M" else self.N_basis
        coeffs = rng.standard_normal(len(basis))
        out = np.zeros((self.rep_dim, self.rep_dim))
        for c, b in zip(coeffs, basis):
            out += c * b
        return out

    def random_unitary(self, rng, algebra="N"):
        """Polar part of a random algebra element; covers all components."""
        basis = self.N_basis if algebra == "N" else self.M_basis
        for _ in range(50):
            x = self.random_element(rng, algebra)
            u_, s, vt = np.linalg.svd(x)
            if np.min(s) < 1e-8:
                continue
            u = u_ @ vt
            # the polar part of an algebra element stays in the algebra
            proj = self.project_M(u) if algebra == "M" else self._project_N(u)
            if np.linalg.norm(proj @ proj.conj().T - np.eye(self.rep_dim)) < 1e-9:
                return proj
        raise RuntimeError("could not sample a unitary in the subalgebra")

    def _project_N(self, x):
        rhs = np.array([self._inner(x, n) for n in self.N_basis])
        coeffs = self.N_gram_inv @ rhs
        out = np.zeros_like(x)
        for c, n in zip(coeffs, self.N_basis):
            out += c * n
        return out


# -- the infinity-two norm ------------------------------------------------------------


def norm_inf2(bc: BasicConstruction, u, restarts=32, iterations=60, seed=0,
              model: FloatModel | None = None):
    """Lower bound and ascent estimate for sup_{||x|| <= 1} ||(E_N - E_uNu*)(x)||_2.

    The witness is certified by a singular-value check; the ascent is a
    conditional-gradient iteration with the polar factor as the linear
    maximizer, projected back onto the algebra each step.
    """
    m = model or FloatModel(bc)
    u = np.asarray(u, dtype=float)
    if np.linalg.norm(u @ u.conj().T - np.eye(m.rep_dim)) > 1e-8:
        raise InclusionError("conjugating element is not unitary")

    ustar = u.conj().T

    def T(x):
        return m.expect_N(x) - u @ m.expect_N(ustar @ x @ u) @ ustar

    def value(x):
        return m.norm2(T(x))

    rng = np.random.default_rng(seed)
    best_val, best_witness = 0.0, None
    estimate = 0.0
    for _ in range(restarts):
        x = m.random_element(rng)
        s = np.linalg.svd(x, compute_uv=False)
        if s[0] > 1e-12:
            x = x / s[0]
        for _ in range(iterations):
            g = T(T(x))
            uu, ss, vv = np.linalg.svd(g)
            step = m.project_M(uu @ vv)
            sv = np.linalg.svd(step, compute_uv=False)
            if sv[0] > 1e-14:
                step = step / max(sv[0], 1.0)
            if m.norm2(step - x) < 1e-13:
                break
            x = step
        v = value(x)
        estimate = max(estimate, v)
        if v > best_val:
            best_val, best_witness = v, x
    if best_witness is None:
        return 0.0, 0.0, np.zeros((m.rep_dim, m.rep_dim))
    sv = np.linalg.svd(best_witness, compute_uv=False)[0]
    if sv > 1.0:
        best_witness = best_witness / sv
    lower = value(best_witness)
    return lower, max(estimate, lower), best_witness


def norm_inf2_oracle(bc: BasicConstruction, u, grid=4096, model: FloatModel | None = None):
    """Brute-force reference for two-by-two real algebras: the supremum of a
    convex function over the unit ball is attained on orthogonal matrices,
    which form two one-parameter families."""
    m = model or FloatModel(bc)
    if m.rep_dim != 2:
        raise InclusionError("the dense oracle is implemented for 2x2 algebras")
    u = np.asarray(u, dtype=float)
    ustar = u.conj().T

    def value(x):
        return m.norm2(m.expect_N(x) - u @ m.expect_N(ustar @ x @ u) @ ustar)

    best = 0.0
    for refl in (1.0, -1.0):
        thetas = np.linspace(0.0, 2.0 * math.pi, grid, endpoint=False)
        vals = []
        for th in thetas:
            c, s = math.cos(th), math.sin(th)
            x = np.array([[c, -refl * s], [s, refl * c]])
            vals.append(value(x))
        vals = np.array(vals)
        k = int(np.argmax(vals))
        lo = thetas[k] - 2.0 * math.pi / grid
        hi = thetas[k] + 2.0 * math.pi / grid
        for _ in range(60):
            mid1 = lo + (hi - lo) * 0.382
            mid2 = lo + (hi - lo) * 0.618
            x1 = np.array([[math.cos(mid1), -refl * math.sin(mid1)],
                           [math.sin(mid1), refl * math.cos(mid1)]])
            x2 = np.array([[math.cos(mid2), -refl * math.sin(mid2)],
                           [math.sin(mid2), refl * math.cos(mid2)]])
            if value(x1) < value(x2):
                lo = mid1
            else:
                hi = mid2
        th = 0.5 * (lo + hi)
        x = np.array([[math.cos(th), -refl * math.sin(th)],
                      [math.sin(th), refl * math.cos(th)]])
        best = max(best, value(x))
    return best


# -- minimal averaged projection -------------------------------------------------------


def minimal_element_exact(bc: BasicConstruction, u) -> dict:
    """Trace-preserving expectation of e_N onto the commutant of u N u* in M1.

    u must be an exact unitary of M.  Returns the element with its defining
    identities checked exactly.
    """
    f = bc.field
    inc = bc.inc
    ustar = inc.M.star(u)
    if not mats_equal(f, mul(u, ustar), inc.M.one()):
        raise InclusionError("conjugating element is not unitary")
    conj_basis = [mul(u, mul(n, ustar)) for n in inc.N.basis]
    conj_alg = MultiMatrixAlgebra(
        f, conj_basis, trace_matrix=inc.M.trace_matrix,
        unitary_group=(
            [mul(u, mul(w, ustar)) for w in inc.N.unitary_group]
            if inc.N.unitary_group is not None else None
        ),
    )
    comm = bc.commutant_in_m1(conj_alg)
    h = bc.expectation_onto(comm, bc.e_N)
    checks = {
        "trace_one": f.eq(bc.Tr(h), f.one),
        "inner_identity": f.eq(bc.Tr(mul(bc.e_N, h)), bc.Tr(mul(h, h))),
        "in_commutant": all(
            mats_equal(f, mul(h, bc.lam(c)), mul(bc.lam(c), h)) for c in conj_basis
        ),
    }
    return {"h": TowerElement(h, "M1", bc), "checks": checks, "commutant_dim": len(comm)}


def two_projection_weights(bc: BasicConstruction, u) -> dict:
    """Projection of e_N onto the span of u e_N u* and its complement.

    In the two-dimensional-commutant regime this span is the whole relative
    commutant of u N u*, and the weights are exactly (1 - k, k/lam) with
    k = ||u - E_N(u)||_2^2 and lam = index - 1.
    """
    f = bc.field
    inc = bc.inc
    lam_u = bc.lam(u) if not isinstance(u, np.ndarray) or u.shape[0] == inc.M.rep_dim else u
    lam_u = bc.lam(u)
    q = mul(lam_u, mul(bc.e_N, bc.star_op(lam_u)))
    qperp = eye(f, bc.dim) - q
    tr_eq = bc.Tr(mul(bc.e_N, q))
    k = f.one - tr_eq
    lam = bc.tr_one - f.one
    h = bc.expectation_onto([q, qperp], bc.e_N)
    expected = q * (f.one - k) + qperp * (k / lam)
    return {
        "k": k,
        "lam": lam,
        "h_model": TowerElement(h, "M1", bc),
        "coeff_q": f.one - k,
        "coeff_qperp": k / lam,
        "matches_formula": mats_equal(f, h, expected),
        "chain_equality": f.eq(
            f.one - bc.Tr(mul(bc.e_N, h)),
            k * (f.from_fraction(2) - (f.one + f.one / lam) * k),
        ),
    }


def minimal_element_float(bc: BasicConstruction, u, model: FloatModel | None = None) -> dict:
    """Float version of the minimal averaged projection for sampled unitaries."""
    m = model or FloatModel(bc)
    f = bc.field
    u = np.asarray(u, dtype=float)
    ustar = u.conj().T
    lams_f = [linalg.to_float_matrix(f, L) for L in bc.lams]
    m1_f = [linalg.to_float_matrix(f, b) for b in bc.m1_basis()]
    eN_f = linalg.to_float_matrix(f, bc.e_N)
    R_f = linalg.to_float_matrix(f, bc.trace_operator)
    gram_f = linalg.to_float_matrix(f, bc.gns.gram)
    gram_inv_f = np.linalg.inv(gram_f)

    def lam_float(x):
        coeffs = []
        for b in m.M_basis:
            coeffs.append(m._inner(x, b))
        co = m.M_gram_inv @ np.array(coeffs)
        out = np.zeros_like(lams_f[0])
        for c, L in zip(co, lams_f):
            out += c * L
        return out

    conj = [lam_float(u @ n @ ustar) for n in m.N_basis]
    # commutant of the conjugated subalgebra inside M1, over floats
    rows = []
    for g in conj:
        block = np.zeros((eN_f.size, len(m1_f)))
        for j, b in enumerate(m1_f):
            block[:, j] = (b @ g - g @ b).reshape(-1)
        rows.append(block)
    big = np.concatenate(rows, axis=0)
    _, s, vt = np.linalg.svd(big)
    tol = max(big.shape) * (s[0] if len(s) else 1.0) * 1e-12
    null = [vt[i] for i in range(len(s)) if s[i] < max(tol, 1e-11)]
    null += [vt[i] for i in range(len(s), vt.shape[0])]
    comm = []
    for cvec in null:
        acc = np.zeros_like(m1_f[0])
        for c, b in zip(cvec, m1_f):
            acc += c * b
        comm.append(acc)

    def star_op(T):
        return gram_inv_f @ T.conj().T @ gram_f

    def Tr(T):
        return float(np.trace(T @ R_f))

    k_ops = comm
    G = np.array([[Tr(star_op(a) @ b) for b in k_ops] for a in k_ops])
    rhs = np.array([Tr(star_op(a) @ eN_f) for a in k_ops])
    coeffs = np.linalg.solve(G, rhs)
    h = np.zeros_like(eN_f)
    for c, b in zip(coeffs, k_ops):
        h += c * b
    return {
        "h": h,
        "tr_h": Tr(h),
        "tr_eNh": Tr(eN_f @ h),
        "tr_h2": Tr(h @ h),
        "commutant_dim": len(comm),
        "Tr": Tr,
        "eN": eN_f,
    }


# -- scalar-level results ---------------------------------------------------------------


def weight_quadratic_roots(lam, k):
    """Roots of (lam^2 + lam) b^2 - (lam + k + lam k) b + k, exactly.

    Returns (k/lam, 1/(1+lam)); both are verified by back-substitution.
    """
    if isinstance(lam, (int, Fraction)) and isinstance(k, (int, Fraction)):
        lam, k = Fraction(lam), Fraction(k)
        one = Fraction(1)
    else:
        if isinstance(lam, QuadraticNumber):
            one = QuadraticNumber(1, 0, lam.d)
            if not isinstance(k, QuadraticNumber):
                k = QuadraticNumber(Fraction(k), 0, lam.d)
        else:
            one = QuadraticNumber(1, 0, k.d)
            lam = QuadraticNumber(Fraction(lam), 0, k.d)
    if lam == 0 * one:
        raise ValueError("the weight quadratic is degenerate at lam = 0")
    r1 = k / lam
    r2 = one / (one + lam)
    for r in (r1, r2):
        residue = (lam * lam + lam) * r * r - (lam + k + lam * k) * r + k
        if residue != 0 * one:
            raise ArithmeticError(f"root {r} does not satisfy the quadratic")
    return r1, r2


@dataclass
class ConstantValue:
    radicand: object          # exact scalar whose square root is the value
    exact: object             # exact square root when it exists in the field
    value: mpmath.mpf

    def __float__(self):
        return float(self.value)


def strong_singularity_constant(index, precision=120) -> ConstantValue:
    """sqrt((index - 2)/(index - 1)) for index > 2."""
    if isinstance(index, (int, Fraction)):
        index = Fraction(index)
        two, one = Fraction(2), Fraction(1)
        positive = index > 2
    else:
        one = QuadraticNumber(1, 0, index.d)
        two = QuadraticNumber(2, 0, index.d)
        positive = index > two
    if not positive:
        raise ValueError("the strong-singularity constant needs index > 2")
    radicand = (index - two) / (index - one)
    exact = radicand.sqrt() if isinstance(radicand, QuadraticNumber) else None
    with mpmath.workprec(precision + 20):
        if isinstance(radicand, QuadraticNumber):
            rv = mpmath.mpf(radicand.a.numerator) / radicand.a.denominator
            if radicand.b != 0:
                rv += (mpmath.mpf(radicand.b.numerator) / radicand.b.denominator) * mpmath.sqrt(radicand.d)
        else:
            rv = mpmath.mpf(radicand.numerator) / radicand.denominator
        val = mpmath.sqrt(rv)
    with mpmath.workprec(precision):
        val = +val
    return ConstantValue(radicand, exact, val)


def alpha_one_regime_check(index, k) -> dict:
    """For k <= (index-1)/index, the displacement inequality holds with unit
    constant: k (2 - (1 + 1/lam) k) >= k where lam = index - 1."""
    if isinstance(index, (int, Fraction)):
        index = Fraction(index)
    if isinstance(k, (int, Fraction)):
        k = Fraction(k)
    one = index / index
    lam = index - one
    threshold = lam / index
    applicable = k <= threshold
    out = {"applicable": bool(applicable), "threshold": threshold}
    if applicable:
        factor = 2 * one - (one + one / lam) * k
        out["factor"] = factor
        out["holds"] = k * factor >= k
    return out


# -- angles ---------------------------------------------------------------------------


def angle(bc: BasicConstruction, P: MultiMatrixAlgebra, Q: MultiMatrixAlgebra) -> AngleReport:
    """Spectrum of e_P e_Q e_P on the orthogonal complement of the bottom space."""
    f = bc.field
    for b in bc.inc.N.basis:
        if not (P.contains(b) and Q.contains(b)):
            raise InclusionError("algebras are not intermediate over the bottom subalgebra")
    e_P = bc.gns.projection_onto_elements(P.basis)
    e_Q = bc.gns.projection_onto_elements(Q.basis)
    T = mul(e_P, mul(e_Q, e_P))
    nhat = np.stack([bc.gns.hat(b) for b in bc.inc.N.basis], axis=0)
    constraints = mul(nhat, bc.gns.gram)  # w orthogonal to N-hat: (N-hat)* S w = 0
    basis_W = linalg.nullspace(f, constraints)
    if not basis_W:
        return AngleReport([], [], [], 1.0)
    Wmat = np.stack(basis_W, axis=1)
    # restriction R solving T W = W R
    cols = []
    for j in range(Wmat.shape[1]):
        img = mul(T, Wmat[:, j].reshape(-1, 1)).reshape(-1)
        sol = linalg.solve(f, Wmat, img)
        if sol is None:
            raise InclusionError("product projection does not preserve the complement")
        cols.append(sol)
    R = np.stack(cols, axis=1)
    cp = linalg.char_poly(f, R)
    roots, leftover = linalg.poly_roots_exact(f, cp)
    eigs_exact: list = list(roots)
    if len(leftover) > 1:
        coeffs = [f.to_float(c) for c in leftover]
        extra = np.roots(list(reversed(coeffs)))
        eigs_exact += [None] * (len(extra))
        float_extra = [float(np.real(r)) for r in extra]
    else:
        float_extra = []
    floats = sorted([f.to_float(r) for r in roots] + float_extra)
    eigs_exact = [e for _, e in sorted(
        zip([f.to_float(r) for r in roots] + float_extra,
            eigs_exact), key=lambda p: p[0])]
    angles = [math.acos(math.sqrt(min(max(ev, 0.0), 1.0))) for ev in floats]
    lam_min = floats[0] if floats else 1.0
    return AngleReport(floats, eigs_exact, angles, lam_min)


def angle_model(lam, precision=120) -> dict:
    """Two-projection block model: A = diag(1, 0) against the rank-one
    projection at cosine-squared lam; the distance is the positive eigenvalue
    sqrt(1 - lam) of A - B."""
    if isinstance(lam, (int, Fraction)):
        lam_f = float(Fraction(lam))
        one = Fraction(1)
    else:
        lam_f = float(lam)
        one = QuadraticNumber(1, 0, lam.d)
    radicand = one - lam
    s = math.sqrt(max(lam_f * (1.0 - lam_f), 0.0))
    A = np.array([[1.0, 0.0], [0.0, 0.0]])
    B = np.array([[lam_f, s], [s, 1.0 - lam_f]])
    with mpmath.workprec(precision + 20):
        if isinstance(radicand, QuadraticNumber):
            rv = mpmath.mpf(radicand.a.numerator) / radicand.a.denominator
            if radicand.b != 0:
                rv += (mpmath.mpf(radicand.b.numerator) / radicand.b.denominator) * mpmath.sqrt(radicand.d)
        else:
            rv = mpmath.mpf(radicand.numerator) / radicand.denominator
        val = mpmath.sqrt(rv)
    with mpmath.workprec(precision):
        val = +val
    exact = radicand.sqrt() if isinstance(radicand, QuadraticNumber) else None
    return {
        "A": A,
        "B": B,
        "norm": ConstantValue(radicand, exact, val),
        "float_norm": float(np.max(np.linalg.eigvalsh(A - B))),
    }


# -- asymptotic homomorphism obstruction ------------------------------------------------


def wahp_witness(bc: BasicConstruction, pp=None, unitaries=100, seed=0,
                 tol=1e-8) -> dict:
    """Factorization defect of expectations along unitaries of the subalgebra.

    For every unitary u of N the matrix of values E_N(lam_i* u lam_j) over a
    Pimsner-Popa basis has squared 2-norms summing to index - 1, and some pair
    exceeds sqrt(index - 1)/(k - 1).  Also returns the nonzero projection of
    the relative commutant under the complement of e_N that obstructs the
    asymptotic factorization.
    """
    from subfactor_lab.inclusions import pimsner_popa_basis

    f = bc.field
    index_f = f.to_float(bc.tr_one)
    if index_f <= 1.0 + 1e-12:
        raise InclusionError("the obstruction needs index > 1")
    if pp is None:
        pp = pimsner_popa_basis(bc)
    m = FloatModel(bc)
    lam_f = [linalg.to_float_matrix(f, l) for l in pp.elements]
    lam_star = [l.conj().T for l in lam_f]
    k = len(lam_f)
    rng = np.random.default_rng(seed)
    expected = index_f - 1.0
    bound = math.sqrt(expected) / (k - 1)
    sums, max_pairs, bound_ok = [], [], []
    for _ in range(unitaries):
        u = m.random_unitary(rng, algebra="N")
        total = 0.0
        best = (0.0, None)
        for i in range(1, k):
            for j in range(1, k):
                e = m.expect_N(lam_star[i] @ u @ lam_f[j])
                v = m.norm2(e) ** 2
                total += v
                if v > best[0]:
                    best = (v, (i, j))
        sums.append(total)
        max_pairs.append(best[1])
        bound_ok.append(math.sqrt(best[0]) >= bound - tol)
    # obstruction: a nonzero projection under the complement of e_N inside the
    # relative commutant
    obstruction = eye(f, bc.dim) - bc.e_N
    in_commutant = all(
        mats_equal(f, mul(obstruction, bc.lam(n)), mul(bc.lam(n), obstruction))
        for n in bc.inc.N.basis
    )
    return {
        "sums": sums,
        "expected": expected,
        "max_error": max(abs(s - expected) for s in sums) if sums else 0.0,
        "bound": bound,
        "bound_holds": all(bound_ok),
        "max_pairs": max_pairs,
        "obstruction": TowerElement(obstruction, "M1", bc),
        "obstruction_in_commutant": in_commutant,
        "obstruction_nonzero": not is_zero_matrix(f, obstruction),
    }


# -- perturbation witnesses -------------------------------------------------------------


def perturbation_witness_check(inc, inc0, witness: dict, delta: float,
                               tol=1e-10) -> dict:
    """Check a witness for the closeness theorem between two subalgebras.

    witness carries q in N, q0 in N0, qp in N' cap M, q0p in N0' cap M, and a
    partial isometry v; verifies the compression identity
    v p0 N0 p0 v* = p N p on spanning sets, the support conditions, and the
    displayed inequalities ||1 - v||_2 <= 13 delta and
    tau(p) = tau(p0) >= 1 - 67 delta^2.  Pure checker; witnesses are inputs.
    """
    f = inc.field
    M = inc.M
    out = {}
    q, q0, qp, q0p, v = (witness[k] for k in ("q", "q0", "qp", "q0p", "v"))

    def is_proj(x):
        return mats_equal(f, mul(x, x), x) and mats_equal(f, M.star(x), x)

    out["q_projection_in_N"] = is_proj(q) and inc.N.contains(q)
    out["q0_projection_in_N0"] = is_proj(q0) and inc0.N.contains(q0)
    out["qp_in_relative_commutant"] = is_proj(qp) and all(
        mats_equal(f, mul(qp, n), mul(n, qp)) for n in inc.N.basis
    )
    out["q0p_in_relative_commutant"] = is_proj(q0p) and all(
        mats_equal(f, mul(q0p, n), mul(n, q0p)) for n in inc0.N.basis
    )
    p = mul(q, qp)
    p0 = mul(q0, q0p)
    out["p_projection"] = is_proj(p)
    out["p0_projection"] = is_proj(p0)
    out["vv_star_is_p"] = mats_equal(f, mul(v, M.star(v)), p)
    out["v_star_v_is_p0"] = mats_equal(f, mul(M.star(v), v), p0)
    # compression identity on spanning sets
    left = [mul(v, mul(p0, mul(n, mul(p0, M.star(v))))) for n in inc0.N.basis]
    right = [mul(p, mul(n, p)) for n in inc.N.basis]
    span_r = linalg.SpanBasis(f, M.rep_dim**2)
    for r in right:
        span_r.add(vec(r))
    span_l = linalg.SpanBasis(f, M.rep_dim**2)
    for l in left:
        span_l.add(vec(l))
    out["compression_forward"] = all(span_r.contains(vec(l)) for l in left)
    out["compression_backward"] = all(span_l.contains(vec(r)) for r in right)
    one = M.one()
    dist = one - v
    norm_1v = math.sqrt(max(f.to_float(M.trace(mul(M.star(dist), dist))), 0.0))
    out["norm_one_minus_v"] = norm_1v
    out["isometry_close"] = norm_1v <= 13.0 * delta + tol
    tp = f.to_float(M.trace(p))
    tp0 = f.to_float(M.trace(p0))
    out["trace_p"] = tp
    out["traces_equal"] = abs(tp - tp0) <= tol
    out["trace_bound"] = tp >= 1.0 - 67.0 * delta * delta - tol
    out["ok"] = all(
        bool(out[k]) for k in (
            "q_projection_in_N", "q0_projection_in_N0", "qp_in_relative_commutant",
            "q0p_in_relative_commutant", "p_projection", "p0_projection",
            "vv_star_is_p", "v_star_v_is_p0", "compression_forward",
            "compression_backward", "isometry_close", "traces_equal", "trace_bound",
        )
    )
    out["violations"] = [k for k in out if k not in ("ok", "violations", "norm_one_minus_v", "trace_p")
                         and out[k] is False]
    return out


# -- normalizer scan ---------------------------------------------------------------------


def singularity_scan(built, restarts=24, iterations=40, seed=0, samples=12,
                     norm_restarts=12) -> dict:
    """Search for normalizing unitaries and report empirical displacement ratios.

    Group scenarios additionally enumerate group elements exactly.  The
    optimization minimizes the 2-norm distance between u e_N u* and e_N over
    sampled unitaries with seeded local refinement, and the ratio report
    compares certified lower bounds of the expectation distance against
    sqrt(k) for sampled non-normalizing unitaries.
    """
    inc = built.inclusion
    bc = inc.basic_construction()
    f = inc.field
    m = FloatModel(bc)
    report: dict = {"normalizers": [], "group_scan": None}

    if built.group is not None and built.subgroup_elements is not None and not isinstance(
        built.subgroup_elements, dict
    ):
        grp = built.group
        sub = set(built.subgroup_elements)
        rows = []
        from subfactor_lab.scenarios import regular_representation

        for g in grp.elements:
            conj = grp.conjugate_subgroup(g, sub)
            normalizes = conj == sub
            in_sub = g in sub
            u = regular_representation(f, grp, g)
            eu = inc.cond_expect(u)
            e_norm = math.sqrt(max(f.to_float(inc.M.trace(mul(inc.M.star(eu), eu))), 0.0))
            rows.append({
                "element": grp.labels[g],
                "normalizes": normalizes,
                "in_subalgebra": in_sub,
                "expectation_norm": e_norm,
            })
            if normalizes and not in_sub:
                report["normalizers"].append(grp.labels[g])
        report["group_scan"] = rows

    # float scan over the unitary group
    eN_f = linalg.to_float_matrix(f, bc.e_N)
    lams_cache = {}

    def lam_float(x):
        key = id(x)
        co = m.M_gram_inv @ np.array([m._inner(x, b) for b in m.M_basis])
        out = np.zeros_like(eN_f)
        for c, L in zip(co, [linalg.to_float_matrix(f, L) for L in bc.lams]):
            out += c * L
        return out

    lamsF = [linalg.to_float_matrix(f, L) for L in bc.lams]

    def lamF(x):
        co = m.M_gram_inv @ np.array([m._inner(x, b) for b in m.M_basis])
        out = np.zeros_like(lamsF[0])
        for c, L in zip(co, lamsF):
            out += c * L
        return out

    gram_f = linalg.to_float_matrix(f, bc.gns.gram)
    gram_inv_f = np.linalg.inv(gram_f)
    R_f = linalg.to_float_matrix(f, bc.trace_operator)

    def dist_to_normalizing(u):
        L = lamF(u)
        Ls = gram_inv_f @ L.conj().T @ gram_f
        d = L @ eN_f @ Ls - eN_f
        return math.sqrt(max(float(np.trace(d @ d.conj().T @ R_f).real), 0.0))

    rng = np.random.default_rng(seed)
    found = []
    best_dist = float("inf")
    for _ in range(restarts):
        u = m.random_unitary(rng, algebra="M")
        d = dist_to_normalizing(u)
        step = 0.5
        for _ in range(iterations):
            x = m.random_element(rng, "M")
            skew = (x - x.conj().T) * step
            cand = u @ _expm_skew(skew)
            cand = m.project_M(cand)
            sv = np.linalg.svd(cand, compute_uv=False)
            if sv[0] < 1e-9:
                continue
            cand = cand / sv[0]
            dc = dist_to_normalizing(cand)
            if dc < d:
                u, d = cand, dc
            else:
                step *= 0.7
        best_dist = min(best_dist, d)
        k_val = m.norm2(u - m.expect_N(u)) ** 2
        if d < 1e-7 and k_val > 1e-6:
            found.append({"k": k_val, "distance": d})
    report["float_scan"] = {
        "best_distance": best_dist,
        "found_outside": found,
        "note": "none found at budget" if not found else "normalizer candidates found",
    }

    # empirical displacement ratio over sampled non-normalizing unitaries
    ratios = []
    for _ in range(samples):
        u = m.random_unitary(rng, algebra="M")
        k_val = m.norm2(u - m.expect_N(u)) ** 2
        if k_val < 1e-8:
            continue
        lower, est, _ = norm_inf2(bc, u, restarts=norm_restarts, iterations=30,
                                  seed=int(rng.integers(0, 2**31)), model=m)
        ratios.append({"k": k_val, "norm_lower": lower, "norm_estimate": est,
                       "ratio": lower / math.sqrt(k_val)})
    report["ratios"] = ratios
    report["empirical_alpha"] = min((r["ratio"] for r in ratios), default=None)
    return report


def _expm_skew(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a skew matrix via the eigendecomposition of i a."""
    h = 1j * a
    w, v = np.linalg.eigh(h)
    return np.real(v @ np.diag(np.exp(-1j * w)) @ v.conj().T)
