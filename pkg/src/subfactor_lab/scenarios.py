"""Scenario descriptions: named groups, concrete algebra builders, the pinned
corpus, and the versioned scenario-file schema (subfactor-lab/1)."""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from subfactor_lab.algebras import MultiMatrixAlgebra
from subfactor_lab.inclusions import Inclusion, InclusionError
from subfactor_lab.linalg import FloatField, QuadraticField, RationalField, eye, zeros
from subfactor_lab.scalars import QuadraticNumber

SCHEMA = "subfactor-lab/1"


class ScenarioError(ValueError):
    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


# -- named finite groups --------------------------------------------------------------


class FiniteGroup:
    def __init__(self, name, elements, mult, identity, labels=None):
        self.name = name
        self.elements = list(elements)
        self.index = {g: i for i, g in enumerate(self.elements)}
        self.mult = mult
        self.identity = identity
        self.labels = labels or {g: str(g) for g in self.elements}

    def inverse(self, g):
        for h in self.elements:
            if self.mult(g, h) == self.identity:
                return h
        raise ValueError("group element without inverse")

    def subgroup(self, generators):
        seen = {self.identity}
        frontier = [self.identity]
        gens = list(generators)
        while frontier:
            g = frontier.pop()
            for s in gens:
                for nxt in (self.mult(g, s), self.mult(s, g)):
                    if nxt not in seen:
                        seen.add(nxt)
                        frontier.append(nxt)
        return [g for g in self.elements if g in seen]

    def conjugate_subgroup(self, u, subgroup):
        uinv = self.inverse(u)
        return {self.mult(u, self.mult(h, uinv)) for h in subgroup}

    def conjugacy_classes(self, within=None):
        elems = list(within) if within is not None else self.elements
        pool = set(elems)
        classes = []
        while pool:
            g = next(iter(sorted(pool)))
            cls = {self.mult(u, self.mult(g, self.inverse(u))) for u in elems}
            cls &= set(elems)
            classes.append(sorted(cls))
            pool -= cls
        return classes


def _perm_mult(a, b):
    # apply b first, then a
    return tuple(a[b[i]] for i in range(len(a)))


def _parse_cycles(word: str, n: int):
    word = word.strip()
    if word in ("e", "()", "1", ""):
        return tuple(range(n))
    cycles = re.findall(r"\(([0-9\s,]+)\)", word)
    if not cycles or "".join(f"({c})" for c in cycles).replace(" ", "") != word.replace(" ", ""):
        raise ScenarioError(f"cannot parse permutation word {word!r}")
    out = tuple(range(n))
    for cyc in reversed(cycles):
        if "," in cyc or " " in cyc:
            tokens = re.findall(r"[0-9]+", cyc)
        else:
            tokens = list(cyc.strip())
        pts = [int(t) - 1 for t in tokens]
        if any(not 0 <= p < n for p in pts) or len(set(pts)) != len(pts):
            raise ScenarioError(f"bad cycle {cyc!r} for degree {n}")
        perm = list(range(n))
        for i, p in enumerate(pts):
            perm[p] = pts[(i + 1) % len(pts)]
        out = _perm_mult(tuple(perm), out)
    return out


def symmetric_group(n: int) -> FiniteGroup:
    elements = sorted(itertools.permutations(range(n)))
    ident = tuple(range(n))

    def label(g):
        # cycle notation, 1-based
        seen, parts = set(), []
        for start in range(n):
            if start in seen or g[start] == start:
                seen.add(start)
                continue
            cyc, cur = [], start
            while cur not in seen:
                seen.add(cur)
                cyc.append(cur + 1)
                cur = g[cur]
            parts.append("(" + "".join(str(c) for c in cyc) + ")")
        return "".join(parts) or "e"

    g = FiniteGroup(f"S{n}", elements, _perm_mult, ident)
    g.labels = {el: label(el) for el in elements}
    g.parse = lambda w: _parse_cycles(w, n)
    return g


def klein_group() -> FiniteGroup:
    elements = [(0, 0), (1, 0), (0, 1), (1, 1)]

    def mult(x, y):
        return ((x[0] + y[0]) % 2, (x[1] + y[1]) % 2)

    g = FiniteGroup("Z2xZ2", elements, mult, (0, 0))
    g.labels = {(0, 0): "e", (1, 0): "a", (0, 1): "b", (1, 1): "ab"}

    def parse(word):
        word = word.strip()
        if word in ("e", "1", ""):
            return (0, 0)
        if not re.fullmatch(r"[ab]+", word):
            raise ScenarioError(f"cannot parse {word!r} as a word in a, b")
        return (word.count("a") % 2, word.count("b") % 2)

    g.parse = parse
    return g


def dihedral_group(n: int = 4) -> FiniteGroup:
    elements = [(k, f) for f in (0, 1) for k in range(n)]

    def mult(x, y):
        k1, f1 = x
        k2, f2 = y
        k = (k1 + (k2 if f1 == 0 else -k2)) % n
        return (k, (f1 + f2) % 2)

    g = FiniteGroup(f"D{n}", elements, mult, (0, 0))
    g.labels = {(k, f): ("r" * 0 + f"r^{k}" + ("s" if f else "")) for k, f in elements}

    def parse(word):
        word = word.strip()
        cur = (0, 0)
        if word in ("e", "1", ""):
            return cur
        if not re.fullmatch(r"[rs]+", word):
            raise ScenarioError(f"cannot parse {word!r} as a word in r, s")
        for ch in word:
            cur = mult(cur, (1, 0) if ch == "r" else (0, 1))
        return cur

    g.parse = parse
    return g


NAMED_GROUPS = {
    "S3": lambda: symmetric_group(3),
    "S4": lambda: symmetric_group(4),
    "Z2xZ2": klein_group,
    "D4": dihedral_group,
}


# -- concrete algebra builders -----------------------------------------------------------


def regular_representation(field, group: FiniteGroup, g) -> np.ndarray:
    n = len(group.elements)
    m = zeros(field, n)
    for j, h in enumerate(group.elements):
        i = group.index[group.mult(g, h)]
        m[i, j] = field.one
    return m


def _class_sums(field, group: FiniteGroup, elements):
    out = []
    for cls in group.conjugacy_classes(within=elements):
        acc = zeros(field, len(group.elements))
        for g in cls:
            acc = acc + regular_representation(field, group, g)
        out.append(acc)
    return out


def group_algebra(field, group: FiniteGroup) -> MultiMatrixAlgebra:
    n = len(group.elements)
    w = zeros(field, n)
    e = group.index[group.identity]
    w[e, e] = field.one
    basis = [regular_representation(field, group, g) for g in group.elements]
    return MultiMatrixAlgebra(
        field, basis, trace_matrix=w, unitary_group=list(basis),
        name=f"F[{group.name}]", known_center=_class_sums(field, group, group.elements),
    )


def group_subalgebra(field, group: FiniteGroup, ambient: MultiMatrixAlgebra,
                     subgroup_elements) -> MultiMatrixAlgebra:
    basis = [regular_representation(field, group, h) for h in subgroup_elements]
    return MultiMatrixAlgebra(
        field, basis, trace_matrix=ambient.trace_matrix,
        unitary_group=list(basis), name=f"F[H<{group.name}]",
        known_center=_class_sums(field, group, subgroup_elements),
    )


def _signed_permutations(field, n: int):
    out = []
    for perm in itertools.permutations(range(n)):
        for signs in itertools.product((1, -1), repeat=n):
            m = zeros(field, n)
            for j in range(n):
                m[perm[j], j] = field.one if signs[j] == 1 else -field.one
            out.append(m)
    return out


def matrix_units(field, n: int):
    units = []
    for i in range(n):
        for j in range(n):
            m = zeros(field, n)
            m[i, j] = field.one
            units.append(m)
    return units


def full_matrix_algebra(field, n: int) -> MultiMatrixAlgebra:
    w = eye(field, n) * field.from_fraction(Fraction(1, n))
    return MultiMatrixAlgebra(
        field, matrix_units(field, n), trace_matrix=w,
        unitary_group=_signed_permutations(field, n), name=f"M{n}",
        known_center=[eye(field, n)],
    )


def scalar_subalgebra(field, ambient: MultiMatrixAlgebra) -> MultiMatrixAlgebra:
    return MultiMatrixAlgebra(
        field, [ambient.one()], trace_matrix=ambient.trace_matrix,
        unitary_group=[ambient.one()], name="F",
        known_center=[ambient.one()],
    )


def diagonal_subalgebra(field, ambient: MultiMatrixAlgebra) -> MultiMatrixAlgebra:
    n = ambient.rep_dim
    basis = []
    for i in range(n):
        m = zeros(field, n)
        m[i, i] = field.one
        basis.append(m)
    signs = []
    for pattern in itertools.product((1, -1), repeat=n):
        m = zeros(field, n)
        for i, s in enumerate(pattern):
            m[i, i] = field.one if s == 1 else -field.one
        signs.append(m)
    return MultiMatrixAlgebra(
        field, basis, trace_matrix=ambient.trace_matrix,
        unitary_group=signs, name=f"D{n}", known_center=list(basis),
    )


def weyl_basis(field, n: int):
    """Clock-and-shift orthonormal unitary basis of M_n; needs a primitive
    n-th root of unity in the field (n = 2 rational, n = 3 over d = -3)."""
    if n == 2:
        zeta = -field.one
    elif n == 3:
        if getattr(field, "d", None) != -3:
            return None
        zeta = field.from_fraction(QuadraticNumber(Fraction(-1, 2), Fraction(1, 2), -3))
    else:
        return None
    shift = zeros(field, n)
    for j in range(n):
        shift[(j + 1) % n, j] = field.one
    powers = [field.one]
    for _ in range(n - 1):
        powers.append(powers[-1] * zeta)
    clock = zeros(field, n)
    for j in range(n):
        clock[j, j] = powers[j]
    out = []
    xa = eye(field, n)
    for _ in range(n):
        zb = eye(field, n)
        for _ in range(n):
            out.append(np.dot(zb, xa))
            zb = np.dot(clock, zb)
        xa = np.dot(shift, xa)
    return out


def shift_powers(field, n: int):
    shift = zeros(field, n)
    for j in range(n):
        shift[(j + 1) % n, j] = field.one
    out = [eye(field, n)]
    for _ in range(n - 1):
        out.append(np.dot(shift, out[-1]))
    return out


def left_coset_representatives(group: FiniteGroup, subgroup_elements):
    sub = set(subgroup_elements)
    seen = set()
    reps = [group.identity]
    seen |= {group.mult(group.identity, h) for h in sub}
    for g in group.elements:
        if g in seen:
            continue
        reps.append(g)
        seen |= {group.mult(g, h) for h in sub}
    return reps


def _kron(field, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na, nb = a.shape[0], b.shape[0]
    out = zeros(field, na * nb)
    for i in range(na):
        for j in range(na):
            if field.is_zero(a[i, j]):
                continue
            for k in range(nb):
                for l in range(nb):
                    out[i * nb + k, j * nb + l] = a[i, j] * b[k, l]
    return out


def tensor_inclusion(field, n: int, k: int) -> Inclusion:
    """M_n included in M_n tensor M_k as a -> a (x) 1."""
    M = full_matrix_algebra(field, n * k)
    idk = eye(field, k)
    sub_basis = [_kron(field, u, idk) for u in matrix_units(field, n)]
    sub_group = [_kron(field, u, idk) for u in _signed_permutations(field, n)]
    N = MultiMatrixAlgebra(
        field, sub_basis, trace_matrix=M.trace_matrix,
        unitary_group=sub_group, name=f"M{n}(x)1",
        known_center=[M.one()],
    )
    wk = weyl_basis(field, k)
    hint = [_kron(field, eye(field, n), w) for w in wk] if wk is not None else None
    return Inclusion(M, N, name=f"m{n}-in-m{n}xm{k}", pp_hint=hint)


# -- scenario schema ----------------------------------------------------------------------


ANALYSES = ("index", "basis", "wahp", "singularity", "angle", "landau", "tl-eval")


@dataclass
class Scenario:
    sid: str
    stype: str
    mode: str = "exact"
    field_d: int | None = None
    precision: int = 53
    seed: int = 0
    budget: dict = dc_field(default_factory=lambda: {"restarts": 32, "iterations": 120})
    analyses: tuple = ("index",)
    group: str | None = None
    subgroup: list | None = None
    subgroups: dict | None = None
    matrix_n: int | None = None
    tensor: tuple | None = None
    sub_kind: str | None = None
    sub_generators: list | None = None
    expressions: list | None = None
    trace_weights: list | None = None

    def make_field(self):
        if self.mode == "float":
            return FloatField(tol=10.0 ** (-max(6, self.precision // 6)))
        if self.field_d is None:
            return RationalField()
        return QuadraticField(self.field_d)

    def build(self) -> "BuiltScenario":
        field = self.make_field()
        if self.stype == "group_inclusion":
            grp = NAMED_GROUPS[self.group]()
            M = group_algebra(field, grp)
            sub_elems = grp.subgroup([grp.parse(w) for w in (self.subgroup or [])])
            N = group_subalgebra(field, grp, M, sub_elems)
            hint = [regular_representation(field, grp, g)
                    for g in left_coset_representatives(grp, sub_elems)]
            inc = Inclusion(M, N, name=self.sid, pp_hint=hint)
            return BuiltScenario(self, inc, group=grp, subgroup_elements=sub_elems)
        if self.stype == "quadrilateral":
            grp = NAMED_GROUPS[self.group]()
            M = group_algebra(field, grp)
            subs = {}
            elems = {}
            for key, words in (self.subgroups or {}).items():
                sub_elems = grp.subgroup([grp.parse(w) for w in words])
                subs[key] = group_subalgebra(field, grp, M, sub_elems)
                elems[key] = sub_elems
            bottom = sorted(set(elems.get("P", [grp.identity])) & set(elems.get("Q", [grp.identity])))
            N = group_subalgebra(field, grp, M, [g for g in grp.elements if g in bottom])
            hint = [regular_representation(field, grp, g)
                    for g in left_coset_representatives(grp, bottom)]
            inc = Inclusion(M, N, name=self.sid, pp_hint=hint)
            return BuiltScenario(self, inc, group=grp, intermediates=subs,
                                 subgroup_elements=elems)
        if self.stype == "matrix_inclusion":
            n = self.matrix_n
            M = full_matrix_algebra(field, n)
            hint = None
            if self.sub_kind == "scalars":
                N = scalar_subalgebra(field, M)
                hint = weyl_basis(field, n)
            elif self.sub_kind == "diagonal":
                N = diagonal_subalgebra(field, M)
                hint = shift_powers(field, n)
            elif self.sub_kind == "generators":
                mats = [
                    [[parse_scalar(field, v) for v in row] for row in m]
                    for m in self.sub_generators
                ]
                N = MultiMatrixAlgebra(field, [np.array(m, dtype=object if field.exact else float)
                                               for m in mats],
                                       trace_matrix=M.trace_matrix, complete=True)
            else:
                raise ScenarioError(f"unknown subalgebra kind {self.sub_kind!r}")
            return BuiltScenario(self, Inclusion(M, N, name=self.sid, pp_hint=hint))
        if self.stype == "tensor_inclusion":
            n, k = self.tensor
            return BuiltScenario(self, tensor_inclusion(field, n, k))
        raise ScenarioError(f"unknown scenario type {self.stype!r}")


@dataclass
class BuiltScenario:
    scenario: Scenario
    inclusion: Inclusion
    group: FiniteGroup | None = None
    intermediates: dict | None = None
    subgroup_elements: object = None


def parse_scalar(field, v):
    """Exact scalar literals: integers, 'p/q', and 'a+b√d' (or sqrt(d))."""
    if isinstance(v, int):
        return field.from_fraction(v)
    if isinstance(v, str):
        s = v.replace(" ", "").replace("sqrt", "√").replace("*√", "√").replace("(", "").replace(")", "")
        m = re.fullmatch(r"(?P<a>[+-]?\d+(/\d+)?)?(?P<b>[+-](\d+(/\d+)?)?)?√(?P<d>-?\d+)?", s)
        if "√" in s and m:
            a = Fraction(m.group("a")) if m.group("a") else Fraction(0)
            braw = m.group("b")
            if braw is None:
                b = Fraction(1)
            elif braw in ("+", "-"):
                b = Fraction(braw + "1")
            else:
                b = Fraction(braw)
            d = int(m.group("d")) if m.group("d") else (field.d or 2)
            return field.from_fraction(QuadraticNumber(a, b, d))
        return field.from_fraction(Fraction(s))
    raise ScenarioError(f"cannot parse scalar literal {v!r}")


def load_scenario(data) -> Scenario:
    """Validate a scenario dict against schema subfactor-lab/1."""
    if isinstance(data, str):
        with open(data) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"invalid JSON: {exc}", path="$")

    def need(key, typ, path="$", default=None, required=True):
        if key not in data:
            if required:
                raise ScenarioError(f"missing field {key!r}", path=path)
            return default
        v = data[key]
        if typ is not None and not isinstance(v, typ):
            raise ScenarioError(f"field {key!r} must be {typ}", path=f"{path}.{key}")
        return v

    schema = need("schema", str)
    if schema != SCHEMA:
        raise ScenarioError(f"unsupported schema {schema!r} (expected {SCHEMA!r})", "$.schema")
    stype = need("type", str)
    if stype not in ("group_inclusion", "matrix_inclusion", "tensor_inclusion", "quadrilateral"):
        raise ScenarioError(f"unknown type {stype!r}", "$.type")
    mode = need("mode", str, default="exact", required=False)
    if mode not in ("exact", "float"):
        raise ScenarioError(f"mode must be 'exact' or 'float', got {mode!r}", "$.mode")
    analyses = tuple(need("analyses", list, default=["index"], required=False))
    for a in analyses:
        if a not in ANALYSES:
            raise ScenarioError(f"unknown analysis {a!r}", "$.analyses")
    sc = Scenario(
        sid=need("id", str, default="scenario", required=False),
        stype=stype,
        mode=mode,
        field_d=need("field_d", int, default=None, required=False),
        precision=need("precision", int, default=53, required=False),
        seed=need("seed", int, default=0, required=False),
        budget=need("budget", dict, default={"restarts": 32, "iterations": 120}, required=False),
        analyses=analyses,
        expressions=need("expressions", list, default=None, required=False),
        trace_weights=need("trace", list, default=None, required=False),
    )
    if stype in ("group_inclusion", "quadrilateral"):
        sc.group = need("group", str)
        if sc.group not in NAMED_GROUPS:
            raise ScenarioError(f"unknown group {sc.group!r}", "$.group")
        if stype == "group_inclusion":
            sc.subgroup = need("subgroup", list)
        else:
            sc.subgroups = need("subgroups", dict)
            for key in ("P", "Q"):
                if key not in sc.subgroups:
                    raise ScenarioError(f"quadrilateral needs subgroup {key!r}", "$.subgroups")
    elif stype == "matrix_inclusion":
        sc.matrix_n = need("size", int)
        sub = need("sub", dict)
        sc.sub_kind = sub.get("kind")
        if sc.sub_kind not in ("scalars", "diagonal", "generators"):
            raise ScenarioError("sub.kind must be scalars|diagonal|generators", "$.sub.kind")
        if sc.sub_kind == "generators":
            sc.sub_generators = sub.get("matrices")
            if not isinstance(sc.sub_generators, list) or not sc.sub_generators:
                raise ScenarioError("sub.matrices must be a nonempty list", "$.sub.matrices")
    elif stype == "tensor_inclusion":
        sc.tensor = (need("n", int), need("k", int))
    return sc


# -- the pinned corpus ---------------------------------------------------------------------


def corpus_scenarios() -> dict[str, Scenario]:
    mk = lambda **kw: Scenario(**kw)
    return {
        "c-in-m2": mk(sid="c-in-m2", stype="matrix_inclusion", matrix_n=2,
                      sub_kind="scalars"),
        "c-in-m3": mk(sid="c-in-m3", stype="matrix_inclusion", matrix_n=3,
                      sub_kind="scalars", field_d=-3),
        "d2-in-m2": mk(sid="d2-in-m2", stype="matrix_inclusion", matrix_n=2,
                       sub_kind="diagonal"),
        "d3-in-m3": mk(sid="d3-in-m3", stype="matrix_inclusion", matrix_n=3,
                       sub_kind="diagonal"),
        "m2-in-m2xm2": mk(sid="m2-in-m2xm2", stype="tensor_inclusion", tensor=(2, 2)),
        "s3-order2": mk(sid="s3-order2", stype="group_inclusion", group="S3",
                        subgroup=["(12)"]),
        "s3-order3": mk(sid="s3-order3", stype="group_inclusion", group="S3",
                        subgroup=["(123)"], field_d=-3),
        "s3-quadrilateral": mk(sid="s3-quadrilateral", stype="quadrilateral", group="S3",
                               subgroups={"P": ["(12)"], "Q": ["(13)"], "R": ["(123)"]}),
        "z2xz2-square": mk(sid="z2xz2-square", stype="quadrilateral", group="Z2xZ2",
                           subgroups={"P": ["a"], "Q": ["b"]}),
    }


def build_corpus(mode="exact") -> dict[str, BuiltScenario]:
    out = {}
    for sid, sc in corpus_scenarios().items():
        if mode != sc.mode:
            sc = Scenario(**{**sc.__dict__, "mode": mode})
        out[sid] = sc.build()
    return out
