import random
from fractions import Fraction

import pytest

from subfactor_lab.scalars import RationalFunction, quantum_integer
from subfactor_lab.tl import (
    DELTA,
    PlanarDiagram,
    TLElement,
    all_diagrams,
    compose,
    comultiply,
    cup_cap_projection,
    identity_diagram,
    is_biprojection,
    jones_wenzl,
    markov_trace,
    rotate,
)

CATALAN = [1, 1, 2, 5, 14, 42, 132, 429, 1430]


def E(n, i):
    return TLElement.generator(n, i)


def one(n):
    return TLElement.identity(n)


def random_element(n, rng, size=4):
    diagrams = all_diagrams(n)
    terms = {}
    for _ in range(size):
        d = diagrams[rng.randrange(len(diagrams))]
        terms[d] = RationalFunction(Fraction(rng.randint(-5, 5)))
    return TLElement(n, terms)


class TestPlanarDiagram:
    def test_crossing_rejected(self):
        with pytest.raises(ValueError, match="cross"):
            PlanarDiagram(2, [(0, 2), (1, 3)])

    def test_not_matching_rejected(self):
        with pytest.raises(ValueError):
            PlanarDiagram(2, [(0, 1), (1, 2)])

    def test_catalan_counts(self):
        for n in range(1, 9):
            assert len(all_diagrams(n)) == CATALAN[n]

    def test_serialization(self):
        assert str(identity_diagram(2)) == "[(0,3),(1,2)]"
        assert str(TLElement.generator(2, 1)) == "(1) * [(0,1),(2,3)]"


class TestRelations:
    @pytest.mark.parametrize("n", range(2, 9))
    def test_generator_relations(self, n):
        for i in range(1, n):
            assert compose(E(n, i), E(n, i)) == E(n, i).scale(DELTA)
        for i in range(1, n - 1):
            assert compose(compose(E(n, i), E(n, i + 1)), E(n, i)) == E(n, i)
            assert compose(compose(E(n, i + 1), E(n, i)), E(n, i + 1)) == E(n, i + 1)
        for i in range(1, n):
            for j in range(i + 2, n):
                assert compose(E(n, i), E(n, j)) == compose(E(n, j), E(n, i))

    def test_wenzl_annihilates_generator(self):
        p2 = jones_wenzl(2)
        assert p2 == one(2) - E(2, 1) / DELTA
        assert compose(p2, E(2, 1)).is_zero()
        assert compose(E(2, 1), p2).is_zero()

    def test_box_size_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            compose(one(2), one(3))


class TestMarkovTrace:
    def test_identity_trace(self):
        for n in range(1, 6):
            assert markov_trace(one(n)) == DELTA**n

    def test_cup_cap_trace(self):
        assert markov_trace(E(2, 1)) == DELTA

    def test_wenzl_two_trace(self):
        assert markov_trace(jones_wenzl(2)) == DELTA * DELTA - 1

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_traciality_random(self, n):
        rng = random.Random(100 + n)
        for _ in range(20):
            x, y = random_element(n, rng), random_element(n, rng)
            assert markov_trace(compose(x, y)) == markov_trace(compose(y, x))


class TestRotation:
    def test_identity_rotates_to_cup_cap(self):
        assert rotate(one(2)) == E(2, 1)
        assert rotate(E(2, 1)) == one(2)

    def test_fourth_power_is_identity(self):
        rng = random.Random(42)
        for _ in range(10):
            x = random_element(2, rng)
            y = x
            for _ in range(4):
                y = rotate(y)
            assert y == x

    def test_rejects_other_box_sizes(self):
        with pytest.raises(ValueError):
            rotate(one(3))


class TestJonesWenzl:
    @pytest.mark.parametrize("n", range(1, 7))
    def test_idempotent(self, n):
        p = jones_wenzl(n)
        assert compose(p, p) == p

    @pytest.mark.parametrize("n", range(2, 7))
    def test_kills_all_generators(self, n):
        p = jones_wenzl(n)
        for i in range(1, n):
            assert compose(p, E(n, i)).is_zero()
            assert compose(E(n, i), p).is_zero()

    @pytest.mark.parametrize("n", range(1, 7))
    def test_trace_is_quantum_integer(self, n):
        assert markov_trace(jones_wenzl(n)) == RationalFunction(quantum_integer(n + 1))

    def test_p3_idempotent_difference_vanishes(self):
        p3 = jones_wenzl(3)
        assert (compose(p3, p3) - p3).is_zero()


class TestComultiplication:
    def test_cup_cap_calibration(self):
        e = cup_cap_projection()
        assert comultiply(e, e) == e / DELTA

    def test_identity_comultiplies_to_trace(self):
        rng = random.Random(9)
        for _ in range(10):
            x = random_element(2, rng)
            expected = one(2).scale(markov_trace(x) / DELTA)
            assert comultiply(one(2), x) == expected
            assert comultiply(x, one(2)) == expected

    def test_bilinearity(self):
        rng = random.Random(10)
        for _ in range(10):
            x, y, z = (random_element(2, rng) for _ in range(3))
            assert comultiply(x + y, z) == comultiply(x, z) + comultiply(y, z)
            assert comultiply(x, y + z) == comultiply(x, y) + comultiply(x, z)

    def test_associativity(self):
        rng = random.Random(11)
        for _ in range(10):
            x, y, z = (random_element(2, rng) for _ in range(3))
            assert comultiply(comultiply(x, y), z) == comultiply(x, comultiply(y, z))


class TestAdjoint:
    def test_antimultiplicative(self):
        rng = random.Random(12)
        for n in (2, 3):
            for _ in range(10):
                x, y = random_element(n, rng), random_element(n, rng)
                assert compose(x, y).adjoint() == compose(y.adjoint(), x.adjoint())

    def test_involution(self):
        rng = random.Random(13)
        x = random_element(3, rng)
        assert x.adjoint().adjoint() == x


class TestBiprojection:
    def test_cup_cap_is_biprojection(self):
        ok, diag = is_biprojection(cup_cap_projection())
        assert ok
        assert diag["exchange_residual_zero"]

    def test_identity_is_biprojection(self):
        ok, diag = is_biprojection(one(2))
        assert ok
        assert diag["exchange_residual_zero"]

    def test_wenzl_projection_is_not(self):
        ok, diag = is_biprojection(jones_wenzl(2))
        assert not ok
        assert diag["is_projection"]
        assert not diag["rotation_is_projection_multiple"]

    def test_nonprojection_rejected(self):
        ok, diag = is_biprojection(E(2, 1).scale(Fraction(2)))
        assert not ok
        assert not diag["is_projection"]


def test_specialization_at_numeric_delta():
    p2 = jones_wenzl(2)
    coeffs = p2.coefficients_at(Fraction(2))
    assert coeffs[identity_diagram(2)] == 1
    assert coeffs[TLElement.generator(2, 1).adjoint().terms.popitem()[0]] == Fraction(-1, 2)
