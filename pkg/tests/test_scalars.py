import random
from fractions import Fraction

import mpmath
import pytest

from subfactor_lab.scalars import (
    DeltaPolynomial,
    QuadraticNumber,
    RationalFunction,
    evaluate,
    quantum_integer,
    rational_sqrt,
)


def qn(a, b=0, d=2):
    return QuadraticNumber(Fraction(a), Fraction(b), d)


def random_qn(rng, d=2):
    return QuadraticNumber(
        Fraction(rng.randint(-9, 9), rng.randint(1, 7)),
        Fraction(rng.randint(-9, 9), rng.randint(1, 7)),
        d,
    )


class TestQuadraticNumber:
    def test_difference_of_squares(self):
        assert qn(1, 1) * qn(1, -1) == -1

    def test_three_minus_two_root_two_is_positive(self):
        x = qn(3, -2)
        assert x.sign() > 0
        assert x > 0

    def test_inverse_of_two_plus_root_two(self):
        x = qn(2, 1)
        inv = 1 / x
        assert inv == qn(Fraction(1), Fraction(-1, 2))
        assert x * inv == 1

    @pytest.mark.parametrize("d", [2, 3, 5, -3])
    def test_field_axioms_random(self, d):
        rng = random.Random(20240000 + d)
        for _ in range(60):
            x, y, z = (random_qn(rng, d) for _ in range(3))
            assert (x + y) + z == x + (y + z)
            assert (x * y) * z == x * (y * z)
            assert x * (y + z) == x * y + x * z
            assert x + y == y + x
            assert x * y == y * x
            if not x.is_zero():
                assert x * x.inverse() == 1

    def test_ordering_matches_floats(self):
        rng = random.Random(7)
        for _ in range(200):
            x, y = random_qn(rng), random_qn(rng)
            if x == y:
                continue
            assert (x < y) == (float(x) < float(y))

    def test_ordering_rejected_for_imaginary(self):
        with pytest.raises(ValueError):
            qn(1, 1, -3).sign()

    def test_mixed_radicand_rejected(self):
        with pytest.raises(ValueError):
            qn(0, 1, 2) + qn(0, 1, 3)

    def test_rational_cross_field_ok(self):
        assert qn(3, 0, 2) + qn(4, 0, 3) == 7

    def test_division_by_zero(self):
        with pytest.raises(ZeroDivisionError):
            qn(1, 1) / qn(0, 0)

    def test_complex_conjugate(self):
        assert qn(1, 2, 2).complex_conjugate() == qn(1, 2, 2)
        assert qn(1, 2, -3).complex_conjugate() == qn(1, -2, -3)

    def test_exact_sqrt(self):
        # 3 + 2*sqrt(2) = (1 + sqrt(2))^2
        r = qn(3, 2).sqrt()
        assert r == qn(1, 1)
        assert qn(9, 0).sqrt() == 3
        assert qn(8, 0).sqrt() == qn(0, 2)
        assert qn(2, -1).sqrt() is None
        assert qn(-1, 0).sqrt() is None

    def test_str_formats(self):
        assert str(qn(3, -2)) == "3-2√2"
        assert str(qn(0, 1)) == "√2"
        assert str(qn(Fraction(1, 2), Fraction(3, 4))) == "1/2+(3/4)√2"


class TestEvaluate:
    def test_two_minus_root_two(self):
        v = evaluate(qn(2, -1), precision=80)
        with mpmath.workprec(100):
            ref = 2 - mpmath.sqrt(2)
        assert abs(v - ref) < mpmath.mpf(2) ** (-75)

    def test_high_precision_digits(self):
        v = evaluate(qn(2, -1), precision=130)
        assert mpmath.nstr(v, 19) == "0.5857864376269049512"
        with mpmath.workprec(160):
            ref = 2 - mpmath.sqrt(2)
            assert abs(v - ref) < mpmath.mpf(2) ** (-128)

    def test_precision_floor(self):
        with pytest.raises(ValueError):
            evaluate(qn(1, 0), precision=32)

    def test_polynomial_at_two(self):
        p = DeltaPolynomial([-1, 0, 1])  # delta^2 - 1
        assert p(Fraction(2)) == 3
        assert evaluate(p, delta_value=2) == 3

    def test_ring_homomorphism_bound(self):
        rng = random.Random(11)
        for _ in range(50):
            x, y = random_qn(rng), random_qn(rng)
            lhs = evaluate(x * y, precision=60)
            rhs = evaluate(x, precision=60) * evaluate(y, precision=60)
            scale = max(1.0, abs(float(rhs)))
            assert abs(lhs - rhs) <= scale * 2.0 ** (-50)


class TestDeltaPolynomial:
    def test_normalization(self):
        assert DeltaPolynomial([1, 2, 0, 0]).coeffs == (1, 2)
        assert DeltaPolynomial([0, 0]).is_zero()

    def test_ring_ops(self):
        d = DeltaPolynomial.delta()
        p = d * d - 1
        assert p == DeltaPolynomial([-1, 0, 1])
        q, r = divmod(p, d - 1)
        assert q == d + 1 and r.is_zero()

    def test_gcd(self):
        d = DeltaPolynomial.delta()
        a = (d - 1) * (d + 2)
        b = (d - 1) * d
        assert a.gcd(b) == d - 1

    def test_str(self):
        assert str(DeltaPolynomial([-1, 0, 1])) == "δ^2 - 1"
        assert str(DeltaPolynomial([0, Fraction(1, 2)])) == "(1/2)δ"


class TestRationalFunction:
    def test_canonical_form(self):
        d = DeltaPolynomial.delta()
        f = RationalFunction((d * d - 1) * 2, (d - 1) * 2)
        assert f == RationalFunction(d + 1)
        assert f.is_polynomial()

    def test_field_ops_random(self):
        rng = random.Random(3)

        def rand_rf():
            num = DeltaPolynomial([rng.randint(-4, 4) for _ in range(rng.randint(1, 4))])
            den = DeltaPolynomial([rng.randint(-4, 4) for _ in range(rng.randint(1, 3))])
            if den.is_zero():
                den = DeltaPolynomial.constant(1)
            return RationalFunction(num, den)

        for _ in range(40):
            x, y, z = rand_rf(), rand_rf(), rand_rf()
            assert (x + y) * z == x * z + y * z
            if not x.is_zero():
                assert x / x == RationalFunction(1)

    def test_evaluation_pole(self):
        f = RationalFunction(1, DeltaPolynomial.delta())
        assert f(Fraction(2)) == Fraction(1, 2)
        with pytest.raises(ZeroDivisionError):
            f(Fraction(0))


class TestQuantumInteger:
    def test_small_values(self):
        d = DeltaPolynomial.delta()
        assert quantum_integer(0).is_zero()
        assert quantum_integer(1) == 1
        assert quantum_integer(2) == d
        assert quantum_integer(3) == d * d - 1
        assert quantum_integer(4) == d * d * d - 2 * d

    def test_recursion(self):
        d = DeltaPolynomial.delta()
        for n in range(2, 10):
            assert quantum_integer(n + 1) == d * quantum_integer(n) - quantum_integer(n - 1)


def test_rational_sqrt():
    assert rational_sqrt(Fraction(9, 4)) == Fraction(3, 2)
    assert rational_sqrt(Fraction(2)) is None
    assert rational_sqrt(Fraction(-1)) is None
