import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ultralip.qp_core import (
    AngularComponent,
    CosetSpec,
    INFINITE_ORD,
    PadicScalar,
    PrimeContext,
    Valuation,
    in_coset,
    tuple_norm,
)

rationals = st.fractions(
    min_value=Fraction(-10000), max_value=Fraction(10000), max_denominator=10000
)
primes = st.sampled_from([2, 3, 5, 7])


def scalar(p, value, den=None):
    return PrimeContext(p).scalar(value, den)


class TestValuation:
    def test_examples(self):
        assert scalar(3, 9).ord() == Valuation.finite(2)
        assert scalar(5, 0).ord() == INFINITE_ORD
        assert scalar(3, 45, 2).ord() == Valuation.finite(2)

    def test_infinity_ordering_and_saturation(self):
        assert INFINITE_ORD > Valuation.finite(10**9)
        assert Valuation.finite(3) < INFINITE_ORD
        assert INFINITE_ORD + 5 == INFINITE_ORD
        assert Valuation.finite(2) + Valuation.finite(-3) == Valuation.finite(-1)
        assert INFINITE_ORD + INFINITE_ORD == INFINITE_ORD

    def test_infinite_value_access_raises(self):
        with pytest.raises(ValueError):
            INFINITE_ORD.value

    def test_comparison_with_ints(self):
        assert Valuation.finite(2) >= 2
        assert Valuation.finite(2) < 3
        assert INFINITE_ORD >= 10**6


class TestNorm:
    def test_examples(self):
        assert scalar(3, 9).norm_exponent() == -2
        assert scalar(3, 1, 3).norm_exponent() == 1
        assert scalar(2, 12).norm_exponent() == -2
        assert scalar(2, 0).norm_exponent() is None

    def test_norm_value(self):
        assert scalar(3, 9).norm_value() == Fraction(1, 9)
        assert scalar(5, 0).norm_value() == 0


class TestAngularComponent:
    def test_examples(self):
        assert scalar(3, 45).ac(2).residue == 5
        assert scalar(5, 1, 2).ac(1).residue == 3
        assert scalar(3, 0).ac(1).residue == 0

    def test_zero_iff_source_zero(self):
        assert scalar(7, 0).ac(3).is_zero
        assert not scalar(7, 14).ac(3).is_zero

    def test_invalid_depth(self):
        with pytest.raises(ValueError):
            scalar(3, 1).ac(0)

    def test_nonunit_residue_rejected(self):
        with pytest.raises(ValueError):
            AngularComponent(3, 2, 6)


class TestCosets:
    def test_examples(self):
        ctx = PrimeContext(3)
        q12 = CosetSpec(ctx.scalar(1), 1, 2)
        assert in_coset(ctx.scalar(36), q12)
        assert not in_coset(ctx.scalar(3), q12)
        zero = CosetSpec(ctx.scalar(0), 1, 1)
        assert in_coset(ctx.scalar(0), zero)
        assert not in_coset(ctx.scalar(1), zero)
        assert not in_coset(ctx.scalar(0), q12)

    def test_group_law_on_samples(self, ctx3):
        rng = random.Random(7)
        spec = CosetSpec(ctx3.scalar(1), 2, 3)
        members = []
        for _ in range(12):
            a = rng.randint(-3, 3) * 3
            u = 1 + 9 * rng.randint(0, 30)
            x = ctx3.scalar(Fraction(u) * Fraction(3) ** a)
            assert in_coset(x, spec)
            members.append(x)
        for x in members:
            for y in members:
                assert in_coset(x * y, spec)
            assert in_coset(ctx3.scalar(1) / x, spec)


class TestTupleNorm:
    def test_examples(self):
        ctx = PrimeContext(3)
        assert tuple_norm([ctx.scalar(9), ctx.scalar(1, 3)]) == 1
        c5 = PrimeContext(5)
        assert tuple_norm([c5.scalar(0), c5.scalar(0)]) is None
        c2 = PrimeContext(2)
        assert tuple_norm([c2.scalar(12), c2.scalar(40)]) == -2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            tuple_norm([])


class TestPrimeContext:
    def test_rejects_composites(self):
        for bad in (0, 1, 4, 9, 15):
            with pytest.raises(ValueError):
                PrimeContext(bad)

    def test_units_mod(self):
        assert PrimeContext(3).units_mod(1) == [1, 2]
        assert PrimeContext(3).units_mod(2) == [1, 2, 4, 5, 7, 8]
        assert PrimeContext(2).units_mod(1) == [1]


class TestReduceModPower:
    def test_canonical_representatives(self):
        ctx = PrimeContext(3)
        assert ctx.scalar(4).reduce_mod_power(1).value == 1
        assert ctx.scalar(10).reduce_mod_power(2).value == 1
        assert ctx.scalar(-1).reduce_mod_power(2).value == 8
        assert ctx.scalar(9).reduce_mod_power(1).value == 0
        assert ctx.scalar(1, 3).reduce_mod_power(0).value == Fraction(1, 3)

    @given(rationals, primes, st.integers(min_value=-3, max_value=5))
    def test_residue_is_in_class(self, x, p, k):
        s = PrimeContext(p).scalar(x)
        r = s.reduce_mod_power(k)
        assert (s - r).ord() >= k


class TestUltrametricLaws:
    @given(rationals, rationals, primes)
    def test_strong_triangle(self, x, y, p):
        ctx = PrimeContext(p)
        a, b = ctx.scalar(x), ctx.scalar(y)
        s = (a + b).ord()
        lo = min(a.ord(), b.ord())
        assert s >= lo
        if a.ord() != b.ord():
            assert s == lo

    @given(rationals, rationals, primes)
    def test_multiplicativity(self, x, y, p):
        ctx = PrimeContext(p)
        a, b = ctx.scalar(x), ctx.scalar(y)
        assert (a * b).ord() == a.ord() + b.ord()

    @given(rationals, rationals, primes, st.integers(min_value=1, max_value=3))
    def test_ac_multiplicativity(self, x, y, p, n):
        ctx = PrimeContext(p)
        a, b = ctx.scalar(x), ctx.scalar(y)
        if a.is_zero or b.is_zero:
            return
        assert (a * b).ac(n) == a.ac(n) * b.ac(n)
