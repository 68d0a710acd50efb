import dataclasses
import itertools
import random
from fractions import Fraction

import pytest

from ultralip.qp_core import PrimeContext
from ultralip.regions import Window, enumerate_window
from ultralip.prepare import (
    FactoredTerm,
    parse_factored,
    piece_contains,
    prepare,
    value_unit_class,
    verify_prepared,
)


def in_domain(f, w, t):
    """t lies in some window annulus around some center (and is no center)."""
    if any(t.value == c.value for c in f.centers):
        return False
    for c in f.centers:
        o = (t - c).ord()
        if o.is_finite and w.v_min <= o.value <= w.v_max:
            return True
    return False


def domain_sample(f, w, depth=2, deep_probes=2):
    """Representatives of every window annulus around every center, plus a few
    deeper probes (the tie handoffs must cover those too)."""
    ctx = f.context
    pts = {}
    for c in f.centers:
        for x in enumerate_window(Window(w.v_min, w.v_max, depth), ctx):
            pts[(c + x).value] = None
        for extra in range(1, deep_probes + 1):
            pts[c.value + ctx.power(w.v_max + extra)] = None
    return [ctx.scalar(v) for v in pts]


def assert_partition(f, pieces, w, depth=2):
    for t in domain_sample(f, w, depth):
        hits = sum(1 for p in pieces if piece_contains(f, p, t))
        if in_domain(f, w, t):
            assert hits == 1, f"{t} covered {hits} times"
        else:
            assert hits <= 1, f"{t} covered {hits} times outside the window"


class TestWorkedExamples:
    def test_two_centers_p5(self, ctx5):
        """f = t(t-1) on ord-window [-2,3]: far region has slope 2, the unit
        annulus splits into classes with |f| = 1, and each center keeps a
        deep region with slope 1."""
        f = parse_factored("1 * (t - 0) * (t - 1)", ctx5)
        pieces = prepare(f, Window(-2, 3, 1))
        by_profile = {}
        for p in pieces:
            key = (p.chosen_center_index, p.level_min, p.level_max, p.exponent, p.h_exponent)
            by_profile.setdefault(key, []).append(p)
        assert (0, -2, -1, 2, 0) in by_profile  # |f| = |t|^2 far out
        assert (0, 1, None, 1, 0) in by_profile  # |f| = |t| close to 0
        assert (1, 1, None, 1, 0) in by_profile  # |f| = |t-1| close to 1
        ties = [p for p in pieces if p.level_min == p.level_max == 0]
        assert {p.residue for p in ties} == {2, 3, 4}  # class 1 hands off to center 1
        for p in ties:
            assert p.h_exponent + p.exponent * 0 == 0  # |f| = 1 there
        assert all(verify_prepared(f, p, 3).passed for p in pieces)
        assert_partition(f, pieces, Window(-2, 3, 1))

    def test_single_center_square(self, ctx3):
        f = parse_factored("1 * (t - 0)^2", ctx3)
        pieces = prepare(f, Window(-1, 2, 1))
        assert len(pieces) == 2  # one per unit class mod 3
        for p in pieces:
            assert (p.exponent, p.h_exponent) == (2, 0)
            assert (p.level_min, p.level_max) == (-1, 2)
        assert all(verify_prepared(f, p, 3).passed for p in pieces)
        assert_partition(f, pieces, Window(-1, 2, 1))

    def test_tie_handoff_p2(self, ctx2):
        """f = t(t-2) at p=2: the tie annulus ord(t)=1 is exactly the deep
        region of the center 2, so no level-1 pieces around 0 survive."""
        f = parse_factored("1 * (t - 0) * (t - 2)", ctx2)
        pieces = prepare(f, Window(-1, 3, 1))
        assert not any(
            p.chosen_center_index == 0 and p.level_min == 1 for p in pieces
        )
        deep = [p for p in pieces if p.level_min == 2 and p.level_max is None]
        assert {p.chosen_center_index for p in deep} == {0, 1}
        assert all(verify_prepared(f, p, 3).passed for p in pieces)
        assert_partition(f, pieces, Window(-1, 3, 1))

    def test_negative_exponents(self, ctx3):
        f = parse_factored("2 * (t - 0)^-1 * (t - 1)^2", ctx3)
        pieces = prepare(f, Window(-2, 2, 1))
        assert all(verify_prepared(f, p, 2).passed for p in pieces)
        assert_partition(f, pieces, Window(-2, 2, 1))

    def test_deeper_ac_split(self, ctx3):
        f = parse_factored("1 * (t - 0) * (t - 1)", ctx3)
        pieces = prepare(f, Window(-1, 2, 1), m_depth=2)
        assert all(p.m == 2 for p in pieces)
        assert all(verify_prepared(f, p, 2).passed for p in pieces)
        assert_partition(f, pieces, Window(-1, 2, 1))

    def test_clustered_centers(self, ctx3):
        """Three centers with two distance scales: 0 and 9 tie deep, 1 ties
        with both at level 0."""
        f = parse_factored("1 * (t - 0) * (t - 9) * (t - 1)", ctx3)
        pieces = prepare(f, Window(-1, 4, 1))
        assert all(verify_prepared(f, p, 2).passed for p in pieces)
        assert_partition(f, pieces, Window(-1, 4, 1), depth=2)


class TestFactoredTerm:
    def test_parse_and_print(self, ctx5):
        f = parse_factored("3/2 * (t - 1/5)^2 * (t + 2)^-1", ctx5)
        assert f.unit.value == Fraction(3, 2)
        assert f.factors[0][0].value == Fraction(1, 5)
        assert f.factors[1] == (ctx5.scalar(-2), -1)

    def test_evaluate_matches_term(self, ctx5):
        f = parse_factored("2 * (t - 1)^2 * (t - 3)^-1", ctx5)
        term = f.as_term("t")
        from ultralip.terms import evaluate

        for v in (0, 2, Fraction(1, 5), 10):
            t = ctx5.scalar(v)
            assert f.evaluate(t) == evaluate(term, {"t": t})
            assert f.ord_at(t) == f.evaluate(t).ord()

    def test_validation(self, ctx3):
        with pytest.raises(ValueError):
            FactoredTerm(ctx3.scalar(0), ((ctx3.scalar(1), 1),))
        with pytest.raises(ValueError):
            FactoredTerm(ctx3.scalar(1), ((ctx3.scalar(1), 1), (ctx3.scalar(1), 2)))
        with pytest.raises(ValueError):
            FactoredTerm(ctx3.scalar(1), ((ctx3.scalar(1), 0),))

    def test_pole_at_center(self, ctx3):
        f = parse_factored("1 * (t - 1)^-1", ctx3)
        with pytest.raises(ZeroDivisionError):
            f.ord_at(ctx3.scalar(1))


class TestMutationSensitivity:
    def test_exponent_corruption_detected(self, ctx5):
        f = parse_factored("1 * (t - 0) * (t - 1)", ctx5)
        for piece in prepare(f, Window(-2, 3, 1)):
            for delta in (-1, 1):
                bad = dataclasses.replace(piece, exponent=piece.exponent + delta)
                check = verify_prepared(f, bad, 3)
                assert not check.passed
                assert check.witness is not None

    def test_h_corruption_detected(self, ctx5):
        f = parse_factored("1 * (t - 0) * (t - 1)", ctx5)
        for piece in prepare(f, Window(-1, 1, 1)):
            bad = dataclasses.replace(piece, h_exponent=piece.h_exponent + 1)
            check = verify_prepared(f, bad, 3)
            assert not check.passed

    def test_unrefined_tie_piece_fails(self, ctx5):
        """A tie-annulus piece whose class straddles the handoff (no ac
        refinement) cannot satisfy the identity: coset refinement is
        necessary, not incidental."""
        f = parse_factored("1 * (t - 0) * (t - 1)", ctx5)
        tie = next(
            p for p in prepare(f, Window(-1, 1, 1))
            if p.level_min == p.level_max == 0
        )
        smeared = dataclasses.replace(tie, residue=1)  # the handed-off class
        check = verify_prepared(f, smeared, 2)
        assert not check.passed


class TestRandomOracle:
    def _random_factored(self, rng, ctx, max_degree=4):
        k = rng.randint(1, 3)
        centers = []
        seen = set()
        while len(centers) < k:
            v = rng.randint(-2, 2)
            u = rng.choice([1, 2, 3, 7, rng.randint(1, 30)])
            if u % ctx.p == 0:
                continue
            c = Fraction(u * rng.choice([-1, 1])) * Fraction(ctx.p) ** v
            if c not in seen:
                seen.add(c)
                centers.append(ctx.scalar(c))
        budget = max_degree
        factors = []
        for i, c in enumerate(centers):
            hi = budget - (len(centers) - i - 1)
            a = rng.randint(1, max(1, hi)) * rng.choice([1, 1, -1])
            budget -= abs(a)
            factors.append((c, a))
        unit = ctx.scalar(random_unitish(rng, ctx.p))
        return FactoredTerm(unit, tuple(factors))

    def test_random_terms_pass_oracle(self, ctx3):
        rng = random.Random(42)
        for _ in range(8):
            f = self._random_factored(rng, ctx3)
            pieces = prepare(f, Window(-3, 3, 1))
            for piece in pieces:
                check = verify_prepared(f, piece, 2)
                assert check.passed, f"{f}: {check.detail}"
            assert_partition(f, pieces, Window(-3, 3, 1), depth=1)


def random_unitish(rng, p):
    num = rng.randint(1, 50) * rng.choice([-1, 1])
    den = rng.randint(1, 50)
    x = Fraction(num, den)
    return x if x != 0 else Fraction(1)


class TestValueClassReport:
    def test_constant_class_reported(self, ctx3):
        f = parse_factored("1 * (t - 0)^2", ctx3)
        pieces = prepare(f, Window(0, 1, 1))
        for piece in pieces:
            assert value_unit_class(f, piece, 1) == 1  # squares are ac_1 = 1

    def test_varying_class_is_none(self, ctx3):
        f = parse_factored("1 * (t - 0)", ctx3)
        piece = prepare(f, Window(0, 0, 1))[0]
        assert value_unit_class(f, piece, 3) is None
