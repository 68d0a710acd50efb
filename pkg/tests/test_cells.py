import itertools
from fractions import Fraction

import pytest

from ultralip.qp_core import CosetSpec, PrimeContext
from ultralip.regions import Ball, BallRelation, Window, enumerate_window
from ultralip.cells import (
    Cell,
    Comparison,
    NoCandidateFits,
    ZeroCellHasNoBalls,
    ball_of_cell,
    cell_ball_index,
    cell_contains,
    enumerate_balls,
    fit_cell,
    format_cell,
    parse_cell,
    point_cell,
)
from ultralip.terms import RationalConst, TrueCond, parse_condition, parse_term


def unit_coset_cell(ctx, m=1, n=1, lam=1, level_min=None, level_max=None):
    return point_cell(ctx.scalar(0), CosetSpec(ctx.scalar(lam), m, n), level_min, level_max)


class TestMembership:
    def test_examples(self, ctx3):
        cell = unit_coset_cell(ctx3)
        assert cell_contains(cell, ctx3.scalar(4))
        assert not cell_contains(cell, ctx3.scalar(2))
        assert not cell_contains(cell, ctx3.scalar(0))

    def test_zero_cell_is_graph_of_center(self, ctx3):
        cell = point_cell(ctx3.scalar(5), CosetSpec(ctx3.scalar(0), 1, 1))
        assert cell_contains(cell, ctx3.scalar(5))
        assert not cell_contains(cell, ctx3.scalar(6))

    def test_base_condition_and_center_terms(self, ctx3):
        cell = Cell(
            base_vars=("y",),
            fiber_var="t",
            base_condition=parse_condition("|y| = |1|"),
            center=parse_term("y^2"),
            alpha=None,
            beta=None,
            cmp1=Comparison.NO_CONDITION,
            cmp2=Comparison.NO_CONDITION,
            coset=CosetSpec(ctx3.scalar(1), 1, 1),
        )
        y = {"y": ctx3.scalar(2)}
        assert cell_contains(cell, ctx3.scalar(5), y)  # 5 - 4 = 1 in Q(1,1)
        assert not cell_contains(cell, ctx3.scalar(5), {"y": ctx3.scalar(3)})  # base fails


class TestBallOfCell:
    def test_examples(self, ctx3):
        cell = unit_coset_cell(ctx3, m=1)
        assert ball_of_cell(cell, ctx3.scalar(4)) == Ball(ctx3.scalar(1), 1)
        cell2 = unit_coset_cell(ctx3, m=2)
        assert ball_of_cell(cell2, ctx3.scalar(1)) == Ball(ctx3.scalar(1), 2)
        assert ball_of_cell(cell, ctx3.scalar(3)) == Ball(ctx3.scalar(3), 2)

    def test_zero_cell_has_no_balls(self, ctx3):
        cell = point_cell(ctx3.scalar(0), CosetSpec(ctx3.scalar(0), 1, 1))
        with pytest.raises(ZeroCellHasNoBalls):
            ball_of_cell(cell, ctx3.scalar(0))

    def test_point_outside_rejected(self, ctx3):
        with pytest.raises(ValueError):
            ball_of_cell(unit_coset_cell(ctx3), ctx3.scalar(2))

    def test_maximality(self, ctx3):
        """The ball is inside the fiber and its one-step enlargement is not;
        probed exhaustively one residue level deeper."""
        points = {
            1: (ctx3.scalar(1), ctx3.scalar(4), ctx3.scalar(3), ctx3.scalar(Fraction(1, 3))),
            2: (ctx3.scalar(1), ctx3.scalar(10), ctx3.scalar(3), ctx3.scalar(Fraction(1, 3))),
        }
        for m in (1, 2):
            cell = unit_coset_cell(ctx3, m=m)
            for t in points[m]:
                ball = ball_of_cell(cell, t)
                for probe in ball.representatives(2):
                    assert cell_contains(cell, probe)
                bigger = Ball(t, ball.radius_ord - 1)
                assert any(
                    not cell_contains(cell, probe) for probe in bigger.representatives(2)
                )

    def test_formula_equivalence(self, ctx3):
        """The translation construction t + p^(m + ord t) Z_p equals the level
        set {w : ord(w) = a, ac_m(w) = ac_m(lambda)} on every representative."""
        for m in (1, 2):
            for t in enumerate_window(Window(-2, 2, m), ctx3):
                lam_residue = t.ac(m).residue
                lam = ctx3.scalar(Fraction(lam_residue) * Fraction(3) ** t.ord().value)
                cell = point_cell(ctx3.scalar(0), CosetSpec(lam, m, 1))
                assert cell_contains(cell, t)
                constructed = ball_of_cell(cell, t)
                a = t.ord().value
                set_formula = Ball(
                    ctx3.scalar(Fraction(lam_residue) * Fraction(3) ** a), a + m
                )
                assert constructed == set_formula


class TestEnumerateBalls:
    def test_congruence_filter(self, ctx3):
        cell = unit_coset_cell(ctx3, m=1, n=2)
        balls = enumerate_balls(cell, {}, Window(0, 4, 1))
        assert [b.radius_ord - 1 for b in balls] == [0, 2, 4]

    def test_boundary_bounds(self, ctx3):
        cell = unit_coset_cell(ctx3, level_min=1)
        balls = enumerate_balls(cell, {}, Window(0, 3, 1))
        assert [b.radius_ord - 1 for b in balls] == [1, 2, 3]

    def test_zero_cell_error(self, ctx3):
        cell = point_cell(ctx3.scalar(0), CosetSpec(ctx3.scalar(0), 1, 1))
        with pytest.raises(ZeroCellHasNoBalls):
            enumerate_balls(cell, {}, Window(0, 1, 1))

    def test_balls_disjoint_and_in_cell(self, ctx3):
        cell = unit_coset_cell(ctx3, m=2, n=2, lam=Fraction(5, 3))
        balls = enumerate_balls(cell, {}, Window(-3, 3, 1))
        for b1, b2 in itertools.combinations(balls, 2):
            assert b1.relation(b2) is BallRelation.DISJOINT
        for b in balls:
            for probe in b.representatives(1):
                assert cell_contains(cell, probe)

    def test_cell_ball_index(self, ctx3):
        cell = unit_coset_cell(ctx3, m=1, n=2)
        idx = cell_ball_index(cell, {}, Window(0, 4, 1))
        assert idx.ball_ords == frozenset({0, 2, 4})

    def test_balls_above_a_base_point(self, ctx3):
        cell = Cell(
            base_vars=("y",),
            fiber_var="t",
            base_condition=parse_condition("|y| = |1|"),
            center=parse_term("y^2"),
            alpha=None,
            beta=None,
            cmp1=Comparison.NO_CONDITION,
            cmp2=Comparison.NO_CONDITION,
            coset=CosetSpec(ctx3.scalar(1), 1, 1),
        )
        y = {"y": ctx3.scalar(2)}
        balls = enumerate_balls(cell, y, Window(0, 2, 1))
        assert [b.radius_ord for b in balls] == [1, 2, 3]
        for b in balls:
            for probe in b.representatives(1):
                assert cell_contains(cell, probe, y)
        # a base point failing the base condition has no balls above it
        assert enumerate_balls(cell, {"y": ctx3.scalar(3)}, Window(0, 2, 1)) == []


class TestFitCell:
    def test_single_progression(self, ctx3):
        balls = [Ball(ctx3.scalar(3**a), a + 1) for a in range(3)]
        cells = fit_cell(balls, [ctx3.scalar(0)])
        assert len(cells) == 1
        cell = cells[0]
        assert cell.coset.m == 1 and cell.coset.n == 1
        assert set(enumerate_balls(cell, {}, Window(0, 2, 1))) == set(balls)

    def test_two_ac_classes(self, ctx3):
        balls = [Ball(ctx3.scalar(1), 1), Ball(ctx3.scalar(2), 1)]
        cells = fit_cell(balls, [ctx3.scalar(0)])
        assert len(cells) == 2
        residues = {c.coset.lam.ac(1).residue for c in cells}
        assert residues == {1, 2}

    def test_no_candidate_fits(self, ctx3):
        with pytest.raises(NoCandidateFits):
            fit_cell([Ball(ctx3.scalar(1), 1)], [ctx3.scalar(1)])

    def test_second_candidate_used(self, ctx3):
        balls = [Ball(ctx3.scalar(1), 1)]
        cells = fit_cell(balls, [ctx3.scalar(4), ctx3.scalar(0)])
        assert len(cells) == 1
        assert set(enumerate_balls(cells[0], {}, Window(0, 0, 1))) == set(balls)

    def test_minimal_progressions(self, ctx3):
        balls = [Ball(ctx3.scalar(3**a), a + 1) for a in (0, 1, 2, 4)]
        cells = fit_cell(balls, [ctx3.scalar(0)])
        assert len(cells) == 2
        covered = set()
        for c in cells:
            covered |= set(enumerate_balls(c, {}, Window(0, 4, 1)))
        assert covered == set(balls)

    def test_roundtrip_mixed_radii(self, ctx5):
        balls = [
            Ball(ctx5.scalar(2), 1),
            Ball(ctx5.scalar(10), 2),
            Ball(ctx5.scalar(50), 3),
            Ball(ctx5.scalar(8), 2),
        ]
        cells = fit_cell(balls, [ctx5.scalar(0)])
        covered = []
        for c in cells:
            covered.extend(enumerate_balls(c, {}, Window(-1, 4, 1)))
        assert sorted(covered, key=lambda b: (b.radius_ord, b.center.value)) == sorted(
            set(balls), key=lambda b: (b.radius_ord, b.center.value)
        )
        for b1, b2 in itertools.combinations(covered, 2):
            assert b1 != b2

    def test_overlapping_input_rejected(self, ctx3):
        with pytest.raises(ValueError):
            fit_cell([Ball(ctx3.scalar(1), 1), Ball(ctx3.scalar(4), 2)], [ctx3.scalar(0)])


class TestCellLiterals:
    def test_parse_and_format_roundtrip(self, ctx3):
        for src in (
            "cell(center=0; coset=1*Q(1,1); all)",
            "cell(center=1/3; coset=2*Q(2,3); ord in [0,4])",
            "cell(center=0; coset=1*Q(1,1); ord > 2)",
            "cell(center=0; coset=-1*Q(1,2); ord < 5)",
        ):
            cell = parse_cell(src, ctx3)
            assert parse_cell(format_cell(cell), ctx3) == cell

    def test_base_and_var_segments(self, ctx3):
        cell = parse_cell("cell(center=y; coset=1*Q(1,1); all; base=|y| = |1|; var=x)", ctx3)
        assert cell.fiber_var == "x"
        assert cell.base_vars == ("y",)
        assert cell_contains(cell, ctx3.scalar(3), {"y": ctx3.scalar(2)})

    def test_missing_coset_rejected(self, ctx3):
        from ultralip.terms import ParseError

        with pytest.raises(ParseError):
            parse_cell("cell(center=0; all)", ctx3)
