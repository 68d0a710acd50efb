"""p-adic cells, their maximal balls, and cell fitting from ball families.

A cell over a named base is the set of points (t, y) with

    base_condition(y),   |alpha(y)| < |t - c(y)| < |beta(y)|,
    t - c(y) in lambda*Q_{m,n}

where either norm comparison may be absent.  A 1-cell (lambda != 0) is a
disjoint union of maximal balls, one per admissible valuation level of
t - c(y); a 0-cell (lambda = 0) is the graph t = c(y) and has no balls.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Sequence

from .qp_core import CosetSpec, PadicScalar, PrimeContext, in_coset
from .regions import Ball, BallRelation, Window
from .terms import (
    Condition,
    EvaluationError,
    ParseError,
    RationalConst,
    Term,
    TrueCond,
    _Parser,
    eval_condition,
    evaluate,
    format_condition,
    format_term,
    free_variables,
)

__all__ = [
    "Comparison",
    "Cell",
    "CellBallIndex",
    "ZeroCellHasNoBalls",
    "NoCandidateFits",
    "cell_contains",
    "ball_of_cell",
    "enumerate_balls",
    "cell_ball_index",
    "fit_cell",
    "point_cell",
    "parse_cell",
    "format_cell",
]


class Comparison(enum.Enum):
    STRICT_LESS = "<"
    NO_CONDITION = "none"


class ZeroCellHasNoBalls(Exception):
    """A 0-cell has an empty collection of balls."""


class NoCandidateFits(Exception):
    """Every candidate center lies inside some input ball."""

    def __init__(self, failures: Mapping):
        self.failures = dict(failures)
        desc = "; ".join(f"{d} inside {b}" for d, b in self.failures.items())
        super().__init__(f"no candidate center lies outside all balls ({desc})")


@dataclass(frozen=True)
class Cell:
    """Definition data of a p-adic cell over an explicit named base.

    base_vars may be empty, in which case the cell lives over a point and
    membership is queried with an empty base binding.
    """

    base_vars: tuple
    fiber_var: str
    base_condition: Condition
    center: Term
    alpha: Optional[Term]
    beta: Optional[Term]
    cmp1: Comparison
    cmp2: Comparison
    coset: CosetSpec

    def __post_init__(self) -> None:
        if (self.alpha is None) != (self.cmp1 is Comparison.NO_CONDITION):
            raise ValueError("alpha term must be present iff cmp1 is a comparison")
        if (self.beta is None) != (self.cmp2 is Comparison.NO_CONDITION):
            raise ValueError("beta term must be present iff cmp2 is a comparison")

    @property
    def is_zero_cell(self) -> bool:
        return self.coset.is_zero

    @property
    def context(self) -> PrimeContext:
        return self.coset.lam.context

    def center_at(self, y: Mapping) -> PadicScalar:
        return evaluate(self.center, y, self.context)

    def level_bounds(self, y: Mapping) -> tuple:
        """Admissible ord(t - c(y)) range as (lo, hi); None means unbounded.

        |alpha| < |t-c| caps the level above (ord < ord alpha) and
        |t-c| < |beta| bounds it below (ord > ord beta).  Boundary terms
        map to nonzero values; a zero boundary is a domain error.
        """
        lo = hi = None
        if self.beta is not None:
            b = evaluate(self.beta, y, self.context).ord()
            if not b.is_finite:
                raise EvaluationError("boundary term beta evaluates to zero")
            lo = b.value + 1
        if self.alpha is not None:
            a = evaluate(self.alpha, y, self.context).ord()
            if not a.is_finite:
                raise EvaluationError("boundary term alpha evaluates to zero")
            hi = a.value - 1
        return lo, hi

    def __str__(self) -> str:
        return format_cell(self)


def cell_contains(cell: Cell, t: PadicScalar, y: Optional[Mapping] = None) -> bool:
    """Exact membership test for (t, y) against the three-clause definition."""
    y = y or {}
    if not eval_condition(cell.base_condition, y, cell.context):
        return False
    delta = t - cell.center_at(y)
    level = delta.ord()
    lo, hi = cell.level_bounds(y)
    if lo is not None and not level >= lo:
        return False
    if hi is not None and not level <= hi:
        return False
    return in_coset(delta, cell.coset)


def ball_of_cell(cell: Cell, t: PadicScalar, y: Optional[Mapping] = None) -> Ball:
    """The maximal ball B with B x {y} inside the cell that contains t.

    Computed by the translation-invariant construction t + p^(m + a) Z_p
    with a = ord(t - c(y)); equal to the level-a set
    {w : ord(w - c(y)) = a, ac_m(w - c(y)) = ac_m(lambda)}.
    """
    y = y or {}
    if cell.is_zero_cell:
        raise ZeroCellHasNoBalls("a 0-cell has no balls")
    if not cell_contains(cell, t, y):
        raise ValueError(f"point {t} is not in the cell fiber")
    a = (t - cell.center_at(y)).ord().value
    return Ball(t, cell.coset.m + a)


def enumerate_balls(cell: Cell, y: Optional[Mapping], window: Window) -> list:
    """All maximal balls of a 1-cell above y with level inside the window.

    Levels run over window values congruent to ord(lambda) mod n and
    compatible with the alpha/beta bounds; the returned balls are pairwise
    disjoint, ordered by level.
    """
    y = y or {}
    if cell.is_zero_cell:
        raise ZeroCellHasNoBalls("a 0-cell has no balls")
    if not eval_condition(cell.base_condition, y, cell.context):
        return []
    ctx = cell.context
    c = cell.center_at(y)
    lo, hi = cell.level_bounds(y)
    lam_ord = cell.coset.lam.ord().value
    residue = cell.coset.lam.ac(cell.coset.m).residue
    m, n = cell.coset.m, cell.coset.n
    lo = window.v_min if lo is None else max(lo, window.v_min)
    hi = window.v_max if hi is None else min(hi, window.v_max)
    balls = []
    for a in range(lo, hi + 1):
        if (a - lam_ord) % n != 0:
            continue
        rep = PadicScalar(c.value + residue * ctx.power(a), ctx)
        balls.append(Ball(rep, a + m))
    return balls


@dataclass(frozen=True)
class CellBallIndex:
    """The nonempty ball levels of a cell fiber, as computed over a window."""

    cell: Cell
    base_point: tuple  # sorted (name, PadicScalar) pairs
    ball_ords: frozenset


def cell_ball_index(cell: Cell, y: Optional[Mapping], window: Window) -> CellBallIndex:
    y = y or {}
    levels = frozenset(
        b.radius_ord - cell.coset.m for b in enumerate_balls(cell, y, window)
    )
    return CellBallIndex(cell, tuple(sorted(y.items())), levels)


# ---------------------------------------------------------------------------
# cell fitting (balls -> cells around a candidate center)


def point_cell(
    center: PadicScalar,
    coset: CosetSpec,
    level_min: Optional[int] = None,
    level_max: Optional[int] = None,
    fiber_var: str = "t",
) -> Cell:
    """A cell over a point base with constant center and level range.

    The level range is encoded through constant boundary terms:
    beta = p^(level_min - 1) bounds below, alpha = p^(level_max + 1) above.
    """
    ctx = center.context
    alpha = beta = None
    cmp1 = cmp2 = Comparison.NO_CONDITION
    if level_max is not None:
        alpha = RationalConst(ctx.power(level_max + 1))
        cmp1 = Comparison.STRICT_LESS
    if level_min is not None:
        beta = RationalConst(ctx.power(level_min - 1))
        cmp2 = Comparison.STRICT_LESS
    return Cell(
        base_vars=(),
        fiber_var=fiber_var,
        base_condition=TrueCond(),
        center=RationalConst(center.value),
        alpha=alpha,
        beta=beta,
        cmp1=cmp1,
        cmp2=cmp2,
        coset=coset,
    )


def _greedy_progressions(levels: frozenset) -> tuple:
    out = []
    remaining = set(levels)
    while remaining:
        m = min(remaining)
        best = (m, m, 1)
        best_len = 1
        for d in sorted({x - m for x in remaining if x > m}):
            length = 1
            nxt = m + d
            while nxt in remaining:
                length += 1
                nxt += d
            if length > best_len:
                best_len = length
                best = (m, m + (length - 1) * d, d)
        lo, hi, d = best
        remaining -= set(range(lo, hi + 1, d))
        out.append(best)
    return tuple(out)


@lru_cache(maxsize=None)
def _min_progressions(levels: frozenset) -> tuple:
    """Minimal partition of a finite integer set into arithmetic progressions.

    Each progression (lo, hi, step) stands for {lo, lo+step, ..., hi}; a
    singleton is (a, a, 1).  Exact search with memoization; inputs beyond 16
    levels fall back to a greedy cover.
    """
    if not levels:
        return ()
    if len(levels) > 16:
        return _greedy_progressions(levels)
    m = min(levels)
    options = [((m, m, 1), levels - {m})]
    for d in sorted({x - m for x in levels if x > m}):
        chain = [m]
        nxt = m + d
        while nxt in levels:
            chain.append(nxt)
            nxt += d
        for length in range(2, len(chain) + 1):
            prog = (m, chain[length - 1], d)
            options.append((prog, levels - frozenset(chain[:length])))
    best = None
    for prog, rest in options:
        cand = (prog,) + _min_progressions(frozenset(rest))
        if best is None or len(cand) < len(best):
            best = cand
    return best


def fit_cell(
    balls: Sequence[Ball],
    candidate_centers: Iterable[PadicScalar],
    fiber_var: str = "t",
) -> list:
    """Fit a minimal list of point-base cells whose balls are exactly the input.

    The first candidate center d lying outside every ball is used.  Each
    ball then has the unique description {w : ord(w-d) = b, ac_m(w-d) = xi}
    with m forced by the radius; balls are grouped by (m, xi) and each
    group's level set is split into a minimal number of arithmetic
    progressions, one cell per progression.
    """
    balls = list(balls)
    for i, b1 in enumerate(balls):
        for b2 in balls[i + 1 :]:
            if b1.relation(b2) is not BallRelation.DISJOINT:
                raise ValueError(f"input balls are not pairwise disjoint: {b1} vs {b2}")
    if not balls:
        return []
    failures = {}
    for d in candidate_centers:
        inside = [b for b in balls if b.contains(d)]
        if inside:
            failures[d] = inside[0]
            continue
        return _fit_with_center(balls, d, fiber_var)
    raise NoCandidateFits(failures)


def _fit_with_center(balls: Sequence[Ball], d: PadicScalar, fiber_var: str) -> list:
    ctx = d.context
    groups: dict = {}
    for ball in balls:
        delta = ball.center - d
        b = delta.ord().value
        m = ball.radius_ord - b
        if m < 1:
            raise ValueError(f"candidate {d} is not separated from ball {ball}")
        xi = delta.ac(m).residue
        groups.setdefault((m, xi), set()).add(b)
    cells = []
    for (m, xi), levels in sorted(groups.items()):
        for lo, hi, step in _min_progressions(frozenset(levels)):
            lam = PadicScalar(xi * ctx.power(lo), ctx)
            coset = CosetSpec(lam, m, step)
            cells.append(point_cell(d, coset, level_min=lo, level_max=hi, fiber_var=fiber_var))
    return cells


# ---------------------------------------------------------------------------
# cell literal syntax:
#   cell(center=<term>; coset=<rat>*Q(<m>,<n>); ord in [a,b] | ord > a |
#        ord < b | all; base=<cond>; var=<name>)


def _split_segments(body: str) -> list:
    parts = []
    depth = 0
    current = []
    for ch in body:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == ";" and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    tail = "".join(current).strip()
    if tail:
        parts.append(tail)
    return parts


def parse_cell(text: str, ctx: PrimeContext) -> Cell:
    """Parse the CLI cell literal into a Cell bound to the given prime."""
    text = text.strip()
    if not (text.startswith("cell(") and text.endswith(")")):
        raise ParseError("cell literal must look like cell(...)", 1, 1)
    from .terms import parse_condition, parse_term

    segments = _split_segments(text[len("cell(") : -1])
    center: Term = RationalConst(Fraction(0))
    coset = None
    level_min = level_max = None
    alpha = beta = None
    base: Condition = TrueCond()
    fiber_var = "t"
    for seg in segments:
        if seg == "all":
            continue
        if seg.startswith("center="):
            center = parse_term(seg[len("center=") :])
        elif seg.startswith("coset="):
            coset = _parse_coset(seg[len("coset=") :], ctx)
        elif seg.startswith("base="):
            base = parse_condition(seg[len("base=") :])
        elif seg.startswith("var="):
            fiber_var = seg[len("var=") :].strip()
        elif seg.startswith("alpha="):
            alpha = parse_term(seg[len("alpha=") :])
        elif seg.startswith("beta="):
            beta = parse_term(seg[len("beta=") :])
        elif seg.startswith("ord"):
            level_min, level_max = _parse_ord_spec(seg)
        else:
            raise ParseError(f"unrecognized cell segment {seg!r}", 1, 1)
    if coset is None:
        raise ParseError("cell literal requires a coset segment", 1, 1)
    if level_max is not None:
        alpha = RationalConst(ctx.power(level_max + 1))
    if level_min is not None:
        beta = RationalConst(ctx.power(level_min - 1))
    base_vars = tuple(v for v in free_variables(base) if v != fiber_var)
    for part in (center, alpha, beta):
        if part is None:
            continue
        for v in free_variables(part):
            if v != fiber_var and v not in base_vars:
                base_vars = base_vars + (v,)
    return Cell(
        base_vars=base_vars,
        fiber_var=fiber_var,
        base_condition=base,
        center=center,
        alpha=alpha,
        beta=beta,
        cmp1=Comparison.NO_CONDITION if alpha is None else Comparison.STRICT_LESS,
        cmp2=Comparison.NO_CONDITION if beta is None else Comparison.STRICT_LESS,
        coset=coset,
    )


def _parse_coset(text: str, ctx: PrimeContext) -> CosetSpec:
    parser = _Parser(text)
    lam = parser.rational()
    parser.expect("*")
    parser.expect("Q")
    parser.expect("(")
    m = parser.signed_int()
    parser.expect(",")
    n = parser.signed_int()
    parser.expect(")")
    parser.expect_eof()
    return CosetSpec(ctx.scalar(lam), m, n)


def _parse_ord_spec(seg: str) -> tuple:
    parser = _Parser(seg)
    parser.expect("ord")
    if parser.accept("in"):
        parser.expect("[")
        lo = parser.signed_int()
        parser.expect(",")
        hi = parser.signed_int()
        parser.expect("]")
        parser.expect_eof()
        if lo > hi:
            raise ParseError("empty ord range", 1, 1)
        return lo, hi
    if parser.accept(">"):
        lo = parser.signed_int()
        parser.expect_eof()
        return lo + 1, None
    if parser.accept("<"):
        hi = parser.signed_int()
        parser.expect_eof()
        return None, hi - 1
    raise ParseError(f"bad ord spec {seg!r}", 1, 1)


def format_cell(cell: Cell) -> str:
    parts = [f"center={format_term(cell.center)}", f"coset={cell.coset}"]
    lo = hi = None
    if cell.beta is not None and isinstance(cell.beta, RationalConst):
        b = cell.context.scalar(cell.beta.value).ord()
        lo = b.value + 1 if b.is_finite else None
    if cell.alpha is not None and isinstance(cell.alpha, RationalConst):
        a = cell.context.scalar(cell.alpha.value).ord()
        hi = a.value - 1 if a.is_finite else None
    if lo is not None and hi is not None:
        parts.append(f"ord in [{lo},{hi}]")
    elif lo is not None:
        parts.append(f"ord > {lo - 1}")
    elif hi is not None:
        parts.append(f"ord < {hi + 1}")
    else:
        parts.append("all")
    if cell.alpha is not None and not isinstance(cell.alpha, RationalConst):
        parts.append(f"alpha={format_term(cell.alpha)}")
    if cell.beta is not None and not isinstance(cell.beta, RationalConst):
        parts.append(f"beta={format_term(cell.beta)}")
    if not isinstance(cell.base_condition, TrueCond):
        parts.append(f"base={format_condition(cell.base_condition)}")
    if cell.fiber_var != "t":
        parts.append(f"var={cell.fiber_var}")
    return "cell(" + "; ".join(parts) + ")"
