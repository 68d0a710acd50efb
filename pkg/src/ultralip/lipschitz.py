"""Lipschitz analysis over windows: empirical constants with witnesses,
certified per-cell constants, the bounded-derivative local check, and the
two counterexample families that separate derivative bounds from
Lipschitz continuity over Q_p.

Constants are carried as integer exponents of p throughout (C = p^k);
empirical scans are lower bounds verified to a stated depth, certified
constants are exact upper bounds on the scanned cell.
"""

from __future__ import annotations

import enum
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

from .qp_core import PadicScalar, PrimeContext, tuple_norm
from .regions import Window, enumerate_window
from .cells import Cell, format_cell
from .terms import (
    BuiltinDomainError,
    BuiltinSpec,
    Condition,
    NormVal,
    PiecewiseFunction,
    Term,
    Variable,
    differentiate,
    eval_condition,
    evaluate,
    evaluate_piecewise,
    format_condition,
    free_variables,
    register_builtin,
)
from .jacobian import (
    BallCorrespondence,
    CertificationFailed,
    JacobianViolation,
    check_jacobian_on_ball,
)

__all__ = [
    "Mode",
    "LipschitzReport",
    "LocalLipschitzCheck",
    "TraceEntry",
    "CounterexampleTrace",
    "EmptyRegion",
    "CenterNotZero",
    "LedgerIdentityViolated",
    "DerivativeBoundExceeded",
    "empirical_lipschitz",
    "certified_cell_constant",
    "check_bounded_derivative_local_lipschitz",
    "counterexample_exloc",
    "counterexample_exloc2",
]


class Mode(enum.Enum):
    EMPIRICAL_LOWER_BOUND = "EmpiricalLowerBound"
    CERTIFIED_UPPER_BOUND = "CertifiedUpperBound"


class EmptyRegion(Exception):
    """No enumerated representative satisfies the region condition."""


class CenterNotZero(Exception):
    """The certified route requires pre-translated cells with center 0."""


class LedgerIdentityViolated(Exception):
    """The per-ball bookkeeping identity m + jac_ord + a = m' + b broke."""

    def __init__(self, ball, detail: str):
        super().__init__(detail)
        self.ball = ball


class DerivativeBoundExceeded(Exception):
    """Some ball has |f'| > epsilon, outside the certified route's premise."""


@dataclass(frozen=True)
class LipschitzReport:
    """Either an empirical lower bound with its witness pair or a certified
    upper bound; the constant is C = p^constant_exponent.

    constant_exponent is None for an empirical scan in which every pair had
    f(x1) = f(x2) (any constant works).  An empirical witness re-evaluates
    to the reported ratio exactly.
    """

    mode: Mode
    constant_exponent: Optional[int]
    witness: Optional[tuple]
    depth: int
    region: str

    def as_json_dict(self) -> dict:
        if self.witness is None:
            witness = None
        elif isinstance(self.witness[0], tuple):
            witness = [[str(v) for v in side] for side in self.witness]
        else:
            witness = [str(v) for v in self.witness]
        return {
            "mode": self.mode.value,
            "C_exponent": self.constant_exponent,
            "witness": witness,
            "depth": self.depth,
            "region": self.region,
        }


@dataclass(frozen=True)
class LocalLipschitzCheck:
    status: str  # "passed" | "failed" | "skipped"
    witness: Optional[tuple]
    detail: str


@dataclass(frozen=True)
class TraceEntry:
    level: int
    witness: tuple
    ratio_exponent: int


@dataclass(frozen=True)
class CounterexampleTrace:
    """A verified family of witness pairs with strictly increasing ratios."""

    prime: int
    level_range: tuple
    entries: tuple
    derivative_entries: Optional[tuple] = None

    def as_json_dict(self) -> dict:
        out = {
            "p": self.prime,
            "levels": [self.level_range[0], self.level_range[1]],
            "entries": [
                {
                    "n": e.level,
                    "witness": [str(w) for w in e.witness],
                    "ratio_exponent": e.ratio_exponent,
                }
                for e in self.entries
            ],
        }
        if self.derivative_entries is not None:
            out["derivative_trace"] = [
                {"n": n, "quotient_exponent": q} for n, q in self.derivative_entries
            ]
        return out


# ---------------------------------------------------------------------------
# the locally constant spike used by the second counterexample family


def _levelspike_value(ctx: PrimeContext, x: PadicScalar) -> PadicScalar:
    """0 on all of p Z_p except the marked ball p^n + p^(3n) Z_p of each
    level n >= 1, where the value is p^(2n); 0 at 0."""
    if x.is_zero:
        return ctx.scalar(0)
    n = x.ord().value
    if n < 1:
        raise BuiltinDomainError("levelspike is defined on p*Z_p and at 0")
    if x.ac(2 * n).residue == 1:
        return PadicScalar(ctx.power(2 * n), ctx)
    return ctx.scalar(0)


register_builtin(
    BuiltinSpec(
        name="levelspike",
        arity=1,
        evaluate=lambda ctx, args: _levelspike_value(ctx, args[0]),
        derivative="zero",
        domain_note="p*Z_p together with 0; locally constant, derivative 0 everywhere",
    )
)


# ---------------------------------------------------------------------------
# empirical scans


def _function_variables(f: Union[Term, PiecewiseFunction]) -> tuple:
    if isinstance(f, PiecewiseFunction):
        return tuple(f.variables)
    names = free_variables(f)
    return names if names else ("t",)


def _value_at(f, binding, ctx) -> PadicScalar:
    if isinstance(f, PiecewiseFunction):
        return evaluate_piecewise(f, binding, ctx)
    return evaluate(f, binding, ctx)


def _scan_chunk(points, values, start, stop):
    """Best (ratio exponent, witness) over pair blocks i in [start, stop).

    Pairs are visited in lexicographic order of the sorted point list, so
    keeping the first maximum yields the lexicographically least witness;
    merging partial results in block order preserves that choice.
    """
    best = None
    best_witness = None
    for i in range(start, stop):
        for j in range(i + 1, len(points)):
            df = values[i] - values[j]
            ef = df.norm_exponent()
            if ef is None:
                continue
            if isinstance(points[i], tuple):
                ex = tuple_norm([a - b for a, b in zip(points[i], points[j])])
            else:
                ex = (points[i] - points[j]).norm_exponent()
            ratio = ef - ex
            if best is None or ratio > best:
                best = ratio
                best_witness = (points[i], points[j])
    return best, best_witness


def empirical_lipschitz(
    f: Union[Term, PiecewiseFunction],
    region: Condition,
    window: Window,
    ctx: PrimeContext,
    depth: Optional[int] = None,
    jobs: int = 1,
    region_text: Optional[str] = None,
) -> LipschitzReport:
    """Largest ratio |f(x1)-f(x2)| / |x1-x2| over all representative pairs.

    This is a lower bound on any valid Lipschitz constant for the region,
    verified to the stated depth; the reported witness is the
    lexicographically least pair achieving it.  Multi-variable functions
    are scanned on tuple grids with the max-norm distance.
    """
    if depth is None:
        depth = window.depth
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    variables = _function_variables(f)
    axis = sorted(enumerate_window(Window(window.v_min, window.v_max, depth), ctx))
    if len(variables) == 1:
        candidates: list = list(axis)
    else:
        candidates = [tuple(t) for t in itertools.product(axis, repeat=len(variables))]

    points = []
    values = []
    for pt in candidates:
        binding = dict(zip(variables, pt if isinstance(pt, tuple) else (pt,)))
        if not eval_condition(region, binding, ctx):
            continue
        points.append(pt)
        values.append(_value_at(f, binding, ctx))
    if not points:
        raise EmptyRegion(f"no representative satisfies {format_condition(region)}")

    blocks = []
    if jobs == 1 or len(points) < 2 * jobs:
        blocks.append(_scan_chunk(points, values, 0, len(points)))
    else:
        bounds = [round(i * len(points) / jobs) for i in range(jobs + 1)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_scan_chunk, points, values, bounds[i], bounds[i + 1])
                for i in range(jobs)
            ]
            blocks = [fut.result() for fut in futures]

    best, best_witness = None, None
    for ratio, witness in blocks:
        if ratio is not None and (best is None or ratio > best):
            best, best_witness = ratio, witness
    return LipschitzReport(
        mode=Mode.EMPIRICAL_LOWER_BOUND,
        constant_exponent=best,
        witness=best_witness,
        depth=depth,
        region=region_text if region_text is not None else format_condition(region),
    )


# ---------------------------------------------------------------------------
# certified constants on cells (one-variable route)


def certified_cell_constant(
    f: Term,
    cell: Cell,
    corr: BallCorrespondence,
    epsilon_exponent: int,
) -> LipschitzReport:
    """Exact Lipschitz constant C = epsilon * p^max(0, m' - m) for a cell.

    Requires both the source cell and the fitted image cell to have center
    0 (pre-translate otherwise).  Every source ball is re-certified at the
    correspondence depth; the bookkeeping identity

        m + jac_ord + a = m' + b

    (a, b the source and image ball levels) is checked on every pair and a
    break raises LedgerIdentityViolated.  jac_ord >= -epsilon_exponent is
    required on every ball, i.e. |f'| <= epsilon = p^epsilon_exponent.
    """
    m = cell.coset.m
    m_prime = corr.fitted_image_cell.coset.m
    if not cell.center_at({}).is_zero:
        raise CenterNotZero("source cell center must be 0")
    if not corr.fitted_image_cell.center_at({}).is_zero:
        raise CenterNotZero("fitted image cell center must be 0")

    for ball, image in corr.pairs:
        result = check_jacobian_on_ball(f, ball, corr.depth)
        if isinstance(result, JacobianViolation):
            raise CertificationFailed(result)
        if result.image != image:
            raise LedgerIdentityViolated(
                ball,
                f"correspondence image {image} of {ball} disagrees with the "
                f"certified image {result.image}",
            )
        if result.jac_ord < -epsilon_exponent:
            raise DerivativeBoundExceeded(
                f"|f'| = p^{-result.jac_ord} > p^{epsilon_exponent} on {ball}"
            )
        a = ball.radius_ord - m
        b = image.radius_ord - m_prime
        if m + result.jac_ord + a != m_prime + b:
            raise LedgerIdentityViolated(
                ball,
                f"m + jac_ord + a = {m + result.jac_ord + a} but m' + b = "
                f"{m_prime + b} on {ball}",
            )

    return LipschitzReport(
        mode=Mode.CERTIFIED_UPPER_BOUND,
        constant_exponent=epsilon_exponent + max(0, m_prime - m),
        witness=None,
        depth=corr.depth,
        region=format_cell(cell),
    )


# ---------------------------------------------------------------------------
# bounded derivative => locally 1-Lipschitz (checked on shared balls)


def check_bounded_derivative_local_lipschitz(
    f: Term,
    region: Condition,
    window: Window,
    ctx: PrimeContext,
    depth: Optional[int] = None,
) -> LocalLipschitzCheck:
    """Check |f(x)-f(y)| <= |x-y| on pairs sharing a level-1 subball.

    The check is gated on |f'| <= 1 at every region representative; when
    the gate fails the test is skipped (reported as such, with the gate
    witness).  Pairs "in a common ball" are representative pairs x, y with
    ord(x - y) > ord(x), i.e. sharing the depth-1 granularity ball of
    their valuation level.
    """
    if depth is None:
        depth = window.depth
    names = free_variables(f)
    if len(names) > 1:
        raise ValueError("the local check is univariate")
    var = names[0] if names else "t"
    deriv = differentiate(f, var)
    reps = sorted(enumerate_window(Window(window.v_min, window.v_max, depth), ctx))
    pts = [x for x in reps if eval_condition(region, {var: x}, ctx)]
    if not pts:
        return LocalLipschitzCheck("passed", None, "region has no representatives")

    for x in pts:
        d = evaluate(deriv, {var: x}, ctx)
        e = d.norm_exponent()
        if e is not None and e > 0:
            return LocalLipschitzCheck(
                "skipped",
                (x,),
                f"|f'({x})| = p^{e} > 1; the bounded-derivative premise fails",
            )

    groups: dict = {}
    for x in pts:
        key = (x.ord().value, x.ac(1).residue)
        groups.setdefault(key, []).append(x)
    for group in groups.values():
        vals = {x: evaluate(f, {var: x}, ctx) for x in group}
        for x, y in itertools.combinations(group, 2):
            if (vals[x] - vals[y]).ord() < (x - y).ord():
                return LocalLipschitzCheck(
                    "failed",
                    (x, y),
                    f"|f({x})-f({y})| > |{x}-{y}|",
                )
    return LocalLipschitzCheck(
        "passed", None, f"checked {len(pts)} representatives at depth {depth}"
    )


# ---------------------------------------------------------------------------
# counterexample families


def counterexample_exloc(
    window: Window, ctx: PrimeContext, depth: Optional[int] = None
) -> CounterexampleTrace:
    """The locally constant norm-embedding map on Z_p minus 0.

    f(t) = normval(t) is constant on every granularity ball, yet
    |f(x1) - f(x2)| = |x2|^(-1) exactly whenever |x2| < |x1|: the ratio
    against |x1 - x2| = |x1| is unbounded as x1 approaches 0.  Both facts
    are verified exhaustively over the window before the trace is emitted;
    the trace follows the diagonal pairs (p^(n-1), p^n) so the ratio
    exponents 2n - 1 grow while the witnesses shrink to 0.
    """
    if window.v_min < 0:
        raise ValueError("the construction lives inside Z_p: require v_min >= 0")
    if depth is None:
        depth = window.depth
    f = NormVal(Variable("t"))
    rset = enumerate_window(Window(window.v_min, window.v_max, depth), ctx)
    values = {x: evaluate(f, {"t": x}, ctx) for x in rset.points}

    # local constancy on every granularity ball
    for x in rset.points:
        for probe in rset.ball_of(x).representatives(1):
            if evaluate(f, {"t": probe}, ctx) != values[x]:
                raise RuntimeError(f"local constancy broke at {x} vs {probe}")

    # the exact pair identity, stronger than the defining inequality
    for x1, x2 in itertools.combinations(rset.points, 2):
        if x1.ord() > x2.ord():
            x1, x2 = x2, x1
        if x1.ord() == x2.ord():
            continue
        if (values[x1] - values[x2]).norm_exponent() != x2.ord().value:
            raise RuntimeError(f"|f(x1)-f(x2)| != |x2|^-1 at ({x1}, {x2})")
        if (x1 - x2).norm_exponent() != -x1.ord().value:
            raise RuntimeError(f"|x1-x2| != |x1| at ({x1}, {x2})")

    entries = []
    for n in range(window.v_min + 1, window.v_max + 1):
        x1 = PadicScalar(ctx.power(n - 1), ctx)
        x2 = PadicScalar(ctx.power(n), ctx)
        ef = (evaluate(f, {"t": x1}, ctx) - evaluate(f, {"t": x2}, ctx)).norm_exponent()
        ex = (x1 - x2).norm_exponent()
        if ef - ex != 2 * n - 1:
            raise RuntimeError(f"trace ratio at level {n} is not 2n-1")
        entries.append(TraceEntry(n, (x1, x2), ef - ex))
    return CounterexampleTrace(ctx.p, (window.v_min, window.v_max), tuple(entries))


def counterexample_exloc2(n_max: int, ctx: PrimeContext) -> CounterexampleTrace:
    """The C^1 spike with zero derivative that is nowhere-Lipschitz at 0.

    p Z_p minus 0 splits into the balls b + b^3 Z_p with b = p^n u, u a
    unit mod p^(2n); the marked ball of level n is u = 1.  The spike g is
    b^2 on the marked ball of each level and 0 elsewhere, with g(0) = 0.
    For each level the emitted witness pair b_i = p^n (marked) and
    b_j = p^n + p^(3n-1) (unmarked, same level) satisfies exactly

        |b_i - b_j| = p * |b_i^3|     and     |g(b_i) - g(b_j)| = |b_i^2|,

    so the ratio is p^(n-1), unbounded in n, while the derivative trace
    |g(p^n) - g(0)| / |p^n| = p^(-n) confirms g'(0) = 0.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    entries = []
    derivative_entries = []
    zero = ctx.scalar(0)
    for n in range(1, n_max + 1):
        b_i = PadicScalar(ctx.power(n), ctx)
        b_j = PadicScalar(ctx.power(n) + ctx.power(3 * n - 1), ctx)
        if b_j.ord().value != n or b_j.ac(2 * n).residue == 1:
            raise RuntimeError(f"witness b_j at level {n} is not an unmarked neighbor")
        gap = (b_i - b_j).norm_exponent()
        if gap != -(3 * n - 1):
            raise RuntimeError(f"|b_i - b_j| != p^(1-3n) at level {n}")
        g_i = _levelspike_value(ctx, b_i)
        g_j = _levelspike_value(ctx, b_j)
        spread = (g_i - g_j).norm_exponent()
        if spread != -2 * n:
            raise RuntimeError(f"|g(b_i) - g(b_j)| != |b_i^2| at level {n}")
        entries.append(TraceEntry(n, (b_i, b_j), spread - gap))
        quotient = (_levelspike_value(ctx, b_i) - _levelspike_value(ctx, zero)).norm_exponent()
        derivative_entries.append((n, quotient - b_i.norm_exponent()))
    return CounterexampleTrace(ctx.p, (1, n_max), tuple(entries), tuple(derivative_entries))
