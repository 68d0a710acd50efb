"""Ultrametric balls, valuation windows, and residue-class enumeration.

A ball is the set center + p^k Z_p.  Windows truncate Q_p to a finite
range of valuations and a finite angular depth M, which makes exhaustive
scans possible; every result obtained this way is labeled with the depth
at which it was verified.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .qp_core import PadicScalar, PrimeContext

__all__ = [
    "Ball",
    "BallRelation",
    "Window",
    "RepresentativeSet",
    "ball_contains",
    "ball_relation",
    "enumerate_window",
]


class BallRelation(enum.Enum):
    """Outcome of comparing two balls; overlap-without-nesting cannot occur."""

    DISJOINT = "disjoint"
    EQUAL = "equal"
    FIRST_INSIDE_SECOND = "first-inside-second"
    SECOND_INSIDE_FIRST = "second-inside-first"


@dataclass(frozen=True)
class Ball:
    """The set center + p^radius_ord Z_p.

    The stored center is canonicalized (reduced mod p^radius_ord), so two
    balls are equal as dataclasses exactly when they are equal as sets.
    """

    center: PadicScalar
    radius_ord: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", self.center.reduce_mod_power(self.radius_ord))

    @property
    def context(self) -> PrimeContext:
        return self.center.context

    def contains(self, x: PadicScalar) -> bool:
        return (x - self.center).ord() >= self.radius_ord

    def relation(self, other: "Ball") -> BallRelation:
        if self.context != other.context:
            raise ValueError("balls from different prime contexts")
        d = (self.center - other.center).ord()
        if self.radius_ord == other.radius_ord:
            return BallRelation.EQUAL if d >= self.radius_ord else BallRelation.DISJOINT
        if self.radius_ord < other.radius_ord:
            # self is the bigger set
            if d >= self.radius_ord:
                return BallRelation.SECOND_INSIDE_FIRST
            return BallRelation.DISJOINT
        if d >= other.radius_ord:
            return BallRelation.FIRST_INSIDE_SECOND
        return BallRelation.DISJOINT

    def representatives(self, depth: int) -> list[PadicScalar]:
        """One point per residue class of the ball mod p^(radius_ord + depth),
        in canonical ascending order: center + p^radius_ord * r, r in [0, p^depth)."""
        if depth < 1:
            raise ValueError("representative depth must be >= 1")
        step = self.context.power(self.radius_ord)
        return [
            PadicScalar(self.center.value + r * step, self.context)
            for r in range(self.context.p**depth)
        ]

    def __str__(self) -> str:
        return f"{self.center} + {self.context.p}^{self.radius_ord}"


def ball_contains(ball: Ball, x: PadicScalar) -> bool:
    return ball.contains(x)


def ball_relation(first: Ball, second: Ball) -> BallRelation:
    return first.relation(second)


@dataclass(frozen=True)
class Window:
    """The annulus {x : v_min <= ord(x) <= v_max} discretized at depth M:
    each valuation level splits into balls of radius ord(x) + M."""

    v_min: int
    v_max: int
    depth: int

    def __post_init__(self) -> None:
        if self.v_min > self.v_max:
            raise ValueError("window requires v_min <= v_max")
        if self.depth < 1:
            raise ValueError("window depth must be >= 1")

    def levels(self) -> range:
        return range(self.v_min, self.v_max + 1)

    def __str__(self) -> str:
        return f"ord in [{self.v_min},{self.v_max}] @ depth {self.depth}"


@dataclass(frozen=True)
class RepresentativeSet:
    """Canonical representatives of the residue classes of a window.

    The granularity map sends each point to the ball it represents; the
    balls are pairwise disjoint and partition the window exactly.
    """

    points: tuple[PadicScalar, ...]
    granularity: Mapping[PadicScalar, Ball] = field(hash=False, compare=False)

    def __iter__(self) -> Iterator[PadicScalar]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def ball_of(self, x: PadicScalar) -> Ball:
        return self.granularity[x]


def enumerate_window(window: Window, ctx: PrimeContext) -> RepresentativeSet:
    """One canonical representative p^v * u per residue class of the window.

    v runs over the window levels and u over the units in [1, p^M); the
    representative's granularity ball is rep + p^(v+M) Z_p.  Zero is never
    enumerated: callers that need it add it explicitly.  The number of
    points is (v_max - v_min + 1) * (p^M - p^(M-1)).
    """
    depth = window.depth
    points: list[PadicScalar] = []
    granularity: dict[PadicScalar, Ball] = {}
    for v in window.levels():
        scale = ctx.power(v)
        for u in ctx.units_mod(depth):
            rep = PadicScalar(u * scale, ctx)
            points.append(rep)
            granularity[rep] = Ball(rep, v + depth)
    return RepresentativeSet(tuple(points), granularity)
