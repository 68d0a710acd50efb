"""Exact arithmetic in Q_p over rational representatives.

Every scalar is an exact rational number viewed p-adically, so the
valuation, the norm and the angular components are computed without
approximation: the valuation of a/b is the multiplicity of p in a minus
the multiplicity of p in b, and unit parts are reduced by exact modular
inversion.  Norms are never materialized as reals; they travel as
integer exponents of p, with a separate flag for zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

__all__ = [
    "PrimeContext",
    "PadicScalar",
    "Valuation",
    "INFINITE_ORD",
    "AngularComponent",
    "CosetSpec",
    "in_coset",
    "tuple_norm",
]

RationalLike = Union[int, str, Fraction]


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _int_multiplicity(n: int, p: int) -> int:
    """Multiplicity of p in the nonzero integer n."""
    v = 0
    n = abs(n)
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True)
class PrimeContext:
    """The ambient field Q_p; p doubles as residue cardinality and uniformizer."""

    p: int

    def __post_init__(self) -> None:
        if not _is_prime(self.p):
            raise ValueError(f"p must be a prime >= 2, got {self.p!r}")

    def scalar(self, value: RationalLike, den: int | None = None) -> PadicScalar:
        if den is not None:
            value = Fraction(value, den)
        return PadicScalar(Fraction(value), self)

    def power(self, k: int) -> Fraction:
        """p^k as an exact rational; k may be negative."""
        return Fraction(self.p) ** k

    def units_mod(self, n: int) -> list[int]:
        """All residues in [1, p^n) that are units mod p, in ascending order."""
        if n < 1:
            raise ValueError("modulus depth must be >= 1")
        pn = self.p**n
        return [u for u in range(1, pn) if u % self.p != 0]


@dataclass(frozen=True)
class Valuation:
    """An element of the value group Z extended by +infinity (the ord of 0).

    Infinity compares greater than every finite valuation, and addition with
    anything saturates to infinity, so zero results propagate without
    sentinel integers.  Reading ``.value`` on the infinite element raises.
    """

    _raw: "int | None"

    @staticmethod
    def finite(v: int) -> "Valuation":
        return Valuation(int(v))

    @staticmethod
    def infinity() -> "Valuation":
        return Valuation(None)

    @property
    def is_finite(self) -> bool:
        return self._raw is not None

    @property
    def value(self) -> int:
        if self._raw is None:
            raise ValueError("the infinite valuation has no integer value")
        return self._raw

    def _key(self) -> tuple[int, int]:
        return (1, 0) if self._raw is None else (0, self._raw)

    @staticmethod
    def _coerce(other: "Valuation | int") -> "Valuation":
        if isinstance(other, Valuation):
            return other
        if isinstance(other, int):
            return Valuation(other)
        return NotImplemented  # type: ignore[return-value]

    def __lt__(self, other: "Valuation | int") -> bool:
        other = self._coerce(other)
        return self._key() < other._key()

    def __le__(self, other: "Valuation | int") -> bool:
        other = self._coerce(other)
        return self._key() <= other._key()

    def __gt__(self, other: "Valuation | int") -> bool:
        other = self._coerce(other)
        return self._key() > other._key()

    def __ge__(self, other: "Valuation | int") -> bool:
        other = self._coerce(other)
        return self._key() >= other._key()

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int):
            other = Valuation(other)
        if not isinstance(other, Valuation):
            return NotImplemented
        return self._raw == other._raw

    def __hash__(self) -> int:
        return hash(self._raw)

    def __add__(self, other: "Valuation | int") -> "Valuation":
        other = self._coerce(other)
        if self._raw is None or other._raw is None:
            return INFINITE_ORD
        return Valuation(self._raw + other._raw)

    __radd__ = __add__

    def __str__(self) -> str:
        return "+inf" if self._raw is None else str(self._raw)

    def __repr__(self) -> str:
        return f"Valuation({self})"


INFINITE_ORD = Valuation.infinity()


@dataclass(frozen=True)
class AngularComponent:
    """The unit part of a scalar reduced mod p^n; residue 0 encodes the zero scalar."""

    p: int
    n: int
    residue: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("angular component depth must be >= 1")
        pn = self.p**self.n
        if not 0 <= self.residue < pn:
            raise ValueError(f"residue {self.residue} outside [0, {pn})")
        if self.residue != 0 and self.residue % self.p == 0:
            raise ValueError("nonzero angular component must be a unit mod p")

    @property
    def modulus(self) -> int:
        return self.p**self.n

    @property
    def is_zero(self) -> bool:
        return self.residue == 0

    def __mul__(self, other: "AngularComponent") -> "AngularComponent":
        if (self.p, self.n) != (other.p, other.n):
            raise ValueError("angular components live at different depths")
        if self.is_zero or other.is_zero:
            return AngularComponent(self.p, self.n, 0)
        return AngularComponent(self.p, self.n, (self.residue * other.residue) % self.modulus)

    def __str__(self) -> str:
        return f"{self.residue} mod {self.p}^{self.n}"


@dataclass(frozen=True)
class PadicScalar:
    """An exact rational viewed p-adically.

    Carries its prime context; valuation, norm exponent and angular
    components are computed on demand and are exact.
    """

    value: Fraction
    context: PrimeContext

    def __post_init__(self) -> None:
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))

    # -- valuation-layer queries -------------------------------------

    @property
    def p(self) -> int:
        return self.context.p

    @property
    def is_zero(self) -> bool:
        return self.value == 0

    def ord(self) -> Valuation:
        """Exact p-adic valuation; +infinity iff the scalar is zero."""
        if self.value == 0:
            return INFINITE_ORD
        p = self.context.p
        return Valuation.finite(
            _int_multiplicity(self.value.numerator, p)
            - _int_multiplicity(self.value.denominator, p)
        )

    def norm_exponent(self) -> "int | None":
        """The exponent e with |x| = p^e, or None for x = 0 (the zero flag)."""
        v = self.ord()
        return None if not v.is_finite else -v.value

    def norm_value(self) -> Fraction:
        """|x| as an exact rational number (0 for the zero scalar)."""
        e = self.norm_exponent()
        return Fraction(0) if e is None else self.context.power(e)

    def unit_part(self) -> Fraction:
        """x / p^ord(x) as an exact rational; requires x != 0."""
        if self.value == 0:
            raise ZeroDivisionError("zero has no unit part")
        return self.value / self.context.power(self.ord().value)

    def ac(self, n: int) -> AngularComponent:
        """Angular component mod p^n: unit part reduced exactly; 0 maps to 0."""
        if n < 1:
            raise ValueError("angular component depth must be >= 1")
        if self.value == 0:
            return AngularComponent(self.context.p, n, 0)
        pn = self.context.p**n
        u = self.unit_part()
        inv_den = pow(u.denominator, -1, pn)
        return AngularComponent(self.context.p, n, (u.numerator * inv_den) % pn)

    def reduce_mod_power(self, k: int) -> PadicScalar:
        """Canonical representative of x + p^k Z_p: the smallest nonnegative
        integer multiple of p^ord(x) in the class (0 when ord(x) >= k)."""
        v = self.ord()
        if not v.is_finite or v.value >= k:
            return PadicScalar(Fraction(0), self.context)
        span = self.context.p ** (k - v.value)
        u = self.unit_part()
        r = (u.numerator * pow(u.denominator, -1, span)) % span
        return PadicScalar(r * self.context.power(v.value), self.context)

    # -- exact field arithmetic ---------------------------------------

    def _check(self, other: "PadicScalar") -> None:
        if self.context != other.context:
            raise ValueError("scalars from different prime contexts")

    def __add__(self, other: "PadicScalar") -> "PadicScalar":
        self._check(other)
        return PadicScalar(self.value + other.value, self.context)

    def __sub__(self, other: "PadicScalar") -> "PadicScalar":
        self._check(other)
        return PadicScalar(self.value - other.value, self.context)

    def __mul__(self, other: "PadicScalar") -> "PadicScalar":
        self._check(other)
        return PadicScalar(self.value * other.value, self.context)

    def __truediv__(self, other: "PadicScalar") -> "PadicScalar":
        self._check(other)
        return PadicScalar(self.value / other.value, self.context)

    def __neg__(self) -> "PadicScalar":
        return PadicScalar(-self.value, self.context)

    def __pow__(self, k: int) -> "PadicScalar":
        return PadicScalar(self.value**k, self.context)

    # Rational-value ordering; used for reproducible witness selection.
    def __lt__(self, other: "PadicScalar") -> bool:
        self._check(other)
        return self.value < other.value

    def __le__(self, other: "PadicScalar") -> bool:
        self._check(other)
        return self.value <= other.value

    def __str__(self) -> str:
        return str(self.value)

    def __repr__(self) -> str:
        return f"PadicScalar({self.value}, p={self.context.p})"


@dataclass(frozen=True)
class CosetSpec:
    """The coset lambda*Q_{m,n} of the multiplicative group
    Q_{m,n} = {x != 0 : ord(x) = 0 mod n, ac_m(x) = 1}.

    lambda = 0 encodes the degenerate coset {0} (the 0-cell case).
    """

    lam: PadicScalar
    m: int
    n: int

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise ValueError("coset depths m, n must be >= 1")

    @property
    def is_zero(self) -> bool:
        return self.lam.is_zero

    def __str__(self) -> str:
        return f"{self.lam}*Q({self.m},{self.n})"


def in_coset(x: PadicScalar, spec: CosetSpec) -> bool:
    """Exact membership of x in lambda*Q_{m,n}.

    For lambda = 0 the coset is {0}; otherwise x must be nonzero with
    ord(x) - ord(lambda) divisible by n and ac_m(x / lambda) = 1.
    """
    if spec.is_zero:
        return x.is_zero
    if x.is_zero:
        return False
    shift = x.ord().value - spec.lam.ord().value
    if shift % spec.n != 0:
        return False
    return (x / spec.lam).ac(spec.m).residue == 1


def tuple_norm(xs: Sequence[PadicScalar] | Iterable[PadicScalar]) -> "int | None":
    """Norm exponent of a tuple: max of the component exponents.

    Returns None (the zero flag) iff every component is zero; rejects an
    empty sequence.
    """
    xs = list(xs)
    if not xs:
        raise ValueError("tuple_norm of an empty sequence")
    best: "int | None" = None
    for x in xs:
        e = x.norm_exponent()
        if e is not None and (best is None or e > best):
            best = e
    return best
