import random
from fractions import Fraction

import pytest

from ultralip.qp_core import PrimeContext


def random_rational(rng: random.Random, p: int, spread: int = 4) -> Fraction:
    """A nonzero rational with p-adic valuation scattered in [-spread, spread]."""
    num = rng.randint(1, 999) * rng.choice([-1, 1])
    den = rng.randint(1, 999)
    k = rng.randint(-spread, spread)
    return Fraction(num, den) * Fraction(p) ** k


@pytest.fixture(scope="session")
def ctx3() -> PrimeContext:
    return PrimeContext(3)


@pytest.fixture(scope="session")
def ctx2() -> PrimeContext:
    return PrimeContext(2)


@pytest.fixture(scope="session")
def ctx5() -> PrimeContext:
    return PrimeContext(5)
