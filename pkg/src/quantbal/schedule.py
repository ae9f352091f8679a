"""Step-size sequences.

The weight-balancing step is dyadic: ``gamma(k) = 2**-n`` on the window
``2**n - 1 <= k <= 2**(n+1) - 2``. It is carried around as the integer
exponent ``n`` so that nothing downstream ever rounds it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ConfigError

#: Largest dyadic exponent the balancing engine accepts (int64 headroom).
MAX_SCALE_EXP = 62


def gamma_exponent(k: int) -> int:
    if k < 0:
        raise ValueError(f"round index must be non-negative, got {k}")
    return (k + 1).bit_length() - 1


def gamma(k: int) -> Fraction:
    return Fraction(1, 1 << gamma_exponent(k))


def gamma_window(n: int) -> range:
    """Rounds on which ``gamma`` equals ``2**-n``."""
    return range((1 << n) - 1, (1 << (n + 1)) - 1)


@dataclass(frozen=True)
class AlphaSchedule:
    """Consensus step ``a0 / (k + 1)**tau`` with ``1/2 < tau <= 1``."""

    a0: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if not self.a0 > 0:
            raise ConfigError(f"alpha_a0 must be positive, got {self.a0}")
        if not 0.5 < self.tau <= 1.0:
            raise ConfigError(f"alpha_tau must lie in (1/2, 1], got {self.tau}")

    def __call__(self, k: int) -> float:
        return self.a0 / (k + 1) ** self.tau


def alpha(k: int, sched: AlphaSchedule = AlphaSchedule()) -> float:
    if k < 0:
        raise ValueError(f"round index must be non-negative, got {k}")
    return sched(k)
