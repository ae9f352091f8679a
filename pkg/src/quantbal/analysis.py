"""Run metrics and convergence diagnostics for the balancing layer.

Everything here reads the global engine state (balances of every node,
the full distance matrix); none of it is available to the agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import InvariantViolation
from .schedule import gamma_exponent

if TYPE_CHECKING:
    from .balancing import DyadicWeightState
    from .graph import Digraph


@dataclass(frozen=True, slots=True)
class RoundRecord:
    """Snapshot of one round.

    ``eps_units`` is the total imbalance in units of ``2**-gamma_exp``.
    The consensus fields stay ``None`` for pure balancing runs, and ``U``
    is only filled in when the potential was requested and is defined.
    """

    k: int
    gamma_exp: int
    eps_units: int
    decreasing_event: bool
    signals_fired: int
    signals: tuple[int, ...] = ()
    U: int | None = None
    mse: float | None = None
    V_y: float | None = None

    @property
    def eps(self) -> float:
        return math.ldexp(self.eps_units, -self.gamma_exp)

    @property
    def eps_exact(self) -> Fraction:
        return Fraction(self.eps_units, 1 << self.gamma_exp)


@dataclass(frozen=True, slots=True)
class ConsensusRecord(RoundRecord):
    """Round record of a consensus run: adds estimates and quantized values."""

    y: tuple[float, ...] = ()
    x: tuple[float, ...] = ()


def total_imbalance_units(s: DyadicWeightState) -> int:
    return int(np.abs(s.bal).sum())


def total_imbalance(s: DyadicWeightState) -> Fraction:
    """``sum_i |b_i|`` as an exact dyadic rational."""
    return Fraction(total_imbalance_units(s), 1 << s.scale_exp)


def detect_decreasing_event(s: DyadicWeightState, sig: np.ndarray) -> bool:
    """True iff some firing node has an out-neighbor with negative balance."""
    neg = s.bal < 0
    if not neg.any() or not sig.any():
        return False
    # column i of in_mask marks the out-neighbors of i
    neg_out = neg.astype(np.int64) @ s.in_mask
    return bool(((sig > 0) & (neg_out > 0)).any())


@dataclass(frozen=True)
class LevelPartition:
    v_plus: frozenset[int]
    v_minus: frozenset[int]
    levels: tuple[frozenset[int], ...]
    n_max: int | None

    def level_of(self, i: int) -> int | None:
        for n, members in enumerate(self.levels, start=1):
            if i in members:
                return n
        return None


def level_partition(s: DyadicWeightState, g: Digraph | None = None) -> LevelPartition:
    """Split non-negative-balance nodes by hop distance to the negative ones."""
    g = s.graph if g is None else g
    neg = s.bal < 0
    v_minus = frozenset(np.flatnonzero(neg).tolist())
    v_plus = frozenset(np.flatnonzero(~neg).tolist())
    if not v_minus:
        return LevelPartition(v_plus, v_minus, (), None)
    hops = g.dist[:, sorted(v_minus)].min(axis=1)
    finite = [int(hops[i]) for i in sorted(v_plus) if math.isfinite(hops[i])]
    n_max = max(finite, default=None)
    if n_max is None:
        return LevelPartition(v_plus, v_minus, (), None)
    levels = tuple(
        frozenset(i for i in v_plus if hops[i] == n) for n in range(1, n_max + 1)
    )
    return LevelPartition(v_plus, v_minus, levels, n_max)


def potential_U(s: DyadicWeightState, part: LevelPartition) -> int:
    """Mixed-radix potential of the positive balances.

    Level ``V_n`` contributes its clipped normalized balance as the digit
    of weight ``U_n``; lower levels (closer to a negative node) are more
    significant. Undefined when no node has negative balance.
    """
    if not part.v_minus:
        raise ValueError("potential is undefined when no balance is negative")
    if s.scale_exp != gamma_exponent(s.k):
        raise InvariantViolation(
            f"round {s.k}: balances scaled by 2^-{s.scale_exp}, step is 2^-{gamma_exponent(s.k)}"
        )
    dout = s.graph.out_degree
    bal = s.bal
    digits = []
    bases = []
    for members in part.levels:
        digits.append(sum(min(int(bal[i]), int(dout[i])) for i in members))
        bases.append(1 + sum(int(dout[i]) for i in members))
    total = 0
    weight = 1
    # U_n is the product of the bases of all deeper levels
    for digit, base in zip(reversed(digits), reversed(bases)):
        total += weight * digit
        weight *= base
    return total


def mse(y: np.ndarray, y_bar0: float) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.mean((y - y_bar0) ** 2))


def consensus_error(y: np.ndarray, y_bar0: float) -> float:
    """Squared distance ``||y - y_bar0 * 1||^2``."""
    y = np.asarray(y, dtype=float)
    return float(np.sum((y - y_bar0) ** 2))


def rate_statistic(trajectory: Iterable[RoundRecord], k_start: int) -> Fraction:
    """``max k * ||eps(k)||_1`` over recorded rounds ``k >= k_start``.

    Bounded values over growing horizons certify ``||eps(k)||_1 = O(1/k)``
    on the recorded run.
    """
    if k_start < 1:
        raise ValueError(f"k_start must be >= 1, got {k_start}")
    best = Fraction(0)
    for rec in trajectory:
        if rec.k >= k_start:
            best = max(best, rec.k * rec.eps_exact)
    return best


class ProofMonitor:
    """Replays the per-round convergence argument on a running balancer.

    Call `before` with the round-``k`` state, its signals and event flag,
    advance the state, then call `after`. Every check is an exact integer
    comparison; a failure raises `InvariantViolation`.

    Checked each round:

    * imbalance drops by at least ``2*gamma(k)`` on decreasing events and
      is unchanged otherwise;
    * the sign partition is unchanged on non-event rounds;
    * while ``||eps(k)||_1 >= 2N(N-1)gamma(k)`` and no event occurs, the
      potential rises by at least one and stays in ``[0, N**(2N))``;
    * such a round is followed by an event within ``N**(2N)`` rounds.
    """

    def __init__(self, graph: Digraph):
        n = graph.node_count
        self.threshold_units = 2 * n * (n - 1)
        self.potential_ceiling = n ** (2 * n)
        self.rounds_checked = 0
        self.events = 0
        self.potential_checks = 0
        self.max_potential = 0
        self.worst_event_wait = 0
        self.pending_since: int | None = None
        self._prev = None

    def before(self, s: DyadicWeightState, sig: np.ndarray, event: bool, eps_units: int) -> None:
        above = eps_units >= self.threshold_units
        if above and self.pending_since is None:
            self.pending_since = s.k
        if event:
            self.events += 1
            if self.pending_since is not None:
                self.worst_event_wait = max(self.worst_event_wait, s.k - self.pending_since)
                self.pending_since = None
        elif self.pending_since is not None and s.k - self.pending_since > self.potential_ceiling:
            raise InvariantViolation(
                f"no decreasing event within {self.potential_ceiling} rounds of round {self.pending_since}"
            )
        potential = None
        part = None
        if above and not event:
            part = level_partition(s)
            potential = self._checked_potential(s, part)
        neg = s.bal < 0 if eps_units else None
        self._prev = (s.k, s.scale_exp, eps_units, event, neg, potential)

    def quiet(self, s: DyadicWeightState) -> None:
        """Account for round ``s.k``, about to run with no node firing.

        Nothing but the scale changes on such a round. It also certifies
        that the imbalance is below the potential threshold: a total
        positive balance of ``N(N-1)gamma`` forces some node over its
        firing threshold.
        """
        self.rounds_checked += 1
        if self.pending_since is not None or int(np.abs(s.bal).sum()) >= self.threshold_units:
            raise InvariantViolation(f"round {s.k}: no node fires above the imbalance threshold")

    def after(self, s: DyadicWeightState) -> None:
        if self._prev is None:
            raise RuntimeError("after() called without before()")
        k, exp, eps_units, event, neg, potential = self._prev
        self._prev = None
        self.rounds_checked += 1
        new_units = int(np.abs(s.bal).sum())
        shift = s.scale_exp - exp
        if event:
            if new_units > (eps_units - 2) << shift:
                raise InvariantViolation(
                    f"round {k}: decreasing event but imbalance went "
                    f"{eps_units}/2^{exp} -> {new_units}/2^{s.scale_exp}"
                )
            return
        if new_units != eps_units << shift:
            raise InvariantViolation(
                f"round {k}: no decreasing event but imbalance changed "
                f"{eps_units}/2^{exp} -> {new_units}/2^{s.scale_exp}"
            )
        if neg is not None and not np.array_equal(neg, s.bal < 0):
            raise InvariantViolation(f"round {k}: sign partition changed without a decreasing event")
        if potential is not None:
            new_potential = self._checked_potential(s, level_partition(s))
            if new_potential < potential + 1:
                raise InvariantViolation(
                    f"round {k}: potential did not increase ({potential} -> {new_potential})"
                )

    def _checked_potential(self, s: DyadicWeightState, part: LevelPartition) -> int:
        u = potential_U(s, part)
        if not 0 <= u < self.potential_ceiling:
            raise InvariantViolation(f"round {s.k}: potential {u} outside [0, {self.potential_ceiling})")
        self.potential_checks += 1
        self.max_potential = max(self.max_potential, u)
        return u
