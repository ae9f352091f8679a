"""One-bit weight balancing with exact dyadic arithmetic.

Every agent owns the weights of its incoming edges. In each synchronous
round it compares its balance (in-flow minus out-flow) against
``d_out * gamma(k)``, broadcasts the resulting bit to its out-neighbors,
and raises each incoming weight by ``gamma(k)`` for every in-neighbor
that fired.

Weights and balances are stored as int64 numerators over ``2**scale_exp``
where ``scale_exp`` is the exponent of the current step size. Because the
step only ever halves, a rescale is a doubling of all numerators, and the
threshold test reduces to ``bal[i] >= d_out[i]`` in integers.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

import numpy as np

from .analysis import (
    ProofMonitor,
    RoundRecord,
    detect_decreasing_event,
    level_partition,
    potential_U,
    total_imbalance_units,
)
from .errors import InvariantViolation, ScaleOverflowError
from .graph import Digraph, is_strongly_connected
from .schedule import MAX_SCALE_EXP, gamma_exponent

_DOUBLING_LIMIT = 1 << 61


class DyadicWeightState:
    """Weights ``A(k)`` and balances ``b(k)`` of a balancing run at round ``k``.

    ``w[i, j]`` is the numerator of ``a_ij`` (nonzero only for edges
    ``j -> i``), ``bal[i]`` the numerator of ``b_i``; both over
    ``2**scale_exp``. `revision` counts the rounds in which any weight
    changed, so callers can cache real-valued renderings.
    """

    __slots__ = ("graph", "scale_exp", "w", "bal", "k", "revision", "in_mask", "dout")

    def __init__(self, graph: Digraph, scale_exp: int, w: np.ndarray, bal: np.ndarray, k: int,
                 revision: int = 0):
        self.graph = graph
        self.scale_exp = scale_exp
        self.w = w
        self.bal = bal
        self.k = k
        self.revision = revision
        self.in_mask = graph.in_mask
        self.dout = graph.out_degree

    def copy(self) -> "DyadicWeightState":
        return DyadicWeightState(self.graph, self.scale_exp, self.w.copy(), self.bal.copy(),
                                 self.k, self.revision)

    @property
    def gamma(self) -> Fraction:
        return Fraction(1, 1 << self.scale_exp)

    def weights(self) -> np.ndarray:
        """Real-valued weight matrix ``A(k)``."""
        return np.ldexp(self.w.astype(float), -self.scale_exp)

    def balances(self) -> np.ndarray:
        return np.ldexp(self.bal.astype(float), -self.scale_exp)

    def signals(self) -> np.ndarray:
        return (self.bal >= self.dout).astype(np.int64)

    @property
    def is_balanced(self) -> bool:
        return not self.bal.any()

    def advance(self, sig: np.ndarray | None = None) -> np.ndarray:
        """Run one round in place and return the signals that were sent."""
        if sig is None:
            sig = self.signals()
        if sig.any():
            self.w += self.in_mask * sig
            self.bal += self.in_mask @ sig - self.dout * sig
            self.revision += 1
        self.k += 1
        if gamma_exponent(self.k) > self.scale_exp:
            self._rescale()
        return sig

    def _rescale(self) -> None:
        if self.scale_exp + 1 > MAX_SCALE_EXP:
            raise ScaleOverflowError(
                f"round {self.k}: step exponent would exceed {MAX_SCALE_EXP}; lower max_iters"
            )
        if np.abs(self.w).max() >= _DOUBLING_LIMIT or np.abs(self.bal).max() >= _DOUBLING_LIMIT:
            raise ScaleOverflowError(f"round {self.k}: weight numerators too large to rescale")
        self.w *= 2
        self.bal *= 2
        self.scale_exp += 1

    def __repr__(self) -> str:
        return (f"DyadicWeightState(k={self.k}, scale_exp={self.scale_exp}, "
                f"bal={self.bal.tolist()})")


def init_balancer(g: Digraph) -> DyadicWeightState:
    """Unit weight on every edge, balances ``d_in - d_out``."""
    if not is_strongly_connected(g):
        raise ValueError("weight balancing requires a strongly connected digraph")
    w = g.in_mask.copy()
    bal = g.in_degree - g.out_degree
    return DyadicWeightState(g, 0, w, bal, 0)


def compute_signals(s: DyadicWeightState) -> np.ndarray:
    return s.signals()


def step_balancer(s: DyadicWeightState) -> DyadicWeightState:
    """Return the state one round later; ``s`` is left untouched."""
    nxt = s.copy()
    nxt.advance()
    return nxt


def check_invariants(s: DyadicWeightState) -> None:
    """Structural self-checks; raises `InvariantViolation`."""
    if s.scale_exp != gamma_exponent(s.k):
        raise InvariantViolation(f"round {s.k}: scale exponent {s.scale_exp} out of step")
    if (s.w < 0).any() or (s.w[s.in_mask == 0] != 0).any():
        raise InvariantViolation(f"round {s.k}: weight matrix not compliant with the graph")
    recomputed = s.w.sum(axis=1) - s.w.sum(axis=0)
    if not np.array_equal(recomputed, s.bal):
        raise InvariantViolation(
            f"round {s.k}: tracked balances {s.bal.tolist()} != from weights {recomputed.tolist()}"
        )
    if s.bal.sum() != 0:
        raise InvariantViolation(f"round {s.k}: balances sum to {s.bal.sum()}")


def _within_tol(eps_units: int, scale_exp: int, tol: float) -> bool:
    if tol == 0:
        return eps_units == 0
    return Fraction(eps_units, 1 << scale_exp) <= Fraction(tol)


def run_balancer(
    s: DyadicWeightState,
    tol: float = 0.0,
    max_iters: int = 100_000,
    observer: Callable[[RoundRecord], None] | None = None,
    *,
    check: bool = True,
    monitor: ProofMonitor | None = None,
    record_potential: bool = False,
    observe_every: int = 1,
) -> tuple[DyadicWeightState, int]:
    """Iterate until ``||eps(k)||_1 <= tol`` or ``k == max_iters``.

    The observer sees rounds divisible by ``observe_every`` (default: all
    of them) and always the stopping round.
    With ``check`` on, structural invariants and the per-round convergence checks are
    verified every round (a `ProofMonitor` is created if none is given).
    """
    if tol < 0 or not math.isfinite(tol):
        raise ValueError(f"tol must be a finite non-negative number, got {tol}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be positive, got {max_iters}")
    if observe_every < 1:
        raise ValueError(f"observe_every must be positive, got {observe_every}")
    state = s.copy()
    if check and monitor is None:
        monitor = ProofMonitor(state.graph)
    while True:
        sig = state.signals()
        event = detect_decreasing_event(state, sig)
        eps_units = total_imbalance_units(state)
        done = _within_tol(eps_units, state.scale_exp, tol) or state.k >= max_iters
        if observer is not None and (done or state.k % observe_every == 0):
            u = None
            if record_potential and (state.bal < 0).any():
                u = potential_U(state, level_partition(state))
            observer(RoundRecord(state.k, state.scale_exp, eps_units, event, int(sig.sum()),
                                 tuple(sig.tolist()), U=u))
        if done:
            return state, state.k
        if not sig.any():
            if monitor is not None:
                monitor.quiet(state)
            exp = state.scale_exp
            state.advance(sig)
            if check and state.scale_exp != exp:
                check_invariants(state)
            continue
        if monitor is not None:
            monitor.before(state, sig, event, eps_units)
        state.advance(sig)
        if check:
            check_invariants(state)
        if monitor is not None:
            monitor.after(state)


def format_weights_exact(s: DyadicWeightState) -> str:
    """One ``i j numerator/2^n`` line per edge weight ``a_ij``."""
    rows, cols = np.nonzero(s.in_mask)
    return "\n".join(
        f"{i} {j} {int(s.w[i, j])}/2^{s.scale_exp}" for i, j in zip(rows.tolist(), cols.tolist())
    )
