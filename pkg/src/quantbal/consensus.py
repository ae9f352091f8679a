"""Two-bit quantized average consensus on top of the balancing engine.

Each round every agent sends its out-neighbors a two-bit message: the
balancing bit and a dithered one-bit quantization of its estimate. The
estimate moves along the weighted disagreement with its in-neighbors,
plus a ``b_i * x_i`` correction that makes the network sum of estimates
invariant even while the weights are still unbalanced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .analysis import (
    ConsensusRecord,
    ProofMonitor,
    consensus_error,
    detect_decreasing_event,
    mse,
    total_imbalance_units,
)
from .balancing import DyadicWeightState, check_invariants, init_balancer
from .errors import InvariantViolation, NonInformativeAverageError
from .graph import Digraph
from .schedule import AlphaSchedule

#: Rounds per Philox block in `DitherStream`. Part of the reproducibility contract.
DITHER_BLOCK = 1024

_SUM_RTOL = 1e-10


@dataclass(frozen=True)
class QuantizerConfig:
    q_min: float = 0.0
    q_max: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.q_min) and math.isfinite(self.q_max)):
            raise ValueError("quantizer bounds must be finite")
        if not self.q_min < self.q_max:
            raise ValueError(f"need q_min < q_max, got [{self.q_min}, {self.q_max}]")

    @property
    def width(self) -> float:
        return self.q_max - self.q_min


class TwoBitMessage(NamedTuple):
    n: int
    x: float


def clip_estimate(y, quant: QuantizerConfig):
    return np.minimum(np.maximum(y, quant.q_min), quant.q_max)


def _quantize(y_tilde, quant: QuantizerConfig, u):
    p = (y_tilde - quant.q_min) / quant.width
    return np.where(u < p, quant.q_max, quant.q_min)


def dithered_quantize(y_tilde, quant: QuantizerConfig, rng: np.random.Generator):
    """Round to ``q_max`` with probability ``(y - q_min)/(q_max - q_min)``, else ``q_min``.

    Works elementwise on arrays; a scalar input gives a Python float.
    """
    u = rng.random(np.shape(y_tilde))
    x = _quantize(np.asarray(y_tilde, dtype=float), quant, u)
    return float(x) if x.ndim == 0 else x


class DitherStream:
    """Counter-based uniforms, one per (round, node).

    The value for round ``k`` and node ``i`` is entry ``(k % B, i)`` of a
    Philox block keyed by ``key`` whose counter starts at block ``k // B``,
    so it depends only on ``(key, k, i)`` and never on visiting order.
    """

    def __init__(self, key: int, n_nodes: int):
        self.key = int(key)
        self.n_nodes = n_nodes
        self._index = -1
        self._block = None

    def uniforms(self, k: int) -> np.ndarray:
        b, r = divmod(k, DITHER_BLOCK)
        if b != self._index:
            bitgen = np.random.Philox(key=self.key, counter=[0, b, 0, 0])
            self._block = np.random.Generator(bitgen).random((DITHER_BLOCK, self.n_nodes))
            self._index = b
        return self._block[r]


class ConsensusState:
    """Estimates ``y(k)`` plus the shared-clock balancing state.

    ``y_bar0`` is the true initial average; it feeds metrics only.
    ``mean_drift`` is the largest ``|mean(y) - y_bar0|`` seen by `run_consensus`.
    """

    __slots__ = ("balancer", "y", "quant", "alpha_sched", "dither", "y_bar0", "mean_drift", "_cache")

    def __init__(self, balancer: DyadicWeightState, y: np.ndarray, quant: QuantizerConfig,
                 alpha_sched: AlphaSchedule, dither: DitherStream, y_bar0: float):
        self.balancer = balancer
        self.y = y
        self.quant = quant
        self.alpha_sched = alpha_sched
        self.dither = dither
        self.y_bar0 = y_bar0
        self.mean_drift = 0.0
        self._cache = None

    @property
    def k(self) -> int:
        return self.balancer.k

    @property
    def graph(self) -> Digraph:
        return self.balancer.graph

    def copy(self) -> "ConsensusState":
        dither = DitherStream(self.dither.key, self.dither.n_nodes)
        out = ConsensusState(self.balancer.copy(), self.y.copy(), self.quant, self.alpha_sched,
                             dither, self.y_bar0)
        out.mean_drift = self.mean_drift
        return out

    def real_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """``A(k)`` and ``b(k)`` as floats (cached until a weight changes)."""
        rev = self.balancer.revision
        if self._cache is None or self._cache[0] != rev:
            self._cache = (rev, self.balancer.weights(), self.balancer.balances())
        return self._cache[1], self._cache[2]

    def messages(self, n: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Balancing bits and quantized estimates drawn from the round-``k`` snapshot."""
        if n is None:
            n = self.balancer.signals()
        x = _quantize(clip_estimate(self.y, self.quant), self.quant, self.dither.uniforms(self.k))
        return n, x

    def wire_messages(self) -> list[TwoBitMessage]:
        n, x = self.messages()
        return [TwoBitMessage(int(a), float(b)) for a, b in zip(n, x)]

    def advance(self, n: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """One synchronous round in place; returns the messages sent."""
        n, x = self.messages(n)
        A, b = self.real_weights()
        step = self.alpha_sched(self.k)
        drift = (A * (x[np.newaxis, :] - x[:, np.newaxis])).sum(axis=1) + b * x
        self.y = self.y + step * drift
        self.balancer.advance(n)
        return n, x


def init_consensus(
    g: Digraph,
    y0,
    quant: QuantizerConfig = QuantizerConfig(),
    alpha_sched: AlphaSchedule = AlphaSchedule(),
    seed: int = 0,
) -> ConsensusState:
    y0 = np.array(y0, dtype=float)
    if y0.shape != (g.node_count,):
        raise ValueError(f"need {g.node_count} initial values, got shape {y0.shape}")
    if not np.isfinite(y0).all():
        raise ValueError("initial values must be finite")
    y_bar0 = float(np.mean(y0))
    if not quant.q_min <= y_bar0 <= quant.q_max:
        raise NonInformativeAverageError(
            f"initial average {y_bar0} lies outside the quantizer range [{quant.q_min}, {quant.q_max}]"
        )
    return ConsensusState(init_balancer(g), y0, quant, alpha_sched,
                          DitherStream(seed, g.node_count), y_bar0)


def laplacian_update(y: np.ndarray, A: np.ndarray, x: np.ndarray, step: float) -> np.ndarray:
    """Vector form ``y - step * (S_out - A) @ x`` with ``S_out = diag(column sums of A)``."""
    lap = np.diag(A.sum(axis=0)) - A
    return y - step * (lap @ x)


def step_consensus(s: ConsensusState) -> ConsensusState:
    nxt = s.copy()
    nxt.advance()
    return nxt


def run_consensus(
    s: ConsensusState,
    max_iters: int,
    observer: Callable[[ConsensusRecord], None] | None = None,
    *,
    tol: float | None = None,
    observe_every: int = 1,
    check: bool = True,
    monitor: ProofMonitor | None = None,
) -> ConsensusState:
    """Run up to ``max_iters`` rounds, or until the MSE drops to ``tol``.

    The observer is called on rounds divisible by ``observe_every`` and on
    the final round. Checks (sum preservation, balancing invariants and
    convergence replays) run every round regardless.
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be positive, got {max_iters}")
    if observe_every < 1:
        raise ValueError(f"observe_every must be positive, got {observe_every}")
    state = s.copy()
    bal = state.balancer
    if check and monitor is None:
        monitor = ProofMonitor(state.graph)
    total = float(state.y.sum())
    n_nodes = len(state.y)
    state.mean_drift = max(state.mean_drift, abs(total / n_nodes - state.y_bar0))
    while True:
        k = state.k
        done = k >= max_iters
        if tol is not None and not done:
            done = mse(state.y, state.y_bar0) <= tol
        if observer is not None and (done or k % observe_every == 0):
            n, x = state.messages()
            observer(ConsensusRecord(
                k, bal.scale_exp, total_imbalance_units(bal), detect_decreasing_event(bal, n),
                int(n.sum()), tuple(n.tolist()),
                mse=mse(state.y, state.y_bar0), V_y=consensus_error(state.y, state.y_bar0),
                y=tuple(state.y.tolist()), x=tuple(x.tolist()),
            ))
        if done:
            return state
        n = bal.signals()
        if not n.any():
            # weights untouched; only the scale may move
            if monitor is not None:
                monitor.quiet(bal)
            exp = bal.scale_exp
            state.advance(n)
            if check and bal.scale_exp != exp:
                check_invariants(bal)
        else:
            if monitor is not None:
                monitor.before(bal, n, detect_decreasing_event(bal, n), total_imbalance_units(bal))
            state.advance(n)
            if check:
                check_invariants(bal)
            if monitor is not None:
                monitor.after(bal)
        new_total = float(state.y.sum())
        if check and abs(new_total - total) > _SUM_RTOL * (1.0 + abs(total)):
            raise InvariantViolation(f"round {k}: estimate sum moved {total!r} -> {new_total!r}")
        total = new_total
        state.mean_drift = max(state.mean_drift, abs(total / n_nodes - state.y_bar0))
