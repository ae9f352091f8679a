"""Quantized weight balancing and two-bit average consensus on digraphs."""

from .analysis import (
    ConsensusRecord,
    LevelPartition,
    ProofMonitor,
    RoundRecord,
    consensus_error,
    detect_decreasing_event,
    level_partition,
    mse,
    potential_U,
    rate_statistic,
    total_imbalance,
    total_imbalance_units,
)
from .balancing import (
    DyadicWeightState,
    check_invariants,
    compute_signals,
    format_weights_exact,
    init_balancer,
    run_balancer,
    step_balancer,
)
from .consensus import (
    ConsensusState,
    DitherStream,
    QuantizerConfig,
    TwoBitMessage,
    clip_estimate,
    dithered_quantize,
    init_consensus,
    laplacian_update,
    run_consensus,
    step_consensus,
)
from .errors import ConfigError, InvariantViolation, NonInformativeAverageError, ScaleOverflowError
from .graph import (
    UNREACHABLE,
    Digraph,
    directed_distances,
    generate_ring_plus_random,
    is_strongly_connected,
    read_edge_list,
    ring,
    write_edge_list,
)
from .harness import (
    AggregateSeries,
    ExperimentConfig,
    ExperimentResult,
    TrialFailure,
    export_series,
    parse_config,
    run_experiment,
)
from .schedule import AlphaSchedule, alpha, gamma, gamma_exponent

__version__ = "0.1.0"
