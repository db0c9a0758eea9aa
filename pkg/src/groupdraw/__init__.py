"""Constrained tournament group-draw engine.

Samplers for the common draw mechanisms (uniform rejection, sequential
pot draws, Metropolis swaps, multiple-rejections races, multiple-balls
allocation), exact feasibility counting, and a Monte Carlo analysis
harness.
"""

from .feasibility import (
    InstanceTooLargeError,
    check_immediate,
    count_completions,
    enumerate_valid,
    is_completable,
    next_position_counts,
)
from .model import (
    Assignment,
    ConfigError,
    DrawConfig,
    EventQuery,
    PRESET_NAMES,
    PartialDraw,
    Team,
    config_to_json,
    get_preset,
    load_config,
    motivating_preset,
    wc2022_preset,
)
from .multiball import (
    BallAllocation,
    EstimatedWeights,
    MDistribution,
    allocate_balls,
    estimate_weights,
    m_distribution,
    m_tail,
    multiball_full_draw,
    select_ball,
)
from .rng import RngStream, as_generator, fresh_seed
from .samplers import (
    GeometricRace,
    OrderPolicy,
    RejectionBudgetError,
    SwapProposal,
    complete_uniform_batch,
    metropolis_chain,
    multiple_rejection_draw,
    multiple_rejection_select,
    propose_swap,
    rejection_draw,
    sample_geometric_lives,
    sequential_draw,
    uefa_variant_draw,
)
from .stats import (
    ComparisonReport,
    GofResult,
    METHOD_NAMES,
    ProbabilityEstimate,
    compare_methods,
    estimate_event,
    gof_against_oracle,
    matrix_to_csv,
    pairwise_matrix,
)

__version__ = "0.1.0"
