"""Finite-blocklength achievability bounds for short-packet FBL and HARQ-IR
transmission over Rayleigh block-fading channels with pilot-assisted
transmission and scaled nearest-neighbor decoding."""

from .channel_sim import (
    BlockBatch,
    SystemConfig,
    db_to_linear,
    derive_seed,
    linear_to_db,
    sample_block,
    sample_block_batch,
    substream,
)
from .errors import ConfigError, InfeasibleError
from .fbl_bound import (
    FblEvaluation,
    log_m_minus_1,
    min_slots,
    rcus_error_bound,
    rcus_summands,
)
from .harq_bound import (
    HarqEvaluation,
    StoppingStats,
    TrialTrajectory,
    empirical_wald_check,
    find_threshold,
    min_rounds,
    sample_trajectories,
    stopping_stats,
    undetected_bound,
)
from .info_density import block_density, kappa, logcosh, round_increment
from .sweep import CurvePoint, SweepPlan, energy_curve, latency_cdf_curve, rate_curve

__version__ = "0.1.0"

__all__ = [
    "BlockBatch",
    "ConfigError",
    "CurvePoint",
    "FblEvaluation",
    "HarqEvaluation",
    "InfeasibleError",
    "StoppingStats",
    "SweepPlan",
    "SystemConfig",
    "TrialTrajectory",
    "block_density",
    "db_to_linear",
    "derive_seed",
    "empirical_wald_check",
    "energy_curve",
    "find_threshold",
    "kappa",
    "latency_cdf_curve",
    "linear_to_db",
    "log_m_minus_1",
    "logcosh",
    "min_rounds",
    "min_slots",
    "rate_curve",
    "rcus_error_bound",
    "rcus_summands",
    "round_increment",
    "sample_block",
    "sample_block_batch",
    "sample_trajectories",
    "stopping_stats",
    "substream",
    "undetected_bound",
    "__version__",
]
