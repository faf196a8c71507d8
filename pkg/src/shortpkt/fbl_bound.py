"""RCUs achievability bound for fixed-blocklength PAT-SNN transmission.

The error probability of a codeword spanning v slots (v*L coherence
blocks) is upper-bounded by E[exp(-[i_s - log(M-1)]^+)] with i_s the
accumulated generalized information density under the transmitted-codeword
law and M = 2^k. ``min_slots`` searches for the smallest v meeting the
reliability target while optimizing the metric scale s and pilot count n_p
on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel_sim import SystemConfig, linear_to_db
from .errors import InfeasibleError
from .info_density import validate_s
from .mc import trial_increments

_LN2 = math.log(2.0)


def log_m_minus_1(k: int) -> float:
    """log(2^k - 1) without forming 2^k; -inf for the single-message code."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k == 0:
        return -math.inf
    return k * _LN2 + math.log1p(-(2.0 ** (-k)))


def rcus_summands(accumulated: np.ndarray, k: int) -> np.ndarray:
    """Per-trial RCUs summands exp(-[A - log(2^k - 1)]^+); each in [0, 1]."""
    z = np.asarray(accumulated, dtype=np.float64) - log_m_minus_1(k)
    np.maximum(z, 0.0, out=z)
    np.negative(z, out=z)
    return np.exp(z, out=z)


def bounds_for_all_v(increments: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """RCUs bound estimate and standard error for every slot count.

    ``increments`` has shape (n_trials, n_rounds); column j is the round
    j+1 increment, so the accumulated density through v slots is the
    cumulative sum. Returns (bounds, std_errs), each of shape (n_rounds,).
    """
    acc = np.cumsum(increments, axis=1, dtype=np.float64)
    summands = rcus_summands(acc, k)
    n = summands.shape[0]
    bounds = summands.mean(axis=0)
    ses = summands.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else \
        np.full(summands.shape[1], math.inf)
    return bounds, ses


def rcus_error_bound(cfg: SystemConfig, s: float, v: int, n_trials: int,
                     seed: int = 0) -> tuple[float, float]:
    """Monte Carlo RCUs error bound for a v-slot codeword.

    Returns (bound, standard error). The rate is implied by cfg.k:
    R = k / (v L n_c), so the union threshold is log(2^k - 1).
    """
    validate_s(s)
    if not 1 <= v <= cfg.n_max:
        raise ValueError(f"v must be in [1, n_max={cfg.n_max}], got {v}")
    incr = trial_increments(cfg, s, n_trials, seed, n_rounds=v)
    bounds, ses = bounds_for_all_v(incr, cfg.k)
    return float(bounds[v - 1]), float(ses[v - 1])


@dataclass(frozen=True)
class FblEvaluation:
    """Result of the FBL slot search at one (rho, L) operating point."""

    v_star: int
    eps_bound: float
    mc_std_err: float
    s_used: float
    n_p_used: int
    rate_bits_per_use: float
    latency_s: float
    energy_per_bit: float
    energy_per_bit_db: float
    rho: float
    L: int
    k: int
    n_trials: int
    seed: int


def make_fbl_evaluation(cfg: SystemConfig, v: int, bound: float, se: float,
                        s: float, n_p: int, n_trials: int,
                        seed: int) -> FblEvaluation:
    eb = cfg.rho * v * cfg.L * cfg.n_c / cfg.k
    return FblEvaluation(
        v_star=v, eps_bound=bound, mc_std_err=se, s_used=s, n_p_used=n_p,
        rate_bits_per_use=cfg.k / (v * cfg.L * cfg.n_c),
        latency_s=v * cfg.d * cfg.T_o,
        energy_per_bit=eb, energy_per_bit_db=linear_to_db(eb),
        rho=cfg.rho, L=cfg.L, k=cfg.k, n_trials=n_trials, seed=seed)


def min_slots(cfg: SystemConfig, s_grid, n_p_grid, n_trials: int,
              seed: int = 0, search_trials: int | None = None,
              eps_target: float | None = None) -> FblEvaluation:
    """Smallest slot count meeting the error target, optimizing (s, n_p).

    For each v ascending from 1 the bound is minimized over the (s, n_p)
    grid; the first v whose optimized bound satisfies
    bound + 2*std_err <= eps_target is returned. With ``search_trials``
    set below ``n_trials``, the grid is ranked on that many trials first
    and only the shortlisted parameters are re-evaluated on the full trial
    budget (the reduced trials are a prefix of the full set, so the
    comparison is common-random-number consistent).

    Raises InfeasibleError (carrying the best bound found) if no v <= n_max
    qualifies.
    """
    from .search import evaluate_schemes

    result = evaluate_schemes(cfg, s_grid, n_p_grid, n_trials, seed,
                              search_trials=search_trials,
                              schemes=("fbl",), eps_target=eps_target)["fbl"]
    if isinstance(result, InfeasibleError):
        raise result
    return result
