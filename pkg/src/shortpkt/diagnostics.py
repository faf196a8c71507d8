"""Self-check suite behind the ``validate`` CLI subcommand.

Each check compares an implementation path against an independent
reference: the exact i_0 = 0 identity, the pilot-estimate error variance,
the Gauss-Hermite quadrature value of the mean density, the root of the
tilted log moment at beta = 1, the Jensen sign of the mismatched drift,
and Wald dominance of the mismatched stopping probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel_sim import STREAM_TX, SystemConfig, sample_block_batch, substream
from .harq_bound import empirical_wald_check, sample_trajectories
from .info_density import block_density, kappa
from .mc import trial_increments
from .oracles import gh_mean_density

# Single-data-symbol geometry used by the quadrature and Wald checks.
_TINY = dict(u=2, d=1, n_p=1, L=1, L_c=4)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_i0_identity(n_blocks: int = 1000, seed: int = 0) -> CheckResult:
    """i_0 must be exactly zero on random blocks, not just small."""
    cfg = SystemConfig(rho=2.0, n_p=3)
    batch = sample_block_batch(cfg, n_blocks, substream(seed, STREAM_TX, 0))
    dens = block_density(batch, 0.0)
    ok = bool(np.all(dens == 0.0))
    return CheckResult("i_0 identically zero",
                       ok, f"max |i_0| = {np.abs(dens).max():g} on "
                           f"{n_blocks} blocks")


def check_estimator_variance(n_trials: int = 100_000,
                             seed: int = 0) -> CheckResult:
    """Empirical Var(h_hat - h) must equal 1/(n_p rho) within 2%."""
    results = []
    ok = True
    for rho, n_p in ((1.0, 1), (4.0, 2)):
        cfg = SystemConfig(rho=rho, n_p=n_p)
        batch = sample_block_batch(cfg, n_trials, substream(seed, STREAM_TX, 0))
        v = float(np.mean(np.abs(batch.h_hat - batch.h) ** 2))
        target = 1.0 / (n_p * rho)
        rel = abs(v - target) / target
        ok &= rel <= 0.02
        results.append(f"rho={rho:g},n_p={n_p}: {v:.4g} vs {target:.4g} "
                       f"({100 * rel:.2f}%)")
    return CheckResult("pilot estimate error variance", ok, "; ".join(results))


def check_output_power(n_trials: int = 100_000, seed: int = 0) -> CheckResult:
    """Empirical E|y|^2 of a data sample must be rho + 1 (3 sigma)."""
    cfg = SystemConfig(rho=2.0, n_p=1)
    batch = sample_block_batch(cfg, n_trials, substream(seed, STREAM_TX, 0))
    p = np.abs(batch.data_outputs) ** 2
    mean = float(p.mean())
    se = float(p.std()) / math.sqrt(p.size)
    ok = abs(mean - (cfg.rho + 1.0)) <= 3.0 * se
    return CheckResult("output power normalization", ok,
                       f"E|y|^2 = {mean:.4f} vs {cfg.rho + 1:.4f} "
                       f"(se {se:.2g})")


def check_quadrature(n_trials: int = 400_000, seed: int = 0,
                     n_nodes: int = 48) -> CheckResult:
    """Monte Carlo mean density vs the Gauss-Hermite oracle, 3 sigma."""
    results = []
    ok = True
    for rho in (1.0, 10.0):
        for s in (0.5, 1.0):
            cfg = SystemConfig(rho=rho, **_TINY)
            incr = trial_increments(cfg, s, n_trials, seed)
            mc = float(incr.mean())
            se = float(incr.std()) / math.sqrt(incr.size)
            ref = gh_mean_density(rho, cfg.n_p, s, n_nodes)
            ok &= abs(mc - ref) <= 3.0 * se
            results.append(f"rho={rho:g},s={s:g}: mc={mc:.5f} gh={ref:.5f} "
                           f"(se {se:.2g})")
    return CheckResult("quadrature oracle equivalence", ok, "; ".join(results))


def check_kappa_root(n_trials: int = 50_000, seed: int = 0) -> CheckResult:
    """kappa(1) = 0 within 3 standard errors at three settings."""
    results = []
    ok = True
    for rho_db, s, n_p in ((0.0, 0.5, 1), (-2.0, 1.0, 2), (6.0, 2.0, 4)):
        cfg = SystemConfig(rho=10 ** (rho_db / 10.0), n_p=n_p, L=2)
        est, se = kappa(1.0, cfg, s, n_trials, seed)
        ok &= abs(est) <= max(3.0 * se, 1e-9)
        results.append(f"rho={rho_db:g}dB,s={s:g},n_p={n_p}: "
                       f"{est:.2e} (se {se:.2e})")
    return CheckResult("kappa root at beta=1", ok, "; ".join(results))


def check_mismatched_drift(n_trials: int = 20_000, seed: int = 0) -> CheckResult:
    """E[i_s] under the mismatched law must sit below -3 sigma for s > 0."""
    cfg = SystemConfig(rho=10 ** (-0.2), n_p=2, L=2)
    results = []
    ok = True
    for s in (0.5, 1.0, 2.0):
        incr = trial_increments(cfg, s, n_trials, seed, mismatched=True)
        per_block = incr[:, 0] / cfg.L
        mean = float(per_block.mean())
        se = float(per_block.std(ddof=1)) / math.sqrt(per_block.size)
        ok &= mean < -3.0 * se
        results.append(f"s={s:g}: {mean:.3f} (se {se:.2g})")
    return CheckResult("negative mismatched drift", ok, "; ".join(results))


def check_wald_dominance(n_trials: int = 1_000_000, seed: int = 0) -> CheckResult:
    """P[tau_bar <= n_max] <= exp(-gamma) + 3 sigma on a gamma grid."""
    cfg = SystemConfig(rho=1.0, **_TINY)
    traj = sample_trajectories(cfg, 1.0, n_trials, seed, mismatched=True)
    results = []
    ok = True
    for gamma in (0.5, 1.0, 2.0, 3.0, 4.0):
        p_hat, bound = empirical_wald_check(traj, gamma)
        se = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / n_trials) / n_trials)
        ok &= p_hat <= bound + 3.0 * se
        results.append(f"g={gamma:g}: {p_hat:.4g} <= {bound:.4g}")
    return CheckResult("Wald dominance", ok, "; ".join(results))


def run_all(seed: int = 0, quick: bool = False) -> list[CheckResult]:
    """Run the full diagnostic suite; ``quick`` shrinks the trial counts."""
    f = 10 if quick else 1
    return [
        check_i0_identity(seed=seed),
        check_estimator_variance(n_trials=100_000 // f, seed=seed),
        check_output_power(n_trials=100_000 // f, seed=seed),
        check_quadrature(n_trials=400_000 // f, seed=seed),
        check_kappa_root(n_trials=50_000 // f, seed=seed),
        check_mismatched_drift(n_trials=20_000 // f, seed=seed),
        check_wald_dominance(n_trials=1_000_000 // f, seed=seed),
    ]
