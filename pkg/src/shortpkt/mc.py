"""Chunked Monte Carlo engine for per-round density increments.

One trial is one codeword transmission: ``n_max`` rounds of ``L``
independently fading coherence blocks. The engine streams trials in
fixed-size chunks, each drawn from its own counter-based substream, and
returns per-trial, per-round density increments. Because the raw channel
draws are independent of rho, n_p and s, one pass over the raw stream can
serve a whole (s, n_p) grid: the same channel trials are reused and only
the densities are recomputed, which keeps comparisons across candidate
parameters common-random-number exact.

The per-trial draw layout is identical to ``sample_block_batch`` on a flat
batch of chunk_trials * n_max * L blocks, so engine output is bit-identical
to composing the public sampler with ``block_density``.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .channel_sim import (
    STREAM_MISMATCH,
    STREAM_TX,
    SystemConfig,
    _draw_raw,
    substream,
)
from .errors import ConfigError
from .info_density import logcosh, validate_s

# Trials per substream chunk. Fixed: results must not depend on how many
# trials are requested or how work is split across workers.
CHUNK_TRIALS = 1024

Combo = tuple[float, int]  # (s, n_p)


def _validate_combos(cfg: SystemConfig, combos: Sequence[Combo]) -> list[Combo]:
    out = []
    for s, n_p in combos:
        validate_s(s)
        n_p = int(n_p)
        if not 1 <= n_p < cfg.n_c:
            raise ConfigError(
                f"n_p must satisfy 1 <= n_p < n_c={cfg.n_c}, got n_p={n_p}"
            )
        out.append((float(s), n_p))
    if not out:
        raise ValueError("combo list must be nonempty")
    return out


def grid_increments(cfg: SystemConfig, combos: Sequence[Combo], n_trials: int,
                    seed: int, mismatched: bool = False,
                    n_rounds: int | None = None) -> dict[Combo, np.ndarray]:
    """Per-trial round increments for every (s, n_p) combo.

    Returns {(s, n_p): float32 array of shape (n_trials, n_rounds)} where
    entry [t, j] is the density increment of round j+1 of trial t. All
    combos see the same channel trials.
    """
    combos = _validate_combos(cfg, combos)
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    n_max = cfg.n_max
    if n_rounds is None:
        n_rounds = n_max
    if not 1 <= n_rounds <= n_max:
        raise ValueError(f"n_rounds must be in [1, n_max={n_max}], got {n_rounds}")

    L = cfg.L
    n_sym_max = cfg.n_c - 1
    n_sym_used = cfg.n_c - min(n_p for _, n_p in combos)
    stream = STREAM_MISMATCH if mismatched else STREAM_TX
    amp = np.float32(math.sqrt(cfg.rho / 2.0))
    sqrt_half = np.float32(math.sqrt(0.5))

    out = {c: np.empty((n_trials, n_rounds), dtype=np.float32) for c in combos}
    by_np: dict[int, list[float]] = {}
    for s, n_p in combos:
        by_np.setdefault(n_p, []).append(s)

    n_chunks = -(-n_trials // CHUNK_TRIALS)
    for ci in range(n_chunks):
        lo = ci * CHUNK_TRIALS
        m = min(CHUNK_TRIALS, n_trials - lo)
        rng = substream(seed, stream, ci)
        raw = _draw_raw(rng, CHUNK_TRIALS * n_max * L, n_sym_max, mismatched)

        # Keep only the rounds we need; the kept draws are unchanged.
        def rounds(arr, tail=()):
            return arr.reshape((CHUNK_TRIALS, n_max, L) + tail)[:, :n_rounds]

        h = rounds(raw.h).reshape(-1)
        e = rounds(raw.est_noise).reshape(-1)
        tx_bits = rounds(raw.tx_bits, (n_sym_max, 2))[..., :n_sym_used, :]
        tx_bits = tx_bits.reshape(-1, n_sym_used, 2)
        noise = rounds(raw.noise, (n_sym_max,))[..., :n_sym_used]
        noise = noise.reshape(-1, n_sym_used)
        if mismatched:
            cand_bits = rounds(raw.cand_bits, (n_sym_max, 2))[..., :n_sym_used, :]
            cand_bits = cand_bits.reshape(-1, n_sym_used, 2)

        # Channel outputs are n_p-independent; build them once per chunk.
        tx_signs = (1 - 2 * tx_bits).astype(np.float32)
        x = (amp * tx_signs[..., 0] + 1j * (amp * tx_signs[..., 1])).astype(np.complex64)
        y = h[:, None] * x + noise
        cand_signs = (1 - 2 * cand_bits).astype(np.float32) if mismatched else tx_signs

        for n_p, s_values in by_np.items():
            n_d = cfg.n_c - n_p
            est_scale = np.float32(1.0 / math.sqrt(n_p * cfg.rho))
            h_hat = (h + est_scale * e).astype(np.complex64)
            z = np.conj(h_hat)[:, None] * y[:, :n_d]
            comps = np.empty((z.shape[0], 2 * n_d), dtype=np.float32)
            np.multiply(z.real, amp, out=comps[:, :n_d])
            np.multiply(z.imag, amp, out=comps[:, n_d:])
            t_corr = np.einsum("ij,ij->i", cand_signs[:, :n_d, 0],
                               comps[:, :n_d], dtype=np.float32)
            t_corr += np.einsum("ij,ij->i", cand_signs[:, :n_d, 1],
                                comps[:, n_d:], dtype=np.float32)
            for s in s_values:
                s32 = np.float32(s)
                if s32 == 0:
                    dens = np.zeros_like(t_corr)
                else:
                    dens = logcosh(np.float32(2.0) * s32 * comps).sum(
                        axis=1, dtype=np.float32)
                    np.subtract(np.float32(2.0) * s32 * t_corr, dens, out=dens)
                incr = dens.reshape(CHUNK_TRIALS, n_rounds, L).sum(
                    axis=2, dtype=np.float32)
                out[(s, n_p)][lo:lo + m] = incr[:m]
    return out


def trial_increments(cfg: SystemConfig, s: float, n_trials: int, seed: int,
                     mismatched: bool = False,
                     n_rounds: int | None = None) -> np.ndarray:
    """Round increments for a single (s, cfg.n_p) parameter choice."""
    return grid_increments(cfg, [(float(s), cfg.n_p)], n_trials, seed,
                           mismatched=mismatched, n_rounds=n_rounds)[
        (float(s), cfg.n_p)]
