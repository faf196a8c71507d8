"""Rayleigh block-fading channel simulation with pilot-assisted transmission.

Frames are organized in coherence blocks of ``n_c`` symbols: ``n_p`` pilots
followed by ``n_d = n_c - n_p`` QPSK data symbols, all at per-symbol power
``rho``. The fading coefficient is constant within a block and i.i.d.
CN(0, 1) across blocks; noise is i.i.d. CN(0, 1). The receiver forms the
ML channel estimate from the pilots, which for a constant pilot vector is
exactly ``h + CN(0, 1/(n_p * rho))``, so pilot observations are never
materialized.

Random numbers come from counter-based Philox substreams keyed by
(seed, stream, chunk index), which makes every realization reproducible
independently of batch size or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

# Draw budget per block is sized by the largest possible data payload
# (n_p = 1) so that trials are common random numbers across pilot counts.
_SQRT_HALF = np.float32(math.sqrt(0.5))

# Substream tags. Transmitted-codeword trials, mismatched-codeword trials
# and kappa trials must never share draws.
STREAM_TX = 0
STREAM_MISMATCH = 1
STREAM_KAPPA = 2


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemConfig:
    """Channel and frame geometry, SNR, and reliability target.

    Defaults follow the TDL-C 300 ns / 3 km/h parameterization: 24
    subcarriers and 3 OFDM symbols per resource block (n_c = 72), 71.4 us
    OFDM symbols, 30 available diversity branches, error target 1e-3 and
    30 information bits.

    Attributes:
        rho: linear SNR (power ratio), > 0.
        u: subcarriers per resource block.
        d: OFDM symbols per resource block.
        n_p: pilot symbols per coherence block, 1 <= n_p < n_c.
        L: diversity branches used per slot, 1 <= L <= L_c.
        L_c: available diversity branches.
        T_o: OFDM symbol duration in seconds.
        eps_target: packet error probability target, in (0, 1).
        k: information bits per message (M = 2**k messages).
    """

    rho: float = 1.0
    u: int = 24
    d: int = 3
    n_p: int = 1
    L: int = 2
    L_c: int = 30
    T_o: float = 71.4e-6
    eps_target: float = 1e-3
    k: int = 30

    def __post_init__(self):
        if self.u < 1 or self.d < 1:
            raise ConfigError(f"u and d must be >= 1, got u={self.u}, d={self.d}")
        if not 1 <= self.n_p < self.n_c:
            raise ConfigError(
                f"n_p must satisfy 1 <= n_p < n_c={self.n_c}, got n_p={self.n_p}"
            )
        if not 1 <= self.L <= self.L_c:
            raise ConfigError(
                f"L must satisfy 1 <= L <= L_c={self.L_c}, got L={self.L}"
            )
        if not self.rho > 0:
            raise ConfigError(f"rho must be > 0, got rho={self.rho}")
        if not 0 < self.eps_target < 1:
            raise ConfigError(
                f"eps_target must be in (0, 1), got eps_target={self.eps_target}"
            )
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got k={self.k}")
        if not self.T_o > 0:
            raise ConfigError(f"T_o must be > 0, got T_o={self.T_o}")

    @property
    def n_c(self) -> int:
        return self.u * self.d

    @property
    def n_d(self) -> int:
        return self.n_c - self.n_p

    @property
    def n_max(self) -> int:
        return self.L_c // self.L

    @property
    def M(self) -> int:
        return 1 << self.k

    @property
    def rho_db(self) -> float:
        return linear_to_db(self.rho)

    def with_(self, **kwargs) -> "SystemConfig":
        """Return a copy with the given fields replaced (revalidated)."""
        return replace(self, **kwargs)


def _mix64(x: int) -> int:
    """splitmix64 finalizer; deterministic 64-bit mixing."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def substream(seed: int, stream: int, index: int) -> np.random.Generator:
    """Counter-based substream keyed by (seed, stream tag, chunk index)."""
    k0 = _mix64((seed & 0xFFFFFFFFFFFFFFFF) ^ _mix64(stream))
    k1 = _mix64(k0 ^ index)
    key = np.array([k0, k1], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, index: int) -> int:
    """Deterministic per-point seed for sweep jobs."""
    return _mix64(_mix64(seed & 0xFFFFFFFFFFFFFFFF) ^ (index + 1))


@dataclass
class BlockBatch:
    """A batch of coherence-block realizations.

    ``sym_signs`` holds the QPSK quadrature signs (+-1 as int8, shape
    (n, n_d, 2)) of the codeword the decoding metric is evaluated on. In
    mismatched mode these are an independent draw while ``data_outputs``
    were produced by a different transmitted codeword through the same
    channel.
    """

    rho: float
    h: np.ndarray            # (n,) complex64 fading coefficients
    h_hat: np.ndarray        # (n,) complex64 ML channel estimates
    sym_signs: np.ndarray    # (n, n_d, 2) int8 candidate quadrature signs
    data_outputs: np.ndarray  # (n, n_d) complex64 received data samples

    def __len__(self) -> int:
        return self.h.shape[0]

    @property
    def n_d(self) -> int:
        return self.sym_signs.shape[1]

    @property
    def data_symbols(self) -> np.ndarray:
        """Candidate data symbols, each with squared magnitude rho."""
        amp = np.float32(math.sqrt(self.rho / 2.0))
        signs = self.sym_signs.astype(np.float32)
        return (amp * signs[..., 0] + 1j * (amp * signs[..., 1])).astype(np.complex64)


@dataclass
class _RawDraws:
    """Unscaled per-block draws; rho- and n_p-independent by construction."""

    h: np.ndarray           # (n,) complex64, CN(0,1)
    est_noise: np.ndarray   # (n,) complex64, CN(0,1) pilot-projection noise
    tx_bits: np.ndarray     # (n, n_sym_max, 2) int8 in {0,1}
    noise: np.ndarray       # (n, n_sym_max) complex64, CN(0,1)
    cand_bits: np.ndarray | None  # mismatched-candidate bits, same shape as tx_bits


def _draw_raw(rng: np.random.Generator, n_blocks: int, n_sym_max: int,
              mismatched: bool) -> _RawDraws:
    """Draw the raw randomness for ``n_blocks`` blocks in a fixed order.

    The draw order and shapes are part of the reproducibility contract:
    h, estimate noise, transmitted sign bits, data noise, then (only in
    mismatched mode) candidate sign bits.
    """
    hn = rng.standard_normal(size=(n_blocks, 2), dtype=np.float32)
    en = rng.standard_normal(size=(n_blocks, 2), dtype=np.float32)
    tx_bits = rng.integers(0, 2, size=(n_blocks, n_sym_max, 2), dtype=np.int8)
    wn = rng.standard_normal(size=(n_blocks, n_sym_max, 2), dtype=np.float32)
    cand_bits = None
    if mismatched:
        cand_bits = rng.integers(0, 2, size=(n_blocks, n_sym_max, 2), dtype=np.int8)

    h = (hn[:, 0] * _SQRT_HALF + 1j * (hn[:, 1] * _SQRT_HALF)).astype(np.complex64)
    e = (en[:, 0] * _SQRT_HALF + 1j * (en[:, 1] * _SQRT_HALF)).astype(np.complex64)
    w = (wn[..., 0] * _SQRT_HALF + 1j * (wn[..., 1] * _SQRT_HALF)).astype(np.complex64)
    return _RawDraws(h=h, est_noise=e, tx_bits=tx_bits, noise=w, cand_bits=cand_bits)


def _build_batch(raw: _RawDraws, cfg: SystemConfig) -> BlockBatch:
    """Scale raw draws into a BlockBatch for the given (rho, n_p)."""
    n_d = cfg.n_d
    amp = np.float32(math.sqrt(cfg.rho / 2.0))
    est_scale = np.float32(1.0 / math.sqrt(cfg.n_p * cfg.rho))

    h_hat = (raw.h + est_scale * raw.est_noise).astype(np.complex64)
    tx_signs = (1 - 2 * raw.tx_bits[:, :n_d, :]).astype(np.float32)
    x = (amp * tx_signs[..., 0] + 1j * (amp * tx_signs[..., 1])).astype(np.complex64)
    y = raw.h[:, None] * x + raw.noise[:, :n_d]

    if raw.cand_bits is not None:
        signs = (1 - 2 * raw.cand_bits[:, :n_d, :]).astype(np.int8)
    else:
        signs = (1 - 2 * raw.tx_bits[:, :n_d, :]).astype(np.int8)
    return BlockBatch(rho=cfg.rho, h=raw.h, h_hat=h_hat, sym_signs=signs,
                      data_outputs=y)


def sample_block_batch(cfg: SystemConfig, n_blocks: int,
                       rng: np.random.Generator,
                       transmitted_is_candidate: bool = True) -> BlockBatch:
    """Sample ``n_blocks`` i.i.d. coherence-block realizations.

    With ``transmitted_is_candidate=False`` the returned candidate symbols
    are an independent QPSK draw (the mismatched codeword) while the
    outputs come from a separately drawn transmitted codeword.

    The per-block draw budget is fixed at the n_p=1 layout regardless of
    cfg.n_p, so identical (seed, chunk) draws yield common random numbers
    across pilot counts.
    """
    if n_blocks < 1:
        raise ValueError(f"n_blocks must be >= 1, got {n_blocks}")
    raw = _draw_raw(rng, n_blocks, cfg.n_c - 1,
                    mismatched=not transmitted_is_candidate)
    return _build_batch(raw, cfg)


def sample_block(cfg: SystemConfig, transmitted_is_candidate: bool,
                 rng: np.random.Generator) -> BlockBatch:
    """Sample a single coherence block (batch of one)."""
    return sample_block_batch(cfg, 1, rng, transmitted_is_candidate)
