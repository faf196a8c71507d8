import math

import numpy as np
import pytest

from shortpkt.channel_sim import (
    STREAM_MISMATCH,
    STREAM_TX,
    SystemConfig,
    derive_seed,
    sample_block,
    sample_block_batch,
    substream,
)
from shortpkt.errors import ConfigError


class TestSystemConfig:
    def test_table1_defaults(self):
        cfg = SystemConfig()
        assert cfg.u == 24 and cfg.d == 3
        assert cfg.n_c == 72
        assert cfg.n_d == 71
        assert cfg.L_c == 30
        assert cfg.T_o == 71.4e-6
        assert cfg.eps_target == 1e-3
        assert cfg.k == 30
        assert cfg.M == 2 ** 30

    def test_n_max_floor_rule(self):
        assert SystemConfig(L=7).n_max == 4
        assert SystemConfig(L=2).n_max == 15
        assert SystemConfig(L=30).n_max == 1

    def test_n_p_bounds(self):
        with pytest.raises(ConfigError, match="n_p"):
            SystemConfig(n_p=72)
        with pytest.raises(ConfigError, match="n_p"):
            SystemConfig(n_p=0)
        assert SystemConfig(n_p=71).n_d == 1

    @pytest.mark.parametrize("kwargs,field", [
        (dict(rho=0.0), "rho"),
        (dict(rho=-1.0), "rho"),
        (dict(L=0), "L"),
        (dict(L=31), "L"),
        (dict(eps_target=0.0), "eps_target"),
        (dict(eps_target=1.0), "eps_target"),
        (dict(k=0), "k"),
        (dict(u=0), "u"),
        (dict(T_o=0.0), "T_o"),
    ])
    def test_invariant_violations_name_field(self, kwargs, field):
        with pytest.raises(ConfigError, match=field):
            SystemConfig(**kwargs)

    def test_with_revalidates(self):
        cfg = SystemConfig()
        assert cfg.with_(L=3).n_max == 10
        with pytest.raises(ConfigError):
            cfg.with_(n_p=100)


class TestSubstreams:
    def test_substream_reproducible(self):
        a = substream(3, STREAM_TX, 7).standard_normal(8)
        b = substream(3, STREAM_TX, 7).standard_normal(8)
        assert np.array_equal(a, b)

    def test_substream_distinct(self):
        base = substream(3, STREAM_TX, 7).standard_normal(8)
        assert not np.array_equal(base, substream(4, STREAM_TX, 7).standard_normal(8))
        assert not np.array_equal(base, substream(3, STREAM_MISMATCH, 7).standard_normal(8))
        assert not np.array_equal(base, substream(3, STREAM_TX, 8).standard_normal(8))

    def test_derive_seed_distinct(self):
        seeds = {derive_seed(0, i) for i in range(1000)}
        assert len(seeds) == 1000


class TestSampling:
    def test_shapes_and_dtypes(self):
        cfg = SystemConfig(rho=2.0, n_p=4)
        batch = sample_block_batch(cfg, 17, substream(0, STREAM_TX, 0))
        assert len(batch) == 17
        assert batch.h.shape == (17,) and batch.h.dtype == np.complex64
        assert batch.h_hat.shape == (17,)
        assert batch.sym_signs.shape == (17, cfg.n_d, 2)
        assert batch.data_outputs.shape == (17, cfg.n_d)
        assert set(np.unique(batch.sym_signs)) <= {-1, 1}

    def test_symbols_have_power_rho(self):
        cfg = SystemConfig(rho=3.7, n_p=2)
        batch = sample_block_batch(cfg, 5, substream(1, STREAM_TX, 0))
        power = np.abs(batch.data_symbols) ** 2
        assert np.allclose(power, cfg.rho, rtol=1e-6)

    def test_single_data_symbol_geometry(self):
        cfg = SystemConfig(n_p=71)
        batch = sample_block(cfg, True, substream(0, STREAM_TX, 0))
        assert batch.data_outputs.shape == (1, 1)

    def test_determinism(self):
        cfg = SystemConfig(rho=1.5, n_p=3)
        a = sample_block_batch(cfg, 9, substream(5, STREAM_TX, 2))
        b = sample_block_batch(cfg, 9, substream(5, STREAM_TX, 2))
        for name in ("h", "h_hat", "sym_signs", "data_outputs"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_estimate_error_variance(self):
        # Var(h_hat - h) = 1/(n_p rho) within 3 standard errors at 1e5.
        for rho, n_p in ((1.0, 1), (2.0, 4)):
            cfg = SystemConfig(rho=rho, n_p=n_p)
            batch = sample_block_batch(cfg, 100_000, substream(0, STREAM_TX, 0))
            err2 = np.abs(batch.h_hat - batch.h) ** 2
            target = 1.0 / (n_p * rho)
            se = err2.std() / math.sqrt(err2.size)
            assert abs(err2.mean() - target) <= 3.0 * se

    def test_output_power_normalization(self):
        cfg = SystemConfig(rho=2.0, n_p=1)
        batch = sample_block_batch(cfg, 50_000, substream(2, STREAM_TX, 0))
        p = np.abs(batch.data_outputs) ** 2
        se = p.std() / math.sqrt(p.size)
        assert abs(p.mean() - (cfg.rho + 1.0)) <= 3.0 * se

    def test_zero_signal_limit(self):
        # rho -> 0: outputs are pure noise with unit mean power.
        cfg = SystemConfig(rho=1e-12, n_p=1)
        batch = sample_block_batch(cfg, 20_000, substream(3, STREAM_TX, 0))
        p = np.abs(batch.data_outputs) ** 2
        se = p.std() / math.sqrt(p.size)
        assert abs(p.mean() - 1.0) <= 4.0 * se

    def test_mismatched_candidate_is_independent(self):
        # Candidate signs must not correlate with outputs produced by the
        # independently transmitted codeword.
        cfg = SystemConfig(rho=4.0, n_p=1)
        batch = sample_block_batch(cfg, 30_000, substream(4, STREAM_MISMATCH, 0),
                                   transmitted_is_candidate=False)
        z = np.conj(batch.h_hat)[:, None] * batch.data_outputs
        corr = (batch.sym_signs[..., 0] * z.real +
                batch.sym_signs[..., 1] * z.imag)
        se = corr.std() / math.sqrt(corr.size)
        assert abs(corr.mean()) <= 4.0 * se

        tx = sample_block_batch(cfg, 30_000, substream(4, STREAM_TX, 0))
        z = np.conj(tx.h_hat)[:, None] * tx.data_outputs
        corr_tx = (tx.sym_signs[..., 0] * z.real + tx.sym_signs[..., 1] * z.imag)
        assert corr_tx.mean() > 10 * corr_tx.std() / math.sqrt(corr_tx.size)
