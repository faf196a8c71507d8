import math

import numpy as np
import pytest

from shortpkt.channel_sim import STREAM_TX, SystemConfig, sample_block_batch, substream
from shortpkt.info_density import (
    block_density,
    kappa,
    logcosh,
    round_increment,
    validate_s,
)
from shortpkt.oracles import density_direct, gh_kappa, gh_mean_density


def _batch(cfg, n, seed=0, chunk=0):
    return sample_block_batch(cfg, n, substream(seed, STREAM_TX, chunk))


class TestLogcosh:
    def test_values(self):
        assert logcosh(np.array(0.0)) == 0.0
        x = np.array([0.3, -0.3, 2.0])
        assert np.allclose(logcosh(x), np.log(np.cosh(x)), rtol=1e-12)

    def test_large_arguments_no_overflow(self):
        x = np.array([500.0, -4e6, 1e30])
        out = logcosh(x)
        assert np.all(np.isfinite(out))
        assert np.allclose(out, np.abs(x) - math.log(2.0))

    def test_float32(self):
        x = np.float32(1.7)
        v = logcosh(np.array([x], dtype=np.float32))
        assert v.dtype == np.float32
        assert abs(float(v[0]) - math.log(math.cosh(1.7))) < 1e-6


class TestBlockDensity:
    def test_s_zero_identity(self):
        cfg = SystemConfig(rho=3.0, n_p=5)
        dens = block_density(_batch(cfg, 1000), 0.0)
        assert np.all(dens == 0.0)

    def test_zero_estimate_identity(self):
        cfg = SystemConfig(rho=2.0, n_p=1)
        batch = _batch(cfg, 50)
        batch.h_hat = np.zeros_like(batch.h_hat)
        for s in (0.3, 1.0, 7.0):
            assert np.all(block_density(batch, s) == 0.0)

    def test_matches_direct_four_point_lse(self):
        # The factorized logcosh form must agree with the literal 4-term
        # log-sum-exp of the defining expression.
        cfg = SystemConfig(rho=2.5, n_p=60, L=1)  # n_d = 12
        batch = _batch(cfg, 40, seed=7)
        for s in (0.2, 1.0, 3.0):
            fast = block_density(batch, s)
            xs = batch.data_symbols
            ref = np.array([
                density_direct(xs[i], batch.data_outputs[i],
                               complex(batch.h_hat[i]), s, cfg.rho)
                for i in range(len(batch))])
            assert np.allclose(fast, ref, rtol=1e-4, atol=2e-3)

    def test_stability_extreme_parameters(self):
        cfg = SystemConfig(rho=1e4, n_p=2)
        dens = block_density(_batch(cfg, 64), 100.0)
        assert np.all(np.isfinite(dens))

    def test_invalid_s(self):
        cfg = SystemConfig()
        with pytest.raises(ValueError, match="s"):
            block_density(_batch(cfg, 1), -0.5)
        with pytest.raises(ValueError):
            validate_s(float("nan"))


class TestRoundIncrement:
    def test_additivity(self):
        cfg = SystemConfig(rho=1.3, n_p=4, L=3)
        batch = _batch(cfg, 3, seed=2)
        total = round_increment(batch, 0.8, 3)
        assert total == pytest.approx(float(block_density(batch, 0.8).sum()),
                                      abs=0.0)

    def test_zero_for_s_zero(self):
        cfg = SystemConfig(L=2)
        assert round_increment(_batch(cfg, 2), 0.0, 2) == 0.0

    def test_length_mismatch(self):
        cfg = SystemConfig(L=4)
        with pytest.raises(ValueError, match="blocks"):
            round_increment(_batch(cfg, 3), 1.0, 4)

    def test_list_of_single_blocks(self):
        from shortpkt.channel_sim import BlockBatch

        cfg = SystemConfig(rho=2.0, L=2)
        b = _batch(cfg, 2, seed=5)
        parts = [BlockBatch(rho=b.rho, h=b.h[i:i + 1], h_hat=b.h_hat[i:i + 1],
                            sym_signs=b.sym_signs[i:i + 1],
                            data_outputs=b.data_outputs[i:i + 1])
                 for i in range(2)]
        assert round_increment(parts, 0.5, 2) == pytest.approx(
            round_increment(b, 0.5, 2), rel=1e-5)


class TestKappa:
    def test_beta_zero_exact(self):
        cfg = SystemConfig(rho=1.0, L=2)
        est, se = kappa(0.0, cfg, 1.0, 2000, seed=1)
        assert est == 0.0

    def test_beta_one_exact_root(self):
        # Numerator and denominator coincide sample by sample at beta = 1.
        for rho, s, n_p in ((1.0, 0.5, 1), (0.1, 2.0, 8)):
            cfg = SystemConfig(rho=rho, n_p=n_p, L=3)
            est, se = kappa(1.0, cfg, s, 3000, seed=2)
            assert est == 0.0
            assert se == 0.0

    def test_interior_beta_negative(self):
        # Convexity with kappa(0) = kappa(1) = 0 forces negativity inside.
        cfg = SystemConfig(rho=1.0, L=2, n_p=2)
        est, se = kappa(0.5, cfg, 1.0, 20_000, seed=3)
        assert est < -3.0 * se

    def test_against_quadrature_oracle(self):
        # Single-symbol geometry; oracle value from 4-D Gauss-Hermite.
        cfg = SystemConfig(rho=1.0, u=2, d=1, n_p=1, L=1, L_c=4)
        est, se = kappa(0.5, cfg, 1.0, 200_000, seed=4)
        ref = gh_kappa(1.0, 1, 1.0, 0.5, 48)
        assert abs(est - ref) <= 3.0 * se

    def test_determinism(self):
        cfg = SystemConfig(rho=1.0, L=2)
        assert kappa(0.7, cfg, 0.9, 5000, seed=9) == kappa(0.7, cfg, 0.9, 5000, seed=9)

    def test_validation(self):
        cfg = SystemConfig()
        with pytest.raises(ValueError):
            kappa(-0.1, cfg, 1.0, 100)
        with pytest.raises(ValueError):
            kappa(0.5, cfg, 1.0, 0)


class TestDriftSigns:
    def test_transmitted_positive_mismatched_negative(self):
        from shortpkt.mc import trial_increments

        cfg = SystemConfig(rho=10 ** (-0.2), n_p=2, L=2)
        for s in (0.5, 1.0):
            tx = trial_increments(cfg, s, 10_000, seed=6)[:, 0]
            mm = trial_increments(cfg, s, 10_000, seed=6, mismatched=True)[:, 0]
            assert tx.mean() > 3.0 * tx.std() / math.sqrt(tx.size)
            assert mm.mean() < -3.0 * mm.std() / math.sqrt(mm.size)


class TestMeanDensityOracle:
    def test_single_symbol_mean_matches_quadrature(self):
        from shortpkt.mc import trial_increments

        cfg = SystemConfig(rho=1.0, u=2, d=1, n_p=1, L=1, L_c=4)
        incr = trial_increments(cfg, 0.5, 150_000, seed=8)
        mc = float(incr.mean())
        se = float(incr.std()) / math.sqrt(incr.size)
        assert abs(mc - gh_mean_density(1.0, 1, 0.5, 48)) <= 3.0 * se
