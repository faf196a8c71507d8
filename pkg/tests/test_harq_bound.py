import math

import numpy as np
import pytest

from shortpkt.channel_sim import SystemConfig
from shortpkt.errors import InfeasibleError
from shortpkt.harq_bound import (
    TrialTrajectory,
    empirical_wald_check,
    find_threshold,
    min_rounds,
    sample_trajectories,
    stopping_stats,
    undetected_bound,
)


def _traj(increments, **kw):
    incr = np.asarray(increments, dtype=np.float32)
    meta = dict(s=1.0, n_p=1, rho=1.0, L=1, seed=0)
    meta.update(kw)
    return TrialTrajectory(increments=incr, **meta)


class TestTrajectoryStructure:
    def test_prefix_max(self):
        t = _traj([[5, 5, 5], [1, 1, 1], [-1, 4, 0], [2, -3, 9]])
        expect = np.array([[5, 10, 15], [1, 2, 3], [-1, 3, 3], [2, 2, 8]],
                          dtype=float)
        assert np.array_equal(t.prefix_max, expect)
        assert np.all(np.diff(t.prefix_max, axis=1) >= 0)
        assert np.array_equal(t.prefix_max[:, 0], t.increments[:, 0])

    def test_sample_trajectories_shapes(self):
        cfg = SystemConfig(rho=1.0, L=2, L_c=8)
        t = sample_trajectories(cfg, 0.5, 300, seed=1)
        assert t.increments.shape == (300, 4)
        assert t.n_trials == 300 and t.n_max == 4
        assert t.s == 0.5 and t.n_p == cfg.n_p and not t.mismatched

    def test_s_zero_trajectories(self):
        cfg = SystemConfig(rho=1.0, L=2, L_c=4)
        t = sample_trajectories(cfg, 0.0, 100, seed=0)
        assert np.all(t.increments == 0.0)
        assert np.all(t.prefix_max == 0.0)

    def test_n_max_one(self):
        cfg = SystemConfig(rho=1.0, L=4, L_c=4)
        t = sample_trajectories(cfg, 0.5, 50, seed=0)
        assert t.increments.shape == (50, 1)
        st = stopping_stats(t, float(t.prefix_max[:, 0].max()) + 1.0)
        assert st.p_timeout == 1.0 and st.ell_hat == 1.0


class TestStoppingStats:
    T = _traj([[5, 5, 5], [1, 1, 1], [-1, 4, 0], [2, -3, 9]])

    def test_hand_computed(self):
        st = stopping_stats(self.T, 4.0)
        # tau: [1, >3, >3, 3] -> capped [1, 3, 3, 3]
        assert st.ell_hat == 2.5
        assert st.p_timeout == 0.5
        assert np.allclose(st.cdf, [0.25, 0.25, 1.0])
        assert st.n_trials == 4

    def test_gamma_minus_inf(self):
        st = stopping_stats(self.T, -math.inf)
        assert st.ell_hat == 1.0 and st.p_timeout == 0.0
        assert np.allclose(st.cdf, [1.0, 1.0, 1.0])

    def test_gamma_plus_inf(self):
        st = stopping_stats(self.T, math.inf)
        assert st.ell_hat == 3.0 and st.p_timeout == 1.0
        assert np.allclose(st.cdf, [0.0, 0.0, 1.0])

    def test_threshold_equality_crosses(self):
        # tau uses >= gamma: a trial whose max equals gamma crosses.
        st = stopping_stats(self.T, 8.0)
        assert st.cdf[-1] == 1.0
        assert st.p_timeout == 0.5  # trials 2 and 3 (maxima 3, 3) time out

    def test_monotone_in_gamma(self):
        cfg = SystemConfig(rho=1.0, L=2, L_c=8)
        t = sample_trajectories(cfg, 0.6, 500, seed=2)
        prev_ell, prev_pt = -1.0, -1.0
        for gamma in (-5.0, 0.0, 10.0, 30.0, 80.0):
            st = stopping_stats(t, gamma)
            assert st.ell_hat >= prev_ell and st.p_timeout >= prev_pt
            prev_ell, prev_pt = st.ell_hat, st.p_timeout

    def test_cdf_reaches_one_exactly(self):
        cfg = SystemConfig(rho=0.5, L=2, L_c=8)
        t = sample_trajectories(cfg, 0.6, 400, seed=3)
        for gamma in (0.0, 20.0, 1e9):
            assert stopping_stats(t, gamma).cdf[-1] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            stopping_stats(_traj(np.empty((0, 3))), 1.0)


class TestUndetectedBound:
    def test_trivial_cases(self):
        assert undetected_bound(2, 0.0) == 1.0
        assert undetected_bound(2, -math.inf) == 1.0

    def test_algebraic_identity(self):
        # gamma = log(M-1) + log(1/eps1) gives exactly eps1.
        for M, eps1 in ((2 ** 30, 1e-3), (16, 0.25)):
            gamma = math.log(M - 1) + math.log(1.0 / eps1)
            assert undetected_bound(M, gamma) == pytest.approx(eps1, rel=1e-12)

    def test_scale_anchor_k30(self):
        # Direct arithmetic: (2^30 - 1) e^{-27.6}; the anchor for gamma*
        # near the 1e-3 error target.
        val = undetected_bound(2 ** 30, 27.6)
        assert val == pytest.approx((2 ** 30 - 1) * math.exp(-27.6), rel=1e-12)
        assert 1.0e-3 < val < 1.2e-3

    def test_no_underflow_large_gamma(self):
        assert undetected_bound(2 ** 30, 5000.0) == 0.0
        assert undetected_bound(2 ** 512, 50.0) > 0.0

    def test_m_validation(self):
        with pytest.raises(ValueError):
            undetected_bound(1, 1.0)


class TestWaldCheck:
    def test_gamma_zero(self):
        t = _traj([[1, -1], [-2, 1]], mismatched=True)
        p_hat, bound = empirical_wald_check(t, 0.0)
        assert bound == 1.0
        assert p_hat == 0.5  # overall maxima are 1 and -1; only one crosses 0

    def test_zero_increment_boundary(self):
        # s = 0 trajectories: all prefix sums are 0; crossing iff gamma <= 0.
        t = _traj(np.zeros((10, 3)), mismatched=True)
        assert empirical_wald_check(t, 0.0)[0] == 1.0
        assert empirical_wald_check(t, 0.1)[0] == 0.0

    def test_dominance_small_config(self):
        cfg = SystemConfig(rho=1.0, u=2, d=1, n_p=1, L=1, L_c=4)
        t = sample_trajectories(cfg, 1.0, 200_000, seed=4, mismatched=True)
        for gamma in (0.5, 2.0, 4.0):
            p_hat, bound = empirical_wald_check(t, gamma)
            se = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / t.n_trials)
                           / t.n_trials)
            assert p_hat <= bound + 3.0 * se


def _brute_force_gamma(traj, cfg, eps, step=2e-4):
    """Dense-grid reference for the feasibility infimum."""
    lm1 = math.log(cfg.M - 1)
    m = traj.sorted_final_max
    n = traj.n_trials
    lo = lm1 - math.log(eps)
    hi = float(m.max()) + 1.0
    best = None
    g = lo
    while g <= hi:
        t_hat = float(np.searchsorted(m, g, side="left")) / n
        se = math.sqrt(t_hat * (1 - t_hat) / n)
        undet = 1.0 if lm1 - g >= 0 else math.exp(lm1 - g)
        if undet + t_hat + 2 * se <= eps:
            best = g
            break
        g += step
    return best


class TestFindThreshold:
    def test_all_budget_on_undetected(self):
        # Timeout probability is zero at gamma0, so gamma* = log((M-1)/eps).
        cfg = SystemConfig(rho=1.0, u=2, d=1, n_p=1, L=1, L_c=4, k=4,
                           eps_target=0.5)
        t = _traj([[5, 1], [6, 1], [7, 1], [10, 1]], s=0.5)
        ev = find_threshold(cfg, 0.5, t)
        gamma0 = math.log(cfg.M - 1) - math.log(0.5)
        assert ev.gamma_star == pytest.approx(gamma0, abs=1e-12)
        assert ev.ell_bound == 1.0
        assert ev.timeout_term == 0.0
        assert ev.eps_bound == ev.undetected_term + ev.timeout_term
        assert ev.undetected_term <= 0.5

    def test_degenerate_target(self):
        cfg = SystemConfig(rho=1.0, L=2, L_c=8, k=4)
        t = _traj([[1, 1, 1, 1]] * 5)
        ev = find_threshold(cfg, 1.0, t, eps_target=1.0)
        assert ev.gamma_star == -math.inf
        assert ev.ell_bound == 1.0

    def test_matches_brute_force_search(self):
        cfg = SystemConfig(rho=1.0, L=2, L_c=8, k=10, eps_target=0.05)
        rng = np.random.default_rng(5)
        incr = rng.normal(3.0, 4.0, size=(4000, 4)).astype(np.float32)
        t = _traj(incr)
        ev = find_threshold(cfg, 1.0, t)
        ref = _brute_force_gamma(t, cfg, 0.05)
        assert ref is not None
        assert abs(ev.gamma_star - ref) <= 1e-3  # the stated tolerance

    def test_feasibility_margin_enforced(self):
        cfg = SystemConfig(rho=1.0, L=2, L_c=8, k=10, eps_target=0.05)
        rng = np.random.default_rng(6)
        t = _traj(rng.normal(3.0, 4.0, size=(2000, 4)).astype(np.float32))
        ev = find_threshold(cfg, 1.0, t)
        n = t.n_trials
        se = math.sqrt(ev.timeout_term * (1 - ev.timeout_term) / n)
        assert ev.undetected_term + ev.timeout_term + 2 * se <= 0.05 + 1e-12

    def test_infeasible_carries_best(self):
        cfg = SystemConfig(rho=1.0, L=2, L_c=8, k=30, eps_target=1e-3)
        t = _traj(np.full((100, 4), 0.1, dtype=np.float32))
        with pytest.raises(InfeasibleError) as exc_info:
            find_threshold(cfg, 1.0, t)
        assert "gamma" in exc_info.value.best

    def test_identities(self):
        cfg = SystemConfig(rho=2.0, L=2, L_c=8, k=8, eps_target=0.1)
        rng = np.random.default_rng(7)
        t = _traj(rng.normal(4.0, 3.0, size=(3000, 4)).astype(np.float32),
                  s=0.8, n_p=3, rho=2.0, L=2)
        ev = find_threshold(cfg, 0.8, t)
        assert ev.eps_bound == ev.undetected_term + ev.timeout_term
        assert ev.avg_latency_s == 2.0 * ev.ell_bound * cfg.d * cfg.T_o
        assert ev.max_latency_s == 2.0 * t.n_max * cfg.d * cfg.T_o
        assert ev.energy_per_bit == pytest.approx(
            cfg.rho * cfg.L * cfg.n_c * ev.ell_bound / cfg.k, rel=1e-15)
        assert ev.rate_bits_per_use == pytest.approx(
            cfg.k / (ev.ell_bound * cfg.L * cfg.n_c), rel=1e-15)
        ts = [t_ for t_, _ in ev.latency_cdf]
        round_s = 2.0 * cfg.d * cfg.T_o
        assert ts == [round_s * (j + 1) for j in range(t.n_max)]
        assert ev.latency_cdf[-1][1] == 1.0
        probs = [p for _, p in ev.latency_cdf]
        assert all(b >= a for a, b in zip(probs, probs[1:]))
        assert 1.0 <= ev.ell_bound <= t.n_max

    def test_reuse_bit_identical(self):
        cfg = SystemConfig(rho=1.0, L=2, L_c=8, k=8, eps_target=0.1)
        rng = np.random.default_rng(8)
        incr = rng.normal(4.0, 3.0, size=(1000, 4)).astype(np.float32)
        a = find_threshold(cfg, 1.0, _traj(incr))
        b = find_threshold(cfg, 1.0, _traj(incr.copy()))
        assert a.gamma_star == b.gamma_star and a.ell_bound == b.ell_bound


class TestMinRounds:
    def test_high_snr_one_round(self):
        cfg = SystemConfig(rho=1000.0, L=3)
        ev = min_rounds(cfg, (0.5, 1.0), (1, 2), 20_000, seed=0)
        assert ev.ell_bound == 1.0
        assert ev.eps_bound <= cfg.eps_target

    def test_infeasible_low_snr(self):
        cfg = SystemConfig(rho=1e-6, L=2, L_c=8)
        with pytest.raises(InfeasibleError):
            min_rounds(cfg, (0.5, 1.0), (1, 2), 2000, seed=0)
