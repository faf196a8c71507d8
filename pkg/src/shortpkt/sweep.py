"""Parameter sweeps producing energy/latency, rate/latency and latency-CDF
curves for the FBL and HARQ schemes, optimizing the metric scale s and the
pilot count n_p at every operating point.

Points are independent jobs with per-point seeds derived from the global
seed and the point index, so results are identical no matter how the work
is scheduled. The worker count is taken from the SHORTPKT_WORKERS
environment variable (default 1).
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel_sim import SystemConfig, db_to_linear, derive_seed
from .errors import ConfigError, InfeasibleError
from .fbl_bound import bounds_for_all_v, make_fbl_evaluation
from .harq_bound import find_threshold
from .mc import grid_increments
from .search import _traj, evaluate_schemes

logger = logging.getLogger(__name__)

# Grid defaults: coarse s grid refined once near the optimum, and pilot
# counts spanning the useful range for n_c = 72 blocks.
DEFAULT_S_GRID = tuple(round(0.1 * i, 10) for i in range(1, 31))
DEFAULT_NP_GRID = (1, 2, 4, 8, 12, 16, 24)
DEFAULT_RHO_GRID_DB = tuple(round(-10.0 + 0.5 * i, 10) for i in range(41))

# Bit-payload search range for the maximum-rate curves.
K_SEARCH_MAX = 512

_TARGETS = ("min_energy_per_bit", "max_rate", "latency_cdf")


@dataclass(frozen=True)
class SweepPlan:
    """What to sweep and how hard to sample.

    ``latency_bin_s`` controls the lower-envelope bucketing of the energy
    curve: None uses one round duration, 0 disables bucketing.
    """

    scheme: str = "harq"
    L_values: tuple = (2, 3, 5, 6)
    rho_values_db: tuple = DEFAULT_RHO_GRID_DB
    k_values: tuple = (30,)
    target: str = "min_energy_per_bit"
    eps_target: float | None = None
    n_trials: int = 200_000
    seed: int = 0
    s_grid: tuple = DEFAULT_S_GRID
    n_p_grid: tuple = DEFAULT_NP_GRID
    search_trials: int | None = None
    latency_bin_s: float | None = None
    latency_budgets_s: tuple | None = None

    def __post_init__(self):
        if self.scheme not in ("fbl", "harq"):
            raise ConfigError(f"scheme must be 'fbl' or 'harq', got {self.scheme!r}")
        if self.target not in _TARGETS:
            raise ConfigError(f"target must be one of {_TARGETS}, got {self.target!r}")
        for name in ("L_values", "rho_values_db", "k_values", "s_grid", "n_p_grid"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must be nonempty")
        if self.n_trials < 1:
            raise ConfigError(f"n_trials must be >= 1, got {self.n_trials}")


@dataclass(frozen=True)
class CurvePoint:
    """One plotted point: average latency on x, metric value on y, plus the
    metadata needed to reproduce it bit-identically."""

    x_latency_s: float
    y_value: float
    metadata: dict


def _n_workers() -> int:
    try:
        return max(1, int(os.environ.get("SHORTPKT_WORKERS", "1")))
    except ValueError:
        return 1


def _call(job):
    fn, args = job
    return fn(*args)


def _map_jobs(fn, args_list):
    workers = _n_workers()
    if workers <= 1 or len(args_list) <= 1:
        return [fn(*args) for args in args_list]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_call, [(fn, args) for args in args_list]))


def _check_plan(cfg: SystemConfig, plan: SweepPlan) -> None:
    for L in plan.L_values:
        if not 1 <= L <= cfg.L_c:
            raise ConfigError(f"L={L} exceeds L_c={cfg.L_c}")


def _metadata(scheme, ev, seed):
    md = {
        "scheme": scheme, "L": ev.L, "rho_db": 10.0 * math.log10(ev.rho),
        "k": ev.k, "s": ev.s_used, "n_p": ev.n_p_used,
        "eb_db": ev.energy_per_bit_db, "rate_bpcu": ev.rate_bits_per_use,
        "eps_bound": ev.eps_bound, "seed": seed, "n_trials": ev.n_trials,
    }
    if scheme == "fbl":
        md.update(v_or_gamma=ev.v_star, avg_latency_s=ev.latency_s,
                  max_latency_s=ev.latency_s, std_err=ev.mc_std_err,
                  timeout_term="", undetected_term="")
    else:
        md.update(v_or_gamma=ev.gamma_star, avg_latency_s=ev.avg_latency_s,
                  max_latency_s=ev.max_latency_s,
                  std_err=ev.mc_std_errs["timeout"],
                  timeout_term=ev.timeout_term,
                  undetected_term=ev.undetected_term)
    return md


def _energy_point(cfg: SystemConfig, plan: SweepPlan, idx: int, L: int,
                  rho_db: float):
    point_seed = derive_seed(plan.seed, idx)
    cfg_pt = cfg.with_(L=L, rho=db_to_linear(rho_db), k=plan.k_values[0])
    res = evaluate_schemes(cfg_pt, plan.s_grid, plan.n_p_grid, plan.n_trials,
                           point_seed, search_trials=plan.search_trials,
                           schemes=(plan.scheme,),
                           eps_target=plan.eps_target)[plan.scheme]
    if isinstance(res, InfeasibleError):
        return ("infeasible", L, rho_db, str(res))
    md = _metadata(plan.scheme, res, point_seed)
    return CurvePoint(x_latency_s=md["avg_latency_s"], y_value=md["eb_db"],
                      metadata=md)


def energy_curve(cfg: SystemConfig, plan: SweepPlan) -> list[CurvePoint]:
    """Minimum energy per bit versus average latency.

    Sweeps (L, rho) over the plan grids at fixed payload k; for each
    achieved-latency bucket only the lowest energy point is retained
    (the operationally meaningful frontier). Infeasible points are logged
    and omitted, never interpolated.
    """
    _check_plan(cfg, plan)
    if plan.target != "min_energy_per_bit":
        raise ConfigError(f"energy_curve requires target=min_energy_per_bit, "
                          f"got {plan.target!r}")
    jobs = [(cfg, plan, i, L, rho_db)
            for i, (L, rho_db) in enumerate(
                (L, r) for L in plan.L_values for r in plan.rho_values_db)]
    raw = _map_jobs(_energy_point, jobs)
    points = []
    for r in raw:
        if isinstance(r, tuple) and r and r[0] == "infeasible":
            logger.info("energy point omitted (L=%s, rho=%s dB): %s",
                        r[1], r[2], r[3])
        else:
            points.append(r)
    if plan.latency_bin_s == 0:
        return sorted(points, key=lambda p: (p.metadata["L"], p.x_latency_s))
    out = []
    for L in plan.L_values:
        bin_s = plan.latency_bin_s
        if bin_s is None:
            bin_s = cfg.d * cfg.T_o * (2.0 if plan.scheme == "harq" else 1.0)
        best: dict[int, CurvePoint] = {}
        for p in points:
            if p.metadata["L"] != L:
                continue
            b = int(p.x_latency_s / bin_s + 1e-9)
            if b not in best or p.y_value < best[b].y_value:
                best[b] = p
        out.extend(best[b] for b in sorted(best))
    return out


def _fbl_k_star(increments, v, eps_target):
    """Largest payload feasible at exactly v slots, by bisection on k."""
    def feasible(k):
        bounds, ses = bounds_for_all_v(increments[:, :v], k)
        return bounds[v - 1] + 2.0 * ses[v - 1] <= eps_target
    if not feasible(1):
        return None
    lo, hi = 1, K_SEARCH_MAX
    if feasible(hi):
        return hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _harq_k_star(cfg, combo, traj, budget_rounds, eps_target):
    """Largest payload whose threshold search is feasible with the
    average-rounds bound inside the budget."""
    def attempt(k):
        try:
            ev = find_threshold(cfg.with_(n_p=combo[1], k=k), combo[0], traj,
                                eps_target)
        except InfeasibleError:
            return None
        return ev if ev.ell_bound <= budget_rounds + 1e-12 else None
    if attempt(1) is None:
        return None, None
    lo, hi = 1, K_SEARCH_MAX
    ev_hi = attempt(hi)
    if ev_hi is not None:
        return hi, ev_hi
    ev_lo = attempt(lo)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ev_mid = attempt(mid)
        if ev_mid is not None:
            lo, ev_lo = mid, ev_mid
        else:
            hi = mid
    return lo, ev_lo


def _rate_points_for_L(cfg: SystemConfig, plan: SweepPlan, idx: int, L: int):
    point_seed = derive_seed(plan.seed, idx)
    eps = plan.eps_target if plan.eps_target is not None else cfg.eps_target
    cfg_L = cfg.with_(L=L, rho=db_to_linear(plan.rho_values_db[0]))
    n_max = cfg_L.n_max
    round_s = 2.0 * cfg_L.d * cfg_L.T_o
    slot_s = cfg_L.d * cfg_L.T_o
    budgets = plan.latency_budgets_s
    if budgets is None:
        budgets = tuple(j * round_s for j in range(1, n_max + 1))

    combos = [(float(s), int(p)) for p in plan.n_p_grid for s in plan.s_grid]
    n_a = plan.search_trials or min(plan.n_trials, 20_000)
    n_a = min(n_a, plan.n_trials)
    incr_a = grid_increments(cfg_L, combos, n_a, point_seed)

    points = []
    evaluated_full: dict = {}
    for budget in budgets:
        if plan.scheme == "fbl":
            if budget + 1e-12 < slot_s:
                logger.info("rate point omitted (L=%d): budget %.4g s below "
                            "one slot", L, budget)
                continue
            v_used = min(n_max, int(budget / slot_s + 1e-9))
            best = None  # (k, combo)
            for combo, incr in incr_a.items():
                k = _fbl_k_star(incr, v_used, eps)
                if k is not None and (best is None or k > best[0]):
                    best = (k, combo)
            if best is None:
                logger.info("rate point omitted (L=%d, budget %.4g s): no "
                            "feasible payload", L, budget)
                continue
            combo = best[1]
            if combo not in evaluated_full:
                evaluated_full[combo] = grid_increments(
                    cfg_L, [combo], plan.n_trials, point_seed)[combo]
            k_full = _fbl_k_star(evaluated_full[combo], v_used, eps)
            if k_full is None:
                logger.info("rate point omitted (L=%d, budget %.4g s): "
                            "infeasible at full trial budget", L, budget)
                continue
            ev = make_fbl_evaluation(
                cfg_L.with_(k=k_full), v_used,
                *_fbl_bound_at(evaluated_full[combo], v_used, k_full),
                combo[0], combo[1], plan.n_trials, point_seed)
            md = _metadata("fbl", ev, point_seed)
            points.append(CurvePoint(x_latency_s=ev.latency_s,
                                     y_value=ev.rate_bits_per_use,
                                     metadata=md))
        else:
            if budget + 1e-12 < round_s:
                logger.info("rate point omitted (L=%d): budget %.4g s below "
                            "one round", L, budget)
                continue
            budget_rounds = budget / round_s
            best = None  # (k, combo)
            for combo, incr in incr_a.items():
                k, _ = _harq_k_star(cfg_L, combo,
                                    _traj(incr, cfg_L, combo, point_seed),
                                    budget_rounds, eps)
                if k is not None and (best is None or k > best[0]):
                    best = (k, combo)
            if best is None:
                logger.info("rate point omitted (L=%d, budget %.4g s): no "
                            "feasible payload", L, budget)
                continue
            combo = best[1]
            if combo not in evaluated_full:
                evaluated_full[combo] = grid_increments(
                    cfg_L, [combo], plan.n_trials, point_seed)[combo]
            k_full, ev = _harq_k_star(
                cfg_L, combo,
                _traj(evaluated_full[combo], cfg_L, combo, point_seed),
                budget_rounds, eps)
            if k_full is None:
                logger.info("rate point omitted (L=%d, budget %.4g s): "
                            "infeasible at full trial budget", L, budget)
                continue
            md = _metadata("harq", ev, point_seed)
            points.append(CurvePoint(x_latency_s=ev.avg_latency_s,
                                     y_value=ev.rate_bits_per_use,
                                     metadata=md))
    return points


def _fbl_bound_at(increments, v, k):
    bounds, ses = bounds_for_all_v(increments[:, :v], k)
    return float(bounds[v - 1]), float(ses[v - 1])


def rate_curve(cfg: SystemConfig, plan: SweepPlan) -> list[CurvePoint]:
    """Maximum coding rate versus average latency at fixed rho.

    For each L and each latency budget, the largest feasible payload k is
    found by bisection (1..512 bits) and the achieved rate emitted. FBL
    uses the slot count the budget affords; HARQ requires the
    average-rounds bound to fit inside the budget.
    """
    _check_plan(cfg, plan)
    if plan.target != "max_rate":
        raise ConfigError(f"rate_curve requires target=max_rate, got "
                          f"{plan.target!r}")
    if len(plan.rho_values_db) != 1:
        logger.info("rate_curve uses the first rho value (%g dB)",
                    plan.rho_values_db[0])
    jobs = [(cfg, plan, i, L) for i, L in enumerate(plan.L_values)]
    nested = _map_jobs(_rate_points_for_L, jobs)
    return [p for group in nested for p in group]


def _cdf_point(cfg: SystemConfig, plan: SweepPlan, idx: int, rho_db: float):
    point_seed = derive_seed(plan.seed, idx)
    cfg_pt = cfg.with_(L=plan.L_values[0], rho=db_to_linear(rho_db),
                       k=plan.k_values[0])
    res = evaluate_schemes(cfg_pt, plan.s_grid, plan.n_p_grid, plan.n_trials,
                           point_seed, search_trials=plan.search_trials,
                           schemes=("fbl", "harq"),
                           eps_target=plan.eps_target)
    return rho_db, point_seed, res["fbl"], res["harq"]


def crossing_probability(harq_ev, fbl_ev) -> float:
    """P[HARQ latency > FBL latency], read off the HARQ latency CDF at the
    deterministic FBL latency."""
    p_le = 0.0
    for t, p in harq_ev.latency_cdf:
        if t <= fbl_ev.latency_s + 1e-12:
            p_le = p
        else:
            break
    return 1.0 - p_le


def latency_cdf_curve(cfg: SystemConfig, plan: SweepPlan) -> list[CurvePoint]:
    """Latency CDFs of both schemes for each rho, plus their crossing
    probability (carried in every point's metadata)."""
    _check_plan(cfg, plan)
    if plan.target != "latency_cdf":
        raise ConfigError(f"latency_cdf_curve requires target=latency_cdf, "
                          f"got {plan.target!r}")
    jobs = [(cfg, plan, i, rho_db)
            for i, rho_db in enumerate(plan.rho_values_db)]
    results = _map_jobs(_cdf_point, jobs)
    points = []
    for rho_db, point_seed, fbl_res, harq_res in results:
        if isinstance(fbl_res, InfeasibleError) or \
                isinstance(harq_res, InfeasibleError):
            bad = fbl_res if isinstance(fbl_res, InfeasibleError) else harq_res
            logger.info("cdf point omitted (rho=%s dB): %s", rho_db, bad)
            continue
        p_cross = crossing_probability(harq_res, fbl_res)
        md_harq = _metadata("harq", harq_res, point_seed)
        md_harq["p_harq_latency_exceeds_fbl"] = p_cross
        for t, p in harq_res.latency_cdf:
            md = dict(md_harq)
            points.append(CurvePoint(x_latency_s=t, y_value=p, metadata=md))
        md_fbl = _metadata("fbl", fbl_res, point_seed)
        md_fbl["p_harq_latency_exceeds_fbl"] = p_cross
        points.append(CurvePoint(x_latency_s=fbl_res.latency_s, y_value=1.0,
                                 metadata=md_fbl))
    return points
