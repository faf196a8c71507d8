"""Two-stage (s, n_p) grid optimization shared by the FBL and HARQ searches.

Evaluating the full grid at the full trial budget is wasteful: the grids
are ranked on a reduced number of trials first (a prefix of the full trial
set, so rankings are common-random-number consistent) and only shortlisted
parameter pairs are re-evaluated on the full budget. Feasibility is always
declared on full-budget estimates with their conservative margins. Both
schemes share one pass over the channel trials since the per-round density
increments do not depend on the scheme.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .channel_sim import SystemConfig
from .errors import InfeasibleError
from .fbl_bound import bounds_for_all_v, make_fbl_evaluation
from .harq_bound import TrialTrajectory, find_threshold
from .mc import grid_increments

# Fall-back stage-1 budget when the caller does not set search_trials.
DEFAULT_SEARCH_TRIALS = 20_000


def _as_combos(cfg: SystemConfig, s_grid, n_p_grid) -> list[tuple[float, int]]:
    s_grid = [float(s) for s in s_grid]
    n_p_grid = [int(p) for p in n_p_grid]
    if not s_grid or not n_p_grid:
        raise ValueError("s_grid and n_p_grid must be nonempty")
    return [(s, n_p) for n_p in n_p_grid for s in s_grid]


def _traj(incr: np.ndarray, cfg: SystemConfig, combo, seed) -> TrialTrajectory:
    s, n_p = combo
    return TrialTrajectory(increments=incr, s=s, n_p=n_p, rho=cfg.rho,
                           L=cfg.L, seed=seed)


def _fbl_pick_per_v(incr_map, k):
    """Per slot count, the combo with the smallest bound estimate."""
    picks, best_bounds, best_ses = {}, {}, {}
    for combo, incr in incr_map.items():
        bounds, ses = bounds_for_all_v(incr, k)
        for v in range(1, bounds.shape[0] + 1):
            b = float(bounds[v - 1])
            if v not in picks or b < best_bounds[v]:
                picks[v] = combo
                best_bounds[v] = b
                best_ses[v] = float(ses[v - 1])
    return picks, best_bounds, best_ses


def _harq_rank(incr_map, cfg, seed, eps_target):
    """Combos ordered by feasibility then average-rounds bound."""
    ranked = []
    for combo, incr in incr_map.items():
        try:
            ev = find_threshold(cfg.with_(n_p=combo[1]), combo[0],
                                _traj(incr, cfg, combo, seed), eps_target)
            ranked.append((ev.ell_bound, combo))
        except InfeasibleError as err:
            ranked.append((math.inf, combo, err))
    ranked.sort(key=lambda r: (r[0], r[1]))
    return ranked


def _refine_s(cfg, incr_a, best_combos, s_grid, n_a, seed):
    """One refinement pass: geometric midpoints around the stage-1 best s.

    Returns the extra increments evaluated (possibly empty).
    """
    s_sorted = sorted(set(float(s) for s in s_grid))
    extra: set[tuple[float, int]] = set()
    for s_star, n_p in best_combos:
        i = s_sorted.index(s_star) if s_star in s_sorted else None
        if i is None:
            continue
        for j in (i - 1, i + 1):
            if 0 <= j < len(s_sorted) and s_sorted[j] > 0 and s_star > 0:
                extra.add((round(math.sqrt(s_star * s_sorted[j]), 12), n_p))
    extra -= set(incr_a)
    if not extra:
        return {}
    return grid_increments(cfg, sorted(extra), n_a, seed)


def evaluate_schemes(cfg: SystemConfig, s_grid, n_p_grid, n_trials: int,
                     seed: int = 0, search_trials: int | None = None,
                     schemes: Iterable[str] = ("fbl", "harq"),
                     eps_target: float | None = None,
                     refine: bool = True) -> dict:
    """Optimize (s, n_p) for the requested schemes at one (rho, L) point.

    Returns {scheme: FblEvaluation | HarqEvaluation | InfeasibleError}.
    Infeasibility is reported as a value rather than raised so that a
    sweep can log and continue; the thin wrappers in fbl_bound/harq_bound
    raise it. ``refine`` adds one pass of geometric-midpoint s candidates
    around the stage-1 optimum.
    """
    if eps_target is None:
        eps_target = cfg.eps_target
    schemes = tuple(schemes)
    for sch in schemes:
        if sch not in ("fbl", "harq"):
            raise ValueError(f"unknown scheme {sch!r}")
    combos = _as_combos(cfg, s_grid, n_p_grid)
    if search_trials is None:
        search_trials = min(n_trials, DEFAULT_SEARCH_TRIALS)
    n_a = max(1, min(n_trials, search_trials))

    incr_a = grid_increments(cfg, combos, n_a, seed)
    n_max = cfg.n_max

    def stage1():
        picks = bounds_a = ses_a = window = ranked = None
        if "fbl" in schemes:
            picks, bounds_a, ses_a = _fbl_pick_per_v(incr_a, cfg.k)
            v_a = next((v for v in range(1, n_max + 1)
                        if bounds_a[v] + 2.0 * ses_a[v] <= eps_target), None)
            if v_a is None:
                window = [n_max]
            else:
                window = [v for v in (v_a - 1, v_a, v_a + 1)
                          if 1 <= v <= n_max]
        if "harq" in schemes:
            ranked = _harq_rank(incr_a, cfg, seed, eps_target)
        return picks, window, ranked

    fbl_picks, window, harq_ranked = stage1()
    if refine:
        best_combos = set()
        if window:
            best_combos.update(fbl_picks[v] for v in window)
        if harq_ranked:
            best_combos.add(harq_ranked[0][1])
        incr_a.update(_refine_s(cfg, incr_a, best_combos, s_grid, n_a, seed))
        fbl_picks, window, harq_ranked = stage1()

    shortlist: set[tuple[float, int]] = set()
    if window:
        shortlist.update(fbl_picks[v] for v in window)
    if harq_ranked:
        shortlist.update(r[1] for r in harq_ranked[:2])

    # Stage 2: confirm shortlisted combos on the full budget.
    if n_a >= n_trials:
        incr_full = incr_a
    else:
        incr_full = grid_increments(cfg, sorted(shortlist), n_trials, seed)

    results: dict = {}
    if "fbl" in schemes:
        results["fbl"] = _finalize_fbl(cfg, incr_full, fbl_picks, n_trials,
                                       seed, eps_target)
    if "harq" in schemes:
        results["harq"] = _finalize_harq(cfg, incr_full, harq_ranked,
                                         n_trials, seed, eps_target)
    return results


def _finalize_fbl(cfg, incr_full, picks_a, n_trials, seed, eps_target):
    """First feasible v over the evaluated combos, extending downward if
    feasibility appears at smaller v than the stage-1 window predicted."""
    evaluated = {c: bounds_for_all_v(i, cfg.k) for c, i in incr_full.items()}

    def best_at(v):
        best = None
        for combo, (bounds, ses) in evaluated.items():
            b, se = float(bounds[v - 1]), float(ses[v - 1])
            if best is None or b < best[0]:
                best = (b, se, combo)
        return best

    if eps_target >= 1.0:
        # Degenerate target: every code qualifies; one slot suffices.
        b, se, combo = best_at(1)
        return make_fbl_evaluation(cfg, 1, b, se, combo[0], combo[1],
                                   n_trials, seed)

    v_star = None
    for v in range(1, cfg.n_max + 1):
        b, se, combo = best_at(v)
        if b + 2.0 * se <= eps_target:
            v_star = v
            break
    while v_star is not None and v_star > 1:
        # A smaller v might be feasible, possibly with its own
        # stage-1-optimal combo that was not shortlisted.
        b, se, _ = best_at(v_star - 1)
        if b + 2.0 * se <= eps_target:
            v_star -= 1
            continue
        prev_pick = picks_a.get(v_star - 1)
        if prev_pick is None or prev_pick in evaluated:
            break
        incr = grid_increments(cfg, [prev_pick], n_trials, seed)[prev_pick]
        evaluated[prev_pick] = bounds_for_all_v(incr, cfg.k)
        b, se, _ = best_at(v_star - 1)
        if b + 2.0 * se <= eps_target:
            v_star -= 1
        else:
            break

    if v_star is None:
        b, se, combo = best_at(cfg.n_max)
        return InfeasibleError(
            f"no v <= n_max={cfg.n_max} meets eps_target={eps_target:g}: "
            f"best bound {b:.3e} (+2se {b + 2 * se:.3e}) at v={cfg.n_max}, "
            f"s={combo[0]:g}, n_p={combo[1]}",
            best={"v": cfg.n_max, "eps_bound": b, "std_err": se,
                  "s": combo[0], "n_p": combo[1]})
    b, se, combo = best_at(v_star)
    return make_fbl_evaluation(cfg, v_star, b, se, combo[0], combo[1],
                               n_trials, seed)


def _finalize_harq(cfg, incr_full, ranked_a, n_trials, seed, eps_target):
    """Re-run the threshold search on full-budget trajectories."""
    order = [r[1] for r in ranked_a if r[1] in incr_full]
    order += [c for c in incr_full if c not in order]
    best_err = None
    best_eval = None
    for combo in order:
        try:
            ev = find_threshold(cfg.with_(n_p=combo[1]), combo[0],
                                _traj(incr_full[combo], cfg, combo, seed),
                                eps_target)
        except InfeasibleError as err:
            if best_err is None:
                best_err = err
            continue
        if best_eval is None or ev.ell_bound < best_eval.ell_bound:
            best_eval = ev
    if best_eval is not None:
        return best_eval
    return best_err if best_err is not None else InfeasibleError(
        "no feasible HARQ parameters found")
