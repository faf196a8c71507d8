"""Command-line front end.

Subcommands: ``fbl`` (minimum-slot search), ``harq`` (threshold search plus
latency CDF), ``sweep`` (energy / rate / latency-CDF curves to CSV),
``kappa`` (tilted log moment over a beta grid) and ``validate`` (oracle and
diagnostic suite). Exit codes: 0 success, 2 infeasibility, 1 configuration
error.

Configuration is flat ``key = value`` text; command-line flags override
file values. SNR is expressed in dB at every interface and converted to
linear internally. Every output file embeds the reproducible part of its
run manifest as ``#``-prefixed header lines and gets a ``.manifest``
sidecar (itself valid configuration syntax) that adds volatile metadata:
re-running the same subcommand with the sidecar as ``--config`` reproduces
the outputs byte-identically. Lists accept ``a,b,c`` or ``start:step:stop``
syntax. The SHORTPKT_WORKERS environment variable sets the sweep worker
count; results do not depend on it.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import fields as dataclass_fields
from pathlib import Path

from . import __version__
from .channel_sim import SystemConfig, db_to_linear, linear_to_db
from .errors import ConfigError, InfeasibleError
from .fbl_bound import min_slots
from .harq_bound import min_rounds
from .info_density import kappa
from .sweep import SweepPlan, energy_curve, latency_cdf_curve, rate_curve

CSV_COLUMNS = (
    "scheme", "L", "rho_db", "k", "s", "n_p", "v_or_gamma",
    "avg_latency_s", "max_latency_s", "eb_db", "rate_bpcu", "eps_bound",
    "timeout_term", "undetected_term", "std_err", "seed", "n_trials",
)

_PILOT_NOTE = ("constant pilot vector (sqrt(rho),...); estimate sampled "
               "directly as h + CN(0, 1/(n_p rho))")

_CFG_KEYS = {
    "rho_db": float, "u": int, "d": int, "n_p": int, "L": int, "L_c": int,
    "T_o": float, "eps": float, "k": int,
}
_PLAN_KEYS = {
    "scheme": str, "target": str, "L_values": "int_list",
    "rho_values_db": "float_list", "k_values": "int_list",
    "n_trials": int, "seed": int, "s_grid": "float_list",
    "n_p_grid": "int_list", "search_trials": int,
    "latency_bin_s": float, "latency_budgets_s": "float_list",
}


def _parse_list(text: str, cast):
    text = text.strip()
    if ":" in text:
        parts = [p.strip() for p in text.split(":")]
        if len(parts) != 3:
            raise ConfigError(f"range syntax is start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError(f"range step must be > 0 in {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(cast(round(start + i * step, 12)) for i in range(n))
    return tuple(cast(p.strip()) for p in text.split(",") if p.strip())


def _parse_keyvalue(key: str, value: str):
    if key in _CFG_KEYS:
        kind = _CFG_KEYS[key]
    elif key in _PLAN_KEYS:
        kind = _PLAN_KEYS[key]
    else:
        raise ConfigError(f"unknown configuration key {key!r}")
    try:
        if kind == "int_list":
            return _parse_list(value, lambda v: int(float(v)))
        if kind == "float_list":
            return _parse_list(value, float)
        if kind is str:
            return value
        return kind(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc


def load_config(path) -> tuple[SystemConfig, SweepPlan]:
    """Parse a flat key=value config file into (SystemConfig, SweepPlan).

    Unspecified fields take the TDL-C defaults (u=24, d=3, T_o=71.4 us,
    L_c=30, eps=1e-3, k=30, 0 dB SNR). Keys starting with '_' are manifest
    metadata and ignored. Invariant violations raise ConfigError naming
    the offending field.
    """
    cfg_kv, plan_kv = {}, {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("_"):
            continue
        parsed = _parse_keyvalue(key, value)
        (cfg_kv if key in _CFG_KEYS else plan_kv)[key] = parsed
    return _build_cfg_plan(cfg_kv, plan_kv)


def _build_cfg_plan(cfg_kv: dict, plan_kv: dict) -> tuple[SystemConfig, SweepPlan]:
    kv = dict(cfg_kv)
    if "rho_db" in kv:
        kv["rho"] = db_to_linear(kv.pop("rho_db"))
    if "eps" in kv:
        kv["eps_target"] = kv.pop("eps")
    cfg = SystemConfig(**kv)
    plan = SweepPlan(**plan_kv)
    return cfg, plan


def manifest_lines(cfg: SystemConfig, plan: SweepPlan, command: str,
                   volatile: dict | None = None) -> list[str]:
    """Run manifest as config-syntax lines; volatile entries are '_'-keyed."""
    lines = [
        f"_tool = shortpkt {__version__}",
        f"_command = {command}",
        f"_pilot_convention = {_PILOT_NOTE}",
        f"rho_db = {linear_to_db(cfg.rho)!r}",
    ]
    for name in ("u", "d", "n_p", "L", "L_c", "k"):
        lines.append(f"{name} = {getattr(cfg, name)}")
    lines.append(f"T_o = {cfg.T_o!r}")
    lines.append(f"eps = {cfg.eps_target!r}")
    for f in dataclass_fields(SweepPlan):
        val = getattr(plan, f.name)
        if val is None:
            continue
        if isinstance(val, tuple):
            lines.append(f"{f.name} = {','.join(str(v) for v in val)}")
        else:
            lines.append(f"{f.name} = {val}")
    for key, val in (volatile or {}).items():
        lines.append(f"_{key} = {val}")
    return lines


def _fmt(value) -> str:
    if value == "" or value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, rows: list[dict], header_lines: list[str],
              columns=CSV_COLUMNS) -> None:
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c, "")) for c in columns) + "\n")


def write_manifest(path, lines: list[str]) -> None:
    Path(path).write_text("\n".join(lines) + "\n")


def read_result_csv(path):
    """Read back a CSV written by this tool (skipping manifest comments)."""
    rows = []
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#") or not line:
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(dict(zip(header, line.split(","))))
    return rows


def _eval_row(ev, scheme: str) -> dict:
    row = {
        "scheme": scheme, "L": ev.L, "rho_db": linear_to_db(ev.rho),
        "k": ev.k, "s": ev.s_used, "n_p": ev.n_p_used,
        "eb_db": ev.energy_per_bit_db, "rate_bpcu": ev.rate_bits_per_use,
        "eps_bound": ev.eps_bound, "seed": ev.seed, "n_trials": ev.n_trials,
    }
    if scheme == "fbl":
        row.update(v_or_gamma=ev.v_star, avg_latency_s=ev.latency_s,
                   max_latency_s=ev.latency_s, std_err=ev.mc_std_err,
                   timeout_term="", undetected_term="")
    else:
        row.update(v_or_gamma=ev.gamma_star, avg_latency_s=ev.avg_latency_s,
                   max_latency_s=ev.max_latency_s,
                   std_err=ev.mc_std_errs["timeout"],
                   timeout_term=ev.timeout_term,
                   undetected_term=ev.undetected_term)
    return row


def _apply_overrides(args, cfg: SystemConfig, plan: SweepPlan):
    cfg_kv, plan_kv = {}, {}
    if getattr(args, "snr_db", None) is not None:
        cfg_kv["rho"] = db_to_linear(args.snr_db)
    for flag, cfg_name in (("L", "L"), ("k", "k"), ("eps", "eps_target"),
                           ("n_p", "n_p")):
        val = getattr(args, flag, None)
        if val is not None:
            cfg_kv[cfg_name] = val
    if cfg_kv:
        cfg = cfg.with_(**cfg_kv)
    for flag, plan_name in (
            ("trials", "n_trials"), ("seed", "seed"),
            ("search_trials", "search_trials"), ("scheme", "scheme"),
            ("eps", "eps_target")):
        val = getattr(args, flag, None)
        if val is not None:
            plan_kv[plan_name] = val
    if getattr(args, "s_grid", None) is not None:
        plan_kv["s_grid"] = _parse_list(args.s_grid, float)
    if getattr(args, "np_grid", None) is not None:
        plan_kv["n_p_grid"] = _parse_list(args.np_grid, lambda v: int(float(v)))
    if getattr(args, "snr_db_grid", None) is not None:
        plan_kv["rho_values_db"] = _parse_list(args.snr_db_grid, float)
    if getattr(args, "L_grid", None) is not None:
        plan_kv["L_values"] = _parse_list(args.L_grid, lambda v: int(float(v)))
    if getattr(args, "k", None) is not None:
        plan_kv["k_values"] = (args.k,)
    if getattr(args, "L", None) is not None and "L_values" not in plan_kv:
        plan_kv["L_values"] = (args.L,)
    if getattr(args, "target", None) is not None:
        plan_kv["target"] = {"energy": "min_energy_per_bit",
                             "rate": "max_rate",
                             "cdf": "latency_cdf"}[args.target]
    if plan_kv:
        plan = SweepPlan(**{**{f.name: getattr(plan, f.name)
                               for f in dataclass_fields(SweepPlan)},
                            **plan_kv})
    return cfg, plan


def _load_base(args) -> tuple[SystemConfig, SweepPlan]:
    if getattr(args, "config", None):
        cfg, plan = load_config(args.config)
    else:
        cfg, plan = SystemConfig(), SweepPlan()
    return _apply_overrides(args, cfg, plan)


def _cmd_fbl(args) -> int:
    cfg, plan = _load_base(args)
    t0 = time.time()
    ev = min_slots(cfg, plan.s_grid, plan.n_p_grid, plan.n_trials, plan.seed,
                   search_trials=plan.search_trials)
    header = manifest_lines(cfg, plan, "fbl")
    sidecar = manifest_lines(cfg, plan, "fbl",
                             {"runtime_s": round(time.time() - t0, 3)})
    write_csv(args.out, [_eval_row(ev, "fbl")], header)
    write_manifest(str(args.out) + ".manifest", sidecar)
    print(f"FBL: v*={ev.v_star}  eps_bound={ev.eps_bound:.3e}  "
          f"latency={ev.latency_s * 1e3:.4g} ms  Eb={ev.energy_per_bit_db:.3f} dB  "
          f"rate={ev.rate_bits_per_use:.5f} bpcu  (s={ev.s_used:g}, "
          f"n_p={ev.n_p_used})")
    print(f"wrote {args.out}")
    return 0


def _cmd_harq(args) -> int:
    cfg, plan = _load_base(args)
    t0 = time.time()
    ev = min_rounds(cfg, plan.s_grid, plan.n_p_grid, plan.n_trials, plan.seed,
                    search_trials=plan.search_trials)
    header = manifest_lines(cfg, plan, "harq")
    sidecar = manifest_lines(cfg, plan, "harq",
                             {"runtime_s": round(time.time() - t0, 3)})
    write_csv(args.out, [_eval_row(ev, "harq")], header)
    write_manifest(str(args.out) + ".manifest", sidecar)
    cdf_path = args.cdf_out or str(Path(args.out).with_suffix("")) + "_cdf.csv"
    with open(cdf_path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("t_seconds,cdf\n")
        for t, p in ev.latency_cdf:
            fh.write(f"{t!r},{p!r}\n")
    print(f"HARQ: gamma*={ev.gamma_star:.4f} nats  ell<={ev.ell_bound:.4f} "
          f"rounds  eps_bound={ev.eps_bound:.3e} "
          f"(undetected {ev.undetected_term:.2e} + timeout "
          f"{ev.timeout_term:.2e})")
    print(f"      avg latency={ev.avg_latency_s * 1e3:.4g} ms  max="
          f"{ev.max_latency_s * 1e3:.4g} ms  Eb={ev.energy_per_bit_db:.3f} dB  "
          f"rate={ev.rate_bits_per_use:.5f} bpcu  (s={ev.s_used:g}, "
          f"n_p={ev.n_p_used})")
    print(f"wrote {args.out}, {cdf_path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg, plan = _load_base(args)
    t0 = time.time()
    if plan.target == "min_energy_per_bit":
        points = energy_curve(cfg, plan)
    elif plan.target == "max_rate":
        points = rate_curve(cfg, plan)
    else:
        points = latency_cdf_curve(cfg, plan)
    rows = []
    for p in points:
        row = dict(p.metadata)
        if plan.target == "latency_cdf":
            row["avg_latency_s"] = p.x_latency_s
            row["rate_bpcu"] = p.y_value
        rows.append(row)
    header = manifest_lines(cfg, plan, f"sweep --target {plan.target}")
    sidecar = manifest_lines(cfg, plan, f"sweep --target {plan.target}",
                             {"runtime_s": round(time.time() - t0, 3)})
    write_csv(args.out, rows, header)
    write_manifest(str(args.out) + ".manifest", sidecar)
    print(f"wrote {len(rows)} points to {args.out}")
    return 0


def _cmd_kappa(args) -> int:
    cfg, plan = _load_base(args)
    betas = _parse_list(args.beta_grid, float)
    t0 = time.time()
    rows = []
    for beta in betas:
        est, se = kappa(beta, cfg, args.s, plan.n_trials, plan.seed)
        rows.append({"beta": beta, "kappa": est, "std_err": se})
        print(f"kappa({beta:g}) = {est: .6e}  (se {se:.2e})")
    header = manifest_lines(cfg, plan, f"kappa --s {args.s}")
    sidecar = manifest_lines(cfg, plan, f"kappa --s {args.s}",
                             {"runtime_s": round(time.time() - t0, 3)})
    write_csv(args.out, rows, header, columns=("beta", "kappa", "std_err"))
    write_manifest(str(args.out) + ".manifest", sidecar)
    print(f"wrote {args.out}")
    return 0


def _cmd_validate(args) -> int:
    from .diagnostics import run_all

    results = run_all(seed=args.seed or 0, quick=args.quick)
    all_ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        all_ok &= r.passed
        print(f"[{status}] {r.name}: {r.detail}")
    return 0 if all_ok else 1


def _add_common(p, grids=True):
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--seed", type=int, default=None,
                   help="Monte Carlo seed (default 0)")
    p.add_argument("--trials", type=int, default=None, dest="trials",
                   help="Monte Carlo trials per point (default 200000)")
    if grids:
        p.add_argument("--search-trials", type=int, default=None,
                       dest="search_trials",
                       help="reduced trial count for the (s, n_p) grid stage")
        p.add_argument("--s-grid", default=None,
                       help="metric-scale grid, e.g. 0.1:0.1:3.0 or 0.5,1,2")
        p.add_argument("--np-grid", default=None,
                       help="pilot-count grid, e.g. 1,2,4,8,12,16,24")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="shortpkt",
        description="Achievability bounds for short-packet FBL vs HARQ-IR "
                    "transmission over Rayleigh block-fading channels.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    fbl = sub.add_parser("fbl", help="minimum-slot RCUs search")
    harq = sub.add_parser("harq", help="HARQ threshold search + latency CDF")
    for p, default_out in ((fbl, "fbl_result.csv"), (harq, "harq_result.csv")):
        _add_common(p)
        p.add_argument("--snr-db", type=float, default=None)
        p.add_argument("--L", type=int, default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--out", default=default_out)
    harq.add_argument("--cdf-out", default=None,
                      help="latency CDF output path (default <out>_cdf.csv)")

    sw = sub.add_parser("sweep", help="energy / rate / latency-CDF curves")
    _add_common(sw)
    sw.add_argument("--target", choices=("energy", "rate", "cdf"),
                    default=None)
    sw.add_argument("--scheme", choices=("fbl", "harq"), default=None)
    sw.add_argument("--L", type=int, default=None,
                    help="single diversity order (shorthand for --L-grid)")
    sw.add_argument("--L-grid", dest="L_grid", default=None,
                    help="diversity orders, e.g. 2,3,5,6")
    sw.add_argument("--snr-db-grid", dest="snr_db_grid", default=None,
                    help="SNR grid in dB, e.g. -10:0.5:10")
    sw.add_argument("--k", type=int, default=None)
    sw.add_argument("--eps", type=float, default=None)
    sw.add_argument("--out", default="sweep.csv")

    kp = sub.add_parser("kappa", help="tilted log moment over a beta grid")
    _add_common(kp, grids=False)
    kp.add_argument("--beta-grid", default="0:0.1:1.2")
    kp.add_argument("--s", type=float, default=1.0)
    kp.add_argument("--snr-db", type=float, default=None)
    kp.add_argument("--L", type=int, default=None)
    kp.add_argument("--n-p", dest="n_p", type=int, default=None)
    kp.add_argument("--out", default="kappa.csv")

    va = sub.add_parser("validate", help="run the oracle/diagnostic suite")
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--quick", action="store_true",
                    help="reduced trial counts (smoke test)")
    return ap


def run(argv=None) -> int:
    """CLI entry point; returns the process exit code."""
    ap = build_parser()
    args = ap.parse_args(argv)
    handlers = {"fbl": _cmd_fbl, "harq": _cmd_harq, "sweep": _cmd_sweep,
                "kappa": _cmd_kappa, "validate": _cmd_validate}
    try:
        return handlers[args.cmd](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
