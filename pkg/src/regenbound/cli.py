"""Batch command-line interface.

Subcommands: analyze (splitting report), bounds (rate constants),
simulate (coupling-time samples and traces), verify (empirical TV against
the bounds), alternating (busy/idle pipeline).  Every report embeds the
fully resolved configuration, and identical argv + seed reproduce every
output byte for byte.

Exit codes: 0 success, 1 verification failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import alternating as alt
from .bounds import make_exp_report, make_poly_report
from .coupling import sample_tau, simulate_coupling
from .distributions import (DelaySpec, Distribution, SpecError, from_spec,
                            parse_dist, validate)
from .empirics import coupling_inequality_check, tv_curve, verify_curve
from .splitting import SplitError, compute_split
from .streams import UniformStream

SCHEMA_PREFIX = "regenbound"
_OUT_DIR_ENV = "REGENBOUND_OUT_DIR"


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_json(path: "Path | None", payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _resolve_dist(args, cfg: dict) -> Distribution:
    if "dist" in cfg:  # JSON config wins on conflict
        return validate(from_spec(cfg["dist"]))
    if getattr(args, "dist", None):
        return validate(parse_dist(args.dist))
    raise SpecError("no distribution given: use --dist or a config file")


def _resolve_delay(args, cfg: dict) -> DelaySpec:
    if "delay" in cfg:
        spec = cfg["delay"]
        kind = spec.get("kind")
        if kind == "fixed_age":
            return DelaySpec.fixed_age(spec["age"])
        if kind == "law":
            return DelaySpec.law(from_spec(spec["dist"]))
        if kind == "stationary":
            return DelaySpec.stationary()
        raise SpecError(f"malformed delay spec in config: {spec!r}")
    text = getattr(args, "delay", None)
    if text:
        return DelaySpec.from_text(text)
    return DelaySpec.fixed_age(0.0)


def _load_config(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read config {path!r}: {exc}") from None
    if not isinstance(cfg, dict):
        raise SpecError("config file must hold a JSON object")
    return cfg


def _out_dir(args) -> Path:
    if getattr(args, "out_dir", None):
        return Path(args.out_dir)
    return Path(os.environ.get(_OUT_DIR_ENV, "."))


def _parse_k_list(text: str) -> list[float]:
    try:
        ks = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise SpecError(f"malformed k list {text!r}") from None
    if not ks:
        raise SpecError("empty k list")
    return ks


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise SpecError(f"malformed time grid {text!r}") from None


def _config_echo(args, cfg: dict, d: Distribution, delay: DelaySpec | None,
                 **extra) -> dict:
    echo = {
        "command": args.command,
        "dist": d.spec_dict(),
        "split_tol": getattr(args, "split_tol", None),
    }
    if delay is not None:
        echo["delay"] = delay.spec_dict()
    echo.update(extra)
    echo.update({k: v for k, v in cfg.items() if k not in ("dist", "delay")})
    return echo


# -- subcommands ---------------------------------------------------------------


def _cmd_analyze(args) -> int:
    cfg = _load_config(args)
    d = _resolve_dist(args, cfg)
    split = compute_split(d, tol=args.split_tol)
    eq = d.equilibrium()
    payload = {
        "schema": f"{SCHEMA_PREFIX}/analyze/1",
        "config": _config_echo(args, cfg, d, None),
        "kappa": split.kappa,
        "kappa_err": split.kappa_err,
        "degenerate_overlap": split.degenerate,
        "mean": d.mean,
        "equilibrium_mean": eq.raw_moment(1),
        "residual_mass": 1.0 - split.kappa,
        "grid_nodes": int(len(split.nodes)),
    }
    write_json(args.out and Path(args.out), payload)
    return 0


def _cmd_bounds(args) -> int:
    cfg = _load_config(args)
    d = _resolve_dist(args, cfg)
    delay = _resolve_delay(args, cfg)
    split = compute_split(d, tol=args.split_tol)
    k_list = _parse_k_list(cfg.get("k", args.k)) if isinstance(cfg.get("k", args.k), str) \
        else [float(k) for k in cfg.get("k", _parse_k_list(args.k))]
    reports = [make_poly_report(d, split, delay, k).as_dict() for k in k_list]
    exp_rate = cfg.get("exp_rate", args.exp_rate)
    if exp_rate not in (None, "none"):
        reports.append(make_exp_report(
            d, split, delay, "auto" if exp_rate == "auto" else float(exp_rate)).as_dict())
    payload = {
        "schema": f"{SCHEMA_PREFIX}/bounds/1",
        "config": _config_echo(args, cfg, d, delay, k=k_list, exp_rate=exp_rate),
        "kappa": split.kappa,
        "reports": reports,
    }
    write_json(args.out and Path(args.out), payload)
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    d = _resolve_dist(args, cfg)
    delay = _resolve_delay(args, cfg)
    split = compute_split(d, tol=args.split_tol)
    seed = int(cfg.get("seed", args.seed))
    replicas = int(cfg.get("replicas", args.replicas))
    out_dir = _out_dir(args)

    taus = sample_tau(d, split, delay, replicas, seed, max_epochs=args.max_epochs)
    tau_path = Path(args.tau_csv) if args.tau_csv else out_dir / "tau.csv"
    rows = [[r, taus.taus[r], int(taus.attempts[r]), int(np.isnan(taus.taus[r]))]
            for r in range(replicas)]
    write_csv(tau_path, ["replica", "tau", "attempts", "censored"], rows)

    if args.traces:
        stream = UniformStream(seed)
        trace_path = Path(args.traces)
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        with open(trace_path, "w") as fh:
            for r in range(replicas):
                trace = simulate_coupling(d, split, delay, stream, replica=r,
                                          max_epochs=args.max_epochs,
                                          horizon=args.horizon)
                fh.write(json.dumps(trace.as_jsonl_record(), sort_keys=True) + "\n")

    payload = {
        "schema": f"{SCHEMA_PREFIX}/simulate/1",
        "config": _config_echo(args, cfg, d, delay, seed=seed, replicas=replicas,
                               horizon=args.horizon, max_epochs=args.max_epochs),
        "kappa": split.kappa,
        "tau_summary": taus.summary(),
        "outputs": {"tau_csv": str(tau_path),
                    "traces": str(args.traces) if args.traces else None},
    }
    write_json(args.out and Path(args.out), payload)
    return 0


def _cmd_verify(args) -> int:
    cfg = _load_config(args)
    d = _resolve_dist(args, cfg)
    delay = _resolve_delay(args, cfg)
    split = compute_split(d, tol=args.split_tol)
    seed = int(cfg.get("seed", args.seed))
    replicas = int(cfg.get("replicas", args.replicas))
    grid = _parse_grid(cfg.get("t_grid", args.t_grid)) if isinstance(
        cfg.get("t_grid", args.t_grid), str) else [float(t) for t in cfg["t_grid"]]
    k_list = _parse_k_list(args.k)
    exp_rate = None if args.exp_rate == "none" else args.exp_rate

    curve = tv_curve(d, delay, grid, replicas, seed, split=split,
                     k_list=k_list, exp_rate=exp_rate, bins=args.bins)
    report = verify_curve(curve)
    taus = sample_tau(d, split, delay, replicas, seed + 1)
    cross = coupling_inequality_check(curve, taus)

    out_dir = _out_dir(args)
    csv_path = Path(args.csv) if args.csv else out_dir / "tv_curve.csv"
    write_csv(csv_path, curve.csv_header(), curve.csv_rows())
    payload = {
        "schema": f"{SCHEMA_PREFIX}/verify/1",
        "config": _config_echo(args, cfg, d, delay, seed=seed, replicas=replicas,
                               t_grid=grid, k=k_list, exp_rate=exp_rate,
                               bins=args.bins),
        "kappa": split.kappa,
        "passed": report.passed,
        "records": report.records,
        "coupling_inequality": cross,
        "exp_bound_is_diagnostic": curve.exp_bound_is_diagnostic,
        "outputs": {"csv": str(csv_path)},
    }
    write_json(args.out and Path(args.out), payload)
    cross_ok = all(r["ok"] for r in cross)
    return 0 if (report.passed and cross_ok) else 1


def _parse_f2(text: str):
    if text.startswith("m2="):
        try:
            return None, float(text[3:])
        except ValueError:
            raise SpecError(f"malformed moment bound {text!r}") from None
    return parse_dist(text), None


def _cmd_alternating(args) -> int:
    cfg = _load_config(args)
    f1 = validate(parse_dist(cfg["f1"]) if "f1" in cfg else parse_dist(args.f1))
    f2_text = cfg.get("f2", args.f2)
    f2, m2 = _parse_f2(f2_text)
    state_text = cfg.get("initial", args.initial)
    try:
        state_s, age_s = state_text.split(":")
        initial = (int(state_s), float(age_s))
    except ValueError:
        raise SpecError(f"malformed initial state {state_text!r}, expected S:AGE") from None

    spec = alt.AlternatingSpec(f1=f1, f2=f2, m2=m2, initial_state=initial)
    split1 = compute_split(f1, tol=args.split_tol)
    occ = alt.occupancy(spec)
    seed = int(cfg.get("seed", args.seed))
    replicas = int(cfg.get("replicas", args.replicas))

    k_list = _parse_k_list(args.k)
    reports = [alt.alt_constants(spec, split1, mode="polynomial", k=k).as_dict()
               for k in k_list]
    if args.exp_rate not in (None, "none") and not spec.bounds_only:
        reports.append(alt.alt_constants(
            spec, split1, mode="exponential", a=float(args.exp_rate)).as_dict())

    payload = {
        "schema": f"{SCHEMA_PREFIX}/alternating/1",
        "config": _config_echo(args, cfg, f1, None, f2=f2_text, initial=state_text,
                               seed=seed, replicas=replicas, k=k_list,
                               exp_rate=args.exp_rate),
        "kappa": split1.kappa,
        "occupancy": {"p": occ.p, "rho": occ.rho,
                      "effective": occ.effective(split1.kappa)},
        "reports": reports,
    }
    checks_ok = True
    if not spec.bounds_only:
        samples = alt.sample_alt_coupling(spec, split1, replicas, seed)
        eff_lower = occ.rho * split1.kappa
        nu_rows = []
        n_ok = samples.nus > 0
        n_total = int(n_ok.sum())
        for n in range(1, args.nu_max + 1):
            tail = samples.nu_tail(n)
            bound = (1.0 - eff_lower) ** n
            se = math.sqrt(max(bound * (1.0 - bound), 1e-12) / max(n_total, 1))
            ok = tail <= bound + 3.0 * se
            checks_ok &= ok
            nu_rows.append({"n": n, "tail": tail, "bound": bound, "ok": bool(ok)})
        occ_sim = alt.simulate_occupancy(spec, n_cycles=args.cycles, seed=seed + 1)
        occ_ref = occ.p
        occ_ok = abs(occ_sim["p_hat"] - occ_ref) <= 3.0 * occ_sim["se"]
        checks_ok &= occ_ok
        tau_check = alt.alt_tau_bound_check(spec, split1, samples)
        checks_ok &= tau_check["ok"]
        payload.update({
            "nu_tail_checks": nu_rows,
            "occupancy_simulation": {**occ_sim, "reference": occ_ref, "ok": bool(occ_ok)},
            "tau_bound_check": tau_check,
            "tau_mean": float(np.nanmean(samples.taus)),
            "n_censored": samples.n_censored,
        })
    payload["passed"] = bool(checks_ok)
    write_json(args.out and Path(args.out), payload)
    return 0 if checks_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regenbound",
        description="Convergence-rate bounds for regenerative processes, "
                    "validated by coupling simulation.")
    parser.add_argument("--out-dir", help=f"output directory (default ${_OUT_DIR_ENV} or .)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, delay=True):
        p.add_argument("--dist", help="period law, family:params (e.g. uniform:0,1)")
        p.add_argument("--config", help="JSON config file (wins over flags)")
        p.add_argument("--split-tol", type=float, default=1e-10,
                       help="decomposition tolerance")
        p.add_argument("--out", help="report JSON path (default stdout)")
        if delay:
            p.add_argument("--delay", help="first-cycle spec: fixed:A | "
                                           "law:family:params | stationary")

    p = sub.add_parser("analyze", help="overlap decomposition report")
    common(p, delay=False)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("bounds", help="rate constants")
    common(p)
    p.add_argument("--k", default="1", help="comma-separated moment orders")
    p.add_argument("--exp-rate", default=None,
                   help="exponential mode: auto | RATE | none")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("simulate", help="coupling-time samples and traces")
    common(p)
    p.add_argument("--replicas", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--horizon", type=float, default=None,
                   help="extend traces beyond the merge up to this time")
    p.add_argument("--max-epochs", type=int, default=10 ** 6)
    p.add_argument("--tau-csv", help="coupling-time CSV path")
    p.add_argument("--traces", help="JSONL trace path (one replica per line)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="empirical TV against the bounds")
    common(p)
    p.add_argument("--replicas", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--t-grid", default="1,2,5,10,20")
    p.add_argument("--k", default="1,2")
    p.add_argument("--exp-rate", default="auto")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--csv", help="TV curve CSV path")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("alternating", help="busy/idle pipeline")
    p.add_argument("--f1", help="state-1 period law")
    p.add_argument("--f2", help="state-2 law (family:params) or m2=BOUND")
    p.add_argument("--config", help="JSON config file (wins over flags)")
    p.add_argument("--initial", default="2:0", help="initial state S:AGE")
    p.add_argument("--split-tol", type=float, default=1e-10)
    p.add_argument("--k", default="1")
    p.add_argument("--exp-rate", default=None)
    p.add_argument("--replicas", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cycles", type=int, default=20000,
                   help="cycles for the occupancy simulation")
    p.add_argument("--nu-max", type=int, default=20)
    p.add_argument("--out", help="report JSON path (default stdout)")
    p.set_defaults(func=_cmd_alternating)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (SpecError, SplitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
