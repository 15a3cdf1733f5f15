"""Command-line front end: ``fairshare <command> --config run.json [overrides]``.

Exit status is 0 on success, 1 on a model/config error (or a failed
``validate``), 2 on a solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .analysis import (PriceOfFairness, compute_llr_e, decay_rate, price_of_fairness, rows_to_csv,
                       sweep, SWEEP_KINDS)
from .cmdp import build_instance
from .config import COMMANDS, RunConfig, load_config, parse_grid
from .errors import ConfigError, EfficientLLRZero, ModelError, SolverError
from .invariants import run_invariants
from .policy import extract_policy, greedy_efficient_policy
from .programs import solve_f, solve_p
from .sim import simulate_policy

log = logging.getLogger("fairshare")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    name = os.environ.get("FAIRSHARE_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(name, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairshare", description="Battery-sharing efficiency/fairness toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--bmax", type=int, help="battery capacity (overrides b_max)")
    p.add_argument("--b-grid", help="battery grid, start:stop:step or comma list")
    p.add_argument("--delta", help="fairness slack, a number or 'inf'")
    p.add_argument("--delta-grid", help="delta grid, start:stop:step or comma list")
    p.add_argument("--kind", choices=SWEEP_KINDS, help="sweep kind")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, help="simulation horizon T")
    p.add_argument("--policy", default="greedy", choices=("greedy", "optimal-p", "optimal-f"),
                   help="policy to simulate")
    p.add_argument("--source", default="llr_o", choices=("llr_o", "llr_e"), help="series for decay")
    p.add_argument("--out", help="output path (JSON, or CSV for sweeps)")
    p.add_argument("--jobs", type=int, help="worker processes for sweeps")
    p.add_argument("--backend", choices=("simplex", "highs"))
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.bmax is not None:
        cfg.b_max = args.bmax
    if args.b_grid is not None:
        cfg.b_grid = [int(round(v)) for v in parse_grid(args.b_grid)]
    if args.delta is not None:
        cfg.delta = args.delta
    if args.delta_grid is not None:
        cfg.delta_grid = parse_grid(args.delta_grid)
    for name in ("kind", "seed", "steps", "jobs"):
        if getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    if args.out is not None:
        cfg.output = args.out
    if args.backend is not None:
        cfg.solver = {**cfg.solver, "backend": args.backend}
    cfg.command = args.command
    cfg.__post_init__()
    return cfg


def _need_bmax(cfg: RunConfig) -> int:
    if cfg.b_max is None:
        raise ConfigError(f"{cfg.command} needs b_max (config field or --bmax)")
    return int(cfg.b_max)


def _need_bgrid(cfg: RunConfig) -> list[int]:
    if not cfg.b_grid:
        raise ConfigError(f"{cfg.command} needs b_grid (config field or --b-grid)")
    return cfg.b_grid


def _emit_json(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _summary(line: str, cfg: RunConfig) -> None:
    # keep stdout parseable when the report itself goes there
    print(line, file=sys.stdout if cfg.output else sys.stderr)


def _sidecar(path: str, suffix: str) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


def cmd_solve_p(cfg):
    delta = 0.0 if cfg.delta is None else cfg.delta
    rep = solve_p(build_instance(cfg.chain(), _need_bmax(cfg), "full"), delta, cfg.backend)
    _emit_json(rep.to_dict(), cfg.output)
    _summary(f"{rep.problem} b_max={cfg.b_max} delta={delta} objective={rep.objective!r}", cfg)
    return 0


def cmd_solve_f(cfg):
    rep = solve_f(build_instance(cfg.chain(), _need_bmax(cfg), "efficient"), cfg.backend)
    _emit_json(rep.to_dict(), cfg.output)
    _summary(f"F b_max={cfg.b_max} theta*={rep.objective!r}", cfg)
    return 0


def cmd_llr_e(cfg):
    v = compute_llr_e(cfg.chain(), _need_bmax(cfg))
    _emit_json({"b_max": cfg.b_max, "llr_e": v}, cfg.output)
    _summary(f"LLR_e b_max={cfg.b_max} value={v!r}", cfg)
    return 0


def cmd_pof(cfg):
    chain, b = cfg.chain(), _need_bmax(cfg)
    if chain.n_users == 1:
        # a lone user is trivially fair: C = E[a] = E[b' - b] = 0 for any policy
        llr_o = solve_p(build_instance(chain, b, "full"), 0.0, cfg.backend).objective
        pof, value = PriceOfFairness(b, llr_o, compute_llr_e(chain, b)), 1.0
    else:
        try:
            pof = price_of_fairness(chain, b, cfg.backend)
            value = pof.value
        except EfficientLLRZero as exc:
            pof, value = PriceOfFairness(b, exc.llr_o, exc.llr_e), exc.symbol
    _emit_json({"b_max": b, "llr_o": pof.llr_o, "llr_e": pof.llr_e, "pof": value}, cfg.output)
    _summary(f"PoF b_max={b} value={value!r}", cfg)
    return 0


def cmd_decay(cfg, source):
    chain = cfg.chain()
    grid = _need_bgrid(cfg)
    if source == "llr_e":
        def ev(b):
            return compute_llr_e(chain, b)
    else:
        def ev(b):
            return solve_p(build_instance(chain, b, "full"), 0.0, cfg.backend).objective
    fit = decay_rate(ev, grid)
    _emit_json({"source": source, **fit.to_dict()}, cfg.output)
    _summary(f"decay {source} slope={fit.slope!r} r2={fit.r_squared!r} "
             f"{'exponential' if fit.exponential else 'not exponential'}", cfg)
    return 0


def cmd_sweep(cfg):
    kind = cfg.kind
    if kind is None:
        raise ConfigError("sweep needs kind (config field or --kind)")
    chain = cfg.chain()
    if kind == "frontier":
        if not cfg.delta_grid:
            raise ConfigError("frontier sweep needs delta_grid")
        rows = sweep(kind, chain, cfg.delta_grid, _need_bmax(cfg), cfg.jobs, cfg.backend)
    else:
        rows = sweep(kind, chain, _need_bgrid(cfg), None, cfg.jobs, cfg.backend)
    csv = rows_to_csv(rows)
    failed = [r for r in rows if r.error]
    for r in failed:
        log.warning("point %s failed: %s", r.abscissa, r.error)
    sidecar = {"kind": kind, "config": cfg.to_dict(),
               "rows": [{"abscissa": r.abscissa, "metrics": r.metrics, "error": r.error} for r in rows]}
    if cfg.output:
        Path(cfg.output).write_text(csv)
        _emit_json(sidecar, _sidecar(cfg.output, ".json"))
    else:
        sys.stdout.write(csv)
    _summary(f"sweep {kind}: {len(rows)} points, {len(failed)} failed", cfg)
    if failed:
        print(f"warning: {len(failed)} sweep point(s) failed; see error rows", file=sys.stderr)
    return 0


def cmd_simulate(cfg, policy_name):
    chain, b = cfg.chain(), _need_bmax(cfg)
    if policy_name == "optimal-p":
        delta = 0.0 if cfg.delta is None else cfg.delta
        pol = extract_policy(solve_p(build_instance(chain, b, "full"), delta, cfg.backend).measure)
    elif policy_name == "optimal-f":
        pol = extract_policy(solve_f(build_instance(chain, b, "efficient"), cfg.backend).measure)
    else:
        pol = greedy_efficient_policy(build_instance(chain, b, "efficient"), cfg.tie_rule)
    res = simulate_policy(pol, cfg.steps, cfg.seed)
    out = {"policy": policy_name, "b_max": b, **res.to_dict()}
    _emit_json(out, cfg.output)
    if cfg.output:
        Path(_sidecar(cfg.output, "_hist.csv")).write_text(res.histogram_csv())
    _summary(f"simulate {policy_name} T={res.steps} seed={res.seed} "
             f"lost_load={res.lost_load!r}+-{res.lost_load_se!r}", cfg)
    return 0


def cmd_validate(cfg):
    checks = run_invariants(cfg.chain(), _need_bmax(cfg), cfg.user_models(), cfg.backend)
    failed = [c for c in checks if not c.ok]
    _emit_json({"b_max": cfg.b_max, "passed": not failed, "checks": [c.to_dict() for c in checks]},
               cfg.output)
    for c in failed:
        print(f"FAIL {c.name}: {c.detail}", file=sys.stderr)
    _summary(f"validate: {len(checks) - len(failed)}/{len(checks)} checks passed", cfg)
    return 1 if failed else 0


def run_command(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "solve-p":
            return cmd_solve_p(cfg)
        if args.command == "solve-f":
            return cmd_solve_f(cfg)
        if args.command == "llr-e":
            return cmd_llr_e(cfg)
        if args.command == "pof":
            return cmd_pof(cfg)
        if args.command == "decay":
            return cmd_decay(cfg, args.source)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.policy)
        return cmd_validate(cfg)
    except ModelError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
