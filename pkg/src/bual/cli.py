"""Command-line entry point: ``bual {run,compare,gradcheck,demo-separation}``."""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import SCHEMA, RunConfig, parse_config, to_plan
from .errors import ConfigurationError
from .gradcheck import run_gradcheck
from .io import build_manifest, write_audit, write_manifest, write_metrics, write_separation
from .loop import ExperimentAborted, initial_state, recognition_rate, run_seed, separation_data

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _add_overrides(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI config file or a previous run's manifest.json")
    for name, (section, conv, help_) in SCHEMA.items():
        flag = "--" + name.replace("_", "-")
        if conv.__name__ == "_bool":
            p.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None, help=help_)
        else:
            p.add_argument(flag, dest=name, default=None, help=f"[{section}] {help_}")


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _run(cfg: RunConfig, strategies) -> int:
    out = Path(cfg.output_dir)
    started = _now()
    results, digests = {}, {}
    try:
        for name in strategies:
            plan = to_plan(cfg, strategy=name)
            results[name] = {}
            for seed in plan.seeds:
                state = initial_state(plan, seed)
                d = state.pool.digest()
                if digests.setdefault(seed, d) != d:
                    raise RuntimeError(f"seed {seed}: initial pool differs between strategies")
                results[name][seed] = run_seed(plan, seed, state)
                if cfg.audit and name.startswith("B-"):
                    for rec in results[name][seed]:
                        write_audit(rec, state.dataset, out / "audit" / f"{name}_seed{seed}_round{rec.round}.csv")
    except Exception as exc:
        partial = {k: v for k, v in results.items() if v}
        if partial:
            write_metrics(partial, out / "metrics_partial.csv", record_wall_time=cfg.record_wall_time)
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, ExperimentAborted):
            return EXIT_RUNTIME
        return EXIT_CONFIG if isinstance(exc, ConfigurationError) else EXIT_RUNTIME
    write_metrics(results, out / "metrics.csv", out / "metrics_aggregate.csv", record_wall_time=cfg.record_wall_time)
    write_manifest(build_manifest(cfg, results, started, _now(), digests), out / "manifest.json")
    for name, per_seed in results.items():
        accs = [recs[-1].accuracy for recs in per_seed.values()]
        rec = [recognition_rate(recs) for recs in per_seed.values()]
        print(f"{name:10s} final accuracy {np.mean(accs):.4f} +- {np.std(accs):.4f}   "
              f"recognition rate {np.mean(rec):.4f}")
    for seed, d in sorted(digests.items()):
        print(f"seed {seed} initial pool {d}")
    print(f"wrote {out / 'metrics.csv'}")
    return EXIT_OK


def cmd_run(cfg, args):
    return _run(cfg, [cfg.strategy])


def cmd_compare(cfg, args):
    return _run(cfg, list(cfg.strategies))


def cmd_gradcheck(cfg, args):
    report = run_gradcheck(n_cases=args.cases, seed=args.seed)
    print(f"cases: {report.n_cases}")
    print(f"max relative error (cross-entropy): {report.max_error_ce:.3e}")
    print(f"max relative error (negative learning): {report.max_error_nl:.3e}")
    print(f"max relative error: {report.max_error:.3e}")
    ok = report.max_error < args.tolerance
    print("PASS" if ok else f"FAIL (tolerance {args.tolerance:g})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_demo_separation(cfg, args):
    out = Path(cfg.output_dir)
    for seed in cfg.seeds:
        idx, known, pos, neg = separation_data(to_plan(cfg), seed)
        path = out / f"separation_seed{seed}.csv"
        write_separation(idx, known, pos, neg, path)
        print(f"seed {seed}: mean max-prob  positive known {pos[known].mean():.3f} unknown {pos[~known].mean():.3f}"
              f" | negative known {neg[known].mean():.3f} unknown {neg[~known].mean():.3f}  -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bual", description="Bidirectional uncertainty active learning on open-set pools")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("run", cmd_run, "run one strategy over all seeds"),
                            ("compare", cmd_compare, "run several strategies on shared datasets and pools"),
                            ("demo-separation", cmd_demo_separation, "dump positive/negative confidence per example")):
        p = sub.add_parser(name, help=help_)
        _add_overrides(p)
        p.set_defaults(func=fn)
    p = sub.add_parser("gradcheck", help="finite-difference check of both loss gradients")
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gradcheck":
            cfg = None
        else:
            overrides = {k: getattr(args, k) for k in SCHEMA}
            cfg = parse_config(args.config, overrides)
        return args.func(cfg, args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
