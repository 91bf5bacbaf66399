"""Command line entry point: ``adafleet {run,compare,cpd-bench}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import Config, load_config
from .errors import ConfigError, InvariantViolation
from .experiment import compare, cpd_bench
from .metrics import changes_to_csv, metrics_to_csv, write_text
from .simcore import load_models, run


def _load(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    if args.ticks is not None:
        cfg = cfg.with_overrides(**{"sim.ticks": args.ticks})
    if getattr(args, "baseline", False):
        cfg = cfg.baseline()
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    bank = load_models(args.load_models) if args.load_models else None
    if args.exploit:
        cfg = cfg.with_overrides(**{"rl.exploit": True})
    res = run(cfg, args.seed, bank=bank)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_text(out / "metrics.csv", metrics_to_csv(res.rows))
    write_text(out / "changes.csv", changes_to_csv(res.changes))
    if args.save_models:
        res.bank.save(args.save_models)
    return 0


def _cmd_compare(args) -> int:
    cfg = _load(args)
    seeds = list(range(args.seed, args.seed + args.seeds))
    report = compare(cfg, seeds, tolerance=args.tolerance)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_text(out / "report.csv", report.to_csv())
    p, r, lag = report.changepoint_score()
    print(f"accept rate adaptive={report.mean_accept_rate('adaptive'):.4f} "
          f"baseline={report.mean_accept_rate('baseline'):.4f}")
    print(f"change points precision={p:.3f} recall={r:.3f} mean_lag={lag:.2f}")
    return 0


def _cmd_bench(args) -> int:
    res = cpd_bench(trials=args.trials, threshold=args.threshold, seed=args.seed)
    print(f"trials={res.trials} recall={res.recall:.3f} precision={res.precision:.3f} "
          f"false_positive_rate={res.false_positive_rate:.3f} mean_abs_error={res.mean_abs_error:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adafleet", description="Adaptive ride-pooling fleet simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=1):
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--out", default="out")
        sp.add_argument("--ticks", type=int, help="override sim.ticks")
        sp.add_argument("--baseline", action="store_true", help="single model, change detection off")

    r = sub.add_parser("run", help="one simulation; writes metrics.csv and changes.csv")
    common(r)
    r.add_argument("--save-models", help="write Q-tables to this .npz after the run")
    r.add_argument("--load-models", help="start from Q-tables saved by an earlier run")
    r.add_argument("--exploit", action="store_true", help="fix epsilon at its final value")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("compare", help="paired adaptive vs baseline runs; writes report.csv")
    common(c)
    c.add_argument("--seeds", type=int, default=5, help="number of consecutive seeds")
    c.add_argument("--tolerance", type=int, default=30, help="change-point matching tolerance (ticks)")
    c.set_defaults(func=_cmd_compare)

    b = sub.add_parser("cpd-bench", help="synthetic change-point recovery suite")
    b.add_argument("--trials", type=int, default=100)
    b.add_argument("--threshold", type=float, default=10.0)
    b.add_argument("--seed", type=int, default=1000)
    b.set_defaults(func=_cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvariantViolation, FileNotFoundError, ValueError) as exc:
        print(f"adafleet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
