"""Detected switches against the true schedule for one adaptive run,
with accepted over generated requests per true demand segment (matches can
spill across a segment boundary, so a segment can exceed 1).

    python3 scripts/context_trace.py --config configs/two_peak.cfg --seed 1
"""

import argparse

import numpy as np

from adafleet.config import load_config
from adafleet.demand import DiurnalSchedule, active_true_model
from adafleet.simcore import run


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/two_peak.cfg")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--ticks", type=int)
    ap.add_argument("--baseline", action="store_true")
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.baseline:
        cfg = cfg.baseline()
    res = run(cfg, args.seed, ticks=args.ticks)
    horizon = len(res.rows)
    sched = DiurnalSchedule(tuple(tuple(x) for x in cfg.demand.schedule))

    print("switches (tick, context, Z):")
    for ev in res.changes:
        print(f"  {ev.tick:>5}  {ev.old_context} -> {ev.new_context}  {ev.z_score:9.1f}")
    print(f"true changes: {sched.change_ticks(horizon)}")

    gen = np.array([r.requests_generated for r in res.rows])
    acc = np.array([r.requests_accepted for r in res.rows])
    bounds = [0, *sched.change_ticks(horizon), horizon]
    print(f"{'start':>6} {'end':>6} {'pattern':>8} {'acc/gen':>7}")
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        g = gen[lo:hi].sum()
        rate = acc[lo:hi].sum() / g if g else float("nan")
        print(f"{lo:>6} {hi:>6} {active_true_model(lo, sched):>8} {rate:7.3f}")


if __name__ == "__main__":
    main()
