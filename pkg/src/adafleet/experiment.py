"""Paired adaptive/baseline comparisons and the synthetic change-point benchmark."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .cpd import detect_change
from .demand import DiurnalSchedule
from .metrics import ChangeEvent, MetricsRow, RunSummary, changepoint_scorecard, summarize
from .simcore import run

DEFAULT_TOLERANCE = 30


def max_workers() -> int:
    raw = os.environ.get("ADAFLEET_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class ArmResult:
    seed: int
    arm: str
    rows: list[MetricsRow]
    changes: list[ChangeEvent]

    @property
    def summary(self) -> RunSummary:
        return summarize(self.rows, self.changes)


def _run_arm(args) -> ArmResult:
    cfg, seed, arm, ticks = args
    res = run(cfg, seed, ticks=ticks)
    return ArmResult(seed, arm, res.rows, res.changes)


def run_arms(jobs: list[tuple[Config, int, str, int | None]], workers: int | None = None) -> list[ArmResult]:
    """Run isolated simulations, optionally in parallel; results come back seed-sorted."""
    workers = max_workers() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        out = [_run_arm(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            out = list(pool.map(_run_arm, jobs))
    return sorted(out, key=lambda r: (r.seed, r.arm))


@dataclass
class ExperimentReport:
    seeds: list[int]
    adaptive: dict[int, ArmResult] = field(default_factory=dict)
    baseline: dict[int, ArmResult] = field(default_factory=dict)
    true_changes: list[int] = field(default_factory=list)
    tolerance: int = DEFAULT_TOLERANCE

    def accept_rates(self, arm: str) -> list[float]:
        src = self.adaptive if arm == "adaptive" else self.baseline
        return [src[s].summary.accept_rate for s in self.seeds]

    def mean_accept_rate(self, arm: str) -> float:
        return float(np.mean(self.accept_rates(arm)))

    def changepoint_score(self) -> tuple[float, float, float]:
        """Pooled precision, recall and mean lag over all adaptive runs."""
        matched = n_detected = n_true = 0
        lag_total = 0.0
        for s in self.seeds:
            det = [c.tick for c in self.adaptive[s].changes]
            p, r, lag = changepoint_scorecard(det, self.true_changes, self.tolerance)
            hits = round(r * len(self.true_changes)) if self.true_changes else len(det)
            matched += hits
            lag_total += lag * hits
            n_detected += len(det)
            n_true += len(self.true_changes)
        precision = matched / n_detected if n_detected else 1.0
        recall = matched / n_true if n_true else 1.0
        return precision, recall, lag_total / matched if matched else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "arm", "generated", "accepted", "rejected", "accept_rate",
                    "distance_km", "profit", "mean_utilization", "n_changes",
                    "cp_precision", "cp_recall", "cp_mean_lag"])
        for s in self.seeds:
            a, b = self.adaptive[s].summary, self.baseline[s].summary
            cp = changepoint_scorecard([c.tick for c in self.adaptive[s].changes],
                                       self.true_changes, self.tolerance)
            for arm, sm, score in (("adaptive", a, cp), ("baseline", b, ("", "", ""))):
                w.writerow([s, arm, sm.generated, sm.accepted, sm.rejected, repr(sm.accept_rate),
                            repr(sm.distance_km), repr(sm.profit), repr(sm.mean_utilization),
                            sm.n_changes, *(repr(x) if x != "" else "" for x in score)])
            w.writerow([s, "delta", a.generated - b.generated, a.accepted - b.accepted,
                        a.rejected - b.rejected, repr(a.accept_rate - b.accept_rate),
                        repr(a.distance_km - b.distance_km), repr(a.profit - b.profit),
                        repr(a.mean_utilization - b.mean_utilization), a.n_changes - b.n_changes,
                        "", "", ""])
        return buf.getvalue()


def compare(cfg: Config, seeds: list[int], ticks: int | None = None,
            tolerance: int = DEFAULT_TOLERANCE, workers: int | None = None) -> ExperimentReport:
    """Adaptive and baseline arms on the same seeds, paired seed by seed."""
    base = cfg.baseline()
    jobs = [(cfg, s, "adaptive", ticks) for s in seeds] + [(base, s, "baseline", ticks) for s in seeds]
    results = run_arms(jobs, workers)
    horizon = cfg.sim.ticks if ticks is None else ticks
    schedule = DiurnalSchedule(tuple(tuple(x) for x in cfg.demand.schedule))
    report = ExperimentReport(seeds=sorted(seeds), true_changes=schedule.change_ticks(horizon),
                              tolerance=tolerance)
    for r in results:
        (report.adaptive if r.arm == "adaptive" else report.baseline)[r.seed] = r
    return report


# --- synthetic change-point suite -------------------------------------------

@dataclass(frozen=True)
class BenchResult:
    trials: int
    recall: float
    false_positive_rate: float
    mean_abs_error: float

    @property
    def precision(self) -> float:
        tp = self.recall * self.trials
        fp = self.false_positive_rate * self.trials
        return tp / (tp + fp) if tp + fp else 1.0


def cpd_bench(trials: int = 100, n_each: int = 40, threshold: float = 10.0, tolerance: int = 3,
              alpha_a=(8.0, 2.0), alpha_b=(2.0, 8.0), seed: int = 1000) -> BenchResult:
    """Two-segment Dirichlet windows versus change-free windows of the first distribution."""
    hits = 0
    false_pos = 0
    errors = []
    for s in range(trials):
        rng = np.random.default_rng(seed + s)
        x = np.vstack([rng.dirichlet(alpha_a, n_each), rng.dirichlet(alpha_b, n_each)])
        rep = detect_change(x, threshold)
        if rep.detected and abs(rep.change_index - n_each) <= tolerance:
            hits += 1
            errors.append(abs(rep.change_index - n_each))
        null = rng.dirichlet(alpha_a, 2 * n_each)
        if detect_change(null, threshold).detected:
            false_pos += 1
    return BenchResult(trials, hits / trials, false_pos / trials,
                       float(np.mean(errors)) if errors else 0.0)
