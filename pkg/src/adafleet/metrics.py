"""Per-tick metrics rows, CSV emission, and change-point scoring."""

from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


@dataclass(frozen=True)
class MetricsRow:
    tick: int
    requests_generated: int
    requests_accepted: int
    requests_rejected: int
    fleet_distance_km: float
    occupied_vehicles: int
    utilized_fraction: float
    total_profit: float
    mean_idle_minutes: float
    active_context: int
    change_detected: bool


@dataclass(frozen=True)
class ChangeEvent:
    tick: int
    old_context: int
    new_context: int
    z_score: float


METRICS_HEADER = [f.name for f in dataclasses.fields(MetricsRow)]
CHANGES_HEADER = [f.name for f in dataclasses.fields(ChangeEvent)]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(header: list[str], rows: Iterable, fh) -> None:
    w = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(getattr(r, h)) for h in header])


def metrics_to_csv(rows: Iterable[MetricsRow]) -> str:
    buf = io.StringIO()
    _write(METRICS_HEADER, rows, buf)
    return buf.getvalue()


def changes_to_csv(events: Iterable[ChangeEvent]) -> str:
    buf = io.StringIO()
    _write(CHANGES_HEADER, events, buf)
    return buf.getvalue()


def write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _parse(cls, text: str):
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        kwargs = {}
        for f in dataclasses.fields(cls):
            raw = rec[f.name]
            if f.type in ("bool", bool):
                kwargs[f.name] = raw == "1"
            elif f.type in ("int", int):
                kwargs[f.name] = int(raw)
            else:
                kwargs[f.name] = float(raw)
        out.append(cls(**kwargs))
    return out


def metrics_from_csv(text: str) -> list[MetricsRow]:
    return _parse(MetricsRow, text)


def changes_from_csv(text: str) -> list[ChangeEvent]:
    return _parse(ChangeEvent, text)


@dataclass(frozen=True)
class RunSummary:
    generated: int
    accepted: int
    rejected: int
    distance_km: float
    profit: float
    mean_utilization: float
    n_changes: int

    @property
    def accept_rate(self) -> float:
        return self.accepted / self.generated if self.generated else 0.0


def summarize(rows: Sequence[MetricsRow], events: Sequence[ChangeEvent] = ()) -> RunSummary:
    util = [r.utilized_fraction for r in rows]
    return RunSummary(
        generated=sum(r.requests_generated for r in rows),
        accepted=sum(r.requests_accepted for r in rows),
        rejected=sum(r.requests_rejected for r in rows),
        distance_km=sum(r.fleet_distance_km for r in rows),
        profit=sum(r.total_profit for r in rows),
        mean_utilization=sum(util) / len(util) if util else 0.0,
        n_changes=len(events),
    )


def changepoint_scorecard(detected: Sequence[int], true_ticks: Sequence[int],
                          tolerance: float) -> tuple[float, float, float]:
    """(precision, recall, mean |dt|) of detections against true change ticks.

    Detections are taken in tick order; each claims the nearest still
    unmatched true change within ``tolerance`` (ties to the earlier one).
    Empty sides score vacuously 1; mean |dt| is 0 when nothing matched.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    free = sorted(true_ticks)
    lags = []
    for d in sorted(detected):
        best = None
        for i, t in enumerate(free):
            gap = abs(d - t)
            if gap <= tolerance and (best is None or gap < abs(d - free[best])):
                best = i
        if best is not None:
            lags.append(abs(d - free.pop(best)))
    precision = len(lags) / len(detected) if detected else 1.0
    recall = len(lags) / len(true_ticks) if true_ticks else 1.0
    mean_lag = sum(lags) / len(lags) if lags else 0.0
    return precision, recall, mean_lag
