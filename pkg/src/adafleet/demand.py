"""Synthetic ride demand: hidden diurnal patterns, request generation, forecasts."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .citygrid import GridCoord, TravelModel

PASSENGER_COUNTS = (1, 2, 3, 4)
DEFAULT_PASSENGER_PROBS = (0.6, 0.25, 0.1, 0.05)


class RequestStatus(str, enum.Enum):
    PENDING = "pending"
    ASSIGNED = "assigned"
    ONBOARD = "onboard"
    COMPLETED = "completed"
    REJECTED = "rejected"


@dataclass
class Request:
    id: int
    origin: GridCoord
    destination: GridCoord
    passengers: int
    request_tick: int
    fare: float
    status: RequestStatus = RequestStatus.PENDING
    vehicle_id: int | None = None
    pickup_tick: int | None = None
    dropoff_tick: int | None = None

    def __post_init__(self) -> None:
        if self.origin == self.destination:
            raise ValueError("origin and destination must differ")
        if not 1 <= self.passengers <= 4:
            raise ValueError("passenger count must be in 1..4")
        if self.fare < 0:
            raise ValueError("fare must be nonnegative")


@dataclass
class DemandPattern:
    """Per-zone arrival rates with destination and party-size distributions.

    ``dest_probs[z]`` is a categorical over zones for trips starting in zone
    ``z``; its mass on ``z`` itself must be zero.
    """

    rates: np.ndarray
    dest_probs: np.ndarray
    passenger_probs: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_PASSENGER_PROBS))

    def __post_init__(self) -> None:
        self.rates = np.asarray(self.rates, dtype=np.float64)
        self.dest_probs = np.asarray(self.dest_probs, dtype=np.float64)
        self.passenger_probs = np.asarray(self.passenger_probs, dtype=np.float64)
        n = self.rates.size
        if np.any(self.rates < 0) or np.any(~np.isfinite(self.rates)):
            raise ValueError("arrival rates must be finite and nonnegative")
        if self.dest_probs.shape != (n, n):
            raise ValueError("dest_probs must be (n_zones, n_zones)")
        if np.any(np.abs(self.dest_probs.sum(axis=1) - 1.0) > 1e-9) or np.any(self.dest_probs < 0):
            raise ValueError("each destination distribution must sum to 1")
        if np.any(np.diag(self.dest_probs) > 0):
            raise ValueError("a zone cannot be its own destination")
        if self.passenger_probs.shape != (4,) or abs(self.passenger_probs.sum() - 1.0) > 1e-9:
            raise ValueError("passenger distribution must cover 1..4 and sum to 1")
        self._dest_cdf = np.cumsum(self.dest_probs, axis=1)
        self._pax_cdf = np.cumsum(self.passenger_probs)

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())


@dataclass(frozen=True)
class DiurnalSchedule:
    """Cyclic sequence of ``(duration_ticks, pattern_index)`` segments."""

    segments: tuple[tuple[int, int], ...]
    cyclic: bool = True

    def __post_init__(self) -> None:
        segs = tuple((int(d), int(p)) for d, p in self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        if any(d <= 0 for d, _ in segs) or any(p < 0 for _, p in segs):
            raise ValueError("segment durations must be positive and indices nonnegative")
        object.__setattr__(self, "segments", segs)

    @property
    def period(self) -> int:
        return sum(d for d, _ in self.segments)

    @property
    def n_patterns(self) -> int:
        return max(p for _, p in self.segments) + 1

    def change_ticks(self, horizon: int) -> list[int]:
        """Ticks in ``(0, horizon)`` at which the active pattern differs from the tick before."""
        out = []
        prev = active_true_model(0, self)
        for t in range(1, horizon):
            cur = active_true_model(t, self)
            if cur != prev:
                out.append(t)
            prev = cur
        return out


def active_true_model(t: int, schedule: DiurnalSchedule) -> int:
    pos = t % schedule.period if schedule.cyclic else min(t, schedule.period - 1)
    for duration, pattern in schedule.segments:
        if pos < duration:
            return pattern
        pos -= duration
    return schedule.segments[-1][1]


def poisson_inversion(rates: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One Poisson count per rate by inverting the CDF on a single uniform each."""
    lam = np.asarray(rates, dtype=np.float64)
    u = rng.random(lam.shape)
    k = np.zeros(lam.shape, dtype=np.int64)
    p = np.exp(-lam)
    cdf = p.copy()
    for _ in range(10_000):
        more = u > cdf
        if not more.any():
            break
        k[more] += 1
        p[more] *= lam[more] / k[more]
        cdf[more] += p[more]
        # tail mass below float resolution: stop rather than spin
        stuck = more & (p == 0.0)
        u[stuck] = 0.0
    return k


@dataclass(frozen=True)
class FareModel:
    base: float = 2.0
    per_km: float = 1.5

    def fare(self, travel: TravelModel, origin: GridCoord, destination: GridCoord) -> float:
        return self.base + self.per_km * travel.distance(origin, destination)


def generate_requests(
    t: int,
    schedule: DiurnalSchedule,
    patterns: Sequence[DemandPattern],
    travel: TravelModel,
    rng: np.random.Generator,
    fares: FareModel = FareModel(),
    next_id: int = 0,
) -> list[Request]:
    """Draw this tick's requests from the active pattern; ids start at ``next_id``."""
    pattern = patterns[active_true_model(t, schedule)]
    counts = poisson_inversion(pattern.rates, rng)
    out: list[Request] = []
    rid = next_id
    for zone in np.flatnonzero(counts):
        origin = travel.coord(int(zone))
        for _ in range(int(counts[zone])):
            dest_zone = int(np.searchsorted(pattern._dest_cdf[zone], rng.random(), side="right"))
            dest_zone = min(dest_zone, travel.n_zones - 1)
            pax_ix = int(np.searchsorted(pattern._pax_cdf, rng.random(), side="right"))
            destination = travel.coord(dest_zone)
            out.append(Request(
                id=rid,
                origin=origin,
                destination=destination,
                passengers=PASSENGER_COUNTS[min(pax_ix, 3)],
                request_tick=t,
                fare=fares.fare(travel, origin, destination),
            ))
            rid += 1
    return out


# --- presets ---------------------------------------------------------------

def _bump(travel: TravelModel, center: tuple[float, float], width: float) -> np.ndarray:
    rows, cols = np.divmod(np.arange(travel.n_zones), travel.grid_cols)
    d2 = (rows - center[0]) ** 2 + (cols - center[1]) ** 2
    return np.exp(-0.5 * d2 / width**2)


def _dest_matrix(travel: TravelModel, weights: np.ndarray) -> np.ndarray:
    m = np.tile(weights, (travel.n_zones, 1))
    np.fill_diagonal(m, 0.0)
    return m / m.sum(axis=1, keepdims=True)


def uniform_pattern(travel: TravelModel, total_rate: float) -> DemandPattern:
    n = travel.n_zones
    return DemandPattern(np.full(n, total_rate / n), _dest_matrix(travel, np.ones(n)))


def hotspot_pattern(
    travel: TravelModel,
    source: tuple[float, float],
    sink: tuple[float, float],
    total_rate: float,
    width: float = 2.5,
    background: float = 0.1,
    dest_uniform: float = 0.3,
) -> DemandPattern:
    """Origins clustered around ``source``, destinations biased toward ``sink``."""
    n = travel.n_zones
    origin_w = _bump(travel, source, width) + background * float(_bump(travel, source, width).mean())
    rates = total_rate * origin_w / origin_w.sum()
    sink_w = _bump(travel, sink, width * 1.5)
    dest_w = (1.0 - dest_uniform) * sink_w / sink_w.sum() + dest_uniform / n
    return DemandPattern(rates, _dest_matrix(travel, dest_w))


def two_peak_patterns(travel: TravelModel, rates: tuple[float, float] = (2.0, 10.0)) -> list[DemandPattern]:
    """Quiet A -> B flow, then a busy reverse flow (B -> A)."""
    a = (0.25 * (travel.grid_rows - 1), 0.25 * (travel.grid_cols - 1))
    b = (0.75 * (travel.grid_rows - 1), 0.75 * (travel.grid_cols - 1))
    return [hotspot_pattern(travel, a, b, rates[0]), hotspot_pattern(travel, b, a, rates[1])]


def rate_map_pattern(travel: TravelModel, rate_grid) -> DemandPattern:
    rates = np.asarray(rate_grid, dtype=np.float64).reshape(-1)
    if rates.size != travel.n_zones:
        raise ValueError(f"rate map has {rates.size} entries, grid has {travel.n_zones} zones")
    return DemandPattern(rates, _dest_matrix(travel, np.ones(travel.n_zones)))


# --- state features --------------------------------------------------------

def forecast_demand(history: np.ndarray, t: int, horizon: int, window: int = 30) -> np.ndarray:
    """Sliding-window demand forecast, shape ``(horizon, n_zones)``.

    ``history[i]`` holds the per-zone request counts of tick ``i``; the
    forecast is the per-zone mean over the last ``window`` ticks up to and
    including ``t``, repeated for every horizon step.
    """
    h = np.asarray(history, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] == 0:
        raise ValueError("history must cover at least one tick")
    upto = h[: t + 1][-window:]
    mean = upto.mean(axis=0)
    return np.broadcast_to(mean, (horizon, h.shape[1])).copy()


def route_finish(vehicle, travel: TravelModel) -> tuple[float, GridCoord]:
    """Minutes until the vehicle's current plan ends, and where it ends."""
    points = [vehicle.location] + [s.coord for s in vehicle.route]
    target = getattr(vehicle, "target", None)
    if not vehicle.route and target is not None:
        points.append(target)
    cells = 0
    for a, b in zip(points, points[1:]):
        cells += abs(a[0] - b[0]) + abs(a[1] - b[1])
    return cells * travel.minutes_per_cell, points[-1]


def project_supply(vehicles: Iterable, t: int, horizon: int, travel: TravelModel, bucket: int = 1) -> np.ndarray:
    """Projected available vehicles per ``(bucket, zone)`` over ``[t, t + horizon]``.

    Idle vehicles count in bucket 0 at their zone; vehicles with a plan count
    at the plan's end zone in the bucket containing its completion time.
    Vehicles finishing after ``t + horizon`` are left out.
    """
    n_buckets = horizon // bucket + 1
    out = np.zeros((n_buckets, travel.n_zones))
    for v in vehicles:
        if not getattr(v, "on_duty", True):
            continue
        eta, end = route_finish(v, travel)
        if eta > horizon:
            continue
        out[int(math.floor(eta / bucket)), travel.zone_index(end)] += 1
    return out
