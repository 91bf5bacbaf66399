"""Insertion-based route planning for pooled vehicles.

A route is the vehicle's current cell (the anchor) followed by an ordered
list of pickup and drop-off stops.  New requests are inserted without
reordering existing stops: the pickup goes where it adds the least path
weight, then the drop-off goes at the cheapest position after it.  All path
arithmetic is done in integer cell counts, so delta evaluation and full
recomputation agree exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .citygrid import GridCoord, TravelModel, manhattan_cells, path_cells
from .errors import MalformedRoute


class StopKind(str, enum.Enum):
    PICKUP = "P"
    DROPOFF = "D"


class Stop(NamedTuple):
    coord: GridCoord
    kind: StopKind
    request_id: int
    passengers: int = 1


@dataclass(frozen=True)
class Route:
    anchor: GridCoord
    stops: tuple[Stop, ...] = ()

    def points(self) -> list[GridCoord]:
        return [self.anchor, *(s.coord for s in self.stops)]

    def cells(self) -> int:
        return path_cells(self.points())

    def __len__(self) -> int:
        return len(self.stops)


@dataclass(frozen=True)
class InsertionResult:
    route: Route
    cost_cells: int
    pickup_pos: int
    dropoff_pos: int
    cell_length: float = 1.0

    @property
    def cost(self) -> float:
        return self.cost_cells * self.cell_length


def capacity_profile(stops: Sequence[Stop], onboard: int = 0) -> list[int]:
    """Occupancy after each stop, starting from ``onboard`` riders.

    A drop-off with no pickup in the route belongs to a rider already on
    board.  A drop-off placed before its own pickup is malformed.
    """
    load = onboard
    profile = []
    seen_pickup: set[int] = set()
    seen_dropoff: set[int] = set()
    for s in stops:
        if s.kind is StopKind.PICKUP:
            if s.request_id in seen_pickup:
                raise MalformedRoute(f"request {s.request_id} picked up twice")
            if s.request_id in seen_dropoff:
                raise MalformedRoute(f"request {s.request_id} dropped off before pickup")
            seen_pickup.add(s.request_id)
            load += s.passengers
        else:
            if s.request_id in seen_dropoff:
                raise MalformedRoute(f"request {s.request_id} dropped off twice")
            seen_dropoff.add(s.request_id)
            load -= s.passengers
        if load < 0:
            raise MalformedRoute("occupancy went negative; onboard count inconsistent with route")
        profile.append(load)
    return profile


class CapacityIndex:
    """Sparse table over leg loads: O(n log n) build, O(1) range-max query.

    ``legs[i]`` is the load on the leg arriving at original stop ``i``
    (``legs[0]`` is the onboard count, ``legs[n]`` the load after the last
    stop).  Inserting a pickup before original stop ``x`` and its drop-off
    before original stop ``y`` (``x <= y``) raises exactly ``legs[x..y]``.
    """

    def __init__(self, values: Sequence[int]):
        arr = np.asarray(values, dtype=np.int64)
        self.n = arr.size
        self._table = [arr]
        span = 1
        while 2 * span <= self.n:
            prev = self._table[-1]
            self._table.append(np.maximum(prev[:-span], prev[span:]))
            span *= 2

    @classmethod
    def for_route(cls, stops: Sequence[Stop], onboard: int) -> "CapacityIndex":
        return cls([onboard, *capacity_profile(stops, onboard)])

    def range_max(self, start: int, end: int) -> int:
        """Maximum over ``[start, end)``; ``end > start`` required."""
        level = (end - start).bit_length() - 1
        row = self._table[level]
        return int(max(row[start], row[end - (1 << level)]))


def feasible_capacity_fast(profile, span: tuple[int, int], passengers: int, c_max: int,
                           index: CapacityIndex | None = None) -> bool:
    """True iff adding ``passengers`` to ``profile[span[0]:span[1]]`` keeps every entry <= ``c_max``."""
    start, end = span
    if passengers <= 0 or end <= start:
        return True
    idx = index if index is not None else CapacityIndex(profile)
    return idx.range_max(start, end) + passengers <= c_max


def feasible_capacity_naive(profile, span: tuple[int, int], passengers: int, c_max: int) -> bool:
    start, end = span
    return all(v + passengers <= c_max for v in list(profile)[start:end])


def _insert_delta(points: Sequence[GridCoord], pos: int, c: GridCoord) -> int:
    """Added cells when ``c`` goes between ``points[pos]`` and ``points[pos + 1]``."""
    prev = points[pos]
    if pos + 1 < len(points):
        nxt = points[pos + 1]
        return manhattan_cells(prev, c) + manhattan_cells(c, nxt) - manhattan_cells(prev, nxt)
    return manhattan_cells(prev, c)


def route_planning(route: Route, request, travel: TravelModel | None = None) -> InsertionResult:
    """Cheapest two-pass insertion of ``request`` into ``route``.

    Pass one fixes the pickup position with the smallest full-route weight;
    pass two places the drop-off at the cheapest position after it.  Ties go
    to the earliest position.  Capacity is not checked here.
    """
    cell_length = travel.cell_length if travel is not None else 1.0
    pickup = Stop(request.origin, StopKind.PICKUP, request.id, request.passengers)
    dropoff = Stop(request.destination, StopKind.DROPOFF, request.id, request.passengers)
    base = route.cells()
    stops = list(route.stops)
    if not stops:
        new = Route(route.anchor, (pickup, dropoff))
        return InsertionResult(new, new.cells(), 0, 1, cell_length)

    points = route.points()
    best_x, best_dx = 0, math.inf
    for x in range(len(stops) + 1):
        d = _insert_delta(points, x, pickup.coord)
        if d < best_dx:
            best_x, best_dx = x, d
    stops.insert(best_x, pickup)
    points.insert(best_x + 1, pickup.coord)

    best_y, best_dy = best_x + 1, math.inf
    for y in range(best_x + 1, len(stops) + 1):
        d = _insert_delta(points, y, dropoff.coord)
        if d < best_dy:
            best_y, best_dy = y, d
    stops.insert(best_y, dropoff)
    new = Route(route.anchor, tuple(stops))
    return InsertionResult(new, base + best_dx + best_dy, best_x, best_y, cell_length)


def within_detour(route: Route, max_ratio: float) -> bool:
    """Every request with both stops in the route rides at most ``max_ratio`` times its direct distance."""
    if math.isinf(max_ratio):
        return True
    points = route.points()
    cum = [0]
    for a, b in zip(points, points[1:]):
        cum.append(cum[-1] + manhattan_cells(a, b))
    where: dict[int, int] = {}
    for i, s in enumerate(route.stops, start=1):
        if s.kind is StopKind.PICKUP:
            where[s.request_id] = i
        elif s.request_id in where:
            j = where[s.request_id]
            direct = manhattan_cells(points[j], points[i])
            if direct > 0 and (cum[i] - cum[j]) > max_ratio * direct:
                return False
    return True


def greedy_insertion(
    route: Route,
    candidates: Sequence,
    load: int,
    c_max: int,
    travel: TravelModel | None = None,
    onboard: int = 0,
    max_detour_ratio: float = math.inf,
) -> tuple[Route, list[int]]:
    """Repeatedly commit the cheapest insertion among ``candidates``.

    ``load`` is the seat count already committed to the vehicle (riders on
    board plus riders awaiting pickup); the loop runs while it is below
    ``c_max`` and only considers requests that still fit.  Each candidate
    insertion must also keep the route's occupancy profile within ``c_max``
    and pass the detour filter.  Ties on cost go to the lowest request id.
    """
    pool = sorted(candidates, key=lambda r: r.id)
    matched: list[int] = []
    while load < c_max and pool:
        index = CapacityIndex.for_route(route.stops, onboard)
        best = None
        best_req = None
        for req in pool:
            if load + req.passengers > c_max:
                continue
            res = route_planning(route, req, travel)
            # pickup before original stop x, drop-off before original stop y
            x, y = res.pickup_pos, res.dropoff_pos - 1
            if not feasible_capacity_fast(None, (x, y + 1), req.passengers, c_max, index):
                continue
            if not within_detour(res.route, max_detour_ratio):
                continue
            if best is None or res.cost_cells < best.cost_cells:
                best, best_req = res, req
        if best is None:
            break
        route = best.route
        load += best_req.passengers
        matched.append(best_req.id)
        pool.remove(best_req)
    return route, matched
