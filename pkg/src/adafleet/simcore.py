"""Tick loop: vehicle lifecycle, matching, insertion, movement, learning, change detection.

One tick is one simulated minute.  Each call to :func:`step` runs the phases
in a fixed order (see its docstring), so a run is a pure function of the
config and seed.  Random streams are split by purpose: one for demand, one
for the fleet layout, and one per vehicle for its dispatch choices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import qdispatch as qd
from .citygrid import GridCoord, TravelModel
from .config import Config
from .cpd import StreamingDetector
from .demand import (DemandPattern, DiurnalSchedule, FareModel, Request, RequestStatus,
                     generate_requests, rate_map_pattern, two_peak_patterns, uniform_pattern)
from .errors import ConfigError, InvariantViolation
from .matching import potential_assignments
from .metrics import ChangeEvent, MetricsRow
from .routing import Route, Stop, StopKind, greedy_insertion

DAY_TICKS = 1440

# SeedSequence tags for independent streams
_DEMAND, _FLEET, _VEHICLE = 0, 1, 2


class VehicleStatus(str, enum.Enum):
    IDLE = "idle"
    RELOCATING = "relocating"
    SERVING = "serving"
    OFF_DUTY = "off_duty"


@dataclass
class Vehicle:
    id: int
    location: GridCoord
    capacity_max: int
    entered_at: int
    rng: np.random.Generator
    route: list[Stop] = field(default_factory=list)
    capacity_used: int = 0
    committed: int = 0  # seats promised: onboard plus awaiting pickup
    status: VehicleStatus = VehicleStatus.OFF_DUTY
    target: GridCoord | None = None
    earnings: float = 0.0
    distance_cells: int = 0
    distance_traveled: float = 0.0
    idle_since: int = 0
    working_minutes: int = 0
    occupied_prev: bool = False
    onboard: list[tuple[int, int, float]] = field(default_factory=list)
    window: qd.DecisionWindow | None = None
    move_budget: float = 0.0

    @property
    def on_duty(self) -> bool:
        return self.status is not VehicleStatus.OFF_DUTY

    @property
    def available(self) -> bool:
        return self.on_duty and self.committed < self.capacity_max

    def plan(self) -> Route:
        return Route(self.location, tuple(self.route))

    def refresh_status(self, tick: int) -> None:
        if not self.on_duty:
            return
        if self.route:
            self.status = VehicleStatus.SERVING
        elif self.target is not None:
            self.status = VehicleStatus.RELOCATING
        elif self.status is not VehicleStatus.IDLE:
            self.status = VehicleStatus.IDLE
            self.idle_since = tick


@dataclass
class WorldState:
    config: Config
    seed: int
    travel: TravelModel
    schedule: DiurnalSchedule
    patterns: list[DemandPattern]
    fares: FareModel
    weights: qd.RewardWeights
    decay: qd.DecaySchedule
    bank: qd.ModelBank
    vehicles: list[Vehicle]
    demand_rng: np.random.Generator
    detector: StreamingDetector | None
    tick: int = 0
    next_request_id: int = 0
    requests: dict[int, Request] = field(default_factory=dict)
    pending: dict[int, Request] = field(default_factory=dict)
    demand_history: list[np.ndarray] = field(default_factory=list)
    rows: list[MetricsRow] = field(default_factory=list)
    changes: list[ChangeEvent] = field(default_factory=list)
    total_distance_cells: int = 0
    status_counts: dict[RequestStatus, int] = field(default_factory=lambda: {s: 0 for s in RequestStatus})
    q_updates: int = 0
    eps_override: float | None = None

    def count(self, status: RequestStatus) -> int:
        return self.status_counts[status]


def _set_status(world: WorldState, req: Request, status: RequestStatus) -> None:
    world.status_counts[req.status] -= 1
    req.status = status
    world.status_counts[status] += 1


def build_patterns(cfg: Config, travel: TravelModel) -> list[DemandPattern]:
    kind = cfg.demand.patterns
    if kind == "two_peak":
        pats = two_peak_patterns(travel, tuple(cfg.demand.peak_rates))
    elif kind == "uniform":
        pats = [uniform_pattern(travel, cfg.demand.uniform_rate)]
    elif isinstance(kind, list) and kind:
        try:
            pats = [rate_map_pattern(travel, m) for m in kind]
        except ValueError as exc:
            raise ConfigError("demand.patterns", str(exc)) from None
    else:
        raise ConfigError("demand.patterns", f"unknown pattern kind {kind!r}")
    return pats


def init_world(cfg: Config, seed: int, bank: qd.ModelBank | None = None) -> WorldState:
    cfg.validate()
    travel = TravelModel(cfg.grid.rows, cfg.grid.cols, cfg.grid.cell_length_km, cfg.grid.minutes_per_cell)
    schedule = DiurnalSchedule(tuple(tuple(s) for s in cfg.demand.schedule))
    patterns = build_patterns(cfg, travel)
    if schedule.n_patterns > len(patterns):
        raise ConfigError("demand.schedule", "refers to a pattern index that does not exist")
    if cfg.demand.k_true != len(patterns):
        raise ConfigError("demand.k_true", f"{len(patterns)} demand patterns configured")
    demand_seed = seed if cfg.demand.seed is None else cfg.demand.seed
    demand_rng = np.random.default_rng(np.random.SeedSequence([demand_seed, _DEMAND]))
    fleet_rng = np.random.default_rng(np.random.SeedSequence([seed, _FLEET]))
    n = cfg.fleet.size
    entry = fleet_rng.integers(0, cfg.fleet.entry_ticks, size=n)
    zones = fleet_rng.integers(0, travel.n_zones, size=n)
    vehicles = [
        Vehicle(id=i, location=travel.coord(int(zones[i])), capacity_max=cfg.fleet.capacity,
                entered_at=int(entry[i]),
                rng=np.random.default_rng(np.random.SeedSequence([seed, _VEHICLE, i])))
        for i in range(n)
    ]
    if bank is None:
        bank = qd.ModelBank(k=cfg.rl.k, n_zones=travel.n_zones)
    elif bank.n_zones != travel.n_zones:
        raise ConfigError("grid.rows", "saved Q-tables were trained on a different grid")
    detector = None
    if cfg.cpd.enabled:
        detector = StreamingDetector(cfg.cpd.threshold, cfg.cpd.window_ticks,
                                     cfg.cpd.min_segment, cfg.cpd.epsilon)
    return WorldState(
        config=cfg, seed=seed, travel=travel, schedule=schedule, patterns=patterns,
        fares=FareModel(cfg.fare.base, cfg.fare.per_km),
        weights=qd.RewardWeights.from_sequence(cfg.rl.beta),
        decay=qd.DecaySchedule(eps_steps=cfg.rl.eps_steps),
        bank=bank, vehicles=vehicles, demand_rng=demand_rng, detector=detector,
        eps_override=qd.DecaySchedule().eps_end if cfg.rl.exploit else None,
    )


# --- dispatch and learning --------------------------------------------------

def _epsilon_sigma(world: WorldState) -> tuple[float, float]:
    eps, sigma = qd.schedule_at(world.tick, world.decay)
    if world.eps_override is not None:
        eps = world.eps_override
    return eps, sigma


def _dispatch(world: WorldState, v: Vehicle) -> None:
    """Open a decision window: pick a relocation offset with the active model."""
    travel = world.travel
    eps, _ = _epsilon_sigma(world)
    a = qd.best_action(world.bank, travel.zone_index(v.location), eps, v.rng)
    target = qd.action_target(travel, v.location, qd.ACTIONS[a])
    v.window = qd.DecisionWindow(start_tick=world.tick, zone=v.location, action_index=a,
                                 dispatch_minutes=travel.travel_time(v.location, target))
    if target != v.location:
        v.target = target
        v.status = VehicleStatus.RELOCATING
    else:
        v.idle_since = world.tick


def _remaining_minutes(world: WorldState, v: Vehicle) -> dict[int, float]:
    """Minutes from now until each on-route drop-off."""
    out = {}
    cells = 0
    prev = v.location
    for s in v.route:
        cells += abs(prev[0] - s.coord[0]) + abs(prev[1] - s.coord[1])
        prev = s.coord
        if s.kind is StopKind.DROPOFF:
            out[s.request_id] = cells * world.travel.minutes_per_cell
    return out


def _close_window(world: WorldState, v: Vehicle) -> float | None:
    """Score the finished decision window and apply the Q-update."""
    w = v.window
    if w is None:
        return None
    v.window = None
    eta_left = _remaining_minutes(world, v)
    extra = sum(qd.extra_minutes(world.tick - req_tick, eta_left.get(rid, 0.0), solo)
                for rid, req_tick, solo in v.onboard)
    comp = qd.compute_components(w, extra, world.config.fleet.mileage, world.config.rl.gas_price)
    r = qd.reward(comp, world.weights)
    _, sigma = _epsilon_sigma(world)
    exp = qd.ExperienceTuple(world.travel.zone_index(w.zone), w.action_index, r,
                             world.travel.zone_index(v.location))
    if not exp.is_finite():
        raise InvariantViolation(f"tick {world.tick}: non-finite reward for vehicle {v.id}")
    qd.q_update(world.bank, exp.state, exp.action, exp.reward, exp.next_state, sigma, world.config.rl.eta)
    world.q_updates += 1
    return r


# --- movement ---------------------------------------------------------------

def _service_stops(world: WorldState, v: Vehicle) -> float:
    """Process every stop at the current cell; returns fares collected."""
    fares = 0.0
    travel = world.travel
    while v.route and v.route[0].coord == v.location:
        s = v.route.pop(0)
        req = world.requests[s.request_id]
        if s.kind is StopKind.PICKUP:
            was_empty = v.capacity_used == 0
            _set_status(world, req, RequestStatus.ONBOARD)
            req.pickup_tick = world.tick
            v.capacity_used += req.passengers
            solo = (world.tick - req.request_tick) + travel.travel_time(req.origin, req.destination)
            v.onboard.append((req.id, req.request_tick, solo))
            if v.window is not None:
                v.window.served += req.passengers
                if was_empty:
                    v.window.activated = True
        else:
            _set_status(world, req, RequestStatus.COMPLETED)
            req.dropoff_tick = world.tick
            v.capacity_used -= req.passengers
            v.committed -= req.passengers
            v.onboard = [o for o in v.onboard if o[0] != req.id]
            v.earnings += req.fare
            fares += req.fare
            if v.window is not None:
                v.window.earnings += req.fare
    return fares


def _step_toward(a: GridCoord, b: GridCoord) -> GridCoord:
    if a.row != b.row:
        return GridCoord(a.row + (1 if b.row > a.row else -1), a.col)
    return GridCoord(a.row, a.col + (1 if b.col > a.col else -1))


def _move(world: WorldState, v: Vehicle) -> tuple[int, float]:
    """Advance one tick: rows first, then columns.  Returns (cells moved, fares)."""
    fares = _service_stops(world, v)
    moved = 0
    if not v.route and v.target is None:
        v.move_budget = 0.0
        return moved, fares
    v.move_budget += 1.0 / world.travel.minutes_per_cell
    while v.move_budget >= 1.0 - 1e-12:
        goal = v.route[0].coord if v.route else v.target
        if goal is None:
            break
        if goal == v.location:
            if not v.route:
                v.target = None
            break
        v.location = _step_toward(v.location, goal)
        v.move_budget -= 1.0
        moved += 1
        fares += _service_stops(world, v)
        if not v.route and v.target == v.location:
            v.target = None
    if not v.route and v.target is None:
        v.move_budget = 0.0
    return moved, fares


# --- phases -----------------------------------------------------------------

def submit_request(world: WorldState, req: Request) -> None:
    """Add an externally created request to the pending pool (ids must be fresh)."""
    if req.id != world.next_request_id or req.status is not RequestStatus.PENDING:
        raise ValueError("request ids must be issued in sequence and start pending")
    world.requests[req.id] = req
    world.pending[req.id] = req
    world.status_counts[RequestStatus.PENDING] += 1
    world.next_request_id += 1


def _admit(world: WorldState) -> None:
    t = world.tick
    warm = t >= world.config.sim.warmup_ticks
    for v in world.vehicles:
        if t < v.entered_at or t % DAY_TICKS != v.entered_at % DAY_TICKS:
            continue
        # shift boundary: the daily working clock restarts
        v.working_minutes = 0
        if v.status is VehicleStatus.OFF_DUTY:
            v.status = VehicleStatus.IDLE
            v.idle_since = t
            v.working_minutes = 0
            if warm:
                _dispatch(world, v)


def _match(world: WorldState) -> int:
    cfg = world.config
    pool = [v for v in world.vehicles if v.available]
    pending = sorted(world.pending.values(), key=lambda r: r.id)
    result = potential_assignments(pending, pool, cfg.match.radius_cells, world.travel)
    accepted = 0
    by_id = {v.id: v for v in pool}
    for vid in sorted(result.lists):
        cands = result.lists[vid]
        if not cands:
            continue
        v = by_id[vid]
        route, matched = greedy_insertion(v.plan(), cands, v.committed, v.capacity_max, world.travel,
                                          onboard=v.capacity_used,
                                          max_detour_ratio=cfg.routing.max_detour_ratio)
        if not matched:
            continue
        v.route = list(route.stops)
        v.target = None
        for rid in matched:
            req = world.pending.pop(rid)
            _set_status(world, req, RequestStatus.ASSIGNED)
            req.vehicle_id = vid
            v.committed += req.passengers
            accepted += 1
        v.status = VehicleStatus.SERVING
    return accepted


def _expire(world: WorldState) -> int:
    ttl = world.config.sim.request_ttl
    gone = [r for r in world.pending.values() if world.tick - r.request_tick + 1 >= ttl]
    for r in gone:
        del world.pending[r.id]
        _set_status(world, r, RequestStatus.REJECTED)
    return len(gone)


def _cpd_features(world: WorldState, generated: int, accepted: int, rewards: list[float]) -> tuple:
    duty = [v for v in world.vehicles if v.on_duty]
    idle = sum(1 for v in duty if v.status is VehicleStatus.IDLE)
    mean_r = float(np.mean(rewards)) if rewards else 0.0
    return (float(generated), float(accepted), mean_r, idle / len(duty) if duty else 0.0)


def check_invariants(world: WorldState) -> None:
    generated = world.next_request_id
    if sum(world.status_counts.values()) != generated:
        raise InvariantViolation(f"tick {world.tick}: request pools do not add up to {generated}")
    if len(world.pending) != world.count(RequestStatus.PENDING):
        raise InvariantViolation(f"tick {world.tick}: pending pool out of sync")
    onboard_total = 0
    for v in world.vehicles:
        used = sum(world.requests[rid].passengers for rid, _, _ in v.onboard)
        if used != v.capacity_used or used > v.capacity_max or v.committed > v.capacity_max:
            raise InvariantViolation(f"tick {world.tick}: vehicle {v.id} capacity {used}/{v.capacity_max}")
        onboard_total += len(v.onboard)
    if onboard_total != world.count(RequestStatus.ONBOARD):
        raise InvariantViolation(f"tick {world.tick}: onboard riders unaccounted for")
    if sum(v.distance_cells for v in world.vehicles) != world.total_distance_cells:
        raise InvariantViolation(f"tick {world.tick}: distance ledger mismatch")


def step(world: WorldState) -> WorldState:
    """Advance the world by one tick.

    Phases: admit and dispatch entering vehicles; generate requests; match
    and insert; move vehicles and serve stops; close decision windows of
    vehicles idle past the threshold and learn; re-dispatch them; feed the
    change detector; retire vehicles at their working-time cap; record
    metrics.
    """
    cfg = world.config
    t = world.tick
    travel = world.travel
    warm = t >= cfg.sim.warmup_ticks

    _admit(world)

    new = generate_requests(t, world.schedule, world.patterns, travel, world.demand_rng,
                            world.fares, world.next_request_id)
    counts = np.zeros(travel.n_zones)
    for r in new:
        submit_request(world, r)
        counts[travel.zone_index(r.origin)] += 1
    world.demand_history.append(counts)

    accepted = _match(world)
    rejected = _expire(world)

    tick_cells = 0
    tick_fares = 0.0
    for v in world.vehicles:
        if not v.on_duty:
            continue
        moved, fares = _move(world, v)
        tick_cells += moved
        tick_fares += fares
        if moved:
            v.distance_cells += moved
            v.distance_traveled = v.distance_cells * travel.cell_length
            if v.window is not None:
                v.window.distance_km += moved * travel.cell_length
        v.refresh_status(t)
        if v.status is not VehicleStatus.IDLE:
            v.working_minutes += 1
        v.occupied_prev = v.capacity_used > 0
    world.total_distance_cells += tick_cells

    rewards: list[float] = []
    due = []
    if warm:
        for v in world.vehicles:
            if v.status is VehicleStatus.IDLE and t - v.idle_since >= cfg.sim.idle_redispatch:
                due.append(v)
        for v in due:
            r = _close_window(world, v)
            if r is not None:
                rewards.append(r)
        for v in due:
            _dispatch(world, v)
            v.refresh_status(t)

    detected = False
    if world.detector is not None:
        start = cfg.cpd.start_tick if cfg.cpd.start_tick is not None else max(cfg.sim.warmup_ticks,
                                                                              cfg.fleet.entry_ticks)
        if t >= start:
            hit = world.detector.push(t, _cpd_features(world, len(new), accepted, rewards))
            if hit is not None:
                change_tick, report = hit
                old = world.bank.context
                qd.switch_context(world.bank, change_tick)
                world.changes.append(ChangeEvent(change_tick, old, world.bank.context, report.score))
                detected = True

    for v in world.vehicles:
        if v.on_duty and v.working_minutes >= cfg.fleet.max_working_minutes and not v.route:
            _close_window(world, v)
            v.status = VehicleStatus.OFF_DUTY
            v.target = None
            v.move_budget = 0.0

    duty = [v for v in world.vehicles if v.on_duty]
    occupied = sum(1 for v in duty if v.capacity_used > 0)
    idle = [t - v.idle_since for v in duty if v.status is VehicleStatus.IDLE]
    fuel = tick_cells * travel.cell_length / cfg.fleet.mileage * cfg.rl.gas_price
    world.rows.append(MetricsRow(
        tick=t,
        requests_generated=len(new),
        requests_accepted=accepted,
        requests_rejected=rejected,
        fleet_distance_km=tick_cells * travel.cell_length,
        occupied_vehicles=occupied,
        utilized_fraction=occupied / len(duty) if duty else 0.0,
        total_profit=tick_fares - fuel,
        mean_idle_minutes=float(np.mean(idle)) if idle else 0.0,
        active_context=world.bank.context,
        change_detected=detected,
    ))
    if cfg.sim.check_invariants:
        check_invariants(world)
    world.tick += 1
    return world


@dataclass
class RunResult:
    rows: list[MetricsRow]
    changes: list[ChangeEvent]
    bank: qd.ModelBank
    world: WorldState


def run(cfg: Config, seed: int, bank: qd.ModelBank | None = None, ticks: int | None = None) -> RunResult:
    """Simulate ``cfg.sim.ticks`` ticks (or ``ticks``) and collect metrics and switch events."""
    world = init_world(cfg, seed, bank)
    horizon = cfg.sim.ticks if ticks is None else ticks
    for _ in range(horizon):
        step(world)
    return RunResult(world.rows, world.changes, world.bank, world)


def save_models(result: RunResult, path: str | Path) -> None:
    result.bank.save(path)


def load_models(path: str | Path) -> qd.ModelBank:
    return qd.ModelBank.load(path)
