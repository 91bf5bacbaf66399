"""Adaptive dispatch: per-context tabular Q-learning over relocation moves.

Each vehicle chooses a relocation offset of at most 7 cells along each axis
(a 15x15 action grid).  The Q-state is the vehicle's current zone.  A bank
holds one Q-table per environment context; only the active table is read
and written, so switching context preserves what earlier contexts learned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .citygrid import GridCoord, TravelModel

MAX_MOVE = 7
DEFAULT_BETA = (10.0, 1.0, 5.0, 12.0, 8.0)


class Action(NamedTuple):
    dx: int  # column offset
    dy: int  # row offset


def _action_list() -> tuple[Action, ...]:
    rest = [Action(dx, dy) for dy in range(-MAX_MOVE, MAX_MOVE + 1)
            for dx in range(-MAX_MOVE, MAX_MOVE + 1) if (dx, dy) != (0, 0)]
    return (Action(0, 0), *rest)


# index 0 is stay-in-place so argmax ties fall back to not moving
ACTIONS = _action_list()
N_ACTIONS = len(ACTIONS)


def action_target(travel: TravelModel, zone: GridCoord, action: Action) -> GridCoord:
    return travel.clamp(zone.row + action.dy, zone.col + action.dx)


@dataclass(frozen=True)
class RewardWeights:
    served: float = DEFAULT_BETA[0]
    dispatch_time: float = DEFAULT_BETA[1]
    extra_time: float = DEFAULT_BETA[2]
    profit: float = DEFAULT_BETA[3]
    activation: float = DEFAULT_BETA[4]

    @classmethod
    def from_sequence(cls, beta) -> "RewardWeights":
        vals = [float(b) for b in beta]
        if len(vals) != 5 or not all(np.isfinite(vals)) or any(b < 0 for b in vals):
            raise ValueError("beta needs five finite nonnegative weights")
        return cls(*vals)

    def scaled(self, factor: float) -> "RewardWeights":
        return RewardWeights(*(factor * w for w in self.as_tuple()))

    def as_tuple(self) -> tuple[float, ...]:
        return (self.served, self.dispatch_time, self.extra_time, self.profit, self.activation)


@dataclass(frozen=True)
class RewardComponents:
    served: int = 0
    dispatch_minutes: float = 0.0
    extra_minutes: float = 0.0
    profit: float = 0.0
    activated: int = 0

    def __post_init__(self) -> None:
        if self.served < 0 or self.dispatch_minutes < 0 or self.extra_minutes < 0:
            raise ValueError("counts and durations must be nonnegative")
        if self.activated not in (0, 1):
            raise ValueError("activation indicator must be 0 or 1")


def reward(c: RewardComponents, w: RewardWeights) -> float:
    """Served riders and profit pay; dispatch time, detours and waking an empty vehicle cost."""
    return (w.served * c.served
            - (w.dispatch_time * c.dispatch_minutes + w.extra_time * c.extra_minutes)
            + w.profit * c.profit
            - w.activation * c.activated)


def extra_minutes(elapsed_since_request: float, remaining_eta: float, solo_eta: float) -> float:
    """Rider's lateness versus a dedicated trip, floored at zero."""
    return max(0.0, elapsed_since_request + remaining_eta - solo_eta)


def trip_profit(earnings: float, distance_km: float, mileage_km_per_unit: float, gas_price: float) -> float:
    return earnings - distance_km / mileage_km_per_unit * gas_price


class ExperienceTuple(NamedTuple):
    state: int  # zone index at decision time
    action: int
    reward: float
    next_state: int

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.reward))


@dataclass
class DecisionWindow:
    """Bookkeeping between one dispatch decision and the next for a vehicle."""

    start_tick: int
    zone: GridCoord
    action_index: int
    dispatch_minutes: float
    served: int = 0
    earnings: float = 0.0
    distance_km: float = 0.0
    activated: bool = False


def compute_components(window: DecisionWindow, extra: float, mileage: float, gas_price: float) -> RewardComponents:
    """Collapse a finished decision window into reward components.

    ``extra`` is the summed per-rider lateness of riders on board when the
    window closes.
    """
    return RewardComponents(
        served=window.served,
        dispatch_minutes=window.dispatch_minutes,
        extra_minutes=extra,
        profit=trip_profit(window.earnings, window.distance_km, mileage, gas_price),
        activated=int(window.activated),
    )


@dataclass(frozen=True)
class DecaySchedule:
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_steps: int = 1440
    sigma_start: float = 0.1
    sigma_end: float = 0.001
    sigma_steps: int = 10_000

    def __post_init__(self) -> None:
        if not (self.eps_start >= self.eps_end > 0 and self.sigma_start >= self.sigma_end > 0):
            raise ValueError("decay schedules need start >= end > 0")
        if self.eps_steps <= 0 or self.sigma_steps <= 0:
            raise ValueError("decay budgets must be positive")


def _linear(start: float, end: float, steps: int, step: int) -> float:
    if step >= steps:
        return end
    return start + (end - start) * (step / steps)


def schedule_at(step: int, schedule: DecaySchedule) -> tuple[float, float]:
    """(epsilon, learning rate) after ``step`` steps of linear decay."""
    step = max(0, step)
    return (_linear(schedule.eps_start, schedule.eps_end, schedule.eps_steps, step),
            _linear(schedule.sigma_start, schedule.sigma_end, schedule.sigma_steps, step))


@dataclass
class ModelBank:
    """``k`` Q-tables of shape ``(n_zones, N_ACTIONS)`` and the active context (1-based)."""

    k: int
    n_zones: int
    context: int = 1
    last_change_tick: int = 0
    tables: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("need at least one model")
        if not self.tables:
            self.tables = [np.zeros((self.n_zones, N_ACTIONS)) for _ in range(self.k)]
        if not 1 <= self.context <= self.k:
            raise ValueError("context out of range")

    @property
    def active(self) -> np.ndarray:
        return self.tables[self.context - 1]

    def save(self, path: str | Path) -> None:
        np.savez(path, context=self.context, last_change_tick=self.last_change_tick,
                 tables=np.stack(self.tables))

    @classmethod
    def load(cls, path: str | Path) -> "ModelBank":
        with np.load(path) as data:
            tables = [t.copy() for t in data["tables"]]
            return cls(k=len(tables), n_zones=tables[0].shape[0], context=int(data["context"]),
                       last_change_tick=int(data["last_change_tick"]), tables=tables)


def best_action(bank: ModelBank, zone_index: int, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice from the active table; greedy ties pick the lowest index.

    One uniform draw decides whether to explore and a second picks the
    random action, so the stream consumed depends only on that coin.
    """
    if rng.random() < eps:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(bank.active[zone_index]))


def q_update(bank: ModelBank, zone_index: int, action_index: int, r: float,
             next_zone_index: int, sigma: float, eta: float) -> float:
    """Blend the old estimate with the one-step target, in the active table only."""
    table = bank.active
    target = r + eta * float(table[next_zone_index].max())
    new = (1.0 - sigma) * table[zone_index, action_index] + sigma * target
    table[zone_index, action_index] = new
    return new


def switch_context(bank: ModelBank, tick: int | None = None) -> int:
    """Advance to the next context cyclically (k wraps to 1)."""
    c = (bank.context + 1) % bank.k
    if c == 0:
        c = bank.k
    bank.context = c
    if tick is not None:
        bank.last_change_tick = tick
    return c
