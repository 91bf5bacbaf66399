"""Experiment configuration: nested dataclasses plus a flat ``dotted.key = value`` file format.

Values are parsed as JSON where possible (numbers, lists, ``true``/``false``,
``null``) and fall back to a bare string.  Blank lines and ``#`` comments are
ignored.  Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class GridConfig:
    rows: int = 20
    cols: int = 20
    cell_length_km: float = 0.8
    minutes_per_cell: float = 1.0


@dataclass
class MatchConfig:
    radius_cells: int = 6


@dataclass
class DemandConfig:
    k_true: int = 2
    schedule: list = field(default_factory=lambda: [[360, 0], [360, 1]])
    patterns: object = "two_peak"
    peak_rates: list = field(default_factory=lambda: [2.0, 10.0])
    uniform_rate: float = 5.0
    seed: int | None = None


@dataclass
class FareConfig:
    base: float = 2.0
    per_km: float = 1.5


@dataclass
class RoutingConfig:
    max_detour_ratio: float = math.inf


@dataclass
class FleetConfig:
    size: int = 200
    capacity: int = 4
    mileage: float = 10.0
    entry_ticks: int = 60
    max_working_minutes: int = 21 * 60


@dataclass
class CpdConfig:
    enabled: bool = True
    threshold: float = 10.0
    window_ticks: int = 30
    min_segment: int | None = None
    epsilon: float = 1e-6
    start_tick: int | None = None


@dataclass
class RlConfig:
    beta: list = field(default_factory=lambda: [10.0, 1.0, 5.0, 12.0, 8.0])
    eta: float = 0.9
    k: int = 7
    eps_steps: int = 1440
    gas_price: float = 1.5
    exploit: bool = False


@dataclass
class SimConfig:
    ticks: int = 2880
    warmup_ticks: int = 20
    request_ttl: int = 10
    idle_redispatch: int = 10
    check_invariants: bool = True


@dataclass
class Config:
    grid: GridConfig = field(default_factory=GridConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    demand: DemandConfig = field(default_factory=DemandConfig)
    fare: FareConfig = field(default_factory=FareConfig)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    fleet: FleetConfig = field(default_factory=FleetConfig)
    cpd: CpdConfig = field(default_factory=CpdConfig)
    rl: RlConfig = field(default_factory=RlConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def validate(self) -> "Config":
        checks = [
            ("grid.rows", self.grid.rows >= 1),
            ("grid.cols", self.grid.cols >= 1),
            ("grid.cell_length_km", self.grid.cell_length_km > 0),
            ("grid.minutes_per_cell", self.grid.minutes_per_cell > 0),
            ("match.radius_cells", self.match.radius_cells >= 0),
            ("demand.schedule", _valid_schedule(self.demand.schedule)),
            ("demand.peak_rates", len(self.demand.peak_rates) == 2 and min(self.demand.peak_rates) >= 0),
            ("fare.base", self.fare.base >= 0),
            ("fare.per_km", self.fare.per_km >= 0),
            ("routing.max_detour_ratio", self.routing.max_detour_ratio >= 1),
            ("fleet.size", self.fleet.size >= 0),
            ("fleet.capacity", 1 <= self.fleet.capacity),
            ("fleet.mileage", self.fleet.mileage > 0),
            ("fleet.entry_ticks", self.fleet.entry_ticks >= 1),
            ("fleet.max_working_minutes", self.fleet.max_working_minutes >= 1),
            ("cpd.threshold", self.cpd.threshold >= 0),
            ("cpd.window_ticks", self.cpd.window_ticks >= 1),
            ("cpd.min_segment", self.cpd.min_segment is None or self.cpd.min_segment >= 1),
            ("cpd.epsilon", self.cpd.epsilon > 0),
            ("rl.beta", len(self.rl.beta) == 5 and all(b >= 0 for b in self.rl.beta)),
            ("rl.eta", 0 < self.rl.eta < 1),
            ("rl.k", self.rl.k >= 1),
            ("rl.eps_steps", self.rl.eps_steps >= 1),
            ("rl.gas_price", self.rl.gas_price >= 0),
            ("sim.ticks", self.sim.ticks >= 0),
            ("sim.warmup_ticks", self.sim.warmup_ticks >= 0),
            ("sim.request_ttl", self.sim.request_ttl >= 1),
            ("sim.idle_redispatch", self.sim.idle_redispatch >= 0),
        ]
        for key, ok in checks:
            if not ok:
                raise ConfigError(key, "value out of range")
        return self

    def baseline(self) -> "Config":
        """Non-adaptive arm: a single model and no change detection."""
        out = dataclasses.replace(self, rl=dataclasses.replace(self.rl, k=1),
                                  cpd=dataclasses.replace(self.cpd, enabled=False))
        return out

    def with_overrides(self, **flat) -> "Config":
        """Copy with dotted-key overrides, e.g. ``with_overrides(**{"sim.ticks": 10})``."""
        cfg = copy_config(self)
        for key, value in flat.items():
            _assign(cfg, key, value)
        return cfg.validate()


def _valid_schedule(schedule) -> bool:
    try:
        return len(schedule) > 0 and all(int(d) > 0 and int(p) >= 0 for d, p in schedule)
    except (TypeError, ValueError):
        return False


def copy_config(cfg: Config) -> Config:
    return Config(**{f.name: dataclasses.replace(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)})


def known_keys() -> list[str]:
    cfg = Config()
    return [f"{sec.name}.{f.name}" for sec in dataclasses.fields(cfg)
            for f in dataclasses.fields(getattr(cfg, sec.name))]


def _coerce(key: str, current, value):
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, "expected true or false")
        return value
    if isinstance(current, int) and not isinstance(current, bool) and current is not None:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(key, "expected an integer")
        return int(value)
    if isinstance(current, float):
        if isinstance(value, str) and value.lower() in ("inf", "infinity"):
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, "expected a number")
        return float(value)
    if isinstance(current, list):
        if not isinstance(value, list):
            raise ConfigError(key, "expected a list")
        return value
    return value


def _assign(cfg: Config, key: str, value) -> None:
    section, _, name = key.partition(".")
    sec = getattr(cfg, section, None) if section in {f.name for f in dataclasses.fields(cfg)} else None
    if sec is None or name not in {f.name for f in dataclasses.fields(sec)}:
        raise ConfigError(key, "unknown config key")
    current = getattr(sec, name)
    if current is None or value is None:
        setattr(sec, name, value)
    else:
        setattr(sec, name, _coerce(key, current, value))


def parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config(text: str, base: Config | None = None) -> Config:
    cfg = copy_config(base) if base is not None else Config()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, _, value = line.partition("=")
        _assign(cfg, key.strip(), parse_value(value))
    return cfg.validate()


def load_config(path: str | Path) -> Config:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(str(path), "config file not found")
    return parse_config(p.read_text(encoding="utf-8"))


def dump_config(cfg: Config) -> str:
    lines = []
    for sec in dataclasses.fields(cfg):
        obj = getattr(cfg, sec.name)
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            text = "inf" if isinstance(v, float) and math.isinf(v) else json.dumps(v)
            lines.append(f"{sec.name}.{f.name} = {text}")
    return "\n".join(lines) + "\n"
