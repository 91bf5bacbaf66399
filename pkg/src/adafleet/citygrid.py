"""Rectangular zone grid with a closed-form travel metric.

Zones are addressed by ``(row, col)``.  Distances are Manhattan cell counts
scaled by ``cell_length``; travel time is the cell count scaled by
``minutes_per_cell`` (no congestion).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence


class GridCoord(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class TravelModel:
    grid_rows: int = 20
    grid_cols: int = 20
    cell_length: float = 0.8
    minutes_per_cell: float = 1.0

    def __post_init__(self) -> None:
        for name in ("grid_rows", "grid_cols", "cell_length", "minutes_per_cell"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def n_zones(self) -> int:
        return self.grid_rows * self.grid_cols

    def contains(self, c: GridCoord) -> bool:
        return 0 <= c.row < self.grid_rows and 0 <= c.col < self.grid_cols

    def zone_index(self, c: GridCoord) -> int:
        return c.row * self.grid_cols + c.col

    def coord(self, index: int) -> GridCoord:
        return GridCoord(*divmod(index, self.grid_cols))

    def clamp(self, row: int, col: int) -> GridCoord:
        return GridCoord(min(max(row, 0), self.grid_rows - 1), min(max(col, 0), self.grid_cols - 1))

    def travel_time(self, a: GridCoord, b: GridCoord) -> float:
        return manhattan_cells(a, b) * self.minutes_per_cell

    def distance(self, a: GridCoord, b: GridCoord) -> float:
        return manhattan_cells(a, b) * self.cell_length

    def path_weight(self, stops: Sequence[GridCoord]) -> float:
        return path_cells(stops) * self.cell_length

    def zones_within_radius(self, center: GridCoord, radius_cells: int) -> list[GridCoord]:
        """All on-grid zones within ``radius_cells`` of ``center``, row-major."""
        out = []
        for r in range(max(0, center.row - radius_cells), min(self.grid_rows, center.row + radius_cells + 1)):
            span = radius_cells - abs(r - center.row)
            for c in range(max(0, center.col - span), min(self.grid_cols, center.col + span + 1)):
                out.append(GridCoord(r, c))
        return out


def manhattan_cells(a: GridCoord, b: GridCoord) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def path_cells(stops: Sequence[GridCoord]) -> int:
    """Total cell count of a polyline through ``stops`` (0 for a single stop)."""
    if not stops:
        raise ValueError("path needs at least one stop")
    total = 0
    for a, b in zip(stops, stops[1:]):
        total += abs(a[0] - b[0]) + abs(a[1] - b[1])
    return total
