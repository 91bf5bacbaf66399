"""Phase-one potential assignment of pending requests to nearby vehicles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .citygrid import TravelModel

MAX_ASSIGNMENTS = 50


@dataclass
class AssignmentResult:
    lists: dict[int, list] = field(default_factory=dict)
    rejected: list = field(default_factory=list)

    def assigned_count(self) -> int:
        return sum(len(v) for v in self.lists.values())


def potential_assignments(
    requests: Sequence,
    vehicles: Sequence,
    radius_cells: int,
    travel: TravelModel,
    cap: int = MAX_ASSIGNMENTS,
) -> AssignmentResult:
    """Give each request to the nearest available vehicle within ``radius_cells``.

    Requests are handled in id order.  Candidates are ranked by travel time
    to the pickup, then vehicle id; a vehicle whose list already holds
    ``cap`` requests passes the request to the next candidate.  A request
    with no candidate left is rejected.  Only vehicles with a truthy
    ``available`` attribute take part.
    """
    pool = sorted((v for v in vehicles if v.available), key=lambda v: v.id)
    result = AssignmentResult(lists={v.id: [] for v in pool})
    if not pool:
        result.rejected = sorted(requests, key=lambda r: r.id)
        return result
    ids = np.array([v.id for v in pool])
    rows = np.array([v.location[0] for v in pool])
    cols = np.array([v.location[1] for v in pool])
    full = np.zeros(len(pool), dtype=bool)
    for req in sorted(requests, key=lambda r: r.id):
        cells = np.abs(rows - req.origin[0]) + np.abs(cols - req.origin[1])
        ok = (cells <= radius_cells) & ~full
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            result.rejected.append(req)
            continue
        # travel time is monotone in cells; pool is id-sorted so lexsort keeps id order on ties
        order = cand[np.lexsort((ids[cand], cells[cand]))]
        j = int(order[0])
        bucket = result.lists[int(ids[j])]
        bucket.append(req)
        if len(bucket) >= cap:
            full[j] = True
    return result
