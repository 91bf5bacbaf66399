import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adafleet.citygrid import GridCoord, TravelModel
from adafleet.demand import Request
from adafleet.errors import MalformedRoute
from adafleet.routing import (CapacityIndex, Route, Stop, StopKind, capacity_profile,
                              feasible_capacity_fast, feasible_capacity_naive, greedy_insertion,
                              route_planning, within_detour)
from oracles import (full_cells, joint_optimum, naive_fits, naive_span_check, random_profile_instance,
                     random_request, random_route, two_pass_oracle)

P, D = StopKind.PICKUP, StopKind.DROPOFF
G = GridCoord


def test_capacity_profile_examples():
    assert capacity_profile([], onboard=2) == []
    stops = [Stop(G(0, 1), P, 1, 2), Stop(G(0, 2), P, 2, 1), Stop(G(0, 3), D, 1, 2), Stop(G(0, 4), D, 2, 1)]
    assert capacity_profile(stops) == [2, 3, 1, 0]


def test_capacity_profile_malformed():
    with pytest.raises(MalformedRoute):
        capacity_profile([Stop(G(0, 1), D, 1, 1), Stop(G(0, 2), P, 1, 1)], onboard=1)
    with pytest.raises(MalformedRoute):
        capacity_profile([Stop(G(0, 1), D, 1, 1)], onboard=0)
    with pytest.raises(MalformedRoute):
        capacity_profile([Stop(G(0, 1), P, 1, 1), Stop(G(0, 2), P, 1, 1)])


def test_feasibility_examples():
    assert feasible_capacity_fast([4, 4, 4], (0, 3), 0, 4)
    assert not feasible_capacity_fast([2, 3, 1], (1, 2), 2, 4)
    assert feasible_capacity_fast([2, 3, 1], (2, 3), 2, 4)


@given(st.integers(0, 2**32 - 1))
def test_fast_feasibility_matches_naive(seed):
    rng = np.random.default_rng(seed)
    profile, span, pax, = random_profile_instance(rng)
    expected = naive_span_check(profile, span, pax, 4)
    assert feasible_capacity_fast(profile, span, pax, 4) == expected
    assert feasible_capacity_naive(profile, span, pax, 4) == expected


@given(st.lists(st.integers(-5, 50), min_size=1, max_size=40), st.data())
def test_sparse_table_range_max(values, data):
    idx = CapacityIndex(values)
    start = data.draw(st.integers(0, len(values) - 1))
    end = data.draw(st.integers(start + 1, len(values)))
    assert idx.range_max(start, end) == max(values[start:end])


def test_route_planning_empty_route():
    tm = TravelModel(12, 12, 1.0, 1.0)
    r = Request(1, G(0, 2), G(3, 2), 1, 0, 1.0)
    res = route_planning(Route(G(0, 0)), r, tm)
    assert [s.kind for s in res.route.stops] == [P, D]
    assert res.cost == 5


def test_zero_detour_insertion():
    route = Route(G(0, 0), (Stop(G(0, 4), D, 7, 1), Stop(G(0, 8), D, 8, 1)))
    r = Request(1, G(0, 1), G(0, 3), 1, 0, 1.0)
    res = route_planning(route, r)
    assert res.cost_cells == route.cells()


@given(st.integers(0, 2**32 - 1))
def test_route_planning_matches_exhaustive_two_pass(seed):
    rng = np.random.default_rng(seed)
    route, _ = random_route(rng, max_requests=3)
    req = random_request(rng, 99, 12, 12)
    res = route_planning(route, req)
    cost, x, y = two_pass_oracle(route, req)
    assert res.cost_cells == cost == full_cells(route.anchor, res.route.stops)
    assert (res.pickup_pos, res.dropoff_pos) == (x, y)
    assert res.cost_cells >= joint_optimum(route, req)
    # existing stops keep their relative order
    assert [s for s in res.route.stops if s.request_id != 99] == list(route.stops)
    kinds = [s.kind for s in res.route.stops if s.request_id == 99]
    assert kinds == [P, D]


def test_greedy_insertion_empty_candidates():
    route = Route(G(1, 1), (Stop(G(2, 2), D, 0, 1),))
    out, matched = greedy_insertion(route, [], load=1, c_max=4, onboard=1)
    assert out == route and matched == []


def test_greedy_insertion_three_pairs():
    reqs = [Request(i, G(0, i), G(5, i), 2, 0, 1.0) for i in range(3)]
    route, matched = greedy_insertion(Route(G(0, 0)), reqs, load=0, c_max=4)
    assert len(matched) == 2
    assert max(capacity_profile(route.stops)) <= 4


def test_greedy_insertion_ties_to_lowest_id():
    reqs = [Request(5, G(0, 1), G(0, 2), 1, 0, 1.0), Request(2, G(0, 1), G(0, 2), 1, 0, 1.0)]
    _, matched = greedy_insertion(Route(G(0, 0)), reqs, load=0, c_max=1)
    assert matched == [2]


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_greedy_insertion_respects_capacity(seed, c_max):
    rng = np.random.default_rng(seed)
    route, onboard = random_route(rng, max_requests=3, c_max=c_max)
    committed = onboard + sum(s.passengers for s in route.stops if s.kind is P)
    if committed > c_max:
        return
    cands = [random_request(rng, 100 + i, 12, 12) for i in range(int(rng.integers(0, 6)))]
    out, matched = greedy_insertion(route, cands, committed, c_max, onboard=onboard)
    assert naive_fits(out.stops, onboard, c_max)
    assert committed + sum(r.passengers for r in cands if r.id in matched) <= c_max
    # first pick is a cheapest feasible single insertion
    if matched:
        first = next(r for r in cands if r.id == matched[0])
        first_cost = route_planning(route, first).cost_cells
        for r in cands:
            res = route_planning(route, r)
            if committed + r.passengers <= c_max and naive_fits(res.route.stops, onboard, c_max):
                assert first_cost <= res.cost_cells


@given(st.integers(0, 2**32 - 1))
def test_greedy_cost_non_decreasing(seed):
    rng = np.random.default_rng(seed)
    cands = [random_request(rng, i, 12, 12, max_pax=1) for i in range(5)]
    start = Route(G(6, 6))
    final, matched = greedy_insertion(start, cands, 0, 8)
    by_id = {r.id: r for r in cands}
    route, costs = start, [start.cells()]
    for rid in matched:
        route = route_planning(route, by_id[rid]).route
        costs.append(route.cells())
    assert route == final
    assert costs == sorted(costs)


def test_detour_filter():
    route = Route(G(0, 0), (Stop(G(0, 1), P, 1, 1), Stop(G(0, 2), D, 1, 1)))
    assert within_detour(route, 1.0)
    detour = Route(G(0, 0), (Stop(G(0, 1), P, 1, 1), Stop(G(5, 1), P, 2, 1),
                             Stop(G(0, 2), D, 1, 1), Stop(G(5, 2), D, 2, 1)))
    assert not within_detour(detour, 2.0)
    assert within_detour(detour, math.inf)
    far = Request(3, G(9, 9), G(9, 0), 1, 0, 1.0)
    base = Route(G(0, 0), (Stop(G(0, 1), P, 1, 1), Stop(G(0, 2), D, 1, 1)))
    _, matched = greedy_insertion(base, [far], 1, 4, max_detour_ratio=1.0)
    assert matched == [3]  # appended after existing stops, no detour for anyone
