from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_tsp
from coroute.scenario import Point2D, RoadNetwork, generate_random_scenario
from coroute.setcover import RefuelStopSet
from coroute.ugv_router import (
    UgvRoute,
    distance_table,
    held_karp,
    nearest_neighbor,
    reversed_route,
    route_ugv,
    solve_tour,
    tour_length,
    two_opt,
)


def test_depot_only(t1):
    route = route_ugv(t1, RefuelStopSet((0,), "greedy"))
    assert route.ordered_stops == [0] and route.legs == []
    assert route.end_time == 0.0


def test_t3_line(t3):
    route = route_ugv(t3, RefuelStopSet((0, 1, 2), "exact"))
    assert route.ordered_stops == [0, 1, 2, 0]
    assert route.length == pytest.approx(40.0)
    assert [leg.arrive for leg in route.legs] == pytest.approx([25.0, 50.0, 100.0])
    assert route.legs[-1].path == [2, 1, 0]


def test_reverse(t3):
    fwd = route_ugv(t3, RefuelStopSet((0, 1, 2), "exact"))
    rev = reversed_route(t3, fwd)
    assert rev.ordered_stops == [0, 2, 1, 0]
    assert rev.length == pytest.approx(fwd.length)


def test_round_trip(t3):
    route = route_ugv(t3, RefuelStopSet((0, 1, 2), "exact"))
    assert UgvRoute.from_dict(route.to_dict()) == route


def random_tsp(rng, n):
    pts = [(rng.uniform(0, 100), rng.uniform(0, 100)) for _ in range(n)]
    return [[math.dist(p, q) for q in pts] for p in pts]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 8))
def test_held_karp_matches_permutations(seed, n):
    dist = random_tsp(random.Random(seed), n)
    order = held_karp(dist, list(range(n)))
    assert order[0] == order[-1] == 0 and sorted(order[:-1] if n > 1 else order) == list(range(n))
    assert tour_length(dist, order) == pytest.approx(brute_tsp(dist, 0, range(n)), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9))
def test_heuristic_tour_is_valid(seed):
    rng = random.Random(seed)
    n = rng.randint(13, 25)
    dist = random_tsp(rng, n)
    start = nearest_neighbor(dist, list(range(n)))
    better = two_opt(dist, list(start))
    assert sorted(better[:-1]) == list(range(n)) and better[0] == better[-1] == 0
    assert tour_length(dist, better) <= tour_length(dist, start) + 1e-9


def test_solve_tour_uses_road_metric():
    # nodes 0 and 1 are 1 m apart as the crow flies but 9 m apart by road
    nodes = {0: Point2D(0, 0), 1: Point2D(0, 1), 2: Point2D(4, 0), 3: Point2D(4, 1)}
    road = RoadNetwork(nodes, ((0, 2, 4.0), (2, 3, 1.0), (3, 1, 4.0)), 0)
    order = solve_tour(road, [1, 3], 0)
    labels = [0, 1, 3]
    dist = distance_table(road, labels)
    assert dist[0][1] == pytest.approx(9.0)
    assert tour_length(dist, [labels.index(x) for x in order]) == pytest.approx(18.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9), st.integers(2, 8))
def test_route_ugv_matches_brute_force(seed, k):
    s = generate_random_scenario(seed, 3, 20000.0, 3, profile="paper")
    rng = random.Random(seed)
    stops = [0] + sorted(rng.sample(range(1, 9), k - 1))
    route = route_ugv(s, RefuelStopSet(tuple(stops), "exact"))
    dist = distance_table(s.road, stops)
    assert route.length == pytest.approx(brute_tsp(dist, 0, range(len(stops))), abs=1e-9)
    assert sorted(route.ordered_stops[:-1]) == sorted(stops)
