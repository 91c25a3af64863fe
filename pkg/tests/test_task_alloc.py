from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixture_doc
from coroute.scenario import compute_coverage, generate_random_scenario, scenario_from_dict
from coroute.setcover import RefuelStopSet, exact_cover_all_optimal
from coroute.task_alloc import AllocationError, allocate, label_points
from coroute.ugv_router import route_ugv


def test_t1_single_subproblem(t1):
    route = route_ugv(t1, RefuelStopSet((0,), "exact"))
    subs = allocate(t1, compute_coverage(t1), route)
    assert len(subs) == 1
    sp = subs[0]
    assert (sp.origin_stop, sp.dest_stop, sp.assigned_points, sp.leg_index) == (0, 0, [0], None)


def test_t3_follows_the_tour(t3):
    route = route_ugv(t3, RefuelStopSet((0, 1, 2), "exact"))
    subs = allocate(t3, compute_coverage(t3), route)
    assert [(sp.origin_stop, sp.dest_stop, sp.assigned_points) for sp in subs] == [
        (0, 1, [0, 1]),  # depot-labelled p1 rides along with p2
        (1, 2, [2]),
        (2, 0, []),
    ]


def test_tie_goes_to_earlier_stop():
    doc = fixture_doc("T3.json")
    doc["coverage_radius_m"] = 6.0
    doc["mission_points"] = [{"id": 0, "x": 15.0, "y": 0.0}]
    s = scenario_from_dict(doc)
    cov = compute_coverage(s)
    assert label_points(s, cov, [0, 1, 2]) == {0: 1}
    assert label_points(s, cov, [0, 2, 1]) == {0: 2}


def test_uncovered_by_tour(t3):
    with pytest.raises(AllocationError):
        label_points(t3, compute_coverage(t3), [0, 1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.sampled_from(["paper", "lab"]))
def test_partition(seed, profile):
    area = 20000.0 if profile == "paper" else 4.0
    s = generate_random_scenario(seed, 15, area, 4, profile=profile)
    cov = compute_coverage(s)
    cover = exact_cover_all_optimal(cov, s.depot)[0]
    route = route_ugv(s, cover)
    subs = allocate(s, cov, route)
    got = sorted(p for sp in subs for p in sp.assigned_points)
    assert got == sorted(m.id for m in s.mission_points)
    for sp in subs:
        for p in sp.assigned_points:
            covering = set(cov.stops_covering(p))
            assert sp.origin_stop in covering or sp.dest_stop in covering
