from __future__ import annotations

import json

import pytest

from coroute.evrp import SearchConfig
from coroute.pipeline import (
    CooperativePlan,
    MissionMetrics,
    UavRoute,
    VehicleMetrics,
    compare,
    dump_plans,
    improvement_pct,
    plan,
    plans_to_document,
    ugv_only_baseline,
)
from coroute.scenario import generate_random_scenario
from coroute.ugv_router import UgvRoute

FAST = SearchConfig(seed=0, max_no_improve=20)


def test_t1_ugv_stays_home(t1):
    plans = plan(t1)
    assert len(plans) == 1
    p = plans[0]
    assert p.found_by == ["exact", "greedy"]
    assert p.ugv_route.legs == []
    assert [(so.launch_node, so.visits, so.land_node) for so in p.uav_route.sorties] == [(0, [0], 0)]
    assert p.total_time == pytest.approx(6.0)  # 2 x 1 m at 1 m/s plus two 2 s buffers
    assert p.metrics.recharges_at_depot == 1 and p.metrics.recharges_on_ugv == 0


def test_t3_plan(t3):
    p = plan(t3)[0]
    nonempty = [sp for sp in p.subproblems if sp["assigned_points"]]
    assert [(sp["origin_stop"], sp["dest_stop"], sp["assigned_points"]) for sp in nonempty] == [
        (0, 1, [0, 1]),
        (1, 2, [2]),
    ]
    tour_time = p.ugv_route.length / t3.ugv.speed
    dwell = sum(dep - arr for arr, dep in p.ugv_route.stop_dwell)
    assert p.total_time == pytest.approx(tour_time + dwell)
    assert p.metrics.dropped == 0
    assert sorted(p.uav_route.dropped + [v for so in p.uav_route.sorties for v in so.visits]) == [0, 1, 2]


def test_recharges_are_colocated(lab):
    for p in plan(lab, cfg=FAST):
        route = p.ugv_route
        for rc in p.uav_route.recharges:
            ok = any(
                node == rc.node and arr - 1e-9 <= rc.time <= dep + 1e-9
                for node, (arr, dep) in zip(route.ordered_stops, route.stop_dwell)
            )
            assert ok, rc


def test_sorties_within_endurance(lab):
    for p in plan(lab, cfg=FAST):
        assert p.metrics.dropped == 0
        assert all(so.duration <= lab.uav.endurance + 1e-9 for so in p.uav_route.sorties)


def test_outer_selection(lab):
    assert {m for p in plan(lab, "greedy", FAST) for m in p.found_by} <= {"greedy", "exact"}
    assert all(p.outer_method == "exact" for p in plan(lab, "exact", FAST))
    with pytest.raises(ValueError):
        plan(lab, "fastest")


def test_plans_sorted_best_first(lab):
    plans = plan(lab, cfg=FAST)
    times = [p.total_time for p in plans if not p.has_drops]
    assert times == sorted(times)


def test_baseline_t1(t1):
    b = ugv_only_baseline(t1)
    assert b.ugv_route.ordered_stops == [0] and b.total_time == 0.0
    assert b.metrics.ugv.missions_visited == 1


def test_baseline_t3(t3):
    b = ugv_only_baseline(t3)
    assert b.ugv_route.length == pytest.approx(40.0)
    assert b.total_time == pytest.approx(100.0)
    assert b.metrics.uav.energy == 0.0
    assert b.metrics.total_energy == pytest.approx(t3.ugv.cruise_power * 100.0)


def test_paper_scale_energy_direction():
    s = generate_random_scenario(3, 20, 20000.0, 5, profile="paper")
    best = plan(s, cfg=FAST)[0]
    assert best.metrics.total_energy < ugv_only_baseline(s).metrics.total_energy


def metrics(time, energy):
    v = VehicleMetrics(time, time, energy, 0)
    return MissionMetrics(time, energy, v, VehicleMetrics(0, 0, 0, 0), 0, 0, 0)


def fake(time, energy=1.0, method="exact"):
    return CooperativePlan(UgvRoute([0], []), UavRoute(), method, None, metrics(time, energy))


def test_improvement_rows_match_table_shape():
    # 200 and 272 minutes against a 233 minute baseline
    report = compare([fake(200 * 60), fake(272 * 60, method="greedy")], fake(233 * 60, method="ugv_only"))
    assert [round(r["time_improvement_pct"], 2) for r in report.rows] == [14.16, -16.74]
    assert set(report.FIELDS) == set(report.rows[0])


def test_identical_plan_is_zero_improvement(t3):
    b = ugv_only_baseline(t3)
    row = compare([b], b).rows[0]
    assert row["time_improvement_pct"] == 0.0 and row["energy_improvement_pct"] == 0.0


def test_improvement_pct_zero_baseline():
    assert improvement_pct(0.0, 5.0) == 0.0


def test_compare_needs_plans(t3):
    with pytest.raises(ValueError):
        compare([], ugv_only_baseline(t3))


def test_document_round_trip(lab):
    plans = plan(lab, cfg=FAST)
    doc = plans_to_document(lab, plans, ugv_only_baseline(lab), {"seed": 0})
    again = json.loads(dump_plans(doc))
    restored = [CooperativePlan.from_dict(p) for p in again["plans"]]
    assert [p.to_dict() for p in restored] == [p.to_dict() for p in plans]
    assert again["schema"] == "coroute.plan/1"

