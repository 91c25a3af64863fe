from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_evrp
from coroute.evrp import (
    SearchConfig,
    construct_initial,
    has_improving_move,
    make_instance,
    route_objective,
    solve,
)
from coroute.scenario import Point2D

ROOT34 = math.sqrt(34)


def e1(endurance, *, leg=10.0, buffers=0.0, power=1.0, rate=None):
    return make_instance(
        (0, Point2D(0, 0)),
        (1, Point2D(10, 0)),
        [(101, Point2D(5, 3)), (102, Point2D(5, -3))],
        speed=1.0,
        fuel_capacity=endurance * power,
        cruise_power=power,
        start_time=0.0,
        dest_window_open=leg,
        takeoff_buffer=buffers,
        landing_buffer=buffers,
        recharge_rate=rate,
    )


def test_e1_costs():
    inst = e1(20)
    assert inst.cost[0][2] == pytest.approx(ROOT34)
    assert inst.cost[2][3] == pytest.approx(6.0)
    assert inst.fuel_cost[2][3] == pytest.approx(6.0)


def test_buffers_add_to_refuel_arcs():
    plain, buffered = e1(20), e1(20, buffers=2.0)
    assert buffered.cost[0][2] == pytest.approx(plain.cost[0][2] + 2)
    assert buffered.cost[2][1] == pytest.approx(plain.cost[2][1] + 2)
    assert buffered.cost[2][3] == pytest.approx(plain.cost[2][3])


def test_empty_instance():
    inst = make_instance((0, Point2D(0, 0)), (1, Point2D(4, 0)), [], speed=1.0, fuel_capacity=10.0, cruise_power=1.0,
                         dest_window_open=8.0)
    assert len(inst.refs) == 2
    r = solve(inst)
    assert r.sorties == [] and r.dropped == []
    assert r.flight_time == 0.0
    assert r.makespan == pytest.approx(8.0)  # the UAV rides the UGV


def test_e1_single_sortie():
    r = construct_initial(e1(20))
    assert [(so.kind, so.visits) for so in r.sorties] == [("cross", [101, 102])]
    assert r.sorties[0].duration == pytest.approx(2 * ROOT34 + 6)
    assert r.dropped == []


def test_e1_tight_endurance():
    inst = e1(12)
    r = construct_initial(inst)
    assert r.dropped == []
    assert all(so.duration <= 12 + 1e-9 for so in r.sorties)
    assert sorted(v for so in r.sorties for v in so.visits) == [101, 102]
    best = solve(inst, SearchConfig(seed=1, time_limit=5, max_no_improve=1000))
    assert best.objective == pytest.approx(oracle(inst), abs=1e-6)


def test_e1_everything_dropped():
    r = solve(e1(5))
    assert r.sorties == [] and sorted(r.dropped) == [101, 102]


def test_e1_matches_oracle():
    inst = e1(20)
    r = solve(inst, SearchConfig(seed=1, time_limit=5, max_no_improve=1000))
    assert r.objective == pytest.approx(oracle(inst), abs=1e-6)


def test_hover_until_ugv_arrives():
    # the UGV needs 40 s for the leg; the crossing sortie must wait for it
    r = solve(e1(60, leg=40.0))
    cross = [so for so in r.sorties if so.kind == "cross"]
    if cross:
        assert cross[0].land_time >= 40.0
        assert cross[0].duration <= 60 + 1e-9
    assert r.end_time >= 40.0


def test_linear_recharge_adds_time():
    instant = solve(e1(12))
    slow = solve(e1(12, rate=0.5))  # 2 s of charging per airborne second
    assert slow.makespan > instant.makespan
    assert all(rc.duration == pytest.approx(2 * rc.amount) for rc in slow.recharges)


def oracle(inst, speed=1.0):
    if len(inst.refs) == 2:
        return inst.leg_time
    return brute_evrp(
        (inst.positions[0].x, inst.positions[0].y),
        (inst.positions[1].x, inst.positions[1].y),
        [(p.x, p.y) for p in inst.positions[2:]],
        speed=speed,
        endurance_s=inst.endurance_s,
        leg_time=inst.leg_time,
        takeoff=inst.takeoff_buffer,
        landing=inst.landing_buffer,
        recharge_factor=inst.recharge_factor,
        penalty=inst.drop_penalty,
    )


def random_instance(rng: random.Random, n: int):
    o = Point2D(rng.uniform(0, 10), rng.uniform(0, 10))
    d = o if rng.random() < 0.2 else Point2D(rng.uniform(0, 10), rng.uniform(0, 10))
    buf = rng.choice([0.0, 1.0])
    speed = rng.uniform(0.5, 2.0)
    inst = make_instance(
        (0, o),
        (0 if d == o else 1, d),
        [(100 + i, Point2D(rng.uniform(0, 10), rng.uniform(0, 10))) for i in range(n)],
        speed=speed,
        fuel_capacity=rng.uniform(5, 40),
        cruise_power=1.0,
        start_time=3.0,
        dest_window_open=3.0 + rng.uniform(0, 20),
        takeoff_buffer=buf,
        landing_buffer=buf,
        drop_penalty=1e4,
        recharge_rate=rng.choice([None, 2.0]),
    )
    return inst, speed


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 5))
def test_solve_matches_oracle(seed, n):
    inst, speed = random_instance(random.Random(seed), n)
    r = solve(inst, SearchConfig(seed=seed % 7))
    assert r.objective == pytest.approx(oracle(inst, speed), abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_search_invariants(seed):
    inst, _ = random_instance(random.Random(seed), 5)
    init = construct_initial(inst)
    r = solve(inst)
    assert r.objective <= init.objective + 1e-9
    assert all(b <= a for a, b in zip(r.trace, r.trace[1:]))
    assert r.trace[-1] == r.objective
    assert route_objective(inst, r) == pytest.approx(r.objective)
    assert not has_improving_move(inst, r)
    assert r.makespan + inst.drop_penalty * len(r.dropped) == pytest.approx(r.objective)
    for so in r.sorties:
        assert so.duration <= inst.endurance_s + 1e-9
        assert so.fuel_used <= inst.endurance + 1e-6
    seen = sorted(r.visited + r.dropped)
    assert seen == sorted(inst.refs[2:])


def test_same_seed_same_answer():
    inst, _ = random_instance(random.Random(5), 5)
    a, b = solve(inst, SearchConfig(seed=3)), solve(inst, SearchConfig(seed=3))
    assert a == b


def test_bad_config():
    with pytest.raises(ValueError):
        SearchConfig(time_limit=0)
