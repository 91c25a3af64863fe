"""Energy-constrained UAV routing for one subproblem (one UGV leg).

Timing model. At the subproblem start both vehicles sit at the origin stop
with the UAV fully charged. A route has three phases:

1. round trips launched from and landing at the origin; the UGV waits;
2. the transfer: either the UAV rides the UGV to the destination (taking
   the UGV leg time), or flies one *crossing* sortie origin -> visits ->
   destination, launched as the UGV departs. If it arrives before the UGV
   it hovers (burning fuel) and touches down once the UGV is there;
3. round trips from the destination with the UGV parked there.

Every landing is followed by a full top-up (zero time for the instant
model, ``deficit / rate`` for the linear one). The objective is the
subproblem makespan plus ``drop_penalty`` per dropped visit. Round trips
are symmetric in launch node, so the solver keeps them unlabelled and
assigns each to whichever end stop gives the shorter flight.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field

from .scenario import Point2D, Scenario
from .task_alloc import SubProblem
from .ugv_router import UgvRoute

ORIGIN, DEST = 0, 1
DEFAULT_DROP_PENALTY = 1e6
FEAS_TOL = 1e-9
IMPROVE_TOL = 1e-9
INF = math.inf


class Infeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    seed: int = 0
    time_limit: float = 10.0
    max_no_improve: int = 100
    drop_penalty: float = DEFAULT_DROP_PENALTY

    def __post_init__(self):
        if not (self.time_limit > 0 and self.max_no_improve > 0 and self.drop_penalty > 0):
            raise ValueError("search limits and drop penalty must be positive")


@dataclass(frozen=True)
class EvrpInstance:
    refs: tuple[int, ...]  # road ids at 0 (origin) and 1 (dest), mission ids after
    kinds: tuple[str, ...]
    positions: tuple[Point2D, ...]
    cost: tuple[tuple[float, ...], ...]  # seconds, buffers included
    fuel_cost: tuple[tuple[float, ...], ...]  # joules
    endurance: float  # joules
    cruise_power: float
    start_time: float
    dest_window_open: float
    drop_penalty: float = DEFAULT_DROP_PENALTY
    recharge_rate: float | None = None
    takeoff_buffer: float = 0.0
    landing_buffer: float = 0.0

    @property
    def endurance_s(self) -> float:
        return self.endurance / self.cruise_power

    @property
    def leg_time(self) -> float:
        return self.dest_window_open - self.start_time

    @property
    def missions(self) -> range:
        return range(2, len(self.refs))

    @property
    def recharge_factor(self) -> float:
        """Recharge seconds per airborne second."""
        return 0.0 if self.recharge_rate is None else self.cruise_power / self.recharge_rate


def make_instance(
    origin: tuple[int, Point2D],
    dest: tuple[int, Point2D],
    missions: list[tuple[int, Point2D]],
    *,
    speed: float,
    fuel_capacity: float,
    cruise_power: float,
    start_time: float = 0.0,
    dest_window_open: float = 0.0,
    takeoff_buffer: float = 0.0,
    landing_buffer: float = 0.0,
    drop_penalty: float = DEFAULT_DROP_PENALTY,
    recharge_rate: float | None = None,
) -> EvrpInstance:
    refs = (origin[0], dest[0]) + tuple(m[0] for m in missions)
    kinds = ("origin_refuel", "dest_refuel") + ("mission",) * len(missions)
    pos = (origin[1], dest[1]) + tuple(m[1] for m in missions)
    n = len(refs)
    cost = []
    for i in range(n):
        row = []
        for j in range(n):
            if i == j:
                row.append(0.0)
                continue
            c = pos[i].dist(pos[j]) / speed
            if i < 2:
                c += takeoff_buffer
            if j < 2:
                c += landing_buffer
            row.append(c)
        cost.append(tuple(row))
    fuel = tuple(tuple(cruise_power * c for c in row) for row in cost)
    return EvrpInstance(
        refs=refs,
        kinds=kinds,
        positions=pos,
        cost=tuple(cost),
        fuel_cost=fuel,
        endurance=fuel_capacity,
        cruise_power=cruise_power,
        start_time=start_time,
        dest_window_open=max(dest_window_open, start_time),
        drop_penalty=drop_penalty,
        recharge_rate=recharge_rate,
        takeoff_buffer=takeoff_buffer,
        landing_buffer=landing_buffer,
    )


def build_instance(
    sp: SubProblem,
    s: Scenario,
    ugv_schedule: UgvRoute,
    drop_penalty: float = DEFAULT_DROP_PENALTY,
) -> EvrpInstance:
    if sp.leg_index is None:
        start = arrive = 0.0
    else:
        leg = ugv_schedule.legs[sp.leg_index]
        start, arrive = leg.depart, leg.arrive
    return make_instance(
        (sp.origin_stop, s.node(sp.origin_stop)),
        (sp.dest_stop, s.node(sp.dest_stop)),
        [(pid, s.point(pid)) for pid in sp.assigned_points],
        speed=s.uav.speed,
        fuel_capacity=s.uav.fuel_capacity,
        cruise_power=s.uav.cruise_power,
        start_time=start,
        dest_window_open=arrive,
        takeoff_buffer=s.takeoff_buffer,
        landing_buffer=s.landing_buffer,
        drop_penalty=drop_penalty,
        recharge_rate=s.uav.recharge.rate_w,
    )


# --------------------------------------------------------------------------
# route records


@dataclass
class Sortie:
    kind: str  # "origin" | "dest" round trip, or "cross"
    launch_node: int
    visits: list[int]
    land_node: int
    launch_time: float
    visit_times: list[float]
    land_time: float  # touchdown
    duration: float  # airborne seconds, hover included
    fuel_used: float
    hover: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "launch_node": self.launch_node,
            "visits": list(self.visits),
            "land_node": self.land_node,
            "launch_time": self.launch_time,
            "visit_times": list(self.visit_times),
            "land_time": self.land_time,
            "duration": self.duration,
            "fuel_used": self.fuel_used,
            "hover": self.hover,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Sortie:
        return cls(**{**d, "visits": list(d["visits"]), "visit_times": list(d["visit_times"])})


@dataclass
class RechargeEvent:
    node: int
    time: float
    amount: float
    duration: float

    def to_dict(self) -> dict:
        return {"node": self.node, "time": self.time, "amount": self.amount, "duration": self.duration}


@dataclass
class Ride:
    from_node: int
    to_node: int
    start: float
    end: float

    def to_dict(self) -> dict:
        return {"from_node": self.from_node, "to_node": self.to_node, "start": self.start, "end": self.end}


@dataclass
class UavLegRoute:
    sorties: list[Sortie]
    dropped: list[int]
    recharges: list[RechargeEvent]
    rides: list[Ride] = field(default_factory=list)
    start_time: float = 0.0
    ugv_depart: float = 0.0  # UGV leaves the origin
    ugv_arrive: float = 0.0  # UGV reaches the destination
    end_time: float = 0.0
    objective: float = 0.0
    trace: list[float] = field(default_factory=list)

    @property
    def makespan(self) -> float:
        return self.end_time - self.start_time

    @property
    def flight_time(self) -> float:
        return sum(so.duration for so in self.sorties)

    @property
    def visited(self) -> list[int]:
        return [v for so in self.sorties for v in so.visits]


# --------------------------------------------------------------------------
# cost model on instance indices


class _Model:
    def __init__(self, inst: EvrpInstance):
        self.c = inst.cost
        self.E = inst.endurance_s
        self.L = inst.leg_time
        self.lb = inst.landing_buffer
        self.rho = inst.recharge_factor
        self.P = inst.drop_penalty

    def path(self, a: int, seq, b: int) -> float:
        c = self.c
        t = c[a][seq[0]]
        for u, v in zip(seq, seq[1:]):
            t += c[u][v]
        return t + c[seq[-1]][b]

    def trip_home(self, seq) -> tuple[float, int]:
        to = self.path(ORIGIN, seq, ORIGIN)
        td = self.path(DEST, seq, DEST)
        return (to, ORIGIN) if to <= td else (td, DEST)

    def trip(self, seq) -> float:
        if not seq:
            return 0.0
        dur = self.trip_home(seq)[0]
        if dur > self.E + FEAS_TOL:
            return INF
        return dur * (1.0 + self.rho)

    def cross_air(self, seq) -> tuple[float, float]:
        """(flight incl. buffers, airborne incl. hover) for a crossing sortie."""
        f = self.path(ORIGIN, seq, DEST)
        return f, max(f, self.L + self.lb)

    def cross(self, seq) -> float:
        if not seq:
            return self.L
        air = self.cross_air(seq)[1]
        if air > self.E + FEAS_TOL:
            return INF
        return air * (1.0 + self.rho)

    def route(self, r: int, seq) -> float:
        return self.cross(seq) if r == 0 else self.trip(seq)


@dataclass
class _Sol:
    routes: list[list[int]]  # routes[0] is the crossing sortie (empty = ride), rest are round trips
    dropped: list[int]

    def copy(self) -> _Sol:
        return _Sol([list(r) for r in self.routes], list(self.dropped))

    def tidy(self) -> None:
        self.routes = [self.routes[0]] + [r for r in self.routes[1:] if r]
        self.dropped.sort()


def _objective(m: _Model, sol: _Sol) -> float:
    total = sum(m.route(r, seq) for r, seq in enumerate(sol.routes))
    return total + m.P * len(sol.dropped)


# --------------------------------------------------------------------------
# construction


def _initial(inst: EvrpInstance) -> _Sol:
    m = _Model(inst)
    c, E, L, lb = m.c, m.E, m.L, m.lb

    def reach(h, q):
        return c[h][q] + c[q][h] <= E + FEAS_TOL

    def cross_ok(flight):
        return max(flight, L + lb) <= E + FEAS_TOL

    dropped, remaining = [], []
    for q in inst.missions:
        if reach(ORIGIN, q) or reach(DEST, q) or cross_ok(c[ORIGIN][q] + c[q][DEST]):
            remaining.append(q)
        else:
            dropped.append(q)

    trips: list[list[int]] = []
    cross: list[int] = []
    phase = ORIGIN
    while remaining:
        home = phase
        seq: list[int] = []
        elapsed = 0.0
        cur = home
        while True:
            pick = None
            for q in remaining:
                arc = c[cur][q]
                if elapsed + arc + c[q][home] <= E + FEAS_TOL:
                    ok = True
                elif phase == ORIGIN and cross_ok(elapsed + arc + c[q][DEST]):
                    ok = all(reach(DEST, o) for o in remaining if o != q)
                else:
                    ok = False
                if ok and (pick is None or arc < pick[0]):
                    pick = (arc, q)
            if pick is None:
                break
            elapsed += pick[0]
            cur = pick[1]
            seq.append(cur)
            remaining.remove(cur)
        if not seq:
            if phase == ORIGIN:
                phase = DEST
                continue
            dropped.extend(remaining)
            break
        land = home
        if phase == ORIGIN and cross_ok(elapsed + c[cur][DEST]):
            d_ok = all(reach(DEST, o) for o in remaining)
            back_ok = elapsed + c[cur][ORIGIN] <= E + FEAS_TOL
            if d_ok and (not remaining or not back_ok or c[cur][DEST] < c[cur][ORIGIN]):
                land = DEST
        if land == DEST and phase == ORIGIN:
            cross = seq
            phase = DEST
        else:
            trips.append(seq)
    sol = _Sol([cross] + trips, sorted(dropped))
    sol.tidy()
    return sol


# --------------------------------------------------------------------------
# local search


def _moves(m: _Model, sol: _Sol, rng: random.Random):
    """Yield (delta, new_solution_builder) for every neighbour, in a seeded order."""
    routes = sol.routes
    nr = len(routes)
    rcost = [m.route(r, seq) for r, seq in enumerate(routes)]
    positions = [(r, i) for r in range(nr) for i in range(len(routes[r]))]
    rng.shuffle(positions)
    targets = list(range(nr + 1))  # nr = fresh round trip

    def with_routes(changes: dict[int, list[int]], dropped=None):
        def build():
            new = sol.copy()
            for r, seq in changes.items():
                if r == nr:
                    new.routes.append(seq)
                else:
                    new.routes[r] = seq
            if dropped is not None:
                new.dropped = dropped
            new.tidy()
            return new

        return build

    # relocate one visit (within a sortie, across sorties, or into a new sortie)
    for r, i in positions:
        seq = routes[r]
        node = seq[i]
        rest = seq[:i] + seq[i + 1 :]
        base_from = m.route(r, rest)
        for r2 in targets:
            if r2 == r:
                for j in range(len(rest) + 1):
                    if j == i:
                        continue
                    cand = rest[:j] + [node] + rest[j:]
                    d = m.route(r, cand) - rcost[r]
                    yield d, with_routes({r: cand})
                continue
            tgt = routes[r2] if r2 < nr else []
            tcost = rcost[r2] if r2 < nr else 0.0
            for j in range(len(tgt) + 1):
                cand = tgt[:j] + [node] + tgt[j:]
                d = base_from - rcost[r] + m.route(r2, cand) - tcost
                yield d, with_routes({r: rest, r2: cand})

    # swap two visits
    for a in range(len(positions)):
        r1, i1 = positions[a]
        for b in range(a + 1, len(positions)):
            r2, i2 = positions[b]
            if r1 == r2:
                seq = list(routes[r1])
                seq[i1], seq[i2] = seq[i2], seq[i1]
                d = m.route(r1, seq) - rcost[r1]
                yield d, with_routes({r1: seq})
            else:
                s1, s2 = list(routes[r1]), list(routes[r2])
                s1[i1], s2[i2] = s2[i2], s1[i1]
                d = m.route(r1, s1) + m.route(r2, s2) - rcost[r1] - rcost[r2]
                yield d, with_routes({r1: s1, r2: s2})

    # 2-opt inside a sortie
    for r in range(nr):
        seq = routes[r]
        for i in range(len(seq) - 1):
            for j in range(i + 1, len(seq)):
                cand = seq[:i] + seq[i : j + 1][::-1] + seq[j + 1 :]
                yield m.route(r, cand) - rcost[r], with_routes({r: cand})

    # swap the crossing sortie with a round trip (or with nothing)
    for r in range(1, nr + 1):
        trip = routes[r] if r < nr else []
        tcost = rcost[r] if r < nr else 0.0
        if not trip and not routes[0]:
            continue
        for cand in (trip, trip[::-1]):
            d = m.cross(cand) + m.trip(routes[0]) - rcost[0] - tcost
            yield d, with_routes({0: list(cand), r: list(routes[0])})

    # merge two sorties
    for r1 in range(nr):
        for r2 in range(1, nr):
            if r1 == r2 or not routes[r1] or (r1 > 0 and r2 < r1):
                continue
            for cand in (routes[r1] + routes[r2], routes[r1] + routes[r2][::-1], routes[r2] + routes[r1]):
                d = m.route(r1, cand) - rcost[r1] - rcost[r2]
                yield d, with_routes({r1: cand, r2: []})

    # drop a visit
    for r, i in positions:
        rest = routes[r][:i] + routes[r][i + 1 :]
        d = m.route(r, rest) - rcost[r] + m.P
        yield d, with_routes({r: rest}, sorted(sol.dropped + [routes[r][i]]))

    # reinsert a dropped visit
    for q in sol.dropped:
        left = [x for x in sol.dropped if x != q]
        for r2 in targets:
            tgt = routes[r2] if r2 < nr else []
            tcost = rcost[r2] if r2 < nr else 0.0
            for j in range(len(tgt) + 1):
                cand = tgt[:j] + [q] + tgt[j:]
                d = m.route(r2, cand) - tcost - m.P
                yield d, with_routes({r2: cand}, left)


def _first_improvement(m: _Model, sol: _Sol, rng: random.Random):
    for delta, build in _moves(m, sol, rng):
        if delta < -IMPROVE_TOL:
            return build()
    return None


def _descend(m: _Model, sol: _Sol, rng: random.Random, deadline: float, trace: list[float] | None):
    obj = _objective(m, sol)
    while time.perf_counter() < deadline:
        nxt = _first_improvement(m, sol, rng)
        if nxt is None:
            break
        new_obj = _objective(m, nxt)
        if not new_obj < obj - IMPROVE_TOL:
            break
        sol, obj = nxt, new_obj
        if trace is not None:
            trace.append(obj)
    return sol, obj


def _kick(m: _Model, sol: _Sol, rng: random.Random) -> _Sol:
    """Remove a few visits and put them back at random feasible positions."""
    new = sol.copy()
    visited = [(r, q) for r, seq in enumerate(new.routes) for q in seq]
    if not visited:
        return new
    k = rng.randint(1, min(3, len(visited)))
    picked = rng.sample(visited, k)
    for r, q in picked:
        new.routes[r].remove(q)
    for _, q in picked:
        slots = []
        for r in range(len(new.routes) + 1):
            tgt = new.routes[r] if r < len(new.routes) else []
            for j in range(len(tgt) + 1):
                cand = tgt[:j] + [q] + tgt[j:]
                if m.route(r, cand) < INF:
                    slots.append((r, cand))
        if not slots:
            new.dropped.append(q)
            continue
        r, cand = slots[rng.randrange(len(slots))]
        if r == len(new.routes):
            new.routes.append(cand)
        else:
            new.routes[r] = cand
    new.tidy()
    return new


def _to_route(inst: EvrpInstance, sol: _Sol, objective: float, trace: list[float]) -> UavLegRoute:
    m = _Model(inst)
    refs = inst.refs
    p = inst.cruise_power
    o_ref, d_ref = refs[ORIGIN], refs[DEST]
    sorties: list[Sortie] = []
    recharges: list[RechargeEvent] = []
    rides: list[Ride] = []

    def fly(kind, a, seq, b, t0, ugv_ready):
        times = []
        t = t0 + m.c[a][seq[0]]
        times.append(t)
        for u, v in zip(seq, seq[1:]):
            t += m.c[u][v]
            times.append(t)
        flight = m.path(a, seq, b)
        over = t0 + flight - m.lb
        touchdown = max(over, ugv_ready) + m.lb
        air = touchdown - t0
        fuel = p * air
        sorties.append(
            Sortie(kind, refs[a], [refs[q] for q in seq], refs[b], t0, times, touchdown, air, fuel, air - flight)
        )
        rech = inst.recharge_factor * air
        recharges.append(RechargeEvent(refs[b], touchdown, fuel, rech))
        return touchdown + rech

    homes = [(m.trip_home(seq)[1], seq) for seq in sol.routes[1:]]
    t = inst.start_time
    for home, seq in homes:
        if home == ORIGIN:
            t = fly("origin", ORIGIN, seq, ORIGIN, t, t)
    depart = t
    arrive = depart + inst.leg_time
    if sol.routes[0]:
        t = fly("cross", ORIGIN, sol.routes[0], DEST, t, arrive)
    else:
        if o_ref != d_ref or inst.leg_time > 0:
            rides.append(Ride(o_ref, d_ref, depart, arrive))
        t = arrive
    for home, seq in homes:
        if home == DEST:
            t = fly("dest", DEST, seq, DEST, t, t)
    return UavLegRoute(
        sorties=sorties,
        dropped=[refs[q] for q in sol.dropped],
        recharges=recharges,
        rides=rides,
        start_time=inst.start_time,
        ugv_depart=depart,
        ugv_arrive=arrive,
        end_time=t,
        objective=objective,
        trace=list(trace),
    )


def _from_route(inst: EvrpInstance, route: UavLegRoute) -> _Sol:
    idx = {ref: k for k, ref in enumerate(inst.refs) if k >= 2}
    cross: list[int] = []
    trips = []
    for so in route.sorties:
        seq = [idx[v] for v in so.visits]
        if so.kind == "cross":
            cross = seq
        else:
            trips.append(seq)
    return _Sol([cross] + trips, sorted(idx[d] for d in route.dropped))


def route_objective(inst: EvrpInstance, route: UavLegRoute) -> float:
    """Objective of an existing route under the instance's cost model."""
    return _objective(_Model(inst), _from_route(inst, route))


def has_improving_move(inst: EvrpInstance, route: UavLegRoute) -> bool:
    """True if any declared neighbourhood move strictly improves ``route``."""
    m = _Model(inst)
    sol = _from_route(inst, route)
    return any(d < -IMPROVE_TOL for d, _ in _moves(m, sol, random.Random(0)))


def construct_initial(inst: EvrpInstance) -> UavLegRoute:
    sol = _initial(inst)
    obj = _objective(_Model(inst), sol)
    return _to_route(inst, sol, obj, [obj])


def solve(inst: EvrpInstance, cfg: SearchConfig | None = None) -> UavLegRoute:
    """Path-cheapest-arc start, first-improvement descent, then perturb-and-descend.

    The incumbent only changes on strict improvement, so ``trace`` (the
    incumbent objective after every accepted change) is nonincreasing.
    Results are deterministic for a given (instance, cfg) unless the wall
    clock limit cuts the search short.
    """
    cfg = cfg or SearchConfig()
    deadline = time.perf_counter() + cfg.time_limit
    m = _Model(inst)
    rng = random.Random(cfg.seed)
    sol = _initial(inst)
    obj = _objective(m, sol)
    if obj == INF:
        raise Infeasible("initial route violates the fuel budget")
    trace = [obj]
    best, best_obj = _descend(m, sol, rng, deadline, trace)
    if sum(len(r) for r in best.routes) + len(best.dropped) > 1:
        stale = 0
        while stale < cfg.max_no_improve and time.perf_counter() < deadline:
            cand, cand_obj = _descend(m, _kick(m, best, rng), rng, deadline, None)
            if cand_obj < best_obj - IMPROVE_TOL:
                best, best_obj = cand, cand_obj
                trace.append(best_obj)
                stale = 0
            else:
                stale += 1
    return _to_route(inst, best, best_obj, trace)
