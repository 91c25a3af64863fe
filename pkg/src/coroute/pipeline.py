"""Bi-level planner: refuel stops and UGV tour first, UAV sorties second."""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field

from .evrp import RechargeEvent, Ride, SearchConfig, Sortie, UavLegRoute, build_instance, solve
from .scenario import Scenario, compute_coverage, scenario_to_dict
from .setcover import DEFAULT_MAX_SOLUTIONS, RefuelStopSet, exact_cover_all_optimal, greedy_cover
from .task_alloc import SubProblem, allocate
from .ugv_router import UgvRoute, build_route, reversed_route, route_ugv, solve_tour

log = logging.getLogger(__name__)

PLAN_SCHEMA = "coroute.plan/1"
DEFAULT_SNAP_TOLERANCE = 0.5
OUTER_ORDER = {"exact": 0, "greedy": 1, "ugv_only": 2}


@dataclass
class VehicleMetrics:
    travel_time: float  # seconds from mission start until this vehicle is done
    active_time: float  # seconds drawing cruise power
    energy: float  # joules
    missions_visited: int

    def to_dict(self) -> dict:
        return dict(vars(self))


@dataclass
class MissionMetrics:
    total_time: float
    total_energy: float
    ugv: VehicleMetrics
    uav: VehicleMetrics
    recharges_on_ugv: int
    recharges_at_depot: int
    dropped: int

    def to_dict(self) -> dict:
        d = dict(vars(self))
        d["ugv"] = self.ugv.to_dict()
        d["uav"] = self.uav.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MissionMetrics:
        return cls(**{**d, "ugv": VehicleMetrics(**d["ugv"]), "uav": VehicleMetrics(**d["uav"])})


@dataclass
class UavRoute:
    sorties: list[Sortie] = field(default_factory=list)
    recharges: list[RechargeEvent] = field(default_factory=list)
    rides: list[Ride] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sorties": [x.to_dict() for x in self.sorties],
            "recharges": [x.to_dict() for x in self.recharges],
            "rides": [x.to_dict() for x in self.rides],
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, d: dict) -> UavRoute:
        return cls(
            [Sortie.from_dict(x) for x in d["sorties"]],
            [RechargeEvent(**x) for x in d["recharges"]],
            [Ride(**x) for x in d["rides"]],
            list(d["dropped"]),
        )


@dataclass
class UgvVisit:
    point: int
    node: int
    time: float

    def to_dict(self) -> dict:
        return {"point": self.point, "node": self.node, "time": self.time}


@dataclass
class CooperativePlan:
    ugv_route: UgvRoute
    uav_route: UavRoute
    outer_method: str  # "greedy" | "exact" | "ugv_only"
    cover_used: RefuelStopSet | None
    metrics: MissionMetrics
    orientation: str = "forward"
    ugv_visits: list[UgvVisit] = field(default_factory=list)
    subproblems: list[dict] = field(default_factory=list)
    found_by: list[str] = field(default_factory=list)  # outer methods that produced this stop set

    def __post_init__(self):
        if not self.found_by:
            self.found_by = [self.outer_method]

    @property
    def total_time(self) -> float:
        return self.metrics.total_time

    @property
    def has_drops(self) -> bool:
        return self.metrics.dropped > 0

    def to_dict(self) -> dict:
        return {
            "outer_method": self.outer_method,
            "cover_used": None if self.cover_used is None else self.cover_used.to_dict(),
            "orientation": self.orientation,
            "metrics": self.metrics.to_dict(),
            "ugv_route": self.ugv_route.to_dict(),
            "uav_route": self.uav_route.to_dict(),
            "ugv_visits": [v.to_dict() for v in self.ugv_visits],
            "subproblems": self.subproblems,
            "found_by": list(self.found_by),
        }

    @classmethod
    def from_dict(cls, d: dict) -> CooperativePlan:
        return cls(
            ugv_route=UgvRoute.from_dict(d["ugv_route"]),
            uav_route=UavRoute.from_dict(d["uav_route"]),
            outer_method=d["outer_method"],
            cover_used=None if d["cover_used"] is None else RefuelStopSet.from_dict(d["cover_used"]),
            metrics=MissionMetrics.from_dict(d["metrics"]),
            orientation=d.get("orientation", "forward"),
            ugv_visits=[UgvVisit(**v) for v in d.get("ugv_visits", [])],
            subproblems=d.get("subproblems", []),
            found_by=list(d.get("found_by", [])),
        )


# --------------------------------------------------------------------------
# helpers


def _node_pass_times(s: Scenario, route: UgvRoute) -> list[tuple[int, float]]:
    """Every (node, time) the UGV passes, in traversal order."""
    out = [(route.ordered_stops[0], 0.0)]
    for leg in route.legs:
        dist = 0.0
        for a, b in zip(leg.path, leg.path[1:]):
            dist += _edge(s, a, b)
            out.append((b, leg.depart + dist / s.ugv.speed))
    return out


def _edge(s: Scenario, a: int, b: int) -> float:
    return min(length for v, length in s.road.adjacency[a] if v == b)


def _ugv_visitable(s: Scenario, route: UgvRoute, snap: float) -> dict[int, int]:
    """Mission points within ``snap`` of a node on the UGV tour -> that node."""
    nodes = []
    for node, _ in _node_pass_times(s, route):
        if node not in nodes:
            nodes.append(node)
    out = {}
    for mp in s.mission_points:
        best = None
        for rank, n in enumerate(nodes):
            d = s.node(n).dist(mp.position)
            if d <= snap and (best is None or (d, rank) < best[0]):
                best = ((d, rank), n)
        if best is not None:
            out[mp.id] = best[1]
    return out


def _ugv_visits(s: Scenario, route: UgvRoute, assign: dict[int, int]) -> list[UgvVisit]:
    passes = _node_pass_times(s, route)
    first = {}
    for node, t in passes:
        first.setdefault(node, t)
    return [UgvVisit(pid, node, first[node]) for pid, node in sorted(assign.items())]


def compute_metrics(s: Scenario, ugv: UgvRoute, uav: UavRoute, ugv_visits: list[UgvVisit], end: float) -> MissionMetrics:
    moving = sum(leg.length for leg in ugv.legs) / s.ugv.speed
    airborne = sum(so.duration for so in uav.sorties)
    ugv_m = VehicleMetrics(end, moving, s.ugv.cruise_power * moving, len(ugv_visits))
    uav_m = VehicleMetrics(
        airborne,
        airborne,
        s.uav.cruise_power * airborne,
        sum(len(so.visits) for so in uav.sorties),
    )
    at_depot = sum(1 for r in uav.recharges if r.node == s.depot)
    return MissionMetrics(
        total_time=end,
        total_energy=ugv_m.energy + uav_m.energy,
        ugv=ugv_m,
        uav=uav_m,
        recharges_on_ugv=len(uav.recharges) - at_depot,
        recharges_at_depot=at_depot,
        dropped=len(uav.dropped),
    )


def _retime(s: Scenario, legs, k: int, t: float) -> None:
    """Zero-dwell schedule for legs k.. starting at t (the not-yet-solved tail)."""
    for leg in legs[k:]:
        leg.depart = t
        leg.arrive = t + leg.length / s.ugv.speed
        t = leg.arrive


def plan_route(
    s: Scenario,
    route: UgvRoute,
    cover: RefuelStopSet,
    cfg: SearchConfig,
    *,
    cov=None,
    snap_tolerance: float = DEFAULT_SNAP_TOLERANCE,
    orientation: str = "forward",
    cache: dict | None = None,
) -> CooperativePlan:
    """Inner level for a fixed UGV tour: allocate, then solve legs in tour order."""
    cov = cov if cov is not None else compute_coverage(s)
    route = copy.deepcopy(route)
    subs: list[SubProblem] = allocate(s, cov, route)

    by_ugv = _ugv_visitable(s, route, snap_tolerance)
    for sp in subs:
        sp.ugv_points = [p for p in sp.assigned_points if p in by_ugv]
        sp.assigned_points = [p for p in sp.assigned_points if p not in by_ugv]

    uav = UavRoute()
    records = []
    t = 0.0
    for sp in subs:
        if sp.leg_index is not None:
            _retime(s, route.legs, sp.leg_index, t)
        inst = build_instance(sp, s, route, cfg.drop_penalty)
        key = (inst.refs, inst.start_time, inst.dest_window_open)
        leg_route: UavLegRoute | None = None if cache is None else cache.get(key)
        if leg_route is None:
            leg_route = solve(inst, cfg)
            if cache is not None:
                cache[key] = leg_route
        if sp.leg_index is not None:
            leg = route.legs[sp.leg_index]
            leg.depart, leg.arrive = leg_route.ugv_depart, leg_route.ugv_arrive
        uav.sorties.extend(copy.deepcopy(leg_route.sorties))
        uav.recharges.extend(copy.deepcopy(leg_route.recharges))
        uav.rides.extend(copy.deepcopy(leg_route.rides))
        uav.dropped.extend(leg_route.dropped)
        records.append(
            {
                **sp.to_dict(),
                "start_time": inst.start_time,
                "dest_window_open": inst.dest_window_open,
                "end_time": leg_route.end_time,
                "objective": leg_route.objective,
                "dropped": list(leg_route.dropped),
                "trace": list(leg_route.trace),
            }
        )
        t = leg_route.end_time

    end = t
    if route.legs:
        dwell = [(0.0, route.legs[0].depart)]
        for k in range(1, len(route.legs)):
            dwell.append((route.legs[k - 1].arrive, route.legs[k].depart))
        dwell.append((route.legs[-1].arrive, end))
    else:
        dwell = [(0.0, end)]
    route.stop_dwell = dwell
    uav.dropped.sort()

    visits = _ugv_visits(s, route, by_ugv)
    return CooperativePlan(
        ugv_route=route,
        uav_route=uav,
        outer_method=cover.method,
        cover_used=cover,
        metrics=compute_metrics(s, route, uav, visits, end),
        orientation=orientation,
        ugv_visits=visits,
        subproblems=records,
    )


def _rank(p: CooperativePlan):
    idx = p.cover_used.optimum_index if p.cover_used else 0
    return (p.has_drops, round(p.total_time, 9), OUTER_ORDER.get(p.outer_method, 9), idx, p.orientation)


def plan(
    s: Scenario,
    outer: str = "both",
    cfg: SearchConfig | None = None,
    *,
    max_solutions: int = DEFAULT_MAX_SOLUTIONS,
    snap_tolerance: float = DEFAULT_SNAP_TOLERANCE,
    both_orientations: bool = True,
) -> list[CooperativePlan]:
    """One plan per (outer method, cover), best orientation kept, sorted best first."""
    if outer not in ("greedy", "exact", "both"):
        raise ValueError(f"unknown outer method {outer!r}")
    cfg = cfg or SearchConfig()
    cov = compute_coverage(s)
    covers: list[RefuelStopSet] = []
    if outer in ("greedy", "both"):
        covers.append(greedy_cover(cov, s.depot))
    if outer in ("exact", "both"):
        opt = exact_cover_all_optimal(cov, s.depot, max_solutions)
        if opt.cap_exceeded:
            log.warning("%d optimal covers exist; planning the first %d", opt.n_optima, len(opt))
        covers.extend(opt)

    # A greedy cover that equals an exact optimum is planned once and credited to both.
    found_by: dict[frozenset, list[str]] = {}
    unique: list[RefuelStopSet] = []
    for cover in sorted(covers, key=lambda c: OUTER_ORDER[c.method]):
        key = frozenset(cover.stops)
        if key not in found_by:
            found_by[key] = []
            unique.append(cover)
        if cover.method not in found_by[key]:
            found_by[key].append(cover.method)

    cache: dict = {}
    plans = []
    for cover in unique:
        fwd = route_ugv(s, cover)
        cands = [plan_route(s, fwd, cover, cfg, cov=cov, snap_tolerance=snap_tolerance, cache=cache)]
        if both_orientations and len(fwd.ordered_stops) > 3:
            rev = reversed_route(s, fwd)
            cands.append(
                plan_route(
                    s, rev, cover, cfg, cov=cov, snap_tolerance=snap_tolerance, orientation="reverse", cache=cache
                )
            )
        best = min(cands, key=_rank)
        best.found_by = sorted(found_by[frozenset(cover.stops)], key=OUTER_ORDER.get)
        plans.append(best)
    plans.sort(key=_rank)
    return plans


def ugv_only_baseline(s: Scenario) -> CooperativePlan:
    snapped = {mp.id: s.road.nearest_node(mp.position) for mp in s.mission_points}
    order = solve_tour(s.road, sorted(set(snapped.values())), s.depot)
    route = build_route(s, order)
    end = route.legs[-1].arrive if route.legs else 0.0
    route.stop_dwell = [(0.0, 0.0)] + [(leg.arrive, leg.arrive) for leg in route.legs]
    uav = UavRoute()
    visits = _ugv_visits(s, route, snapped)
    return CooperativePlan(
        ugv_route=route,
        uav_route=uav,
        outer_method="ugv_only",
        cover_used=None,
        metrics=compute_metrics(s, route, uav, visits, end),
        ugv_visits=visits,
    )


# --------------------------------------------------------------------------
# comparison


def improvement_pct(baseline: float, value: float) -> float:
    if baseline == 0:
        return 0.0
    return 100.0 * (baseline - value) / baseline


@dataclass
class ComparisonReport:
    rows: list[dict]

    FIELDS = (
        "plan",
        "outer_method",
        "total_time_s",
        "baseline_time_s",
        "time_improvement_pct",
        "total_energy_j",
        "baseline_energy_j",
        "energy_improvement_pct",
        "uav_travel_time_s",
        "uav_energy_j",
        "ugv_travel_time_s",
        "ugv_energy_j",
        "recharges_on_ugv",
        "recharges_at_depot",
        "uav_visits",
        "ugv_visits",
        "dropped",
    )


def compare(plans: list[CooperativePlan], baseline: CooperativePlan) -> ComparisonReport:
    if not plans:
        raise ValueError("compare needs at least one plan")
    b = baseline.metrics
    rows = []
    for k, p in enumerate(plans):
        m = p.metrics
        rows.append(
            {
                "plan": k,
                "outer_method": p.outer_method,
                "total_time_s": m.total_time,
                "baseline_time_s": b.total_time,
                "time_improvement_pct": improvement_pct(b.total_time, m.total_time),
                "total_energy_j": m.total_energy,
                "baseline_energy_j": b.total_energy,
                "energy_improvement_pct": improvement_pct(b.total_energy, m.total_energy),
                "uav_travel_time_s": m.uav.travel_time,
                "uav_energy_j": m.uav.energy,
                "ugv_travel_time_s": m.ugv.travel_time,
                "ugv_energy_j": m.ugv.energy,
                "recharges_on_ugv": m.recharges_on_ugv,
                "recharges_at_depot": m.recharges_at_depot,
                "uav_visits": m.uav.missions_visited,
                "ugv_visits": m.ugv.missions_visited,
                "dropped": m.dropped,
            }
        )
    return ComparisonReport(rows)


# --------------------------------------------------------------------------
# plan documents


def plans_to_document(
    s: Scenario, plans: list[CooperativePlan], baseline: CooperativePlan | None, config: dict
) -> dict:
    return {
        "schema": PLAN_SCHEMA,
        "config": config,
        "scenario": scenario_to_dict(s),
        "plans": [p.to_dict() for p in plans],
        "baseline": None if baseline is None else baseline.to_dict(),
    }


def dump_plans(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"
