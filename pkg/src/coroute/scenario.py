"""Problem instance model: mission points, road network, vehicle parameters.

Scenarios are read from a JSON document (see ``docs/scenario_format.md``),
validated eagerly, and treated as immutable afterwards.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

GEOM_TOL = 1e-9
COVERAGE_SAFETY = 0.9
DEFAULT_BUFFER_S = 2.0
MAX_DRAWS = 1000


class ParseError(ValueError):
    """The scenario document is not well-formed."""


class ValidationError(ValueError):
    """The scenario document parsed but violates an invariant."""


class NoPath(LookupError):
    pass


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def dist(self, other: Point2D) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class MissionPoint:
    id: int
    position: Point2D


@dataclass(frozen=True)
class Recharge:
    """Recharge model: ``rate_w is None`` means instantaneous."""

    rate_w: float | None = None

    @property
    def instant(self) -> bool:
        return self.rate_w is None

    def duration(self, amount_j: float) -> float:
        return 0.0 if self.rate_w is None else amount_j / self.rate_w


@dataclass(frozen=True)
class VehicleParams:
    speed: float
    fuel_capacity: float
    cruise_power: float
    recharge: Recharge = field(default_factory=Recharge)

    @property
    def endurance(self) -> float:
        """Seconds of powered operation on one full charge."""
        return self.fuel_capacity / self.cruise_power


@dataclass(frozen=True)
class RoadNetwork:
    nodes: dict[int, Point2D]
    edges: tuple[tuple[int, int, float], ...]
    depot: int

    @cached_property
    def adjacency(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {n: [] for n in self.nodes}
        for u, v, length in self.edges:
            adj[u].append((v, length))
            adj[v].append((u, length))
        for nbrs in adj.values():
            nbrs.sort()
        return adj

    @cached_property
    def _sp_cache(self) -> dict[int, dict[int, tuple[float, tuple[int, ...]]]]:
        return {}

    def shortest_tree(self, source: int) -> dict[int, tuple[float, tuple[int, ...]]]:
        """Dijkstra from ``source``; ties resolved toward the lexicographically smallest path."""
        cached = self._sp_cache.get(source)
        if cached is not None:
            return cached
        best: dict[int, tuple[float, tuple[int, ...]]] = {source: (0.0, (source,))}
        heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (source,))]
        done: set[int] = set()
        while heap:
            d, path = heapq.heappop(heap)
            u = path[-1]
            if u in done or best[u][1] != path:
                continue
            done.add(u)
            for v, length in self.adjacency[u]:
                if v in done:
                    continue
                nd = d + length
                npath = path + (v,)
                cur = best.get(v)
                if (
                    cur is None
                    or nd < cur[0] - GEOM_TOL
                    or (abs(nd - cur[0]) <= GEOM_TOL and npath < cur[1])
                ):
                    best[v] = (nd, npath)
                    heapq.heappush(heap, (nd, npath))
        self._sp_cache[source] = best
        return best

    def is_connected(self) -> bool:
        return len(self.shortest_tree(self.depot)) == len(self.nodes)

    def nearest_node(self, p: Point2D) -> int:
        return min(self.nodes, key=lambda n: (self.nodes[n].dist(p), n))


@dataclass(frozen=True)
class Scenario:
    mission_points: tuple[MissionPoint, ...]
    road: RoadNetwork
    uav: VehicleParams
    ugv: VehicleParams
    candidate_stops: tuple[int, ...]
    coverage_radius: float | None = None
    takeoff_buffer: float = DEFAULT_BUFFER_S
    landing_buffer: float = DEFAULT_BUFFER_S

    @property
    def depot(self) -> int:
        return self.road.depot

    def point(self, pid: int) -> Point2D:
        return self.mission_points[pid].position

    def node(self, nid: int) -> Point2D:
        return self.road.nodes[nid]

    @property
    def radius(self) -> float:
        if self.coverage_radius is not None:
            return self.coverage_radius
        return default_coverage_radius(self.uav, self.takeoff_buffer, self.landing_buffer)


@dataclass(frozen=True)
class CoverageMatrix:
    stops: tuple[int, ...]
    points: tuple[int, ...]
    covers: tuple[tuple[bool, ...], ...]  # [stop][point]
    radius_used: float

    def covered_by(self, stop: int) -> frozenset[int]:
        row = self.covers[self.stops.index(stop)]
        return frozenset(p for p, c in zip(self.points, row) if c)

    def stops_covering(self, pid: int) -> list[int]:
        j = self.points.index(pid)
        return [s for s, row in zip(self.stops, self.covers) if row[j]]


def default_coverage_radius(uav: VehicleParams, takeoff: float, landing: float) -> float:
    # out-and-back sortie incl. both buffers must fit in the safety-scaled endurance
    usable = COVERAGE_SAFETY * uav.endurance - takeoff - landing
    return max(0.0, 0.5 * uav.speed * usable)


def shortest_path(road: RoadNetwork, a: int, b: int) -> tuple[list[int], float]:
    if a not in road.nodes or b not in road.nodes:
        raise KeyError(f"unknown node {a if a not in road.nodes else b}")
    hit = road.shortest_tree(a).get(b)
    if hit is None:
        raise NoPath(f"no path {a} -> {b}")
    return list(hit[1]), hit[0]


def path_length(road: RoadNetwork, a: int, b: int) -> float:
    return shortest_path(road, a, b)[1]


def compute_coverage(s: Scenario) -> CoverageMatrix:
    r = s.radius
    covers = tuple(
        tuple(s.node(st).dist(mp.position) <= r + GEOM_TOL for mp in s.mission_points)
        for st in s.candidate_stops
    )
    return CoverageMatrix(
        stops=tuple(s.candidate_stops),
        points=tuple(mp.id for mp in s.mission_points),
        covers=covers,
        radius_used=r,
    )


# --------------------------------------------------------------------------
# profiles

PAPER_UAV = VehicleParams(speed=10.0, fuel_capacity=287.7e3, cruise_power=197.744)
PAPER_UGV = VehicleParams(speed=4.0, fuel_capacity=25.01e6, cruise_power=1732.5)
# 50 s endurance; absolute power values are placeholders for a small quadrotor / rover
LAB_UAV = VehicleParams(speed=0.20, fuel_capacity=500.0, cruise_power=10.0)
LAB_UGV = VehicleParams(speed=0.15, fuel_capacity=2.0e5, cruise_power=20.0)

PROFILES: dict[str, tuple[VehicleParams, VehicleParams]] = {
    "paper": (PAPER_UAV, PAPER_UGV),
    "lab": (LAB_UAV, LAB_UGV),
}


def with_profile(s: Scenario, profile: str) -> Scenario:
    """Return ``s`` with vehicle parameters replaced by a named profile.

    ``custom`` leaves the scenario untouched.
    """
    if profile == "custom":
        return s
    uav, ugv = PROFILES[profile]
    out = Scenario(
        mission_points=s.mission_points,
        road=s.road,
        uav=uav,
        ugv=ugv,
        candidate_stops=s.candidate_stops,
        coverage_radius=s.coverage_radius,
        takeoff_buffer=s.takeoff_buffer,
        landing_buffer=s.landing_buffer,
    )
    validate(out)
    return out


# --------------------------------------------------------------------------
# file format

_TOP_KEYS = {
    "mission_points",
    "road",
    "uav",
    "ugv",
    "candidate_stops",
    "coverage_radius_m",
    "takeoff_buffer_s",
    "landing_buffer_s",
}
_REQUIRED_TOP = {"mission_points", "road", "uav", "ugv"}
_VEHICLE_KEYS = {"speed_mps", "fuel_capacity_j", "cruise_power_w", "recharge"}


def _num(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _int(v: Any, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}: expected an integer, got {v!r}")
    return v


def _obj(v: Any, where: str, allowed: set[str], required: set[str]) -> dict:
    if not isinstance(v, dict):
        raise ParseError(f"{where}: expected an object")
    unknown = sorted(set(v) - allowed)
    if unknown:
        raise ParseError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = sorted(required - set(v))
    if missing:
        raise ParseError(f"{where}: missing key(s) {', '.join(missing)}")
    return v


def _list(v: Any, where: str) -> list:
    if not isinstance(v, list):
        raise ParseError(f"{where}: expected a list")
    return v


def _vehicle(raw: Any, where: str) -> VehicleParams:
    d = _obj(raw, where, _VEHICLE_KEYS, _VEHICLE_KEYS - {"recharge"})
    rech = d.get("recharge", "instant")
    if rech == "instant":
        recharge = Recharge()
    elif isinstance(rech, dict) and set(rech) == {"linear"}:
        recharge = Recharge(rate_w=_num(rech["linear"], f"{where}.recharge.linear"))
    else:
        raise ParseError(f"{where}.recharge: expected \"instant\" or {{\"linear\": rate_w}}")
    return VehicleParams(
        speed=_num(d["speed_mps"], f"{where}.speed_mps"),
        fuel_capacity=_num(d["fuel_capacity_j"], f"{where}.fuel_capacity_j"),
        cruise_power=_num(d["cruise_power_w"], f"{where}.cruise_power_w"),
        recharge=recharge,
    )


def _xy(raw: Any, where: str) -> tuple[int, Point2D]:
    d = _obj(raw, where, {"id", "x", "y"}, {"id", "x", "y"})
    return _int(d["id"], f"{where}.id"), Point2D(_num(d["x"], f"{where}.x"), _num(d["y"], f"{where}.y"))


def scenario_from_dict(doc: Any) -> Scenario:
    d = _obj(doc, "scenario", _TOP_KEYS, _REQUIRED_TOP)
    mps = []
    for i, raw in enumerate(_list(d["mission_points"], "mission_points")):
        pid, pos = _xy(raw, f"mission_points[{i}]")
        mps.append(MissionPoint(pid, pos))

    road_raw = _obj(d["road"], "road", {"nodes", "edges", "depot"}, {"nodes", "edges", "depot"})
    nodes: dict[int, Point2D] = {}
    for i, raw in enumerate(_list(road_raw["nodes"], "road.nodes")):
        nid, pos = _xy(raw, f"road.nodes[{i}]")
        if nid in nodes:
            raise ValidationError(f"duplicate road node id {nid}")
        nodes[nid] = pos
    edges = []
    for i, e in enumerate(_list(road_raw["edges"], "road.edges")):
        if not isinstance(e, list) or len(e) != 3:
            raise ParseError(f"road.edges[{i}]: expected [u, v, length]")
        edges.append(
            (_int(e[0], f"road.edges[{i}][0]"), _int(e[1], f"road.edges[{i}][1]"), _num(e[2], f"road.edges[{i}][2]"))
        )
    depot = _int(road_raw["depot"], "road.depot")

    if "candidate_stops" in d:
        stops = tuple(_int(v, "candidate_stops[]") for v in _list(d["candidate_stops"], "candidate_stops"))
    else:
        stops = tuple(sorted(nodes))
    radius = None
    if d.get("coverage_radius_m") is not None:
        radius = _num(d["coverage_radius_m"], "coverage_radius_m")

    s = Scenario(
        mission_points=tuple(sorted(mps, key=lambda m: m.id)),
        road=RoadNetwork(nodes=nodes, edges=tuple(edges), depot=depot),
        uav=_vehicle(d["uav"], "uav"),
        ugv=_vehicle(d["ugv"], "ugv"),
        candidate_stops=stops,
        coverage_radius=radius,
        takeoff_buffer=_num(d.get("takeoff_buffer_s", DEFAULT_BUFFER_S), "takeoff_buffer_s"),
        landing_buffer=_num(d.get("landing_buffer_s", DEFAULT_BUFFER_S), "landing_buffer_s"),
    )
    validate(s)
    return s


def load_scenario(raw: bytes | str) -> Scenario:
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc)) from exc
    return scenario_from_dict(doc)


def validate(s: Scenario) -> None:
    """Raise ValidationError naming the first violated invariant."""
    ids = [m.id for m in s.mission_points]
    if ids != list(range(len(ids))):
        raise ValidationError("mission point ids must be unique and dense 0..n-1")
    for m in s.mission_points:
        if not (math.isfinite(m.position.x) and math.isfinite(m.position.y)):
            raise ValidationError(f"non-finite coordinates for mission point {m.id}")
    road = s.road
    for nid, p in road.nodes.items():
        if not (math.isfinite(p.x) and math.isfinite(p.y)):
            raise ValidationError(f"non-finite coordinates for road node {nid}")
    if road.depot not in road.nodes:
        raise ValidationError(f"depot {road.depot} is not a road node")
    for u, v, length in road.edges:
        if u not in road.nodes or v not in road.nodes:
            raise ValidationError(f"edge ({u}, {v}) references an unknown node")
        if not math.isfinite(length) or length < road.nodes[u].dist(road.nodes[v]) - GEOM_TOL:
            raise ValidationError(f"edge ({u}, {v}) shorter than the straight-line distance")
    if not road.is_connected():
        raise ValidationError("road network is disconnected")
    for name, veh in (("uav", s.uav), ("ugv", s.ugv)):
        for attr in ("speed", "fuel_capacity", "cruise_power"):
            val = getattr(veh, attr)
            if not (math.isfinite(val) and val > 0):
                raise ValidationError(f"nonpositive parameter {name}.{attr}")
        if veh.recharge.rate_w is not None and not veh.recharge.rate_w > 0:
            raise ValidationError(f"nonpositive parameter {name}.recharge.linear")
    for attr in ("takeoff_buffer", "landing_buffer"):
        if not getattr(s, attr) >= 0:
            raise ValidationError(f"negative {attr}")
    if s.coverage_radius is not None and not s.coverage_radius > 0:
        raise ValidationError("nonpositive parameter coverage_radius")
    if len(set(s.candidate_stops)) != len(s.candidate_stops):
        raise ValidationError("duplicate candidate stop")
    for st in s.candidate_stops:
        if st not in road.nodes:
            raise ValidationError(f"candidate stop {st} is not a road node")
    if s.depot not in s.candidate_stops:
        raise ValidationError("depot missing from candidate stops")
    r = s.radius
    for m in s.mission_points:
        if not any(s.node(st).dist(m.position) <= r + GEOM_TOL for st in s.candidate_stops):
            raise ValidationError(f"uncovered mission point {m.id}")


def _vehicle_dict(v: VehicleParams) -> dict:
    return {
        "speed_mps": v.speed,
        "fuel_capacity_j": v.fuel_capacity,
        "cruise_power_w": v.cruise_power,
        "recharge": "instant" if v.recharge.instant else {"linear": v.recharge.rate_w},
    }


def scenario_to_dict(s: Scenario) -> dict:
    doc: dict[str, Any] = {
        "mission_points": [{"id": m.id, "x": m.position.x, "y": m.position.y} for m in s.mission_points],
        "road": {
            "nodes": [{"id": n, "x": p.x, "y": p.y} for n, p in sorted(s.road.nodes.items())],
            "edges": [[u, v, length] for u, v, length in s.road.edges],
            "depot": s.road.depot,
        },
        "uav": _vehicle_dict(s.uav),
        "ugv": _vehicle_dict(s.ugv),
        "candidate_stops": list(s.candidate_stops),
        "takeoff_buffer_s": s.takeoff_buffer,
        "landing_buffer_s": s.landing_buffer,
    }
    if s.coverage_radius is not None:
        doc["coverage_radius_m"] = s.coverage_radius
    return doc


def dump_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


# --------------------------------------------------------------------------
# random instances


def generate_random_scenario(
    seed: int,
    n_points: int,
    area: float,
    grid: int,
    profile: str = "paper",
    detour: float = 0.0,
) -> Scenario:
    """Grid road over ``[0, area]^2`` with uniformly scattered mission points.

    Every road node is a candidate stop and the depot is node 0 at the
    origin. Points outside every node's coverage radius are redrawn. ``detour`` > 0 stretches each edge by a random factor in
    ``[1, 1 + detour]``.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if grid < 2:
        raise ValueError("grid must be >= 2")
    if not area > 0:
        raise ValueError("area must be positive")
    rng = random.Random(seed)
    step = area / (grid - 1)
    nodes = {r * grid + c: Point2D(c * step, r * step) for r in range(grid) for c in range(grid)}
    edges = []
    for r in range(grid):
        for c in range(grid):
            n = r * grid + c
            for m in ((n + 1) if c + 1 < grid else None, (n + grid) if r + 1 < grid else None):
                if m is None:
                    continue
                f = 1.0 + (rng.uniform(0.0, detour) if detour > 0 else 0.0)
                edges.append((n, m, nodes[n].dist(nodes[m]) * f))
    uav, ugv = PROFILES[profile]
    r = default_coverage_radius(uav, DEFAULT_BUFFER_S, DEFAULT_BUFFER_S)
    points = []
    for i in range(n_points):
        for _ in range(MAX_DRAWS):
            p = Point2D(rng.uniform(0.0, area), rng.uniform(0.0, area))
            if any(q.dist(p) <= r for q in nodes.values()):
                break
        else:
            raise ValueError(f"grid step {step:g} m is too coarse for coverage radius {r:g} m")
        points.append(MissionPoint(i, p))
    points = tuple(points)
    s = Scenario(
        mission_points=points,
        road=RoadNetwork(nodes=nodes, edges=tuple(edges), depot=0),
        uav=uav,
        ugv=ugv,
        candidate_stops=tuple(sorted(nodes)),
    )
    validate(s)
    return s
