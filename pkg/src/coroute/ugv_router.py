"""Closed UGV tour over the selected refuel stops on the road metric."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .scenario import GEOM_TOL, RoadNetwork, Scenario, shortest_path
from .setcover import RefuelStopSet

EXACT_MAX_STOPS = 12


@dataclass
class UgvLeg:
    path: list[int]
    length: float
    depart: float
    arrive: float

    def to_dict(self) -> dict:
        return {"path": list(self.path), "length": self.length, "depart": self.depart, "arrive": self.arrive}

    @classmethod
    def from_dict(cls, d: dict) -> UgvLeg:
        return cls(list(d["path"]), d["length"], d["depart"], d["arrive"])


@dataclass
class UgvRoute:
    ordered_stops: list[int]
    legs: list[UgvLeg]
    # (arrive, depart) at each entry of ordered_stops
    stop_dwell: list[tuple[float, float]] = field(default_factory=list)

    @property
    def length(self) -> float:
        return sum(leg.length for leg in self.legs)

    @property
    def end_time(self) -> float:
        if self.stop_dwell:
            return self.stop_dwell[-1][1]
        return self.legs[-1].arrive if self.legs else 0.0

    def to_dict(self) -> dict:
        return {
            "ordered_stops": list(self.ordered_stops),
            "legs": [leg.to_dict() for leg in self.legs],
            "stop_dwell": [list(iv) for iv in self.stop_dwell],
        }

    @classmethod
    def from_dict(cls, d: dict) -> UgvRoute:
        return cls(
            list(d["ordered_stops"]),
            [UgvLeg.from_dict(x) for x in d["legs"]],
            [tuple(iv) for iv in d["stop_dwell"]],
        )


def distance_table(road: RoadNetwork, nodes: list[int]) -> list[list[float]]:
    return [[shortest_path(road, a, b)[1] for b in nodes] for a in nodes]


def tour_length(dist: list[list[float]], order: list[int]) -> float:
    return sum(dist[order[k]][order[k + 1]] for k in range(len(order) - 1))


def _better(c: float, path: tuple, cur) -> bool:
    if cur is None:
        return True
    return c < cur[0] - GEOM_TOL or (abs(c - cur[0]) <= GEOM_TOL and path < cur[1])


def held_karp(dist: list[list[float]], labels: list[int]) -> list[int]:
    """Optimal closed tour from index 0; ties go to the smallest label sequence.

    Returns indices into ``dist``, starting and ending at 0.
    """
    n = len(dist)
    if n == 1:
        return [0]
    if n == 2:
        return [0, 1, 0]
    # state: (mask over 1..n-1, last) -> (cost, label path, index path)
    table: dict[tuple[int, int], tuple[float, tuple, tuple]] = {}
    for k in range(1, n):
        table[(1 << k, k)] = (dist[0][k], (labels[0], labels[k]), (0, k))
    full = (1 << n) - 2
    for mask in sorted(range(2, full + 1, 2), key=lambda m: bin(m).count("1")):
        if bin(mask).count("1") < 2:
            continue
        for last in range(1, n):
            if not mask & (1 << last):
                continue
            prev_mask = mask ^ (1 << last)
            cur = None
            for prev in range(1, n):
                hit = table.get((prev_mask, prev))
                if hit is None:
                    continue
                c = hit[0] + dist[prev][last]
                lp = hit[1] + (labels[last],)
                if _better(c, lp, cur):
                    cur = (c, lp, hit[2] + (last,))
            table[(mask, last)] = cur
    best = None
    for last in range(1, n):
        c, lp, ip = table[(full, last)]
        cand = (c + dist[last][0], lp + (labels[0],), ip + (0,))
        if _better(cand[0], cand[1], best):
            best = cand
    return list(best[2])


def nearest_neighbor(dist: list[list[float]], labels: list[int]) -> list[int]:
    n = len(dist)
    order = [0]
    left = set(range(1, n))
    while left:
        cur = order[-1]
        nxt = min(left, key=lambda j: (dist[cur][j], labels[j]))
        order.append(nxt)
        left.remove(nxt)
    order.append(0)
    return order


def two_opt(dist: list[list[float]], order: list[int]) -> list[int]:
    """First-improvement 2-opt on a closed tour until no improving exchange remains."""
    order = list(order)
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 2):
            for j in range(i + 1, n - 1):
                a, b, c, d = order[i - 1], order[i], order[j], order[j + 1]
                delta = dist[a][c] + dist[b][d] - dist[a][b] - dist[c][d]
                if delta < -GEOM_TOL:
                    order[i : j + 1] = reversed(order[i : j + 1])
                    improved = True
    return order


def solve_tour(road: RoadNetwork, nodes: list[int], depot: int) -> list[int]:
    """Closed tour over ``nodes`` (depot added if absent) as a node-id list."""
    labels = [depot] + sorted(set(nodes) - {depot})
    dist = distance_table(road, labels)
    if len(labels) <= EXACT_MAX_STOPS:
        idx = held_karp(dist, labels)
    else:
        idx = two_opt(dist, nearest_neighbor(dist, labels))
    return [labels[i] for i in idx]


def build_route(s: Scenario, order: list[int]) -> UgvRoute:
    """Zero-dwell schedule for a closed node order, departing at t = 0."""
    legs = []
    t = 0.0
    dwell = [(0.0, 0.0)]
    for a, b in zip(order, order[1:]):
        path, length = shortest_path(s.road, a, b)
        arrive = t + length / s.ugv.speed
        legs.append(UgvLeg(path, length, t, arrive))
        dwell.append((arrive, arrive))
        t = arrive
    return UgvRoute(list(order), legs, dwell)


def route_ugv(s: Scenario, stops: RefuelStopSet) -> UgvRoute:
    return build_route(s, solve_tour(s.road, list(stops.stops), s.depot))


def reversed_route(s: Scenario, route: UgvRoute) -> UgvRoute:
    return build_route(s, list(reversed(route.ordered_stops)))


def with_dwell(route: UgvRoute, dwell: list[tuple[float, float]]) -> UgvRoute:
    return replace(route, stop_dwell=list(dwell))
