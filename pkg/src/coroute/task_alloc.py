"""Split the mission into per-leg subproblems along the UGV tour."""

from __future__ import annotations

from dataclasses import dataclass, field

from .scenario import CoverageMatrix, Scenario
from .ugv_router import UgvRoute


class AllocationError(RuntimeError):
    pass


@dataclass
class SubProblem:
    index: int
    origin_stop: int
    dest_stop: int
    assigned_points: list[int]
    leg_index: int | None  # None for the degenerate single-stop tour
    ugv_points: list[int] = field(default_factory=list)  # handed to the UGV by the snap pre-pass

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "origin_stop": self.origin_stop,
            "dest_stop": self.dest_stop,
            "assigned_points": list(self.assigned_points),
            "leg_index": self.leg_index,
            "ugv_points": list(self.ugv_points),
        }


def label_points(s: Scenario, cov: CoverageMatrix, tour_stops: list[int]) -> dict[int, int]:
    """Nearest covering tour stop per mission point (Euclidean; ties to the earlier stop)."""
    labels = {}
    for mp in s.mission_points:
        covering = set(cov.stops_covering(mp.id))
        best = None
        for rank, stop in enumerate(tour_stops):
            if stop not in covering:
                continue
            key = (s.node(stop).dist(mp.position), rank)
            if best is None or key < best[0]:
                best = (key, stop)
        if best is None:
            raise AllocationError(f"mission point {mp.id} is not covered by any tour stop")
        labels[mp.id] = best[1]
    return labels


def allocate(s: Scenario, cov: CoverageMatrix, route: UgvRoute) -> list[SubProblem]:
    stops = route.ordered_stops
    if len(stops) > 1 and stops[-1] == stops[0]:
        tour_stops = stops[:-1]
    else:
        tour_stops = stops[:1]
    labels = label_points(s, cov, tour_stops)

    if not route.legs:
        pts = sorted(labels)
        return [SubProblem(0, stops[0], stops[0], pts, None)]

    by_stop: dict[int, list[int]] = {st: [] for st in tour_stops}
    for pid in sorted(labels):
        by_stop[labels[pid]].append(pid)

    subs = []
    depot = stops[0]
    for k, leg in enumerate(route.legs):
        origin, dest = stops[k], stops[k + 1]
        if k == 0:
            pts = by_stop[origin] + (by_stop[dest] if dest != depot else [])
        elif dest == depot:
            pts = []  # depot-labelled points were folded into the first subproblem
        else:
            pts = list(by_stop[dest])
        subs.append(SubProblem(k, origin, dest, sorted(pts), k))

    seen = sorted(p for sp in subs for p in sp.assigned_points)
    if seen != sorted(labels):
        raise AllocationError("allocation is not a partition of the mission points")
    return subs
