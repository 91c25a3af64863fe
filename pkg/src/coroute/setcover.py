"""Refuel-stop selection as minimum set cover.

Two solvers share one cost convention: the depot is always part of the
returned stop set (the UGV tour starts and ends there), but it only counts
toward the cover size when some mission point actually needs it. Under
that convention the exact problem is plain minimum set cover over all
candidate stops, the depot being one candidate among the rest.
"""

from __future__ import annotations

from dataclasses import dataclass

from .scenario import CoverageMatrix

DEFAULT_MAX_SOLUTIONS = 64


@dataclass(frozen=True)
class RefuelStopSet:
    stops: tuple[int, ...]
    method: str  # "greedy" | "exact"
    optimum_index: int = 0

    def to_dict(self) -> dict:
        return {"stops": list(self.stops), "method": self.method, "optimum_index": self.optimum_index}

    @classmethod
    def from_dict(cls, d: dict) -> RefuelStopSet:
        return cls(tuple(d["stops"]), d["method"], d["optimum_index"])


class OptimalCovers(list):
    """List of RefuelStopSet plus enumeration bookkeeping.

    ``cap_exceeded`` is set when more optima exist than were requested;
    ``n_optima`` then holds the true count.
    """

    def __init__(self, items=(), cap_exceeded: bool = False, n_optima: int = 0, size: int = 0):
        super().__init__(items)
        self.cap_exceeded = cap_exceeded
        self.n_optima = n_optima
        self.size = size


def _masks(cov: CoverageMatrix) -> dict[int, int]:
    out = {}
    for stop, row in zip(cov.stops, cov.covers):
        m = 0
        for j, c in enumerate(row):
            if c:
                m |= 1 << j
        out[stop] = m
    return out


def cover_size(cov: CoverageMatrix, stops, depot: int) -> int:
    """Size of a stop set under the depot-counts-only-if-needed convention."""
    masks = _masks(cov)
    full = (1 << len(cov.points)) - 1
    others = 0
    n_others = 0
    for s in set(stops):
        if s != depot:
            others |= masks[s]
            n_others += 1
    return n_others if others == full else n_others + 1


def is_cover(cov: CoverageMatrix, stops) -> bool:
    masks = _masks(cov)
    got = 0
    for s in stops:
        got |= masks[s]
    return got == (1 << len(cov.points)) - 1


def greedy_cover(cov: CoverageMatrix, depot: int) -> RefuelStopSet:
    masks = _masks(cov)
    full = (1 << len(cov.points)) - 1
    chosen = [depot]
    covered = masks.get(depot, 0)
    while covered != full:
        best, gain = None, 0
        for s in sorted(masks):
            if s in chosen:
                continue
            g = bin(masks[s] & ~covered).count("1")
            if g > gain:
                best, gain = s, g
        if best is None:
            raise ValueError("some mission point is not covered by any candidate stop")
        chosen.append(best)
        covered |= masks[best]
    return RefuelStopSet(tuple(chosen), "greedy", 0)


def exact_cover_all_optimal(
    cov: CoverageMatrix, depot: int, max_solutions: int = DEFAULT_MAX_SOLUTIONS
) -> OptimalCovers:
    """Every minimum-size cover (depot forced in), via include/exclude branch and bound.

    Candidates are branched in ascending id order, include first, so covers
    are discovered in lexicographic order of their sorted ids. Pruning is
    strict (``>``) so that ties survive.
    """
    if max_solutions < 1:
        raise ValueError("max_solutions must be >= 1")
    masks = _masks(cov)
    cands = sorted(masks)
    cmask = [masks[c] for c in cands]
    m = len(cands)
    full = (1 << len(cov.points)) - 1
    suffix = [0] * (m + 1)
    for i in range(m - 1, -1, -1):
        suffix[i] = suffix[i + 1] | cmask[i]
    if suffix[0] != full:
        raise ValueError("some mission point is not covered by any candidate stop")

    upper = cover_size(cov, greedy_cover(cov, depot).stops, depot)
    state = {"best": upper, "count": 0}
    found: list[tuple[int, ...]] = []
    chosen: list[int] = []

    def record():
        size = len(chosen)
        if size < state["best"]:
            state["best"] = size
            state["count"] = 0
            found.clear()
        state["count"] += 1
        if len(found) < max_solutions:
            found.append(tuple(chosen))

    def rec(i: int, covered: int):
        if covered == full:
            if len(chosen) <= state["best"]:
                record()
            return
        remaining = full & ~covered
        if remaining & ~suffix[i]:
            return
        k = bin(remaining).count("1")
        widest = max(bin(cmask[j] & remaining).count("1") for j in range(i, m))
        lower = -(-k // widest)
        if len(chosen) + lower > state["best"]:
            return
        if cmask[i] & remaining:
            chosen.append(cands[i])
            rec(i + 1, covered | cmask[i])
            chosen.pop()
        rec(i + 1, covered)

    rec(0, 0)

    sets = []
    for cover in found:
        others = sorted(c for c in cover if c != depot)
        sets.append(tuple([depot] + others))
    sets.sort(key=lambda st: sorted(st))
    out = OptimalCovers(
        [RefuelStopSet(st, "exact", k) for k, st in enumerate(sets)],
        cap_exceeded=state["count"] > max_solutions,
        n_optima=state["count"],
        size=state["best"],
    )
    return out
