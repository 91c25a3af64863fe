"""Fixed-timestep replay of a cooperative plan with independent fuel bookkeeping.

Each vehicle executes its commanded task list (departure and launch times
and commanded touchdowns come from the plan; motion comes from geometry
and speed). Within a step, task boundaries are handled exactly, so fuel
integrates airborne/moving time without quantisation error. Constraint
checks run against the simulated state, not the planner's arithmetic.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .pipeline import CooperativePlan
from .scenario import Point2D, Scenario

COLOCATION_TOL = 0.05
TIME_TOL = 1e-6
TRACE_FIELDS = ("time", "vehicle", "x", "y", "fuel", "task")


@dataclass
class VehicleState:
    task: str
    fuel: float
    position: Point2D
    time: float


@dataclass
class Violation:
    time: float
    kind: str  # fuel | endurance | co-location | unvisited
    detail: str

    def to_dict(self) -> dict:
        return {"time": self.time, "kind": self.kind, "detail": self.detail}


@dataclass
class SimReport:
    ok: bool
    violations: list[Violation]
    max_sortie_duration: float
    min_fuel: float
    visit_coverage: dict[int, float | None]
    time_mismatch: float
    total_time: float
    ugv_min_fuel: float = 0.0
    sortie_durations: list[float] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)
    trace: list[tuple] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [v.to_dict() for v in self.violations],
            "max_sortie_duration": self.max_sortie_duration,
            "min_fuel": self.min_fuel,
            "ugv_min_fuel": self.ugv_min_fuel,
            "visit_coverage": {str(k): v for k, v in sorted(self.visit_coverage.items())},
            "time_mismatch": self.time_mismatch,
            "total_time": self.total_time,
            "sortie_durations": self.sortie_durations,
            "dropped": self.dropped,
        }


def trace_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_FIELDS)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


class _Agent:
    def __init__(self, name: str, pos: Point2D, fuel: float, power: float, label: str):
        self.name = name
        self.x, self.y = pos.x, pos.y
        self.t = 0.0
        self.fuel = fuel
        self.min_fuel = fuel
        self.power = power
        self.burning = False
        self.recharge_rate: float | None = None
        self.capacity = fuel
        self.label = label
        self.sortie_start = 0.0
        self.tasks: list[list] = []
        # (t, x, y, burning) at every motion/task boundary
        self.track: list[tuple[float, float, float, bool]] = [(0.0, pos.x, pos.y, False)]

    def _tick(self, tau: float, dx: float = 0.0, dy: float = 0.0, burn: bool | None = None):
        burn = self.burning if burn is None else burn
        if burn:
            self.fuel -= self.power * tau
            self.min_fuel = min(self.min_fuel, self.fuel)
        elif self.recharge_rate is not None and self.fuel < self.capacity:
            self.fuel = min(self.capacity, self.fuel + self.recharge_rate * tau)
        self.t += tau
        self.x += dx
        self.y += dy
        self.track.append((self.t, self.x, self.y, self.burning))

    def advance(self, until: float, follow=None):
        while self.tasks:
            task = self.tasks[0]
            kind = task[0]
            if kind == "event":
                self.tasks.pop(0)
                task[1](self)
                continue
            if self.t >= until - 1e-12:
                break
            budget = until - self.t
            if kind == "wait":  # absolute time
                self.label = task[2]
                need = task[1] - self.t
                if need <= 0:
                    self.tasks.pop(0)
                    continue
                tau = min(budget, need)
                self._tick(tau)
                if tau >= need:
                    self.tasks.pop(0)
            elif kind == "hold":  # relative duration, mutable remainder
                self.label = task[2]
                tau = min(budget, task[1])
                self._tick(tau)
                task[1] -= tau
                if task[1] <= 1e-12:
                    self.tasks.pop(0)
            elif kind == "move":
                _, target, speed, label, on_arrive = task
                self.label = label
                dist = math.hypot(target.x - self.x, target.y - self.y)
                need = dist / speed
                if need <= budget:
                    self._tick(need, target.x - self.x, target.y - self.y)
                    self.x, self.y = target.x, target.y
                    self.tasks.pop(0)
                    if on_arrive is not None:
                        on_arrive(self)
                else:
                    f = budget * speed / dist
                    self._tick(budget, (target.x - self.x) * f, (target.y - self.y) * f)
            elif kind == "follow":  # ride along with the other vehicle until an absolute time
                self.label = "recharging" if self.fuel < self.capacity else task[2]
                need = task[1] - self.t
                if need <= 0:
                    self.tasks.pop(0)
                    continue
                tau = min(budget, need)
                p = follow(self.t + tau)
                self._tick(tau, p.x - self.x, p.y - self.y)
                if tau >= need:
                    self.tasks.pop(0)
            else:
                raise ValueError(f"unknown task {kind}")

    def position_at(self, t: float) -> Point2D:
        tr = self.track
        if t <= tr[0][0]:
            return Point2D(tr[0][1], tr[0][2])
        lo, hi = 0, len(tr) - 1
        if t >= tr[hi][0]:
            return Point2D(tr[hi][1], tr[hi][2])
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if tr[mid][0] <= t:
                lo = mid
            else:
                hi = mid
        t0, x0, y0, _ = tr[lo]
        t1, x1, y1, _ = tr[hi]
        if t1 - t0 <= 0:
            return Point2D(x1, y1)
        f = (t - t0) / (t1 - t0)
        return Point2D(x0 + f * (x1 - x0), y0 + f * (y1 - y0))

    def state(self) -> VehicleState:
        return VehicleState(self.label, self.fuel, Point2D(self.x, self.y), self.t)


def _closest_approach(track, target: Point2D, tol: float, airborne_only: bool):
    """First time the polyline passes within ``tol`` of ``target`` (None if never)."""
    for (t0, x0, y0, _), (t1, x1, y1, b1) in zip(track, track[1:]):
        if airborne_only and not b1:
            continue
        dx, dy = x1 - x0, y1 - y0
        seg2 = dx * dx + dy * dy
        if seg2 == 0:
            if math.hypot(target.x - x0, target.y - y0) <= tol:
                return t0
            continue
        # earliest parameter along the segment within tol of target
        fx, fy = x0 - target.x, y0 - target.y
        b = 2 * (fx * dx + fy * dy)
        c = fx * fx + fy * fy - tol * tol
        disc = b * b - 4 * seg2 * c
        if disc < 0:
            continue
        root = (-b - math.sqrt(disc)) / (2 * seg2)
        hi_root = (-b + math.sqrt(disc)) / (2 * seg2)
        if hi_root < 0 or root > 1:
            continue
        return t0 + max(0.0, root) * (t1 - t0)
    return None


def simulate(plan: CooperativePlan, s: Scenario, dt: float = 0.1, record_trace: bool = False) -> SimReport:
    if not dt > 0:
        raise ValueError("dt must be positive")
    violations: list[Violation] = []
    mismatch = [0.0]

    def note(planned: float, actual: float):
        mismatch[0] = max(mismatch[0], abs(planned - actual))

    depot = s.node(s.depot)
    ugv = _Agent("ugv", depot, s.ugv.fuel_capacity, s.ugv.cruise_power, "dwell")
    uav = _Agent("uav", depot, s.uav.fuel_capacity, s.uav.cruise_power, "idle")
    uav.recharge_rate = s.uav.recharge.rate_w

    # UGV commanded tasks
    ugv_arrivals: list[float] = []
    route = plan.ugv_route
    for leg in route.legs:
        ugv.tasks.append(["wait", leg.depart, "dwell"])
        ugv.tasks.append(["event", lambda a: setattr(a, "burning", True)])
        for k, node in enumerate(leg.path[1:], start=1):
            last = k == len(leg.path) - 1

            def arrive(a, leg=leg, last=last):
                if last:
                    a.burning = False
                    note(leg.arrive, a.t)
                    ugv_arrivals.append(a.t)

            ugv.tasks.append(["move", s.node(node), s.ugv.speed, "transit", arrive])
    ugv.tasks.append(["event", lambda a: setattr(a, "burning", False)])

    # UAV commanded tasks
    endurance = s.uav.endurance
    sortie_durations: list[float] = []
    landings: list[float] = []
    flags = {"fuel": False}

    def colocated(a: _Agent, node: int, what: str):
        up = ugv.position_at(a.t)
        target = s.node(node)
        d_ugv = math.hypot(up.x - target.x, up.y - target.y)
        d_uav = math.hypot(a.x - up.x, a.y - up.y)
        if d_ugv > COLOCATION_TOL or d_uav > COLOCATION_TOL:
            violations.append(
                Violation(a.t, "co-location", f"{what} at node {node}: UGV {d_ugv:.3f} m from node, UAV {d_uav:.3f} m from UGV")
            )

    def launcher(so):
        def launch(a: _Agent):
            colocated(a, so.launch_node, "launch")
            note(so.launch_time, a.t)
            a.burning = True
            a.sortie_start = a.t
            a.label = "transit"

        return launch

    def toucher(so):
        def touchdown(a: _Agent):
            note(so.land_time, a.t)
            colocated(a, so.land_node, "recharge")
            dur = a.t - a.sortie_start
            sortie_durations.append(dur)
            if dur > endurance + TIME_TOL:
                violations.append(Violation(a.t, "endurance", f"sortie of {dur:.3f} s exceeds {endurance:.3f} s"))
            if a.fuel < -TIME_TOL * a.capacity and not flags["fuel"]:
                flags["fuel"] = True
                violations.append(Violation(a.t, "fuel", f"UAV fuel fell to {a.min_fuel:.3f} J"))
            a.burning = False
            if a.recharge_rate is None:
                a.fuel = a.capacity
                landings.append(a.t)
            else:
                landings.append(a.t + (a.capacity - a.fuel) / a.recharge_rate)
            a.label = "recharging"

        return touchdown

    for so in sorted(plan.uav_route.sorties, key=lambda x: x.launch_time):
        uav.tasks.append(["follow", so.launch_time, "idle"])
        uav.tasks.append(["event", launcher(so)])
        uav.tasks.append(["hold", s.takeoff_buffer, "transit"])
        for pid, planned in zip(so.visits, so.visit_times):
            uav.tasks.append(["move", s.point(pid), s.uav.speed, "transit", lambda a, pl=planned: note(pl, a.t)])
        uav.tasks.append(["move", s.node(so.land_node), s.uav.speed, "transit", None])
        uav.tasks.append(["wait", so.land_time - s.landing_buffer, "hover"])
        uav.tasks.append(["hold", s.landing_buffer, "transit"])
        uav.tasks.append(["event", toucher(so)])

    trace: list[tuple] = []

    def snap(agent: _Agent):
        if record_trace:
            trace.append((round(agent.t, 9), agent.name, agent.x, agent.y, agent.fuel, agent.label))

    if record_trace:
        snap(ugv)
        snap(uav)
    k = 0
    while ugv.tasks or uav.tasks:
        k += 1
        until = k * dt
        ugv.advance(until)
        if not ugv.tasks:
            ugv.label = "idle"
            if ugv.t < until:
                ugv._tick(until - ugv.t)
        uav.advance(until, follow=ugv.position_at)
        if not uav.tasks and uav.t < until:
            p = ugv.position_at(until)
            uav._tick(until - uav.t, p.x - uav.x, p.y - uav.y)
            uav.label = "idle" if uav.recharge_rate is None or uav.fuel >= uav.capacity else "recharging"
        snap(ugv)
        snap(uav)

    # mission ends when the UGV is home and the UAV has landed and topped up
    end = max([0.0] + ugv_arrivals[-1:] + landings[-1:])
    note(plan.metrics.total_time, end)

    # visits
    tol_uav = max(COLOCATION_TOL, s.uav.speed * dt)
    tol_ugv = max(COLOCATION_TOL, s.ugv.speed * dt)
    coverage: dict[int, float | None] = {}
    for mp in s.mission_points:
        coverage[mp.id] = _closest_approach(uav.track, mp.position, tol_uav, airborne_only=True)
    for v in plan.ugv_visits:
        hit = _closest_approach(ugv.track, s.node(v.node), tol_ugv, airborne_only=False)
        if hit is not None and (coverage[v.point] is None or hit < coverage[v.point]):
            coverage[v.point] = hit
    dropped = sorted(plan.uav_route.dropped)
    for pid, when in coverage.items():
        if when is None and pid not in dropped:
            violations.append(Violation(end, "unvisited", f"mission point {pid} never approached"))

    violations.sort(key=lambda v: (v.time, v.kind))
    return SimReport(
        ok=not violations,
        violations=violations,
        max_sortie_duration=max(sortie_durations, default=0.0),
        min_fuel=uav.min_fuel,
        visit_coverage=coverage,
        time_mismatch=mismatch[0],
        total_time=end,
        ugv_min_fuel=ugv.min_fuel,
        sortie_durations=sortie_durations,
        dropped=dropped,
        trace=trace,
    )

