"""Command-line front end: ``coroute {plan,validate,compare,gen}``.

Exit status: 0 success, 1 invalid scenario or failed validation, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .evrp import SearchConfig
from .pipeline import (
    ComparisonReport,
    CooperativePlan,
    compare,
    dump_plans,
    plan,
    plans_to_document,
    ugv_only_baseline,
)
from .scenario import (
    ParseError,
    ValidationError,
    dump_scenario,
    generate_random_scenario,
    load_scenario,
    scenario_from_dict,
    with_profile,
)
from .simulator import simulate, trace_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

METRICS_FIELDS = (
    "plan",
    "outer_method",
    "found_by",
    "optimum_index",
    "orientation",
    "stops",
    "total_time_s",
    "total_energy_j",
    "ugv_travel_time_s",
    "ugv_active_time_s",
    "ugv_energy_j",
    "ugv_missions_visited",
    "uav_travel_time_s",
    "uav_energy_j",
    "uav_missions_visited",
    "recharges_on_ugv",
    "recharges_at_depot",
    "dropped",
)

log = logging.getLogger("coroute")


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    command: str
    scenario_path: Path | None = None
    plan_path: Path | None = None
    outer: str = "both"
    seed: int = 0
    time_limit: float = 10.0
    output_dir: Path = Path(".")
    profile: str = "custom"
    dt: float = 0.1
    points: int = 12
    area: float = 4.0
    grid: int = 3


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return v


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in fields})


def metrics_rows(plans: list[CooperativePlan]) -> list[dict]:
    rows = []
    for k, p in enumerate(plans):
        m = p.metrics
        rows.append(
            {
                "plan": k,
                "outer_method": p.outer_method,
                "found_by": "+".join(p.found_by),
                "optimum_index": p.cover_used.optimum_index if p.cover_used else "",
                "orientation": p.orientation,
                "stops": " ".join(str(x) for x in p.ugv_route.ordered_stops),
                "total_time_s": m.total_time,
                "total_energy_j": m.total_energy,
                "ugv_travel_time_s": m.ugv.travel_time,
                "ugv_active_time_s": m.ugv.active_time,
                "ugv_energy_j": m.ugv.energy,
                "ugv_missions_visited": m.ugv.missions_visited,
                "uav_travel_time_s": m.uav.travel_time,
                "uav_energy_j": m.uav.energy,
                "uav_missions_visited": m.uav.missions_visited,
                "recharges_on_ugv": m.recharges_on_ugv,
                "recharges_at_depot": m.recharges_at_depot,
                "dropped": m.dropped,
            }
        )
    return rows


def routes_geojson(s, plans: list[CooperativePlan]) -> dict:
    """Planar-metre GeoJSON: UGV legs, UAV sorties, stops and recharge markers."""

    def xy(p):
        return [p.x, p.y]

    feats = []
    for mp in s.mission_points:
        feats.append(
            {
                "type": "Feature",
                "properties": {"kind": "mission_point", "id": mp.id},
                "geometry": {"type": "Point", "coordinates": xy(mp.position)},
            }
        )
    for k, p in enumerate(plans):
        for i, stop in enumerate(dict.fromkeys(p.ugv_route.ordered_stops)):
            feats.append(
                {
                    "type": "Feature",
                    "properties": {"kind": "refuel_stop", "plan": k, "node": stop, "depot": stop == s.depot, "order": i},
                    "geometry": {"type": "Point", "coordinates": xy(s.node(stop))},
                }
            )
        for i, leg in enumerate(p.ugv_route.legs):
            feats.append(
                {
                    "type": "Feature",
                    "properties": {"kind": "ugv_leg", "plan": k, "leg": i, "depart": leg.depart, "arrive": leg.arrive},
                    "geometry": {"type": "LineString", "coordinates": [xy(s.node(n)) for n in leg.path]},
                }
            )
        for i, so in enumerate(p.uav_route.sorties):
            coords = [xy(s.node(so.launch_node))] + [xy(s.point(v)) for v in so.visits] + [xy(s.node(so.land_node))]
            feats.append(
                {
                    "type": "Feature",
                    "properties": {
                        "kind": "uav_sortie",
                        "plan": k,
                        "sortie": i,
                        "launch_time": so.launch_time,
                        "land_time": so.land_time,
                        "visits": so.visits,
                    },
                    "geometry": {"type": "LineString", "coordinates": coords},
                }
            )
        for r in p.uav_route.recharges:
            feats.append(
                {
                    "type": "Feature",
                    "properties": {"kind": "recharge", "plan": k, "node": r.node, "time": r.time, "amount_j": r.amount},
                    "geometry": {"type": "Point", "coordinates": xy(s.node(r.node))},
                }
            )
    return {
        "type": "FeatureCollection",
        "properties": {"crs": "planar metres; x east, y north; not geographic coordinates"},
        "features": feats,
    }


# --------------------------------------------------------------------------
# commands


def _read_scenario(path: Path, profile: str):
    if not path.is_file():
        raise UsageError(f"no such scenario file: {path}")
    return with_profile(load_scenario(path.read_bytes()), profile)


def _read_plan_doc(path: Path) -> dict:
    if not path.is_file():
        raise UsageError(f"no such plan file: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not a plan document ({exc})") from exc


def cmd_plan(cfg: CliConfig) -> int:
    s = _read_scenario(cfg.scenario_path, cfg.profile)
    search = SearchConfig(seed=cfg.seed, time_limit=cfg.time_limit)
    plans = plan(s, cfg.outer, search)
    baseline = ugv_only_baseline(s)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    doc = plans_to_document(
        s, plans, baseline, {"outer": cfg.outer, "seed": cfg.seed, "time_limit": cfg.time_limit, "profile": cfg.profile}
    )
    (out / "plan.json").write_text(dump_plans(doc), encoding="utf-8")
    _write_csv(out / "metrics.csv", METRICS_FIELDS, metrics_rows(plans))
    (out / "routes.geojson").write_text(json.dumps(routes_geojson(s, plans), indent=2) + "\n", encoding="utf-8")
    best = plans[0].metrics
    print(f"{len(plans)} plan(s); best total time {best.total_time:.3f} s, energy {best.total_energy:.3f} J, dropped {best.dropped}")
    return EXIT_OK


def cmd_validate(cfg: CliConfig) -> int:
    doc = _read_plan_doc(cfg.plan_path)
    if cfg.scenario_path is not None:
        s = _read_scenario(cfg.scenario_path, cfg.profile)
    else:
        s = with_profile(scenario_from_dict(doc["scenario"]), cfg.profile)
    plans = [CooperativePlan.from_dict(p) for p in doc["plans"]]
    reports = [simulate(p, s, cfg.dt, record_trace=(k == 0)) for k, p in enumerate(plans)]
    ok = all(r.ok for r in reports)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    body = {"ok": ok, "dt": cfg.dt, "reports": [{"plan": k, **r.to_dict()} for k, r in enumerate(reports)]}
    (out / "report.json").write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")
    (out / "trace.csv").write_text(trace_csv(reports[0].trace if reports else []), encoding="utf-8")
    for k, r in enumerate(reports):
        status = "ok" if r.ok else f"{len(r.violations)} violation(s)"
        print(f"plan {k}: {status}; max sortie {r.max_sortie_duration:.3f} s; time mismatch {r.time_mismatch:.3g} s")
        for v in r.violations:
            print(f"  t={v.time:.3f} {v.kind}: {v.detail}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_compare(cfg: CliConfig) -> int:
    doc = _read_plan_doc(cfg.plan_path)
    if not doc.get("plans") or not doc.get("baseline"):
        raise UsageError("plan document has no plans or no baseline")
    plans = [CooperativePlan.from_dict(p) for p in doc["plans"]]
    report = compare(plans, CooperativePlan.from_dict(doc["baseline"]))
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_comparison(out / "comparison.csv", report)
    for row in report.rows:
        print(
            f"plan {row['plan']} ({row['outer_method']}): time {row['time_improvement_pct']:+.2f}%, "
            f"energy {row['energy_improvement_pct']:+.2f}%"
        )
    return EXIT_OK


def write_comparison(path: Path, report: ComparisonReport) -> None:
    rows = []
    for row in report.rows:
        row = dict(row)
        row["time_improvement_pct"] = f"{row['time_improvement_pct']:.2f}"
        row["energy_improvement_pct"] = f"{row['energy_improvement_pct']:.2f}"
        rows.append(row)
    _write_csv(path, ComparisonReport.FIELDS, rows)


def cmd_gen(cfg: CliConfig) -> int:
    profile = "lab" if cfg.profile == "custom" else cfg.profile
    s = generate_random_scenario(cfg.seed, cfg.points, cfg.area, cfg.grid, profile=profile)
    out = cfg.output_dir
    if out.suffix == ".json":
        out.parent.mkdir(parents=True, exist_ok=True)
        target = out
    else:
        out.mkdir(parents=True, exist_ok=True)
        target = out / "scenario.json"
    target.write_text(dump_scenario(s), encoding="utf-8")
    print(target)
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "validate": cmd_validate, "compare": cmd_compare, "gen": cmd_gen}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coroute", description="Cooperative UAV-UGV route planner")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, profile_default="custom"):
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--profile", choices=("paper", "lab", "custom"), default=profile_default)

    p = sub.add_parser("plan", help="plan cooperative routes for a scenario")
    p.add_argument("scenario", type=Path)
    p.add_argument("--outer", choices=("greedy", "exact", "both"), default="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-limit", type=float, default=10.0)
    common(p)

    p = sub.add_parser("validate", help="replay plan.json in the simulator")
    p.add_argument("plan", type=Path)
    p.add_argument("--scenario", type=Path, default=None, help="override the scenario embedded in the plan")
    p.add_argument("--dt", type=float, default=0.1)
    common(p)

    p = sub.add_parser("compare", help="improvement of each plan over the UGV-only baseline")
    p.add_argument("plan", type=Path)
    common(p)

    p = sub.add_parser("gen", help="write a random scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=12)
    p.add_argument("--area", type=float, default=4.0)
    p.add_argument("--grid", type=int, default=3)
    common(p, profile_default="lab")
    return ap


def parse_config(argv) -> CliConfig:
    ns = build_parser().parse_args(argv)
    cfg = CliConfig(command=ns.command, output_dir=ns.out, profile=ns.profile)
    if ns.command == "plan":
        cfg.scenario_path = ns.scenario
        cfg.outer, cfg.seed, cfg.time_limit = ns.outer, ns.seed, ns.time_limit
        if cfg.time_limit <= 0:
            raise UsageError("--time-limit must be positive")
    elif ns.command in ("validate", "compare"):
        cfg.plan_path = ns.plan
        if ns.command == "validate":
            cfg.scenario_path, cfg.dt = ns.scenario, ns.dt
            if cfg.dt <= 0:
                raise UsageError("--dt must be positive")
    else:
        cfg.seed, cfg.points, cfg.area, cfg.grid = ns.seed, ns.points, ns.area, ns.grid
        if cfg.points < 1 or cfg.grid < 2 or cfg.area <= 0:
            raise UsageError("--points >= 1, --grid >= 2 and --area > 0 are required")
    return cfg


def run(cfg: CliConfig) -> int:
    try:
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"coroute: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError) as exc:
        print(f"coroute: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"coroute: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse already printed its message
        return EXIT_USAGE if exc.code else EXIT_OK
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
