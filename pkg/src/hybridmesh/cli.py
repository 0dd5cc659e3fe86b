"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 invalid or unreadable scenario,
3 runtime failure.  Output goes to ``--out`` or, failing that, to the
directory named by ``HYBRIDMESH_OUT`` (default ``./hybridmesh-out``).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import metrics, phy, scenario, sim
from .node import FRAME_BYTES
from .routing import collect_routing_tables, flood_hellos, sorted_nodelist
from .timesync import TICK_MS
from .tdma import SchedulingError, build_schedule, validate_schedule
from .trace import EventTrace

EXIT_OK, EXIT_USAGE, EXIT_SCENARIO, EXIT_RUNTIME = 0, 1, 2, 3
OUT_ENV = "HYBRIDMESH_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default; usage errors are 1 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV, "hybridmesh-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(ref: str, seed: int | None = None) -> scenario.Scenario:
    path = Path(ref)
    if path.exists():
        sc = scenario.load(path)
    else:
        stem = ref[:-len(".scenario")] if ref.endswith(".scenario") else ref
        if stem not in scenario.bundled_names():
            raise scenario.ScenarioError(f"no such scenario file or bundled scenario: {ref}")
        sc = scenario.bundled(stem)
    if seed is not None:
        sc = dataclasses.replace(sc, seed=scenario.Seed(seed))
    return sc


# -- schedule -----------------------------------------------------------------

def static_schedule(sc: scenario.Scenario):
    """Connectivity and schedule the hub would build for the scenario as configured."""
    sim_ = sim.Simulator(sc)
    members = [r.id for r in sim_.nodes.values() if r.in_mesh]
    powers = {n: sc.radio.tx_power_dbm for n in members}
    links = sim_.medium.links(members, powers, sc.radio.sf)
    tables, _ = flood_hellos(sc.hub, links)
    conn = collect_routing_tables(tables.values(), sc.hub)
    unreachable = sorted(set(members) - conn.nodes)
    demand = {n: sim_._demand(sim_.nodes[n]) for n in conn.nodes}
    sched = build_schedule(sorted_nodelist(conn, demand), conn, hub_uplink=sc.traffic.hub_uplink,
                           hub_own_packets=demand[sc.hub], slot_duration_ms=sc.traffic.slot_ms,
                           cycle_period_ms=sc.traffic.cycle_period_s * 1000.0)
    report = validate_schedule(sched, conn, demand, hub_own_packets=demand[sc.hub] if sc.traffic.hub_uplink else 0)
    return conn, sched, report, unreachable


def cmd_schedule(args) -> int:
    sc = _load(args.scenario)
    conn, sched, rep, unreachable = static_schedule(sc)
    if unreachable:
        print(f"topology is not connected from hub {sc.hub}; unreachable nodes: "
              f"{', '.join(map(str, unreachable))}", file=sys.stderr)
        return EXIT_SCENARIO
    out = _out_dir(args)
    sf12 = phy.time_on_air(sc.radio_config(sf=12), FRAME_BYTES)
    if args.format == "json":
        payload = sched.to_dict() | {"violations": rep.violations, "sf12_airtime_ms": sf12}
        print(json.dumps(payload, indent=2))
    else:
        print(sched.to_text())
        print()
        print(f"{len(sched)} slots x {sc.traffic.slot_ms:g} ms = {len(sched) * sc.traffic.slot_ms:g} ms "
              f"(one SF12 {FRAME_BYTES}-byte frame: {sf12:.1f} ms)")
        for n in sorted(conn.nodes):
            if n != conn.hub:
                done = (sched.last_active_slot(n) + 1) * sc.traffic.slot_ms
                print(f"  node {n}: {conn.hops[n]} hop(s), finished after {done:g} ms")
        print("violations: none" if rep.ok else "violations:\n  " + "\n  ".join(rep.violations))
    (out / "schedule.txt").write_text(sched.to_text() + "\n")
    (out / "schedule.json").write_text(json.dumps(sched.to_dict(), indent=2) + "\n")
    return EXIT_OK if rep.ok else EXIT_RUNTIME


# -- simulate -----------------------------------------------------------------

def _simulate_one(sc: scenario.Scenario, out: Path) -> dict:
    trace = sim.run(sc)
    rep = metrics.build_report(trace)
    out.mkdir(parents=True, exist_ok=True)
    trace.write(out / "trace.csv")
    (out / "report.json").write_text(rep.to_json() + "\n")
    (out / "per_day.csv").write_text(rep.per_day_csv())
    (out / "summary.txt").write_text(_summary(sc, trace, rep) + "\n")
    return rep.to_dict()


def _summary(sc: scenario.Scenario, trace: EventTrace, rep: metrics.MetricsReport) -> str:
    counts = defaultdict(int)
    for r in trace:
        counts[r.event] += 1
    lines = [
        f"scenario {sc.meta.name} (seed {sc.seed.value}, {sc.traffic.duration_cycles} cycles of "
        f"{sc.traffic.cycle_period_s:g} s)",
        f"packets generated {counts['gen']}, delivered {counts['deliver']}, crc errors {counts['rx_crc_error']}, "
        f"collisions {counts['collision']}, misses {counts['rx_missed']}, resets {counts['setup']}",
        "",
        rep.to_table(),
    ]
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    sc = _load(args.scenario, args.seed)
    out = _out_dir(args)
    if args.seeds and args.seeds > 1:
        base = sc.seed.value
        runs = [dataclasses.replace(sc, seed=scenario.Seed(base + i)) for i in range(args.seeds)]
        dirs = [out / f"seed-{r.seed.value}" for r in runs]
        with ProcessPoolExecutor() as pool:
            reports = list(pool.map(_simulate_one, runs, dirs))
        merged = {"seeds": [r.seed.value for r in runs], "reports": reports}
        (out / "sweep.json").write_text(json.dumps(merged, indent=2, sort_keys=True) + "\n")
        mean = _mean_pdr(reports)
        if args.format == "json":
            print(json.dumps({"seeds": merged["seeds"], "mean_pdr": mean}, indent=2, sort_keys=True))
        else:
            print(f"{len(runs)} seeds from {base}; mean PDR per node:")
            for n, v in sorted(mean.items(), key=lambda kv: int(kv[0])):
                print(f"  node {n}: {v:.4f}")
        return EXIT_OK
    rep = _simulate_one(sc, out)
    if args.format == "json":
        print(json.dumps(rep, indent=2, sort_keys=True))
    else:
        print((out / "summary.txt").read_text(), end="")
        print(f"\nwrote {out / 'trace.csv'}, {out / 'report.json'}, {out / 'summary.txt'}")
    return EXIT_OK


def _mean_pdr(reports: list[dict]) -> dict[str, float]:
    acc: dict[str, list[float]] = defaultdict(list)
    for rep in reports:
        for n, m in rep["per_node"].items():
            if m["pdr"] is not None:
                acc[n].append(m["pdr"])
    return {n: sum(v) / len(v) for n, v in acc.items()}


# -- report -------------------------------------------------------------------

def cmd_report(args) -> int:
    try:
        trace = EventTrace.read(args.trace)
    except (OSError, ValueError) as exc:
        print(f"cannot read trace: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    rep = metrics.build_report(trace, errored_as_received=not args.errored_as_missed)
    print(rep.to_json() if args.format == "json" else rep.to_table())
    if args.out or os.environ.get(OUT_ENV):
        out = _out_dir(args)
        (out / "report.json").write_text(rep.to_json() + "\n")
        (out / "per_day.csv").write_text(rep.per_day_csv())
    return EXIT_OK


# -- energy -------------------------------------------------------------------

def energy_table(sf_min: int, sf_max: int, payload: int, power_dbm: int, max_hops: int,
                 bw: int = 125_000, cr: int = 1) -> list[dict]:
    profile = phy.PowerProfile()
    rows = []
    for sf in range(sf_min, sf_max + 1):
        cfg = phy.RadioConfig(sf=sf, bw=bw, cr=cr, tx_power_dbm=power_dbm)
        row = {
            "sf": sf,
            "toa_ms": phy.time_on_air(cfg, payload),
            "e_tx_mj_per_bit": phy.energy_tx_per_bit(cfg, profile, payload),
            "e_rx_uj_per_bit": phy.energy_rx_per_bit(cfg, profile, payload),
        }
        for h in range(1, max_hops + 1):
            row[f"hops_{h}_mj_per_bit"] = phy.multi_hop_energy_per_bit(h, cfg, profile, payload)
        rows.append(row)
    return rows


def cmd_energy(args) -> int:
    if not 6 <= args.sf_min <= args.sf_max <= 12:
        raise UsageError(f"spreading factors must satisfy 6 <= min <= max <= 12, got {args.sf_min}..{args.sf_max}")
    if args.hops < 1:
        raise UsageError("--hops must be at least 1")
    try:
        rows = energy_table(args.sf_min, args.sf_max, args.payload, args.power, args.hops, args.bw, args.cr)
    except phy.ConfigError as exc:
        raise UsageError(str(exc)) from None
    if args.format == "json":
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    hop_cols = [f"{h}-hop" for h in range(1, args.hops + 1)]
    print(f"payload {args.payload} B, {args.power:+d} dBm, BW {args.bw // 1000} kHz, CR 4/{args.cr + 4}")
    print(f"{'SF':>3} {'ToA ms':>10} {'E_tx mJ/b':>10} {'E_rx uJ/b':>10} " + " ".join(f"{c:>9}" for c in hop_cols))
    for r in rows:
        hops = " ".join(f"{r[f'hops_{h}_mj_per_bit']:>9.4f}" for h in range(1, args.hops + 1))
        print(f"{r['sf']:>3} {r['toa_ms']:>10.3f} {r['e_tx_mj_per_bit']:>10.4f} {r['e_rx_uj_per_bit']:>10.4f} {hops}")
    return EXIT_OK


# -- sync-check ---------------------------------------------------------------

def depth_bound(hops: int, jitter_ms: float) -> float:
    """Allowed clock offset at a depth: one jitter plus one timestamp tick per hop."""
    return hops * (jitter_ms + TICK_MS)


def sync_summary(trace: EventTrace, jitter_ms: float) -> dict:
    worst: dict[int, float] = defaultdict(float)
    for r in trace.of("sync"):
        f = r.fields()
        h = int(f["hops"])
        worst[h] = max(worst[h], abs(float(f["err_ms"])))
    window_misses = sum(1 for r in trace.of("rx_missed") if r.fields().get("reason") in ("window", "timeout"))
    within = all(err <= depth_bound(h, jitter_ms) for h, err in worst.items())
    return {"max_error_by_depth_ms": dict(sorted(worst.items())), "missed_windows": window_misses,
            "within_depth_bound": within}


def cmd_sync_check(args) -> int:
    sc = _load(args.scenario, args.seed)
    if args.cycles:
        sc = dataclasses.replace(sc, traffic=dataclasses.replace(sc.traffic, duration_cycles=args.cycles))
    summary = sync_summary(sim.run(sc), sc.sync.t_node_jitter_ms)
    if args.format == "json":
        print(json.dumps(summary, indent=2))
    else:
        print(f"guard {sc.sync.guard_ms:g} ms, drift band +/-{sc.sync.drift_ppm:g} ppm, "
              f"T_node jitter +/-{sc.sync.t_node_jitter_ms:g} ms, {sc.traffic.duration_cycles} cycles")
        print("depth  max |offset| ms  bound ms")
        for h, err in summary["max_error_by_depth_ms"].items():
            print(f"{h:>5}  {err:>15.6f}  {depth_bound(h, sc.sync.t_node_jitter_ms):>8.3f}")
        print(f"missed receive windows: {summary['missed_windows']}")
    ok = summary["within_depth_bound"] and summary["missed_windows"] == 0
    return EXIT_OK if ok else EXIT_RUNTIME


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hybridmesh", description="Hybrid LoRa mesh / ANT star network simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scenario_arg=True):
        if scenario_arg:
            sp.add_argument("scenario", help="scenario file or bundled scenario name")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./hybridmesh-out)")
        sp.add_argument("--format", choices=("text", "json"), default="text")

    sp = sub.add_parser("schedule", help="build and print the TDMA schedule")
    common(sp)
    sp.set_defaults(func=cmd_schedule)

    sp = sub.add_parser("simulate", help="run a scenario and write trace, report and summary")
    common(sp)
    sp.add_argument("--seed", type=int, help="override the scenario seed")
    sp.add_argument("--seeds", type=int, default=1, help="sweep N consecutive seeds in parallel")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("report", help="compute metrics from a trace CSV")
    sp.add_argument("trace")
    common(sp, scenario_arg=False)
    sp.add_argument("--errored-as-missed", action="store_true",
                    help="count crc-errored packets as missed instead of received")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("energy", help="airtime and per-bit energy table")
    sp.add_argument("--sf-min", type=int, default=6)
    sp.add_argument("--sf-max", type=int, default=12)
    sp.add_argument("--payload", type=int, default=8, help="payload bytes")
    sp.add_argument("--power", type=int, default=20, help="transmit power in dBm")
    sp.add_argument("--hops", type=int, default=3)
    sp.add_argument("--bw", type=int, default=125_000)
    sp.add_argument("--cr", type=int, default=1)
    sp.add_argument("--format", choices=("text", "json"), default="text")
    sp.set_defaults(func=cmd_energy)

    sp = sub.add_parser("sync-check", help="simulate and report clock offsets and missed windows")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--cycles", type=int, help="override the number of cycles")
    sp.set_defaults(func=cmd_sync_check)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except scenario.ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except SchedulingError as exc:
        print(f"scheduling failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - the exit-code contract covers everything else
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
