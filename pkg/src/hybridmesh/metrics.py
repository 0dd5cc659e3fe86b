"""Delivery, error and energy metrics folded from an event trace.

Counting convention: a packet that reaches any listener with a bad CRC is
"errored"; by default it also counts as received, so that
``pdr + pmr == 1`` and ``per`` are read from the same counters.  Pass
``errored_as_received=False`` to count only clean deliveries.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from collections import defaultdict
from dataclasses import asdict, dataclass, field

from . import phy
from .trace import EventTrace

DAY_MS = 86_400_000.0


class UndefinedRate(ValueError):
    pass


def _check(count: int, expected: int) -> None:
    if expected <= 0:
        raise UndefinedRate("rate undefined with zero expected packets")
    if not 0 <= count <= expected:
        raise ValueError(f"count {count} outside [0, {expected}]")


def pdr(received: int, expected: int) -> float:
    _check(received, expected)
    return received / expected


def per(errored: int, expected: int) -> float:
    _check(errored, expected)
    return errored / expected


def pmr(expected: int, received: int) -> float:
    _check(received, expected)
    return (expected - received) / expected


@dataclass
class _Counts:
    generated: dict[tuple[int, int], float] = field(default_factory=dict)  # (origin, seq) -> gen time
    delivered: set[tuple[int, int]] = field(default_factory=set)
    errored: set[tuple[int, int]] = field(default_factory=set)


def _fold(trace: EventTrace) -> _Counts:
    c = _Counts()
    for r in trace:
        if r.event == "gen":
            c.generated[(r.node, int(r.fields()["seq"]))] = r.t_ms
        elif r.event == "deliver":
            f = r.fields()
            c.delivered.add((int(f["origin"]), int(f["seq"])))
        elif r.event == "rx_crc_error":
            f = r.fields()
            c.errored.add((int(f["origin"]), int(f["seq"])))
    c.errored -= c.delivered
    return c


def _received(c: _Counts, key: tuple[int, int], errored_as_received: bool) -> bool:
    return key in c.delivered or (errored_as_received and key in c.errored)


def total_pdr(day: int, trace: EventTrace, errored_as_received: bool = True) -> float:
    """Delivery rate over every packet generated during simulated day ``day``."""
    c = _fold(trace)
    keys = [k for k, t in c.generated.items() if int(t // DAY_MS) == day]
    if not keys:
        raise UndefinedRate(f"no packets generated on day {day}")
    return pdr(sum(_received(c, k, errored_as_received) for k in keys), len(keys))


def _duration_and_cutoff(trace: EventTrace) -> tuple[float, float]:
    head = trace.header()
    duration = float(head.get("duration_ms", 0.0))
    cycle = float(head.get("cycle_ms", 0.0))
    last = max((r.t_ms for r in trace), default=0.0)
    if duration and last >= duration - 1e-6:
        return duration, duration
    if cycle <= 0:
        raise ValueError("trace header lacks the cycle length")
    whole = math.floor(last / cycle) * cycle
    warnings.warn(f"trace ends at {last:.0f} ms before its nominal end; using {whole:.0f} ms of whole cycles",
                  stacklevel=3)
    return duration, whole


def avg_current(trace: EventTrace, node: int) -> tuple[float, float]:
    """Average current in uA over whole cycles and the projected battery life in years."""
    _, cutoff = _duration_and_cutoff(trace)
    if cutoff <= 0:
        raise ValueError("trace holds no complete cycle")
    mc = sum(float(r.fields()["mc"]) for r in trace
             if r.event == "energy_delta_mc" and r.node == node and r.t_ms <= cutoff + 1e-9)
    ua = mc / (cutoff / 1000.0) * 1000.0
    rec = next((r for r in trace if r.event == "node" and r.node == node), None)
    capacity = float(rec.fields()["battery_mah"]) if rec else 2500.0
    return ua, phy.battery_life(ua, capacity)


def integrate_modes(trace: EventTrace, profile: phy.PowerProfile) -> dict[int, float]:
    """Charge per node (mC) rebuilt from the radio-mode intervals alone."""
    duration, _ = _duration_and_cutoff(trace)
    state: dict[int, tuple[float, float]] = {}  # node -> (since, current mA)
    total: dict[int, float] = defaultdict(float)

    def current(fields: dict[str, str]) -> float:
        lora = fields["lora"]
        ma = {"OFF": 0.0, "SLEEP": profile.i_sleep_ua / 1000.0, "RX": profile.i_lora_rx_ma}.get(lora)
        if ma is None:
            ma = profile.tx_current_ma(int(fields["dbm"]))
        return ma + {"off": 0.0, "RX": profile.i_ant_rx_ma, "TX": profile.i_ant_tx_ma}[fields["ant"]]

    for r in trace:
        if r.event != "radio":
            continue
        if r.node in state:
            since, ma = state[r.node]
            total[r.node] += ma * (r.t_ms - since) / 1000.0
        state[r.node] = (r.t_ms, current(r.fields()))
    for n, (since, ma) in state.items():
        total[n] += ma * (duration - since) / 1000.0
    return dict(total)


def ledger_totals(trace: EventTrace) -> dict[int, float]:
    total: dict[int, float] = defaultdict(float)
    for r in trace:
        if r.event == "energy_delta_mc":
            total[r.node] += float(r.fields()["mc"])
    return dict(total)


@dataclass
class NodeMetrics:
    expected: int
    received: int
    errored: int
    missed: int
    pdr: float | None
    per: float | None
    pmr: float | None
    avg_current_ua: float
    projected_life_years: float


@dataclass
class MetricsReport:
    per_node: dict[int, NodeMetrics]
    per_day: dict[int, float]
    digest: dict[str, str]
    errored_as_received: bool = True

    def to_dict(self) -> dict:
        return {
            "counting": "crc-errored packets count as received" if self.errored_as_received
                        else "only clean deliveries count as received",
            "digest": dict(self.digest),
            "per_node": {str(n): asdict(m) for n, m in sorted(self.per_node.items())},
            "per_day": {str(d): v for d, v in sorted(self.per_day.items())},
        }

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and math.isinf(v):
                return None
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            return v
        return json.dumps(clean(self.to_dict()), indent=2, sort_keys=True)

    def to_table(self) -> str:
        def fmt(v, spec):
            return "-" if v is None else format(v, spec)
        lines = [f"{'node':>5} {'expected':>9} {'received':>9} {'errored':>8} {'pdr':>7} {'per':>7} "
                 f"{'pmr':>7} {'I_avg uA':>9} {'life y':>7}"]
        for n, m in sorted(self.per_node.items()):
            life = "inf" if math.isinf(m.projected_life_years) else f"{m.projected_life_years:.2f}"
            lines.append(f"{n:>5} {m.expected:>9} {m.received:>9} {m.errored:>8} {fmt(m.pdr, '.4f'):>7} "
                         f"{fmt(m.per, '.4f'):>7} {fmt(m.pmr, '.4f'):>7} {m.avg_current_ua:>9.2f} {life:>7}")
        if self.per_day:
            lines.append("")
            lines.append("day  total_pdr")
            lines += [f"{d:>3}  {v:.4f}" for d, v in sorted(self.per_day.items())]
        return "\n".join(lines)

    def per_day_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["day", "total_pdr"])
        for d, v in sorted(self.per_day.items()):
            w.writerow([d, f"{v:.6f}"])
        return buf.getvalue()


def build_report(trace: EventTrace, errored_as_received: bool = True) -> MetricsReport:
    c = _fold(trace)
    nodes = sorted(r.node for r in trace if r.event == "node")
    by_origin: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for key in c.generated:
        by_origin[key[0]].append(key)

    per_node: dict[int, NodeMetrics] = {}
    for n in nodes:
        keys = by_origin.get(n, [])
        expected = len(keys)
        received = sum(_received(c, k, errored_as_received) for k in keys)
        errored = sum(k in c.errored for k in keys)
        missed = expected - received
        if missed < 0 or received + missed != expected:
            raise ValueError(f"node {n}: counting identity violated")
        ua, life = avg_current(trace, n)
        if expected:
            rates = (pdr(received, expected), per(errored, expected), pmr(expected, received))
        else:
            rates = (None, None, None)
        per_node[n] = NodeMetrics(expected, received, errored, missed, *rates, ua, life)

    days: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for key, t in c.generated.items():
        days[int(t // DAY_MS)].append(key)
    per_day = {d: sum(_received(c, k, errored_as_received) for k in ks) / len(ks) for d, ks in sorted(days.items())}
    head = trace.header()
    digest = {k: head[k] for k in ("name", "seed", "duration_ms", "hash") if k in head}
    return MetricsReport(per_node, per_day, digest, errored_as_received)
