"""Centralized collision-free TDMA schedule construction at the mesh hub."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .routing import ConnectivityTable, NodeDescriptor

GATEWAY = -1
SEND, RECV, SLEEP = "SEND", "RECV", "SLEEP"


class SchedulingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Action:
    kind: str
    peer: int | None = None  # destination for SEND, source for RECV

    def cell(self) -> str:
        if self.kind == SEND:
            return "Tx->GW" if self.peer == GATEWAY else f"Tx->{self.peer}"
        return "Rx" if self.kind == RECV else "Sleep"


SLEEP_ACTION = Action(SLEEP)


@dataclass
class Schedule:
    slots: list[dict[int, Action]]
    slot_duration_ms: float = 125.0
    cycle_period_ms: float = 600_000.0
    nodes: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.slots)

    def row(self, node: int) -> list[Action]:
        return [slot.get(node, SLEEP_ACTION) for slot in self.slots]

    def sends(self, node: int) -> int:
        return sum(a.kind == SEND for a in self.row(node))

    def last_active_slot(self, node: int) -> int:
        row = self.row(node)
        active = [i for i, a in enumerate(row) if a.kind != SLEEP]
        return active[-1] if active else -1

    def to_text(self) -> str:
        header = ["Node / Timeslot"] + [str(i + 1) for i in range(len(self.slots))]
        rows = [header] + [[str(n)] + [a.cell() for a in self.row(n)] for n in self.nodes]
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)

    def to_dict(self) -> dict:
        return {
            "slot_duration_ms": self.slot_duration_ms,
            "cycle_period_ms": self.cycle_period_ms,
            "nodes": list(self.nodes),
            "slots": [
                {str(n): {"action": a.kind, "peer": a.peer} for n, a in sorted(slot.items())}
                for slot in self.slots
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Schedule":
        slots = [{int(n): Action(v["action"], v["peer"]) for n, v in s.items()} for s in data["slots"]]
        return cls(slots, data["slot_duration_ms"], data["cycle_period_ms"], list(data["nodes"]))


def build_schedule(nodelist: Sequence[NodeDescriptor], conn: ConnectivityTable, *,
                   hub_uplink: bool = True, hub_own_packets: int = 1,
                   slot_duration_ms: float = 125.0, cycle_period_ms: float = 600_000.0) -> Schedule:
    """Greedy slot packing over a hop-sorted transmit list.

    Per slot the list is scanned in order; a node sends when it has nothing
    left to receive, still holds packets, is not adjacent to a receiver or a
    sender already placed, and its destination is not adjacent to a placed
    sender.  When ``hub_uplink`` is set the hub drains its accumulated packets
    to the gateway once its subtree is empty.
    """
    work = [NodeDescriptor(d.id, d.dest, set(d.nbrs), d.packet, d.recv) for d in nodelist]
    for d in work:
        if d.dest not in d.nbrs:
            raise SchedulingError(f"node {d.id}: destination {d.dest} is not a neighbour")
    if hub_uplink and (work or hub_own_packets):
        inbound = sum(d.packet for d in work if d.dest == conn.hub)
        work.append(NodeDescriptor(conn.hub, GATEWAY, set(), inbound + hub_own_packets, inbound))
    by_id = {d.id: d for d in work}
    if not work:
        return Schedule([], slot_duration_ms, cycle_period_ms, sorted(conn.nodes))

    slots: list[dict[int, Action]] = []
    while True:
        slot: dict[int, Action] = {}
        send_coll: set[int] = set()
        recv_coll: set[int] = set()
        for d in list(work):
            if d.recv or d.packet <= 0:
                continue
            if d.id in send_coll or d.id in recv_coll or d.id in slot:
                continue
            if d.dest in recv_coll or d.dest in slot:
                continue
            slot[d.id] = Action(SEND, d.dest)
            if d.dest != GATEWAY:
                slot[d.dest] = Action(RECV, d.id)
                send_coll |= conn.adjacency.get(d.dest, set())
                send_coll.add(d.dest)
            recv_coll |= d.nbrs
            if d.dest in by_id:
                by_id[d.dest].recv -= 1
            d.packet -= 1
            if d.packet == 0:
                work.remove(d)
        if not slot:
            break
        slots.append(slot)
    if work:
        stuck = sorted(d.id for d in work)
        raise SchedulingError(f"no schedulable transmission; nodes {stuck} still hold packets")

    nodes = sorted(conn.nodes)
    full = [{n: slot.get(n, SLEEP_ACTION) for n in nodes} for slot in slots]
    return Schedule(full, slot_duration_ms, cycle_period_ms, nodes)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    delivered_to_hub: int = 0
    delivered_to_gateway: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_schedule(s: Schedule, conn: ConnectivityTable,
                      own_packets: Mapping[int, int] | int = 1, *,
                      hub_own_packets: int = 1) -> ValidationReport:
    """Independent check of a schedule against the collision and conservation rules."""
    rep = ValidationReport()
    bad = rep.violations

    def own(n: int) -> int:
        if n == conn.hub:
            return hub_own_packets
        return own_packets if isinstance(own_packets, int) else own_packets.get(n, 0)

    held = {n: own(n) for n in conn.nodes}
    received = Counter()
    sent = Counter()
    for i, slot in enumerate(s.slots, start=1):
        missing = set(conn.nodes) - set(slot)
        if missing:
            bad.append(f"slot {i}: nodes {sorted(missing)} have no action")
        senders = {n: a.peer for n, a in slot.items() if a.kind == SEND}
        dests = Counter(senders.values())
        for dest, k in dests.items():
            if k > 1:
                bad.append(f"slot {i}: {k} senders target {dest}")  # (a)
        for n, dest in senders.items():
            if dest != GATEWAY:
                if dest not in conn.adjacency.get(n, set()):
                    bad.append(f"slot {i}: {n} sends to non-neighbour {dest}")
                if slot.get(dest, SLEEP_ACTION) != Action(RECV, n):
                    bad.append(f"slot {i}: {n}->{dest} has no matching RECV")
                jammers = [m for m in senders if m != n and m in conn.adjacency.get(dest, set())]
                if jammers:
                    bad.append(f"slot {i}: receiver {dest} jammed by {sorted(jammers)}")  # (b)
                if dest in senders:
                    bad.append(f"slot {i}: {dest} both sends and receives")
            elif n != conn.hub:
                bad.append(f"slot {i}: non-hub {n} sends to the gateway")
            if held[n] <= 0:
                bad.append(f"slot {i}: {n} sends with nothing to send")
        for n, a in slot.items():
            if a.kind == RECV and senders.get(a.peer) != n:
                bad.append(f"slot {i}: {n} receives from {a.peer} which is not sending to it")
        for n, dest in senders.items():
            held[n] -= 1
            sent[n] += 1
            if dest == GATEWAY:
                rep.delivered_to_gateway += 1
            else:
                held[dest] += 1
                received[dest] += 1

    for n in conn.nodes:
        if n == conn.hub:
            continue
        if sent[n] != own(n) + received[n]:
            bad.append(f"node {n}: sent {sent[n]} != own {own(n)} + received {received[n]}")  # (c)
    expected = sum(own(n) for n in conn.nodes if n != conn.hub)
    rep.delivered_to_hub = received[conn.hub]
    if received[conn.hub] != expected:
        bad.append(f"hub received {received[conn.hub]} of {expected} packets")  # (d)
    if rep.delivered_to_gateway and rep.delivered_to_gateway != expected + own(conn.hub):
        bad.append(f"gateway received {rep.delivered_to_gateway} of {expected + own(conn.hub)} packets")
    return rep


def fragment_packets(total_bytes: int, max_packet_bytes: int) -> int:
    if max_packet_bytes <= 0:
        raise ValueError("max_packet_bytes must be positive")
    return math.ceil(total_bytes / max_packet_bytes)
