"""Setup-phase routing: hello flooding, per-node tables, hub connectivity table."""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

INF_HOPS = 255
HELLO_TAG = 0x01


@dataclass(frozen=True)
class HelloMessage:
    sender: int
    sender_hops: int

    def encode(self) -> bytes:
        return struct.pack(">HBB", self.sender, self.sender_hops, HELLO_TAG)

    @classmethod
    def decode(cls, raw: bytes) -> "HelloMessage":
        sender, hops, tag = struct.unpack(">HBB", raw)
        if tag != HELLO_TAG:
            raise ValueError(f"not a hello frame (tag {tag:#x})")
        return cls(sender, hops)


@dataclass
class RoutingTable:
    owner: int
    entries: dict[int, int] = field(default_factory=dict)  # neighbor -> its hops to hub
    own_hops: int = INF_HOPS

    @classmethod
    def for_hub(cls, hub: int) -> "RoutingTable":
        return cls(owner=hub, own_hops=0)

    def neighbors(self) -> set[int]:
        return set(self.entries)


def process_hello(table: RoutingTable, hello: HelloMessage) -> tuple[RoutingTable, bool]:
    """Fold one received hello into ``table``.

    Returns the updated table and whether the node should rebroadcast
    (only when its own hop count strictly improved).
    """
    if hello.sender == table.owner:
        return table, False
    entries = dict(table.entries)
    entries[hello.sender] = hello.sender_hops
    own = table.own_hops
    improved = False
    if table.own_hops != 0 and hello.sender_hops + 1 < own:
        own = hello.sender_hops + 1
        improved = True
    return RoutingTable(table.owner, entries, own), improved


def flood_hellos(hub: int, links: Mapping[int, Iterable[int]]) -> tuple[dict[int, RoutingTable], dict[int, int]]:
    """Run the hello flood to quiescence over an undirected link map.

    Returns the per-node routing tables and the number of hellos each node sent.
    Hellos are delivered breadth-first, one broadcast at a time.
    """
    adj = {n: set(v) for n, v in links.items()}
    tables = {n: RoutingTable(n) for n in adj}
    tables[hub] = RoutingTable.for_hub(hub)
    sent = {n: 0 for n in adj}
    pending = deque([hub])
    while pending:
        sender = pending.popleft()
        sent[sender] += 1
        msg = HelloMessage(sender, tables[sender].own_hops)
        for nbr in sorted(adj[sender]):
            tables[nbr], rebroadcast = process_hello(tables[nbr], msg)
            if rebroadcast:
                pending.append(nbr)
    return tables, sent


@dataclass
class ConnectivityTable:
    hub: int
    nodes: set[int]
    adjacency: dict[int, set[int]]
    hops: dict[int, int]
    next_hop: dict[int, int]
    unreachable: set[int] = field(default_factory=set)

    def children(self, node: int) -> list[int]:
        return sorted(n for n, p in self.next_hop.items() if p == node)

    def subtree(self, node: int) -> list[int]:
        out, stack = [], [node]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(self.children(n))
        return out


def collect_routing_tables(tables: Iterable[RoutingTable], hub: int) -> ConnectivityTable:
    """Aggregate per-node tables into the hub's global view.

    Links are symmetrized, hop counts recomputed by BFS from the hub and each
    node's parent is its lowest-id neighbour one hop closer.  Nodes the BFS
    cannot reach are reported in ``unreachable`` and dropped from the view.
    """
    tables = list(tables)
    adj: dict[int, set[int]] = {hub: set()}
    for t in tables:
        adj.setdefault(t.owner, set())
        for nbr in t.entries:
            if nbr == t.owner:
                continue
            adj.setdefault(nbr, set())
            adj[t.owner].add(nbr)
            adj[nbr].add(t.owner)

    hops = {hub: 0}
    queue = deque([hub])
    while queue:
        n = queue.popleft()
        for m in sorted(adj[n]):
            if m not in hops:
                hops[m] = hops[n] + 1
                queue.append(m)

    unreachable = set(adj) - set(hops)
    adjacency = {n: adj[n] & set(hops) for n in hops}
    next_hop = {}
    for n, h in hops.items():
        if n == hub:
            continue
        next_hop[n] = min(m for m in adjacency[n] if hops[m] == h - 1)
    return ConnectivityTable(hub, set(hops), adjacency, hops, next_hop, unreachable)


@dataclass
class NodeDescriptor:
    id: int
    dest: int | None
    nbrs: set[int]
    packet: int
    recv: int


def sorted_nodelist(conn: ConnectivityTable, own_packets: Mapping[int, int] | int = 1) -> list[NodeDescriptor]:
    """Transmit list for the scheduler: hops descending, id ascending, hub excluded.

    ``own_packets`` is either a uniform count or a per-node map; each
    descriptor's ``packet`` includes everything its subtree will forward
    through it and ``recv`` what it must receive first.
    """
    def own(n: int) -> int:
        if isinstance(own_packets, int):
            return own_packets
        return own_packets.get(n, 0)

    total: dict[int, int] = {}
    for n in sorted(conn.nodes, key=lambda n: -conn.hops[n]):
        total[n] = own(n) + sum(total[c] for c in conn.children(n))

    out = []
    for n in sorted(conn.nodes, key=lambda n: (-conn.hops[n], n)):
        if n == conn.hub:
            continue
        recv = sum(total[c] for c in conn.children(n))
        out.append(NodeDescriptor(n, conn.next_hop[n], set(conn.adjacency[n]), total[n], recv))
    return out
