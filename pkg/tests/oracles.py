"""Independent reference checks shared by the test modules."""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np

from hybridmesh.routing import collect_routing_tables, flood_hellos, sorted_nodelist
from hybridmesh.tdma import GATEWAY, RECV, SEND, build_schedule


def toa_ms(sf: int, payload: int, bw: int = 125_000, cr: int = 1, preamble: int = 8,
           crc: bool = True, explicit: bool = True) -> float:
    """Semtech airtime formula, written out from the datasheet."""
    ts = 2 ** sf / bw
    de = 1 if (sf >= 11 and bw == 125_000) else 0
    num = 8 * payload - 4 * sf + 28 + 16 * crc - 20 * (not explicit)
    n = 8 + max(math.ceil(num / (4 * (sf - 2 * de))) * (cr + 4), 0)
    return ((preamble + 4.25) + n) * ts * 1000.0


def connected(nodes: list[int], edges: set[tuple[int, int]]) -> bool:
    adj = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {nodes[0]}, [nodes[0]]
    while stack:
        for m in adj[stack.pop()] - seen:
            seen.add(m)
            stack.append(m)
    return len(seen) == len(nodes)


def connected_graphs(max_nodes: int):
    """Every connected labelled graph on nodes 1..k for 2 <= k <= max_nodes."""
    for k in range(2, max_nodes + 1):
        nodes = list(range(1, k + 1))
        pairs = list(itertools.combinations(nodes, 2))
        for mask in range(1, 1 << len(pairs)):
            edges = {p for i, p in enumerate(pairs) if mask >> i & 1}
            if len(edges) >= k - 1 and connected(nodes, edges):
                yield nodes, edges


def random_tree(n: int, rng: np.random.Generator) -> tuple[list[int], set[tuple[int, int]]]:
    """Uniform labelled tree on 1..n via a Pruefer sequence."""
    nodes = list(range(1, n + 1))
    if n == 2:
        return nodes, {(1, 2)}
    seq = [int(x) for x in rng.integers(1, n + 1, size=n - 2)]
    degree = Counter(seq)
    edges = set()
    for x in seq:
        leaf = min(v for v in nodes if degree[v] == 0)
        edges.add((min(leaf, x), max(leaf, x)))
        degree[leaf] = -1
        degree[x] -= 1
    u, w = [v for v in nodes if degree[v] == 0]
    edges.add((u, w))
    return nodes, edges


def links_of(nodes, edges) -> dict[int, set[int]]:
    out = {n: set() for n in nodes}
    for a, b in edges:
        out[a].add(b)
        out[b].add(a)
    return out


def plan(nodes, edges, hub: int = 1, hub_uplink: bool = True, own: int = 1):
    links = links_of(nodes, edges)
    tables, _ = flood_hellos(hub, links)
    conn = collect_routing_tables(tables.values(), hub)
    sched = build_schedule(sorted_nodelist(conn, own), conn, hub_uplink=hub_uplink, hub_own_packets=own)
    return links, conn, sched


def replay(sched, links: dict[int, set[int]], hub: int, own: int = 1, hub_uplink: bool = True) -> list[str]:
    """Walk the slots, checking pairing, collisions, half-duplex and conservation."""
    problems = []
    held = {n: own for n in links}
    if not hub_uplink:
        held[hub] = 0
    at_gateway = 0
    for i, slot in enumerate(sched.slots):
        senders = {n: a.peer for n, a in slot.items() if a.kind == SEND}
        for s, d in senders.items():
            if held[s] <= 0:
                problems.append(f"slot {i}: {s} sends with an empty queue")
            if d == GATEWAY:
                if s != hub:
                    problems.append(f"slot {i}: non-hub {s} addresses the gateway")
                continue
            if d not in links[s]:
                problems.append(f"slot {i}: {s} sends to non-neighbour {d}")
            act = slot.get(d)
            if act is None or act.kind != RECV or act.peer != s:
                problems.append(f"slot {i}: {d} is not listening to {s}")
                continue
            others = [o for o in senders if o != s and (o in links[d] or o == d)]
            if others:
                problems.append(f"slot {i}: {d} hears {s} and {others}")
        for s, d in senders.items():
            if held[s] <= 0:
                continue
            held[s] -= 1
            if d == GATEWAY:
                at_gateway += 1
            elif slot.get(d) is not None and slot[d].kind == RECV:
                held[d] += 1
    total = own * len(links) if hub_uplink else own * (len(links) - 1)
    if hub_uplink:
        if at_gateway != total:
            problems.append(f"gateway got {at_gateway} of {total}")
    elif held[hub] != total:
        problems.append(f"hub holds {held[hub]} of {total}")
    return problems
