"""From hello flood to TDMA matrix on the small four-node topology.

Run: python3 demos/schedule_walkthrough.py
"""

from hybridmesh.routing import collect_routing_tables, flood_hellos, sorted_nodelist
from hybridmesh.tdma import build_schedule, validate_schedule

hub = 1
links = {1: {2, 4}, 2: {1, 3}, 3: {2}, 4: {1}}

tables, sent = flood_hellos(hub, links)
for n, t in sorted(tables.items()):
    print(f"node {n}: {t.own_hops} hops, neighbours {t.entries}, hellos sent {sent[n]}")

conn = collect_routing_tables(tables.values(), hub)
print("\nnext hop:", conn.next_hop)

nodelist = sorted_nodelist(conn)
print("transmit list:", [(d.id, d.packet) for d in nodelist])

for uplink in (False, True):
    sched = build_schedule(nodelist, conn, hub_uplink=uplink, hub_own_packets=1)
    rep = validate_schedule(sched, conn, 1, hub_own_packets=1 if uplink else 0)
    title = "with hub uplink to the gateway" if uplink else "hub as sink"
    print(f"\n{title} ({len(sched)} slots, {len(rep.violations)} violations)")
    print(sched.to_text())
