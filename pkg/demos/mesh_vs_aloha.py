"""Scheduled mesh against unslotted SF12 senders sharing one gateway.

Run: python3 demos/mesh_vs_aloha.py
"""

import math

from hybridmesh import metrics, phy, scenario, sim

sc = scenario.bundled("mesh-vs-aloha")
rep = metrics.build_report(sim.run(sc))
roles = {n.id: n.role for n in sc.nodes}


def pooled(keep):
    ms = [m for n, m in rep.per_node.items() if keep(roles[n]) and m.expected]
    return sum(m.received for m in ms) / sum(m.expected for m in ms)


print(f"mesh PDR  {pooled(lambda r: r in ('hub', 'mesh')):.4f}")
print(f"ALOHA PDR {pooled(lambda r: r == 'aloha-ref'):.4f}")

airtime = phy.time_on_air(phy.RadioConfig(sf=12), 64) / 1000
n_aloha = sum(r == "aloha-ref" for r in roles.values())
g = n_aloha * airtime / sc.traffic.aloha_period_s
print(f"offered load G = {g:.3f}; pure ALOHA predicts success e^(-2G) = {math.exp(-2 * g):.4f}")
