"""Simulate the thirteen-node campus tree, then knock out a leaf and watch it recover.

Run: python3 demos/campus_run.py
"""

from hybridmesh import metrics, scenario, sim

sc = scenario.bundled("campus-13")
trace = sim.run(sc)
print(metrics.build_report(trace).to_table())

# Node 9 dies halfway through; the hub notices the silent branch and re-forms.
half = sc.traffic.duration_cycles // 2 * sc.traffic.cycle_period_s
faulty = sim.run(sc.with_fault(half + 30, "kill", 9))
for r in faulty:
    if r.event in ("kill", "downlink_silent") or (r.event in ("reset", "setup") and r.node == sc.hub):
        print(f"{r.t_ms / 1000:10.3f} s  node {r.node:>2}  {r.event:<16} {r.detail}")

rep = metrics.build_report(faulty)
print("\nnode 9 delivered", rep.per_node[9].received, "of", sc.traffic.duration_cycles, "cycles before dying")
print("survivor PDR:", min(m.pdr for n, m in rep.per_node.items() if m.pdr is not None and n != 9))
