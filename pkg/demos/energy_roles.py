"""Average current of each role in the four-node energy test: hub, relay, relay with ANT, ANT spoke.

Run: python3 demos/energy_roles.py
"""

from hybridmesh import metrics, scenario, sim

sc = scenario.bundled("energy-4")
tr = sim.run(sc)
for n in sc.nodes:
    ua, years = metrics.avg_current(tr, n.id)
    print(f"node {n.id} ({n.role:<12}) {ua:6.1f} uA  -> {years:5.2f} years on {n.battery_mah:.0f} mAh")

led = metrics.ledger_totals(tr)
integ = metrics.integrate_modes(tr, sc.power_profile())
print("\nledger vs mode integration (mC):",
      ", ".join(f"{n}: {led[n]:.3f}/{integ[n]:.3f}" for n in sorted(led)))
