"""Transmit power walking down to the cheapest setting that still clears the link floor.

Run: python3 demos/adaptive_power.py
"""

from hybridmesh import scenario, sim

sc = scenario.loads("""
[meta]
name = "all-pair"
[radio]
tx_power_dbm = 22
adaptive_power = true
[traffic]
cycle_period_s = 60.0
duration_cycles = 10
[[nodes]]
id = 1
role = "hub"
[[nodes]]
id = 2
x = 300.0
""")
for r in sim.run(sc).of("tx_power"):
    f = r.fields()
    print(f"cycle {int(r.t_ms // 60_000)}: rssi {f['rssi']} dBm, power {f['from']} -> {f['to']} dBm")
