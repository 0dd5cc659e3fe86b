"""Clock offset after each beacon flood, by hop depth, with drifting crystals and jittery relays.

Run: python3 demos/sync_drift.py
"""

import dataclasses as dc
from collections import defaultdict

from hybridmesh import scenario, sim

base = scenario.bundled("campus-13")
for jitter in (0.0, 0.5, 1.0):
    sc = dc.replace(base, sync=dc.replace(base.sync, t_node_jitter_ms=jitter),
                    traffic=dc.replace(base.traffic, cycle_period_s=600.0, duration_cycles=200))
    tr = sim.run(sc)
    worst = defaultdict(float)
    for r in tr.of("sync"):
        f = r.fields()
        worst[int(f["hops"])] = max(worst[int(f["hops"])], abs(float(f["err_ms"])))
    missed = sum(r.fields().get("reason") in ("window", "timeout") for r in tr.of("rx_missed"))
    row = "  ".join(f"h{h}:{e:.3f}" for h, e in sorted(worst.items()))
    print(f"jitter {jitter:.1f} ms -> worst offset (ms) {row}; missed windows {missed}")
