"""Airtime, per-bit energy and battery projections across spreading factors.

Run: python3 demos/airtime_energy.py
"""

from hybridmesh import phy

profile = phy.PowerProfile()

print("SF  ToA 8B (ms)  ToA 64B (ms)  E_tx (mJ/bit)  E_rx (uJ/bit)  3-hop (mJ/bit)")
for sf in range(7, 13):
    cfg = phy.RadioConfig(sf=sf, tx_power_dbm=20)
    print(f"{sf:>2}  {phy.time_on_air(cfg, 8):>11.3f}  {phy.time_on_air(cfg, 64):>12.3f}  "
          f"{phy.energy_tx_per_bit(cfg, profile, 8):>13.4f}  {phy.energy_rx_per_bit(cfg, profile, 8):>13.3f}  "
          f"{phy.multi_hop_energy_per_bit(3, cfg, profile, 8):>14.4f}")

# A 64-byte SF7 frame has to fit in one 125 ms slot.
slot_fill = phy.time_on_air(phy.RadioConfig(sf=7), 64) / 125.0
print(f"\n64-byte SF7 frame fills {slot_fill:.0%} of a 125 ms slot")

print("\nBattery life on 2500 mAh:")
for ua in (25, 33, 56, 74):
    print(f"  {ua:>3} uA -> {phy.battery_life(ua, 2500):5.2f} years")
