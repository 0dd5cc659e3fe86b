"""LoRa physical-layer arithmetic: airtime, energy per bit, path loss, battery life.

All durations are milliseconds, powers milliwatts, currents mA or uA as named.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised for an invalid radio, power or channel configuration."""


VALID_BANDWIDTHS = (125_000, 250_000, 500_000)
TX_POWER_RANGE_DBM = (-9, 22)

DEFAULT_SENSITIVITY_DBM = {7: -124.0, 8: -127.0, 9: -130.0, 10: -133.0, 11: -135.0, 12: -148.0}

# SX1262-class consumption anchors (dBm -> mW); interpolated linearly in between.
_P_CONS_ANCHORS = {-9: 50.0, 0: 80.0, 10: 130.0, 15: 190.0, 18: 239.25, 20: 389.4, 22: 420.0}


def _default_p_cons() -> dict[int, float]:
    keys = sorted(_P_CONS_ANCHORS)
    vals = [_P_CONS_ANCHORS[k] for k in keys]
    return {p: float(np.interp(p, keys, vals)) for p in range(TX_POWER_RANGE_DBM[0], TX_POWER_RANGE_DBM[1] + 1)}


@dataclass(frozen=True)
class RadioConfig:
    sf: int = 7
    bw: int = 125_000
    cr: int = 1
    preamble_symbols: int = 8
    crc_on: bool = True
    explicit_header: bool = True
    tx_power_dbm: int = 14

    def __post_init__(self) -> None:
        if not 6 <= self.sf <= 12:
            raise ConfigError(f"spreading factor {self.sf} outside 6..12")
        if self.bw not in VALID_BANDWIDTHS:
            raise ConfigError(f"bandwidth {self.bw} Hz not one of {VALID_BANDWIDTHS}")
        if not 1 <= self.cr <= 4:
            raise ConfigError(f"coding rate index {self.cr} outside 1..4")
        if self.preamble_symbols < 6:
            raise ConfigError("preamble must be at least 6 symbols")
        lo, hi = TX_POWER_RANGE_DBM
        if not lo <= self.tx_power_dbm <= hi:
            raise ConfigError(f"tx power {self.tx_power_dbm} dBm outside [{lo}, {hi}]")

    @property
    def symbol_ms(self) -> float:
        return (2 ** self.sf) / self.bw * 1000.0

    @property
    def low_data_rate(self) -> bool:
        return self.sf >= 11 and self.bw == 125_000


@dataclass(frozen=True)
class PowerProfile:
    """Electrical consumption figures for one node.

    ``p_cons_tx`` is the chip-level consumed power per transmit setting used by
    the per-bit energy model; ``p_rx_mw`` its receive counterpart.  The ``i_*``
    currents are board-level draws used by the simulator's charge ledger.
    """

    p_cons_tx: dict[int, float] = field(default_factory=_default_p_cons)
    p_rx_mw: float = 15.2
    i_sleep_ua: float = 25.0
    i_lora_rx_ma: float = 12.5
    i_lora_tx_ma: float = 72.5
    i_ant_tx_ma: float = 10.0
    i_ant_rx_ma: float = 10.0
    supply_v: float = 3.3
    tx_ref_dbm: int = 18

    def __post_init__(self) -> None:
        scalars = (self.p_rx_mw, self.i_sleep_ua, self.i_lora_rx_ma, self.i_lora_tx_ma,
                   self.i_ant_tx_ma, self.i_ant_rx_ma, self.supply_v)
        if any(v <= 0 for v in scalars) or any(v <= 0 for v in self.p_cons_tx.values()):
            raise ConfigError("power profile values must be strictly positive")

    def tx_current_ma(self, tx_power_dbm: int) -> float:
        # Board current at the reference setting, scaled by the chip's consumption ratio.
        if tx_power_dbm == self.tx_ref_dbm or tx_power_dbm not in self.p_cons_tx \
                or self.tx_ref_dbm not in self.p_cons_tx:
            return self.i_lora_tx_ma
        return self.i_lora_tx_ma * self.p_cons_tx[tx_power_dbm] / self.p_cons_tx[self.tx_ref_dbm]


@dataclass(frozen=True)
class ChannelModel:
    path_loss_exponent: float = 3.0
    reference_loss_db: float = 40.0
    sensitivity_dbm: dict[int, float] = field(default_factory=lambda: dict(DEFAULT_SENSITIVITY_DBM))
    rssi_noise_sigma_db: float = 0.0

    def __post_init__(self) -> None:
        if self.path_loss_exponent <= 0:
            raise ConfigError("path-loss exponent must be positive")
        if self.rssi_noise_sigma_db < 0:
            raise ConfigError("rssi noise sigma must be non-negative")
        sfs = sorted(self.sensitivity_dbm)
        for a, b in zip(sfs, sfs[1:]):
            if self.sensitivity_dbm[b] > self.sensitivity_dbm[a]:
                raise ConfigError("sensitivity must be non-increasing in SF")


def payload_symbols(cfg: RadioConfig, payload_bytes: int) -> int:
    """Number of payload symbols (including the 8 fixed header symbols)."""
    if not 0 <= payload_bytes <= 255:
        raise ConfigError(f"payload {payload_bytes} B outside 0..255")
    de = 1 if cfg.low_data_rate else 0
    ih = 0 if cfg.explicit_header else 1
    crc = 1 if cfg.crc_on else 0
    num = 8 * payload_bytes - 4 * cfg.sf + 28 + 16 * crc - 20 * ih
    den = 4 * (cfg.sf - 2 * de)
    return 8 + max(math.ceil(num / den) * (cfg.cr + 4), 0)


def time_on_air(cfg: RadioConfig, payload_bytes: int) -> float:
    """Frame airtime in ms: preamble plus payload symbols."""
    n_sym = cfg.preamble_symbols + 4.25 + payload_symbols(cfg, payload_bytes)
    return n_sym * cfg.symbol_ms


def energy_tx_per_bit(cfg: RadioConfig, profile: PowerProfile, payload_bytes: int) -> float:
    """Transmit energy in mJ per payload bit."""
    if payload_bytes <= 0:
        raise ConfigError("per-bit energy undefined for an empty payload")
    try:
        p_cons = profile.p_cons_tx[cfg.tx_power_dbm]
    except KeyError:
        raise ConfigError(f"no consumed-power entry for {cfg.tx_power_dbm} dBm") from None
    n_sym = payload_symbols(cfg, payload_bytes) + cfg.preamble_symbols + 4.25
    # mW * s = mJ
    return p_cons * n_sym * 2 ** cfg.sf / (8 * payload_bytes * cfg.bw)


def energy_rx_per_bit(cfg: RadioConfig, profile: PowerProfile, payload_bytes: int) -> float:
    """Receive energy in uJ per payload bit."""
    if payload_bytes <= 0:
        raise ConfigError("per-bit energy undefined for an empty payload")
    # mW * ms = uJ
    return profile.p_rx_mw * time_on_air(cfg, payload_bytes) / (8 * payload_bytes)


def multi_hop_energy_per_bit(hops: int, cfg: RadioConfig, profile: PowerProfile,
                             payload_bytes: int) -> float:
    """End-to-end energy in mJ/bit over ``hops`` links; the source does not receive."""
    if hops < 1:
        raise ValueError("hops must be >= 1")
    e_tx = energy_tx_per_bit(cfg, profile, payload_bytes)
    e_rx = energy_rx_per_bit(cfg, profile, payload_bytes) / 1000.0
    return hops * e_tx + (hops - 1) * e_rx


def mean_rssi(distance_m: float, tx_power_dbm: float, channel: ChannelModel) -> float:
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    return tx_power_dbm - channel.reference_loss_db - 10 * channel.path_loss_exponent * math.log10(distance_m)


def rssi_at(distance_m: float, cfg: RadioConfig, channel: ChannelModel,
            rng: np.random.Generator | None = None) -> float:
    """Log-distance RSSI in dBm with optional Gaussian jitter."""
    rssi = mean_rssi(distance_m, cfg.tx_power_dbm, channel)
    if channel.rssi_noise_sigma_db > 0:
        if rng is None:
            raise ValueError("a seeded generator is required when rssi noise is enabled")
        rssi += float(rng.normal(0.0, channel.rssi_noise_sigma_db))
    return rssi


def sensitivity(sf: int, channel: ChannelModel) -> float:
    try:
        return channel.sensitivity_dbm[sf]
    except KeyError:
        raise ConfigError(f"no sensitivity entry for SF{sf}") from None


def link_feasible(rssi_dbm: float, cfg: RadioConfig, channel: ChannelModel) -> bool:
    return rssi_dbm >= sensitivity(cfg.sf, channel)


HOURS_PER_YEAR = 365.25 * 24


def battery_life(avg_current_ua: float, capacity_mah: float) -> float:
    """Projected life in years; ``math.inf`` for a zero draw."""
    if capacity_mah <= 0 or avg_current_ua < 0:
        raise ValueError("capacity must be positive and current non-negative")
    if avg_current_ua == 0:
        return math.inf
    return capacity_mah * 1000.0 / avg_current_ua / HOURS_PER_YEAR


# ANT has no published airtime in our sources; a fixed per-packet burst is assumed.
ANT_PACKET_MS = 1.0


def ant_packet_charge_mc(profile: PowerProfile, airtime_ms: float = ANT_PACKET_MS) -> float:
    return profile.i_ant_tx_ma * airtime_ms / 1000.0
