"""Beacon-flooding time synchronization and receive-window guards."""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .phy import RadioConfig, time_on_air

TICK_MS = 0.032
BEACON_BYTES = 5
MAX_DRIFT_PPM = 100.0


@dataclass(frozen=True)
class SyncBeacon:
    source: int
    hops: int
    delay_ticks: int

    @property
    def delay_ms(self) -> float:
        return self.delay_ticks * TICK_MS

    def encode(self) -> bytes:
        return struct.pack(">HBH", self.source, self.hops, self.delay_ticks)

    @classmethod
    def decode(cls, raw: bytes) -> "SyncBeacon":
        if len(raw) != BEACON_BYTES:
            raise ValueError(f"beacon must be {BEACON_BYTES} bytes, got {len(raw)}")
        return cls(*struct.unpack(">HBH", raw))


def delay_tick_count(cfg: RadioConfig) -> int:
    """Number of distinct delay ticks that fit inside one symbol."""
    return int(cfg.symbol_ms / TICK_MS + 1e-9)


def make_beacon(source: int, hops: int, cfg: RadioConfig, rng: np.random.Generator) -> SyncBeacon:
    return SyncBeacon(source, hops, int(rng.integers(0, delay_tick_count(cfg))))


def beacon_airtime(cfg: RadioConfig) -> float:
    return time_on_air(cfg, BEACON_BYTES)


def elapsed_since_sender(t_beacon_ms: float, t_node_ms: float, t_delay_ms: float) -> float:
    """Time between the sender's own sync instant and the end of our reception."""
    return t_beacon_ms + t_node_ms + t_delay_ms


@dataclass(frozen=True)
class ClockState:
    """A node's view of network time.

    ``offset_ms`` is the error of the local estimate at ``last_sync_ms`` (true
    time); afterwards the estimate runs at ``1 + drift_ppm * 1e-6``.
    """

    drift_ppm: float = 0.0
    offset_ms: float = 0.0
    last_sync_ms: float = 0.0
    guard_ms: float = 5.0
    synced: bool = False

    def __post_init__(self) -> None:
        if self.guard_ms < 0:
            raise ValueError("guard must be non-negative")
        if abs(self.drift_ppm) > MAX_DRIFT_PPM:
            raise ValueError(f"drift {self.drift_ppm} ppm exceeds {MAX_DRIFT_PPM}")

    def local_time(self, true_ms: float) -> float:
        return true_ms + self.offset_ms + (true_ms - self.last_sync_ms) * self.drift_ppm * 1e-6

    def error(self, true_ms: float) -> float:
        return self.local_time(true_ms) - true_ms

    def true_time(self, local_ms: float) -> float:
        rate = 1.0 + self.drift_ppm * 1e-6
        return self.last_sync_ms + (local_ms - self.offset_ms - self.last_sync_ms) / rate


def apply_sync(clock: ClockState, beacon: SyncBeacon, t_beacon_ms: float, t_node_ms: float,
               sender_epoch_ms: float, rx_end_true_ms: float, max_hops: int = 254) -> ClockState:
    """Correct ``clock`` on reception of ``beacon``.

    ``sender_epoch_ms`` is the sender's network-time reading at its own sync
    instant; the receiver's estimate at ``rx_end_true_ms`` becomes that epoch
    plus the nominal elapsed time.  Beacons claiming more than ``max_hops``
    hops are stale and leave the clock untouched.
    """
    if beacon.hops > max_hops:
        return clock
    estimate = sender_epoch_ms + elapsed_since_sender(t_beacon_ms, t_node_ms, beacon.delay_ms)
    return replace(clock, offset_ms=estimate - rx_end_true_ms, last_sync_ms=rx_end_true_ms, synced=True)


def rx_window(clock: ClockState, nominal_start_ms: float, nominal_len_ms: float) -> tuple[float, float]:
    """Receive window widened by the guard on both sides: (start, length)."""
    return nominal_start_ms - clock.guard_ms, nominal_len_ms + 2 * clock.guard_ms

