"""Shared radio medium: who hears a frame, and whether it survives."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import phy
from .timesync import TICK_MS

OK, CRC_ERROR, COLLISION, LOST, BELOW, FILTERED = "ok", "crc_error", "collision", "loss", "sensitivity", "filtered"


@dataclass
class Transmission:
    txid: int
    sender: int
    t0: float
    t1: float
    kind: str          # "data", "beacon" or "aloha"
    dest: int | None   # None for broadcasts
    sf: int
    tx_power_dbm: float
    frame: object = None
    aborted: bool = False

    def overlaps(self, other: "Transmission") -> bool:
        return other.t0 < self.t1 and other.t1 > self.t0


@dataclass(frozen=True)
class Outcome:
    kind: str
    rssi_dbm: float = -math.inf
    interferer: int | None = None


@dataclass
class Medium:
    positions: Mapping[int, tuple[float, float]]
    channel: phy.ChannelModel
    whitelist: Mapping[int, set[int]] | None = None
    link_loss: float = 0.0
    corruption_prob: float = 0.0
    sf_orthogonal: bool = False
    gateway: int | None = None

    def distance(self, a: int, b: int) -> float:
        (xa, ya), (xb, yb) = self.positions[a], self.positions[b]
        return max(math.hypot(xa - xb, ya - yb), 1.0)

    def allowed(self, listener: int, sender: int) -> bool:
        """Firmware filter: with a whitelist, only listed neighbours are decoded or heard."""
        if self.whitelist is None or listener == self.gateway or sender == self.gateway:
            return True
        return sender in self.whitelist.get(listener, ())

    def mean_rssi(self, sender: int, listener: int, tx_power_dbm: float) -> float:
        return phy.mean_rssi(self.distance(sender, listener), tx_power_dbm, self.channel)

    def feasible(self, sender: int, listener: int, tx_power_dbm: float, sf: int) -> bool:
        if not self.allowed(listener, sender):
            return False
        return self.mean_rssi(sender, listener, tx_power_dbm) >= phy.sensitivity(sf, self.channel)

    def links(self, nodes: Iterable[int], tx_power: Mapping[int, float], sf: int) -> dict[int, set[int]]:
        """Symmetric link graph: both directions must close at the given powers."""
        nodes = sorted(nodes)
        out: dict[int, set[int]] = {n: set() for n in nodes}
        for i, a in enumerate(nodes):
            for b in nodes[i + 1:]:
                if self.feasible(a, b, tx_power[a], sf) and self.feasible(b, a, tx_power[b], sf):
                    out[a].add(b)
                    out[b].add(a)
        return out

    def _interferes(self, other: Transmission, tx: Transmission, listener: int) -> bool:
        if other.txid == tx.txid or other.sender in (tx.sender, listener) or not tx.overlaps(other):
            return False
        if self.sf_orthogonal and other.sf != tx.sf:
            return False
        if not self.allowed(listener, other.sender):
            return False
        # Only energy above the receiver's floor at the tuned SF can destroy the frame.
        return self.mean_rssi(other.sender, listener, other.tx_power_dbm) >= phy.sensitivity(tx.sf, self.channel)

    def deliver(self, tx: Transmission, listeners: Iterable[int], concurrent: Iterable[Transmission],
                rng: np.random.Generator) -> dict[int, Outcome]:
        """Outcome of ``tx`` at each listener whose receive window covered it."""
        concurrent = list(concurrent)
        sens = phy.sensitivity(tx.sf, self.channel)
        out: dict[int, Outcome] = {}
        for lst in sorted(listeners):
            if not self.allowed(lst, tx.sender):
                out[lst] = Outcome(FILTERED)
                continue
            rssi = self.mean_rssi(tx.sender, lst, tx.tx_power_dbm)
            if self.channel.rssi_noise_sigma_db > 0:
                rssi += float(rng.normal(0.0, self.channel.rssi_noise_sigma_db))
            if rssi < sens:
                out[lst] = Outcome(BELOW, rssi)
                continue
            hit = [o for o in concurrent if self._interferes(o, tx, lst)]
            if hit and tx.kind == "beacon" and all(o.kind == "beacon" for o in hit):
                # Flooded beacons carry the same content; the receiver locks onto
                # the earliest one unless another starts within one clock tick.
                if all(o.t0 - tx.t0 >= TICK_MS for o in hit):
                    hit = []
            if hit:
                out[lst] = Outcome(COLLISION, rssi, min(o.sender for o in hit))
                continue
            if self.link_loss and rng.random() < self.link_loss:
                out[lst] = Outcome(LOST, rssi)
                continue
            if tx.kind != "beacon" and self.corruption_prob and rng.random() < self.corruption_prob:
                out[lst] = Outcome(CRC_ERROR, rssi)
                continue
            out[lst] = Outcome(OK, rssi)
        return out


def medium_deliver(tx: Transmission, listeners: Iterable[int], medium: Medium,
                   concurrent: Iterable[Transmission] = (), rng: np.random.Generator | None = None) -> dict[int, Outcome]:
    """Functional form of :meth:`Medium.deliver`."""
    return medium.deliver(tx, listeners, concurrent, rng if rng is not None else np.random.default_rng(0))


def flip_bit(raw: bytes, bit: int) -> bytes:
    buf = bytearray(raw)
    buf[bit // 8] ^= 1 << (bit % 8)
    return bytes(buf)
