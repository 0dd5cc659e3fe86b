"""Per-node LoRa mesh protocol: setup / data passing / sleep, failure reaction, adaptive power."""

from __future__ import annotations

import binascii
import math
import struct
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum

from .routing import RoutingTable
from .tdma import RECV, SEND, Action, Schedule
from .timesync import ClockState, SyncBeacon, apply_sync

DATA_HEADER = struct.Struct(">HHHB")
FRAME_BYTES = 64
PAYLOAD_BYTES = FRAME_BYTES - DATA_HEADER.size - 2


class Phase(str, Enum):
    SETUP = "SETUP"
    DATA_PASSING = "DATA_PASSING"
    SLEEP = "SLEEP"


class RadioMode(str, Enum):
    TX = "TX"
    RX = "RX"
    SLEEP = "SLEEP"


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE."""
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True)
class DataPacket:
    origin: int
    seq: int
    hop_src: int
    payload: bytes = bytes(PAYLOAD_BYTES)
    crc: int | None = None

    def __post_init__(self) -> None:
        if len(self.payload) > 255:
            raise ValueError("payload longer than 255 bytes")
        if DATA_HEADER.size + len(self.payload) + 2 > 255:
            raise ValueError("frame exceeds the 255-byte LoRa payload limit")
        if self.crc is None:
            object.__setattr__(self, "crc", crc16(self._body()))

    def _body(self) -> bytes:
        return DATA_HEADER.pack(self.origin, self.seq, self.hop_src, len(self.payload)) + self.payload

    def encode(self) -> bytes:
        return self._body() + struct.pack(">H", self.crc)

    @property
    def wire_size(self) -> int:
        return DATA_HEADER.size + len(self.payload) + 2

    def relayed_by(self, node: int) -> "DataPacket":
        return DataPacket(self.origin, self.seq, node, self.payload)

    @staticmethod
    def decode(raw: bytes) -> tuple["DataPacket", bool]:
        """Parse a frame; the flag reports whether the CRC matched."""
        if len(raw) < DATA_HEADER.size + 2:
            raise ValueError(f"frame of {len(raw)} bytes is shorter than header plus crc")
        origin, seq, hop_src, n = DATA_HEADER.unpack_from(raw)
        if DATA_HEADER.size + n + 2 > len(raw):
            raise ValueError(f"length field {n} overruns a {len(raw)}-byte frame")
        payload = raw[DATA_HEADER.size:DATA_HEADER.size + n]
        (crc,) = struct.unpack_from(">H", raw, DATA_HEADER.size + n)
        ok = crc16(raw[:DATA_HEADER.size + n]) == crc and len(payload) == n
        return DataPacket(origin, seq, hop_src, bytes(payload), crc), ok


@dataclass(frozen=True)
class AllParams:
    floor_dbm: float = -120.0
    margin_db: float = 10.0
    step_db: int = 3
    min_dbm: int = -9
    max_dbm: int = 22


def next_tx_power(power_dbm: int, last_rssi_dbm: float, p: AllParams) -> int:
    """One controller step toward the lowest power keeping RSSI >= floor + margin."""
    target = p.floor_dbm + p.margin_db
    if last_rssi_dbm < target:
        power_dbm += p.step_db
    elif last_rssi_dbm - p.step_db >= target:
        power_dbm -= p.step_db
    return max(p.min_dbm, min(p.max_dbm, power_dbm))


# -- events -------------------------------------------------------------------

@dataclass(frozen=True)
class BeaconFrame:
    """A sync/reset beacon as flooded, plus the sender's epoch reading.

    ``epoch_ms`` is the sender's network-time reading at its own sync instant.
    The hub sends at once, so its reading is taken at send time less the
    nominal node delay and the back-off; the receiver adds the elapsed-time
    estimate back on.
    """

    beacon: SyncBeacon
    reset: bool = False
    epoch_ms: float = 0.0


@dataclass(frozen=True)
class CycleStart:
    cycle: int
    beacon_ms: float       # nominal network time of the hub's beacon
    hop_min_ms: float      # shortest possible per-hop flood latency


@dataclass(frozen=True)
class BeaconIn:
    frame: BeaconFrame
    rx_end_ms: float       # true time, used only to place the corrected clock
    airtime_ms: float
    delay_ticks: int       # back-off this node will use for its own rebroadcast


@dataclass(frozen=True)
class BeaconTimeout:
    pass


@dataclass(frozen=True)
class ScheduleIn:
    schedule: Schedule
    routing: RoutingTable


@dataclass(frozen=True)
class DataStart:
    nominal_ms: float


@dataclass(frozen=True)
class SlotBoundary:
    index: int
    nominal_ms: float


@dataclass(frozen=True)
class PacketIn:
    raw: bytes
    rssi_dbm: float


@dataclass(frozen=True)
class DataEnd:
    pass


@dataclass(frozen=True)
class RssiFeedback:
    rssi_dbm: float


# -- actions ------------------------------------------------------------------

@dataclass(frozen=True)
class Transmit:
    frame: object
    dest: int | None
    at_local_ms: float | None = None
    after_ms: float = 0.0  # used when at_local_ms is None
    tx_power_dbm: int | None = None


@dataclass(frozen=True)
class Listen:
    start_local_ms: float | None  # None: right away
    length_ms: float              # inf: until a frame arrives or a timeout closes it


@dataclass(frozen=True)
class Sleep:
    pass


@dataclass(frozen=True)
class Log:
    event: str
    detail: str = ""


@dataclass
class NodeState:
    id: int
    hub: int
    clock: ClockState = field(default_factory=ClockState)
    phase: Phase = Phase.SETUP
    routing: RoutingTable | None = None
    schedule_view: list[Action] = field(default_factory=list)
    battery_mc: float = 0.0
    queue: deque = field(default_factory=deque)
    radio_mode: RadioMode = RadioMode.SLEEP
    tx_power_dbm: int = 14
    rssi_history: dict[int, float] = field(default_factory=dict)
    missed_downlinks: int = 0

    # protocol bookkeeping
    seq: int = 0
    hops: int | None = None
    data_start_ms: float = 0.0
    slot_ms: float = 125.0
    t_node_ms: float = 2.0
    reset_pending: bool = False
    alert: bool = False
    heard_beacon: bool = False
    expected_from: Counter = field(default_factory=Counter)
    got_from: Counter = field(default_factory=Counter)
    crc_errors: int = 0
    adaptive_power: bool = False
    all_params: AllParams = field(default_factory=AllParams)
    packets_per_cycle: int = 1
    forwards_to_gateway: bool = False
    drift_allow_ms: float = 0.0

    @property
    def is_hub(self) -> bool:
        return self.id == self.hub

    @property
    def scheduled(self) -> bool:
        return bool(self.schedule_view)

    def new_packet(self) -> DataPacket:
        pkt = DataPacket(self.id, self.seq & 0xFFFF, self.id)
        self.seq += 1
        return pkt

    def silent_sources(self) -> list[int]:
        return sorted(src for src, n in self.expected_from.items() if n and not self.got_from[src])

    def step(self, event) -> list:
        """Advance on ``event``; returns the actions the radio should carry out."""
        return _HANDLERS[type(event)](self, event)


def enter_phase(s: NodeState, phase: Phase) -> list:
    if s.phase is phase:
        return []
    prev, s.phase = s.phase, phase
    return [Log("phase_change", f"{prev.value}->{phase.value}")]


def _on_cycle_start(s: NodeState, ev: CycleStart) -> list:
    s.heard_beacon = False
    if s.is_hub:
        return []
    if not s.clock.synced or s.hops is None:
        return [Listen(None, math.inf)]
    # Open early enough to absorb accumulated drift plus the guard.
    start = ev.beacon_ms + (s.hops - 1) * ev.hop_min_ms - s.clock.guard_ms - s.drift_allow_ms
    return [Listen(start, math.inf)]


def _on_beacon(s: NodeState, ev: BeaconIn) -> list:
    if s.heard_beacon or s.is_hub:
        return []
    s.heard_beacon = True
    beacon = ev.frame.beacon
    s.clock = apply_sync(s.clock, beacon, ev.airtime_ms, s.t_node_ms, ev.frame.epoch_ms, ev.rx_end_ms)
    s.hops = beacon.hops + 1
    s.missed_downlinks = 0
    out: list = [Sleep(), Log("sync", f"hops={s.hops};src={beacon.source}")]
    if ev.frame.reset:
        out += [Log("reset", f"src={beacon.source}")] + enter_phase(s, Phase.SETUP)
        s.alert = False
    relay = BeaconFrame(SyncBeacon(s.id, min(s.hops, 0xFF), ev.delay_ticks), ev.frame.reset)
    out.append(Transmit(relay, None, after_ms=s.t_node_ms))
    return out


def _on_beacon_timeout(s: NodeState, ev: BeaconTimeout) -> list:
    if s.heard_beacon or s.is_hub:
        return []
    s.missed_downlinks += 1
    return [Log("rx_missed", "kind=beacon;reason=timeout"), Sleep()]


def _on_schedule(s: NodeState, ev: ScheduleIn) -> list:
    s.routing = ev.routing
    s.hops = ev.routing.own_hops
    s.schedule_view = ev.schedule.row(s.id)
    s.slot_ms = ev.schedule.slot_duration_ms
    s.expected_from = Counter(a.peer for a in s.schedule_view if a.kind == RECV)
    s.alert = False
    s.reset_pending = False
    return enter_phase(s, Phase.SETUP)


def _on_data_start(s: NodeState, ev: DataStart) -> list:
    """Generate this cycle's own packets and enter data passing."""
    out: list = []
    if not s.is_hub or s.forwards_to_gateway:
        for _ in range(s.packets_per_cycle):
            pkt = s.new_packet()
            s.queue.append(pkt)
            out.append(Log("gen", f"seq={pkt.seq}"))
    if s.scheduled and s.clock.synced:
        s.data_start_ms = ev.nominal_ms
        s.got_from = Counter()
        out += enter_phase(s, Phase.DATA_PASSING)
    return out


def _on_slot(s: NodeState, ev: SlotBoundary) -> list:
    if s.phase is not Phase.DATA_PASSING or ev.index >= len(s.schedule_view):
        return []
    act = s.schedule_view[ev.index]
    if act.kind == RECV:
        return [Listen(ev.nominal_ms - s.clock.guard_ms, s.slot_ms + 2 * s.clock.guard_ms)]
    if act.kind != SEND:
        return []
    if not s.alert:
        silent = s.silent_sources()
        if silent:
            # A child went quiet: stop forwarding and listen for instructions.
            s.alert = True
            s.missed_downlinks += 1
            return [Log("downlink_silent", "srcs=" + ",".join(map(str, silent))),
                    Listen(ev.nominal_ms, s.slot_ms)]
    if s.alert:
        return [Listen(ev.nominal_ms, s.slot_ms)]
    if not s.queue:
        return [Log("slot_idle", f"slot={ev.index}")]
    pkt = s.queue.popleft().relayed_by(s.id)
    return [Transmit(pkt, act.peer, at_local_ms=ev.nominal_ms, tx_power_dbm=s.tx_power_dbm)]


def _on_packet(s: NodeState, ev: PacketIn) -> list:
    pkt, ok = DataPacket.decode(ev.raw)
    s.got_from[pkt.hop_src] += 1  # the sender is alive even if the frame is damaged
    if not ok:
        s.crc_errors += 1
        return [Sleep(), Log("rx_crc_error", f"origin={pkt.origin};seq={pkt.seq};from={pkt.hop_src}")]
    s.rssi_history[pkt.hop_src] = ev.rssi_dbm
    if s.is_hub and not s.forwards_to_gateway:
        return [Sleep(), Log("deliver", f"origin={pkt.origin};seq={pkt.seq}")]
    s.queue.append(pkt)
    return [Sleep()]


def _on_data_end(s: NodeState, ev: DataEnd) -> list:
    if s.phase is not Phase.DATA_PASSING:
        return []
    out: list = []
    silent = s.silent_sources()
    if silent and not s.alert:
        s.alert = True
        s.missed_downlinks += 1
        out.append(Log("downlink_silent", "srcs=" + ",".join(map(str, silent))))
    if s.is_hub and silent:
        s.reset_pending = True
    out += enter_phase(s, Phase.SLEEP)
    out.append(Sleep())
    return out


def _on_feedback(s: NodeState, ev: RssiFeedback) -> list:
    if not s.adaptive_power:
        return []
    new = next_tx_power(s.tx_power_dbm, ev.rssi_dbm, s.all_params)
    if new == s.tx_power_dbm:
        return []
    old, s.tx_power_dbm = s.tx_power_dbm, new
    return [Log("tx_power", f"from={old};to={new};rssi={ev.rssi_dbm:.2f}")]


def adapt_tx_power(state: NodeState, last_rssi_dbm: float) -> NodeState:
    state.tx_power_dbm = next_tx_power(state.tx_power_dbm, last_rssi_dbm, state.all_params)
    return state


def detect_failure_and_reset(state: NodeState) -> tuple[NodeState, bool]:
    """End-of-data-phase failure check; the flag asks the hub to flood a reset."""
    _on_data_end(state, DataEnd())
    return state, state.is_hub and state.reset_pending


_HANDLERS = {
    CycleStart: _on_cycle_start,
    BeaconIn: _on_beacon,
    BeaconTimeout: _on_beacon_timeout,
    ScheduleIn: _on_schedule,
    DataStart: _on_data_start,
    SlotBoundary: _on_slot,
    PacketIn: _on_packet,
    DataEnd: _on_data_end,
    RssiFeedback: _on_feedback,
}
