"""Deterministic discrete-event simulation of the hybrid mesh.

The engine owns time, the shared medium, clocks and the charge ledger.  Every
protocol decision comes from :class:`hybridmesh.node.NodeState` step calls or
the SRSN transition functions; the engine only turns their actions into radio
activity and feeds the results back as events.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import node as nd
from . import phy, srsn
from .medium import BELOW, COLLISION, CRC_ERROR, FILTERED, LOST, OK, Medium, Transmission, flip_bit
from .routing import collect_routing_tables, flood_hellos, sorted_nodelist
from .scenario import Scenario
from .tdma import GATEWAY, SLEEP, Schedule, SchedulingError, build_schedule
from .timesync import BEACON_BYTES, ClockState, SyncBeacon, beacon_airtime, delay_tick_count
from .trace import EventTrace

LORA_OFF, LORA_SLEEP, LORA_RX, LORA_TX = "OFF", "SLEEP", "RX", "TX"
ANT_OFF, ANT_RX, ANT_TX = "off", "RX", "TX"
HELLO_BYTES = 4
AIR_MEMORY_MS = 15_000.0  # longest frame we care about is under 3 s


@dataclass(frozen=True)
class AlohaSource:
    """Unslotted reference sender: one frame per period straight to the gateway."""

    period_ms: float
    cfg: phy.RadioConfig
    poisson: bool = True
    frame_bytes: int = nd.FRAME_BYTES

    @property
    def airtime_ms(self) -> float:
        return phy.time_on_air(self.cfg, self.frame_bytes)

    def first_arrival(self, rng: np.random.Generator) -> float:
        return float(rng.exponential(self.period_ms)) if self.poisson else float(rng.uniform(0, self.period_ms))

    def next_gap(self, rng: np.random.Generator) -> float:
        return float(rng.exponential(self.period_ms)) if self.poisson else self.period_ms


def aloha_reference_node(period_ms: float, cfg_sf12: phy.RadioConfig, poisson: bool = True) -> AlohaSource:
    return AlohaSource(period_ms, cfg_sf12, poisson)


@dataclass
class _Radio:
    """Engine-side physical state of one device."""

    id: int
    role: str
    cluster: int
    capacity_mc: float
    state: nd.NodeState | None = None
    alive: bool = True
    used_mc: float = 0.0
    lora: str = LORA_SLEEP
    lora_dbm: int = 0
    ant: str = ANT_OFF
    since: float = 0.0
    rx_since: float | None = None
    rx_until: float = 0.0
    tx: Transmission | None = None
    in_mesh: bool = False
    join_pending: bool = False
    feedback_rssi: float | None = None
    spoke_queue: deque = field(default_factory=deque)
    aloha_queue: deque = field(default_factory=deque)
    aloha_seq: int = 0

    @property
    def battery_fraction(self) -> float:
        return max(0.0, 1.0 - self.used_mc / self.capacity_mc)


class Simulator:
    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.sc = sc = scenario
        streams = np.random.SeedSequence(sc.seed.value).spawn(4)
        self.rng_channel, self.rng_clock, self.rng_proto, self.rng_traffic = (np.random.default_rng(s) for s in streams)
        self.radio = sc.radio_config()
        self.profile = sc.power_profile()
        self.channel = sc.channel_model()
        self.period = sc.traffic.cycle_period_s * 1000.0
        self.end_ms = self.period * sc.traffic.duration_cycles
        self.hub = sc.hub
        self.trace = EventTrace()
        self._heap: list = []
        self._seq = itertools.count()
        self._txid = itertools.count()
        self.air: list[Transmission] = []
        self.schedule: Schedule | None = None
        self.tables: dict = {}

        sy = sc.sync
        self.beacon_ms = beacon_airtime(self.radio)
        self.delay_ticks = delay_tick_count(self.radio)
        n_capable = sum(n.role != "aloha-ref" for n in sc.nodes)
        self.hop_min = self.beacon_ms + sy.t_node_ms - sy.t_node_jitter_ms
        hop_max = self.beacon_ms + sy.t_node_ms + sy.t_node_jitter_ms + self.radio.symbol_ms
        self.drift_allow = 2 * sy.drift_ppm * 1e-6 * self.period + n_capable * sy.t_node_jitter_ms
        self.beacon_phase = hop_max * (n_capable + 1) + sy.guard_ms + self.drift_allow

        positions = {n.id: (n.x, n.y) for n in sc.nodes}
        if sc.gateway is not None:
            positions[GATEWAY] = (sc.gateway.x, sc.gateway.y)
        self.medium = Medium(positions, self.channel, sc.whitelist_map(), sc.channel.link_loss,
                             sc.channel.corruption_prob, sc.channel.sf_orthogonal,
                             GATEWAY if sc.gateway is not None else None)
        self.aloha = AlohaSource(sc.traffic.aloha_period_s * 1000.0,
                                 sc.radio_config(sc.radio.aloha_tx_power_dbm, sc.radio.aloha_sf),
                                 sc.traffic.aloha_poisson)

        self.nodes: dict[int, _Radio] = {}
        for spec in sorted(sc.nodes, key=lambda n: n.id):
            r = _Radio(spec.id, spec.role, spec.cluster, spec.battery_mah * 3600.0)
            if spec.role != "aloha-ref":
                r.state = self._fresh_state(spec.id, synced=spec.id == self.hub)
                r.in_mesh = spec.role in ("hub", "mesh") and spec.cluster == 0
            self.nodes[spec.id] = r

        self.clusters: dict[int, srsn.SrsnState] = {}
        self.last_upload: dict[int, dict[int, float]] = {}
        poll_ms = sc.srsn.poll_period_s * 1000.0
        for k, members in sc.clusters().items():
            mesh_members = [n.id for n in sc.nodes if n.cluster == k and n.role == "mesh"]
            everyone = sorted(set(members) | set(mesh_members))
            st = srsn.SrsnState({m: 1.0 for m in everyone}, srsn.elect_hub({m: 1.0 for m in everyone}),
                                poll_ms, sc.srsn.timer_multiplier, sc.srsn.ams_threshold)
            self.clusters[k] = st
            self.last_upload[k] = {m: 0.0 for m in everyone}
            for m in everyone:
                self.nodes[m].in_mesh = m == st.hub

    # -- plumbing -------------------------------------------------------------
    def _fresh_state(self, node_id: int, synced: bool, seq: int = 0) -> nd.NodeState:
        sc, sy = self.sc, self.sc.sync
        drift = 0.0
        if node_id != self.hub and sy.drift_ppm > 0:
            drift = float(self.rng_clock.uniform(-sy.drift_ppm, sy.drift_ppm))
        r = sc.radio
        return nd.NodeState(
            node_id, self.hub,
            clock=ClockState(drift, 0.0, 0.0, sy.guard_ms, synced),
            battery_mc=sc.node(node_id).battery_mah * 3600.0,
            tx_power_dbm=r.tx_power_dbm,
            seq=seq,
            slot_ms=sc.traffic.slot_ms,
            t_node_ms=sy.t_node_ms,
            adaptive_power=r.adaptive_power,
            all_params=nd.AllParams(r.all_floor_dbm, r.all_margin_db, r.all_step_db, r.all_min_dbm, r.all_max_dbm),
            packets_per_cycle=sc.traffic.packets_per_cycle,
            forwards_to_gateway=node_id == self.hub and sc.traffic.hub_uplink,
            drift_allow_ms=self.drift_allow,
        )

    def push(self, t: float, kind: str, *args) -> None:
        heapq.heappush(self._heap, (t, next(self._seq), kind, args))

    def log(self, t: float, node: int, event: str, detail: str = "") -> None:
        self.trace.add(t, node, event, detail)

    def _current_ma(self, r: _Radio) -> float:
        p = self.profile
        lora = {LORA_OFF: 0.0, LORA_SLEEP: p.i_sleep_ua / 1000.0, LORA_RX: p.i_lora_rx_ma}.get(r.lora)
        if lora is None:
            lora = p.tx_current_ma(r.lora_dbm)
        ant = {ANT_OFF: 0.0, ANT_RX: p.i_ant_rx_ma, ANT_TX: p.i_ant_tx_ma}[r.ant]
        return lora + ant

    def _account(self, r: _Radio, t: float) -> None:
        dt = t - r.since
        if dt > 0:
            mc = self._current_ma(r) * dt / 1000.0
            if mc > 0:
                r.used_mc += mc
                self.log(t, r.id, "energy_delta_mc", f"mc={mc:.9f}")
        r.since = t

    def _set_mode(self, r: _Radio, t: float, lora: str | None = None, dbm: int | None = None,
                  ant: str | None = None) -> None:
        new_lora = r.lora if lora is None else lora
        new_dbm = r.lora_dbm if dbm is None else dbm
        new_ant = r.ant if ant is None else ant
        if (new_lora, new_dbm, new_ant) == (r.lora, r.lora_dbm, r.ant):
            return
        self._account(r, t)
        r.lora, r.lora_dbm, r.ant = new_lora, new_dbm, new_ant
        if new_lora == LORA_RX and r.rx_since is None:
            r.rx_since = t
        elif new_lora != LORA_RX:
            r.rx_since = None
        detail = f"lora={new_lora};ant={new_ant}"
        if new_lora == LORA_TX:
            detail += f";dbm={new_dbm}"
        self.log(t, r.id, "radio", detail)
        if r.used_mc >= r.capacity_mc and r.alive:
            self.log(t, r.id, "battery_depleted")
            self._kill(r, t)

    def _rx_open(self, r: _Radio, t: float, until: float) -> None:
        if not r.alive or r.lora == LORA_TX:
            return
        r.rx_until = max(r.rx_until, until) if r.lora == LORA_RX else until
        self._set_mode(r, t, LORA_RX)
        if math.isfinite(until):
            self.push(until, "rx_close", r.id)

    def _rx_stop(self, r: _Radio, t: float) -> None:
        r.rx_until = t
        if r.lora == LORA_RX:
            self._set_mode(r, t, LORA_SLEEP)

    # -- applying protocol actions -------------------------------------------
    def _apply(self, r: _Radio, t: float, actions: list) -> None:
        st = r.state
        for a in actions:
            if isinstance(a, nd.Log):
                detail = a.detail
                if a.event == "sync":
                    detail += f";err_ms={st.clock.error(t):.6f}"
                self.log(t, r.id, a.event, detail)
            elif isinstance(a, nd.Sleep):
                self._rx_stop(r, t)
            elif isinstance(a, nd.Listen):
                start = t if a.start_local_ms is None else max(t, st.clock.true_time(a.start_local_ms))
                if math.isinf(a.length_ms):
                    until = math.inf
                elif a.start_local_ms is None:
                    until = t + a.length_ms
                else:
                    until = st.clock.true_time(a.start_local_ms + a.length_ms)
                if start > t:
                    self.push(start, "rx_open", r.id, until)
                else:
                    self._rx_open(r, t, until)
            elif isinstance(a, nd.Transmit):
                if a.at_local_ms is not None:
                    start = max(t, st.clock.true_time(a.at_local_ms))
                else:
                    start = t + a.after_ms
                    if isinstance(a.frame, nd.BeaconFrame):
                        # A relay's reference is its own sync instant; the real
                        # node delay (nominal plus jitter) then elapses unmeasured.
                        a = replace(a, frame=replace(a.frame, epoch_ms=st.clock.local_time(t)))
                        j = self.sc.sync.t_node_jitter_ms
                        start += a.frame.beacon.delay_ms + (float(self.rng_proto.uniform(-j, j)) if j else 0.0)
                self.push(start, "tx_start", r.id, a)

    def _step(self, r: _Radio, t: float, event) -> None:
        self._apply(r, t, r.state.step(event))

    # -- transmissions --------------------------------------------------------
    def _tx_start(self, r: _Radio, t: float, a: nd.Transmit) -> None:
        if not r.alive or r.tx is not None:
            return
        if isinstance(a.frame, nd.BeaconFrame):
            frame = a.frame
            if r.id == self.hub:
                b = frame.beacon
                frame = replace(frame, epoch_ms=r.state.clock.local_time(t) - self.sc.sync.t_node_ms - b.delay_ms)
            kind, sf, dbm, nbytes = "beacon", self.radio.sf, self.radio.tx_power_dbm, BEACON_BYTES
            airtime = self.beacon_ms
        else:
            frame = a.frame.encode()
            aloha = r.role == "aloha-ref"
            kind = "aloha" if aloha else "data"
            cfg = self.aloha.cfg if aloha else self.radio
            sf, nbytes = cfg.sf, len(frame)
            dbm = a.tx_power_dbm if a.tx_power_dbm is not None else cfg.tx_power_dbm
            airtime = phy.time_on_air(cfg, nbytes)
        tx = Transmission(next(self._txid), r.id, t, t + airtime, kind, a.dest, sf, dbm, frame)
        r.tx = tx
        r.rx_until = t
        self._set_mode(r, t, LORA_TX, dbm)
        self.air.append(tx)
        dest = "bcast" if a.dest is None else a.dest
        self.log(t, r.id, "tx_start", f"kind={kind};dest={dest};bytes={nbytes};dbm={dbm};sf={sf}")
        self.push(tx.t1, "tx_end", tx)

    def _listening(self, r: _Radio, tx: Transmission) -> bool:
        return r.alive and r.lora == LORA_RX and r.rx_since is not None and r.rx_since <= tx.t0

    def _tx_end(self, t: float, tx: Transmission) -> None:
        if tx.aborted:
            return
        r = self.nodes[tx.sender]
        r.tx = None
        self.log(t, r.id, "tx_end", f"kind={tx.kind}")
        self._set_mode(r, t, LORA_SLEEP)
        self.air = [o for o in self.air if o.t1 > t - AIR_MEMORY_MS]
        concurrent = [o for o in self.air if tx.overlaps(o)]
        if tx.kind == "beacon":
            self._resolve_beacon(t, tx, concurrent)
        else:
            self._resolve_data(t, tx, concurrent)
        if r.role == "aloha-ref" and r.aloha_queue:
            self._tx_start(r, t, nd.Transmit(r.aloha_queue.popleft(), GATEWAY))

    def _resolve_beacon(self, t: float, tx: Transmission, concurrent: list[Transmission]) -> None:
        listeners = [n.id for n in self.nodes.values()
                     if n.in_mesh and n.id != self.hub and n.id != tx.sender and n.state is not None
                     and not n.state.heard_beacon and self._listening(n, tx)]
        outcomes = self.medium.deliver(tx, listeners, concurrent, self.rng_channel)
        for nid, out in outcomes.items():
            r = self.nodes[nid]
            if out.kind == OK:
                self.log(t, nid, "rx_ok", f"from={tx.sender};kind=beacon;rssi={out.rssi_dbm:.2f}")
                ticks = int(self.rng_proto.integers(0, self.delay_ticks))
                self._step(r, t, nd.BeaconIn(tx.frame, t, self.beacon_ms, ticks))
                if not r.state.scheduled and not tx.frame.reset and not r.join_pending:
                    r.join_pending = True
                    self.log(t, nid, "join_request")
            elif out.kind == COLLISION:
                self.log(t, nid, "collision", f"from={tx.sender};with={out.interferer};kind=beacon")

    def _resolve_data(self, t: float, tx: Transmission, concurrent: list[Transmission]) -> None:
        raw: bytes = tx.frame
        pkt, _ = nd.DataPacket.decode(raw)
        ident = f"from={tx.sender};origin={pkt.origin};seq={pkt.seq}"
        if tx.dest == GATEWAY:
            if self.medium.gateway is None:
                return
            out = self.medium.deliver(tx, [GATEWAY], concurrent, self.rng_channel)[GATEWAY]
            if out.kind == OK:
                self.log(t, GATEWAY, "rx_ok", f"{ident};kind={tx.kind};rssi={out.rssi_dbm:.2f}")
                self.log(t, GATEWAY, "deliver", f"origin={pkt.origin};seq={pkt.seq}")
            elif out.kind == CRC_ERROR:
                self.log(t, GATEWAY, "rx_crc_error", f"origin={pkt.origin};seq={pkt.seq};from={tx.sender}")
            elif out.kind == COLLISION:
                self.log(t, GATEWAY, "collision", f"{ident};with={out.interferer}")
            else:
                self.log(t, GATEWAY, "rx_missed", f"{ident};reason={out.kind}")
            return

        dest = self.nodes.get(tx.dest)
        if dest is None:
            return
        if not self._listening(dest, tx):
            reason = "dead" if not dest.alive else "busy" if dest.lora == LORA_TX else "window"
            self.log(t, dest.id, "rx_missed", f"{ident};reason={reason}")
            return
        out = self.medium.deliver(tx, [dest.id], concurrent, self.rng_channel)[dest.id]
        if out.kind in (OK, CRC_ERROR):
            if out.kind == CRC_ERROR:
                body_bits = len(pkt.payload) * 8
                bit = nd.DATA_HEADER.size * 8 + int(self.rng_channel.integers(body_bits))
                raw = flip_bit(raw, bit)
            else:
                self.log(t, dest.id, "rx_ok", f"{ident};kind=data;rssi={out.rssi_dbm:.2f}")
                self.nodes[tx.sender].feedback_rssi = out.rssi_dbm
            self._step(dest, t, nd.PacketIn(raw, out.rssi_dbm))
        elif out.kind == COLLISION:
            self.log(t, dest.id, "collision", f"{ident};with={out.interferer}")
        elif out.kind in (LOST, BELOW, FILTERED):
            self.log(t, dest.id, "rx_missed", f"{ident};reason={out.kind}")

    # -- cycle structure ------------------------------------------------------
    def _mesh_nodes(self) -> list[_Radio]:
        return [r for r in self.nodes.values() if r.in_mesh and r.alive and r.state is not None]

    def _on_cycle(self, t: float, c: int) -> None:
        for r in self._mesh_nodes():
            if r.feedback_rssi is not None:
                self._step(r, t, nd.RssiFeedback(r.feedback_rssi))
                r.feedback_rssi = None
        if self.sc.srsn.ams_enabled:
            for k in sorted(self.clusters):
                self._ams(t, k)

        hub = self.nodes[self.hub]
        causes = []
        if c == 0:
            causes.append("start")
        if hub.state.reset_pending:
            causes.append("silence")
        joiners = [r.id for r in self._mesh_nodes() if r.join_pending]
        if joiners:
            causes.append("join")
        reset = bool(causes)
        beacon_at = t + self.sc.sync.beacon_lead_ms
        expect_beacon = reset or self.sc.sync.enabled
        send_beacon = hub.alive and expect_beacon

        # Children cannot tell a dead hub from a lost beacon; they wake regardless.
        if expect_beacon:
            for r in self._mesh_nodes():
                if r.id == self.hub:
                    continue
                self._step(r, t, nd.CycleStart(c, beacon_at, self.hop_min))
                self.push(beacon_at + self.beacon_phase, "beacon_timeout", r.id)
        if hub.alive:
            data_at = beacon_at + self.beacon_phase
            if reset:
                hub.state.reset_pending = False
                self.log(t, self.hub, "reset", f"cycle={c};cause={'+'.join(causes)}")
                self._apply(hub, t, nd.enter_phase(hub.state, nd.Phase.SETUP))
                self.push(data_at, "setup", c)
                data_at += self.sc.traffic.setup_ms
            if send_beacon:
                self.push(beacon_at, "hub_beacon", reset)
            self.push(data_at, "data_start", data_at)
        if c + 1 < self.sc.traffic.duration_cycles:
            self.push(t + self.period, "cycle", c + 1)

    def _on_hub_beacon(self, t: float, reset: bool) -> None:
        hub = self.nodes[self.hub]
        ticks = int(self.rng_proto.integers(0, self.delay_ticks))
        frame = nd.BeaconFrame(SyncBeacon(self.hub, 0, ticks), reset)
        self._tx_start(hub, t, nd.Transmit(frame, None))

    def _on_beacon_timeout(self, t: float, nid: int) -> None:
        r = self.nodes[nid]
        if r.alive and r.state is not None and r.in_mesh:
            self._step(r, t, nd.BeaconTimeout())
            if r.lora == LORA_RX and not math.isfinite(r.rx_until):
                self._rx_stop(r, t)

    def _demand(self, r: _Radio) -> int:
        per_cycle = self.sc.traffic.packets_per_cycle
        if r.id == self.hub and not self.sc.traffic.hub_uplink:
            per_cycle = 0
        for k, st in self.clusters.items():
            if st.hub == r.id:
                polls = max(1, round(self.period / st.poll_period_ms))
                per_cycle += polls * sum(1 for m in st.spokes if self.nodes[m].alive)
        return per_cycle + len(r.state.queue)

    def _on_setup(self, t: float, c: int) -> None:
        hub = self.nodes[self.hub]
        if not hub.alive:
            return
        members = self._mesh_nodes()
        ids = [r.id for r in members]
        powers = {r.id: r.state.tx_power_dbm for r in members}
        links = self.medium.links(ids, powers, self.radio.sf)
        tables, sent = flood_hellos(self.hub, links)
        conn = collect_routing_tables(tables.values(), self.hub)
        demand = {r.id: self._demand(r) for r in members if r.id in conn.nodes}
        try:
            sched = build_schedule(sorted_nodelist(conn, demand), conn,
                                   hub_uplink=self.sc.traffic.hub_uplink,
                                   hub_own_packets=demand.get(self.hub, 0),
                                   slot_duration_ms=self.sc.traffic.slot_ms, cycle_period_ms=self.period)
        except SchedulingError as exc:
            self.log(t, self.hub, "setup_failed", str(exc).replace(";", ","))
            return
        self.schedule = sched
        self.tables = tables
        orphans = sorted(set(ids) - conn.nodes)
        self.log(t, self.hub, "setup",
                 f"cycle={c};nodes={len(conn.nodes)};slots={len(sched)};"
                 f"unreachable={','.join(map(str, orphans)) or '-'}")
        end = t + self.sc.traffic.setup_ms
        j = self.sc.sync.t_node_jitter_ms
        for r in members:
            if r.id not in conn.nodes:
                r.state.schedule_view = []
                r.state.expected_from.clear()
                r.join_pending = False
                continue
            tx_ms = (sent.get(r.id, 0) * phy.time_on_air(self.radio, HELLO_BYTES)
                     + phy.time_on_air(self.radio, 3 + 2 * len(conn.adjacency[r.id]))
                     + phy.time_on_air(self.radio, nd.FRAME_BYTES))
            self._rx_open(r, t, end - tx_ms)
            self.push(end - tx_ms, "setup_tx", r.id, tx_ms, powers[r.id])
            if not r.state.clock.synced:
                hops = conn.hops[r.id]
                err = sum(float(self.rng_proto.uniform(-j, j)) for _ in range(hops)) if j else 0.0
                r.state.clock = replace(r.state.clock, offset_ms=err, last_sync_ms=end, synced=True)
                r.state.hops = hops
                self.log(t, r.id, "sync", f"hops={hops};src=setup;err_ms={err:.6f}")
            self._step(r, t, nd.ScheduleIn(sched, tables[r.id]))
            r.join_pending = False

    def _on_setup_tx(self, t: float, nid: int, tx_ms: float, dbm: int) -> None:
        r = self.nodes[nid]
        if r.alive and r.tx is None:
            r.rx_until = t
            self._set_mode(r, t, LORA_TX, dbm)
            self.push(t + tx_ms, "setup_done", nid)

    def _on_setup_done(self, t: float, nid: int) -> None:
        r = self.nodes[nid]
        if r.alive and r.tx is None and r.lora == LORA_TX:
            self._set_mode(r, t, LORA_SLEEP)

    def _on_data_start(self, t: float, nominal: float) -> None:
        slot = self.sc.traffic.slot_ms
        guard = self.sc.sync.guard_ms
        for r in self._mesh_nodes():
            self._step(r, t, nd.DataStart(nominal))
            st = r.state
            if st.phase is not nd.Phase.DATA_PASSING:
                continue
            for i, act in enumerate(st.schedule_view):
                if act.kind != SLEEP:
                    at = st.clock.true_time(nominal + i * slot - guard)
                    self.push(max(t, at), "slot", r.id, i, nominal + i * slot)
            end = nominal + len(st.schedule_view) * slot + guard
            self.push(max(t, st.clock.true_time(end)), "data_end", r.id)

    def _on_slot(self, t: float, nid: int, index: int, nominal: float) -> None:
        r = self.nodes[nid]
        if r.alive and r.in_mesh:
            self._step(r, t, nd.SlotBoundary(index, nominal))

    def _on_data_end(self, t: float, nid: int) -> None:
        r = self.nodes[nid]
        if r.alive and r.in_mesh:
            self._step(r, t, nd.DataEnd())

    # -- SRSN -----------------------------------------------------------------
    def _ams(self, t: float, k: int) -> None:
        st = self.clusters[k]
        if not self.nodes[st.hub].alive:
            return
        readings = {}
        for m in st.members:
            self._account(self.nodes[m], t)
            readings[m] = self.nodes[m].battery_fraction if self.nodes[m].alive else 0.0
        new_st, new_hub = srsn.ams_step(st, readings)
        self.clusters[k] = new_st
        if new_hub is not None:
            old = self.nodes[st.hub]
            moved = len(old.state.queue)
            self.log(t, old.id, "ams_handoff", f"cluster={k};to={new_hub};moved={moved};"
                                               f"battery={readings[old.id]:.4f}")
            self._become_hub(t, self.nodes[new_hub], carry=old.state.queue)
            old.state.queue = deque()
            old.in_mesh = False
            old.state.schedule_view = []
            self._apply(old, t, nd.enter_phase(old.state, nd.Phase.SLEEP))
            self._rx_stop(old, t)

    def _become_hub(self, t: float, r: _Radio, carry=()) -> None:
        r.state.queue.extend(carry)
        r.state.queue.extend(r.spoke_queue)
        r.spoke_queue.clear()
        r.in_mesh = True
        r.join_pending = True

    def _on_poll(self, t: float, k: int, m: int) -> None:
        st = self.clusters[k]
        self.push(t + st.poll_period_ms, "poll", k, m)
        spoke = self.nodes[m]
        if m not in st.members or m == st.hub or not spoke.alive:
            return
        pkt = spoke.state.new_packet()
        spoke.spoke_queue.append(pkt)
        self.log(t, m, "gen", f"seq={pkt.seq}")
        hub = self.nodes[st.hub]
        if not hub.alive or self.medium.distance(m, hub.id) > self.sc.srsn.radius_m:
            return
        ant = self.sc.srsn.ant_packet_ms
        self._set_mode(hub, t, ant=ANT_TX)
        self._set_mode(spoke, t, ant=ANT_RX)
        self.push(t + ant, "ant", hub.id, ANT_RX)
        n = len(spoke.spoke_queue)
        self.push(t + ant, "ant", m, ANT_TX, f"cluster={k};hub={hub.id};n={n}")
        self.push(t + 2 * ant, "ant", hub.id, ANT_OFF)
        self.push(t + 2 * ant, "ant", m, ANT_OFF)
        hub.state.queue.extend(spoke.spoke_queue)
        spoke.spoke_queue.clear()
        self.log(t, hub.id, "ant_poll", f"cluster={k};spoke={m}")
        self.last_upload[k][m] = t + ant
        self.push(t + ant + st.timer_ms, "srsn_timer", k, m, t + ant)

    def _on_ant(self, t: float, nid: int, mode: str, upload: str | None = None) -> None:
        r = self.nodes[nid]
        if r.alive:
            self._set_mode(r, t, ant=mode)
            if upload is not None:
                self.log(t, nid, "ant_upload", upload)

    def _on_srsn_timer(self, t: float, k: int, m: int, armed_at: float) -> None:
        st = self.clusters[k]
        r = self.nodes[m]
        if not r.alive or m not in st.spokes or self.last_upload[k].get(m, -math.inf) > armed_at:
            return
        if srsn.failure_timer_step(st, {m: self.last_upload[k][m]}, t) != srsn.REINITIALIZE:
            return
        failed = st.hub
        readings = {x: self.nodes[x].battery_fraction for x in st.members if self.nodes[x].alive}
        survivors = srsn.SrsnState({x: v for x, v in st.members.items() if self.nodes[x].alive or x == failed},
                                   failed, st.poll_period_ms, st.timer_multiplier, st.ams_threshold)
        new_st = srsn.reform(survivors, failed, readings)
        self.clusters[k] = new_st
        for x in sorted(new_st.members):
            self.log(t, x, "srsn_reset", f"cluster={k};failed={failed};hub={new_st.hub}")
            self.last_upload[k][x] = t
        old = self.nodes[failed]
        old.in_mesh = False
        self._become_hub(t, self.nodes[new_st.hub])

    # -- ALOHA reference --------------------------------------------------------
    def _on_aloha(self, t: float, nid: int) -> None:
        r = self.nodes[nid]
        self.push(t + self.aloha.next_gap(self.rng_traffic), "aloha", nid)
        if not r.alive:
            return
        pkt = nd.DataPacket(nid, r.aloha_seq & 0xFFFF, nid)
        r.aloha_seq += 1
        self.log(t, nid, "gen", f"seq={pkt.seq}")
        if r.tx is None:
            self._tx_start(r, t, nd.Transmit(pkt, GATEWAY))
        else:
            r.aloha_queue.append(pkt)

    # -- faults ---------------------------------------------------------------
    def _kill(self, r: _Radio, t: float) -> None:
        if r.tx is not None:
            r.tx.aborted = True
            r.tx.t1 = t
            self.log(t, r.id, "tx_end", f"kind={r.tx.kind};aborted=1")
            r.tx = None
        r.alive = False
        self._set_mode(r, t, LORA_OFF, ant=ANT_OFF)

    def _on_fault(self, t: float, action: str, nid: int) -> None:
        r = self.nodes[nid]
        if action == "kill" and r.alive:
            self.log(t, nid, "kill")
            self._kill(r, t)
        elif action == "revive" and not r.alive and r.used_mc < r.capacity_mc:
            self.log(t, nid, "revive")
            r.alive = True
            self._set_mode(r, t, LORA_SLEEP)
            if r.state is not None:
                old = r.state
                r.state = self._fresh_state(nid, synced=nid == self.hub, seq=old.seq)
                r.state.clock = replace(r.state.clock, drift_ppm=old.clock.drift_ppm)
                r.spoke_queue.clear()
            if r.cluster:
                st = self.clusters[r.cluster]
                if nid not in st.members:
                    members = dict(st.members)
                    members[nid] = r.battery_fraction
                    self.clusters[r.cluster] = replace(st, members=members)
                    self.last_upload[r.cluster][nid] = t
                r.in_mesh = self.clusters[r.cluster].hub == nid
            if r.in_mesh:
                r.join_pending = True

    # -- main loop ------------------------------------------------------------
    def run(self) -> EventTrace:
        sc = self.sc
        self.log(0.0, -1, "scenario",
                 f"name={sc.meta.name};seed={sc.seed.value};duration_ms={self.end_ms:.3f};"
                 f"cycle_ms={self.period:.3f};hub={self.hub};hash={sc.digest()};"
                 f"hub_uplink={int(sc.traffic.hub_uplink)}")
        for r in self.nodes.values():
            self.log(0.0, r.id, "node", f"role={r.role};battery_mah={r.capacity_mc / 3600.0:g};cluster={r.cluster}")
        for r in self.nodes.values():
            self.log(0.0, r.id, "radio", f"lora={r.lora};ant={r.ant}")

        self.push(0.0, "cycle", 0)
        for k, st in sorted(self.clusters.items()):
            members = sorted(st.members)
            window = min(sc.sync.beacon_lead_ms, st.poll_period_ms)
            offsets = srsn.PollPlan(window, members).offsets()
            for m in members:
                self.push(offsets[m], "poll", k, m)
        for r in self.nodes.values():
            if r.role == "aloha-ref":
                self.push(self.aloha.first_arrival(self.rng_traffic), "aloha", r.id)
        for f in sorted(sc.faults, key=lambda f: (f.time_s, f.node)):
            self.push(f.time_s * 1000.0, "fault", f.action, f.node)

        handlers = {
            "cycle": self._on_cycle,
            "hub_beacon": self._on_hub_beacon,
            "beacon_timeout": self._on_beacon_timeout,
            "setup": self._on_setup,
            "setup_tx": self._on_setup_tx,
            "setup_done": self._on_setup_done,
            "data_start": self._on_data_start,
            "slot": self._on_slot,
            "data_end": self._on_data_end,
            "tx_start": lambda t, nid, a: self._tx_start(self.nodes[nid], t, a),
            "tx_end": self._tx_end,
            "rx_open": lambda t, nid, until: self._rx_open(self.nodes[nid], t, until),
            "rx_close": self._on_rx_close,
            "poll": self._on_poll,
            "ant": self._on_ant,
            "srsn_timer": self._on_srsn_timer,
            "aloha": self._on_aloha,
            "fault": self._on_fault,
        }
        while self._heap and self._heap[0][0] < self.end_ms:
            t, _, kind, args = heapq.heappop(self._heap)
            handlers[kind](t, *args)
        for r in self.nodes.values():
            if r.tx is not None:
                self.log(self.end_ms, r.id, "tx_end", f"kind={r.tx.kind};truncated=1")
            self._account(r, self.end_ms)
        return self.trace

    def _on_rx_close(self, t: float, nid: int) -> None:
        r = self.nodes[nid]
        if r.lora == LORA_RX and t >= r.rx_until - 1e-9:
            self._set_mode(r, t, LORA_SLEEP)


def run(scenario: Scenario) -> EventTrace:
    """Simulate ``scenario`` and return its event trace."""
    return Simulator(scenario).run()
