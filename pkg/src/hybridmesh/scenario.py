"""Scenario description and its TOML file format.

A scenario file has the sections ``[meta]``, ``[seed]``, ``[radio]``,
``[power]``, ``[channel]``, ``[traffic]``, ``[sync]``, ``[srsn]``, an optional
``[gateway]`` and the arrays of tables ``[[nodes]]`` and ``[[faults]]``.
Unknown keys are rejected.  Times in the file are seconds unless the key
name ends in ``_ms``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from . import phy

ROLES = ("hub", "mesh", "srsn-member", "aloha-ref")
FAULT_ACTIONS = ("kill", "revive")


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class Meta:
    name: str = "unnamed"
    description: str = ""
    reconstructed: bool = False


@dataclass
class Seed:
    value: int = 1


@dataclass
class Radio:
    sf: int = 7
    bw: int = 125_000
    cr: int = 1
    preamble_symbols: int = 8
    crc_on: bool = True
    explicit_header: bool = True
    tx_power_dbm: int = 14
    adaptive_power: bool = False
    all_floor_dbm: float = -120.0
    all_margin_db: float = 10.0
    all_step_db: int = 3
    all_min_dbm: int = -9
    all_max_dbm: int = 22
    aloha_sf: int = 12
    aloha_tx_power_dbm: int = 14


@dataclass
class Power:
    p_rx_mw: float = 15.2
    i_sleep_ua: float = 25.0
    i_lora_rx_ma: float = 12.5
    i_lora_tx_ma: float = 72.5
    i_ant_tx_ma: float = 10.0
    i_ant_rx_ma: float = 10.0
    supply_v: float = 3.3
    tx_ref_dbm: int = 18
    p_cons_tx: dict[str, float] = field(default_factory=lambda: {str(k): round(v, 4) for k, v in phy._default_p_cons().items()})


@dataclass
class Channel:
    path_loss_exponent: float = 3.0
    reference_loss_db: float = 40.0
    rssi_noise_sigma_db: float = 0.0
    sensitivity_dbm: dict[str, float] = field(default_factory=lambda: {str(k): v for k, v in phy.DEFAULT_SENSITIVITY_DBM.items()})
    link_loss: float = 0.0
    corruption_prob: float = 0.0
    sf_orthogonal: bool = False
    whitelist: list[list[int]] = field(default_factory=list)


@dataclass
class Traffic:
    cycle_period_s: float = 600.0
    duration_cycles: int = 10
    slot_ms: float = 125.0
    packets_per_cycle: int = 1
    hub_uplink: bool = False
    hub_own_packets: int = 1
    setup_ms: float = 10_000.0
    aloha_period_s: float = 600.0
    aloha_poisson: bool = True


@dataclass
class Sync:
    enabled: bool = True
    guard_ms: float = 5.0
    t_node_ms: float = 2.0
    t_node_jitter_ms: float = 0.0
    drift_ppm: float = 5.0
    beacon_lead_ms: float = 500.0


@dataclass
class Srsn:
    poll_period_s: float = 600.0
    timer_multiplier: float = 5.0
    ams_threshold: float = 0.20
    ams_enabled: bool = True
    ant_packet_ms: float = 1.0
    radius_m: float = 30.0


@dataclass
class Gateway:
    x: float = 0.0
    y: float = 0.0


@dataclass
class NodeSpec:
    id: int
    x: float = 0.0
    y: float = 0.0
    role: str = "mesh"
    battery_mah: float = 2500.0
    cluster: int = 0  # srsn cluster id, 0 = none


@dataclass
class Fault:
    time_s: float
    action: str
    node: int


@dataclass
class Scenario:
    meta: Meta = field(default_factory=Meta)
    seed: Seed = field(default_factory=Seed)
    radio: Radio = field(default_factory=Radio)
    power: Power = field(default_factory=Power)
    channel: Channel = field(default_factory=Channel)
    traffic: Traffic = field(default_factory=Traffic)
    sync: Sync = field(default_factory=Sync)
    srsn: Srsn = field(default_factory=Srsn)
    gateway: Gateway | None = None
    nodes: list[NodeSpec] = field(default_factory=list)
    faults: list[Fault] = field(default_factory=list)

    # -- derived views ---------------------------------------------------------
    @property
    def hub(self) -> int:
        return next(n.id for n in self.nodes if n.role == "hub")

    def node(self, node_id: int) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise ScenarioError(f"unknown node {node_id}")

    def radio_config(self, tx_power_dbm: int | None = None, sf: int | None = None) -> phy.RadioConfig:
        r = self.radio
        return phy.RadioConfig(sf if sf is not None else r.sf, r.bw, r.cr, r.preamble_symbols, r.crc_on,
                               r.explicit_header, tx_power_dbm if tx_power_dbm is not None else r.tx_power_dbm)

    def power_profile(self) -> phy.PowerProfile:
        p = self.power
        return phy.PowerProfile({int(k): v for k, v in p.p_cons_tx.items()}, p.p_rx_mw, p.i_sleep_ua,
                                p.i_lora_rx_ma, p.i_lora_tx_ma, p.i_ant_tx_ma, p.i_ant_rx_ma,
                                p.supply_v, p.tx_ref_dbm)

    def channel_model(self) -> phy.ChannelModel:
        c = self.channel
        return phy.ChannelModel(c.path_loss_exponent, c.reference_loss_db,
                                {int(k): v for k, v in c.sensitivity_dbm.items()}, c.rssi_noise_sigma_db)

    def whitelist_map(self) -> dict[int, set[int]] | None:
        if not self.channel.whitelist:
            return None
        out: dict[int, set[int]] = {n.id: set() for n in self.nodes}
        for a, b in self.channel.whitelist:
            out.setdefault(a, set()).add(b)
            out.setdefault(b, set()).add(a)
        return out

    def clusters(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for n in self.nodes:
            if n.role == "srsn-member":
                out.setdefault(n.cluster, []).append(n.id)
        return {k: sorted(v) for k, v in sorted(out.items())}

    def digest(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()[:16]

    def validate(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(ids) != len(set(ids)):
            raise ScenarioError("node ids must be unique")
        if not ids:
            raise ScenarioError("scenario has no nodes")
        if any(i < 0 or i > 0xFFFF for i in ids):
            raise ScenarioError("node ids must fit in 16 bits and be non-negative")
        hubs = [n for n in self.nodes if n.role == "hub"]
        if len(hubs) != 1:
            raise ScenarioError(f"exactly one hub required, found {len(hubs)}")
        for n in self.nodes:
            if n.role not in ROLES:
                raise ScenarioError(f"node {n.id}: unknown role {n.role!r}")
            if n.battery_mah <= 0:
                raise ScenarioError(f"node {n.id}: battery must be positive")
            if n.role == "srsn-member" and n.cluster <= 0:
                raise ScenarioError(f"node {n.id}: srsn members need a positive cluster id")
        if self.traffic.duration_cycles <= 0 or self.traffic.cycle_period_s <= 0:
            raise ScenarioError("duration must be positive")
        if any(n.role == "aloha-ref" for n in self.nodes) and self.gateway is None:
            raise ScenarioError("aloha reference nodes need a [gateway]")
        if self.traffic.hub_uplink and self.gateway is None:
            raise ScenarioError("hub_uplink requires a [gateway]")
        for f in self.faults:
            if f.action not in FAULT_ACTIONS:
                raise ScenarioError(f"unknown fault action {f.action!r}")
            if f.node not in ids:
                raise ScenarioError(f"fault targets unknown node {f.node}")
        for pair in self.channel.whitelist:
            if len(pair) != 2 or any(p not in ids for p in pair):
                raise ScenarioError(f"whitelist entry {pair} must name two known nodes")
        for prob in (self.channel.link_loss, self.channel.corruption_prob):
            if not 0 <= prob <= 1:
                raise ScenarioError("probabilities must lie in [0, 1]")
        if self.srsn.timer_multiplier <= 1:
            raise ScenarioError("srsn timer_multiplier must exceed 1")
        try:
            self.radio_config()
            self.radio_config(self.radio.aloha_tx_power_dbm, self.radio.aloha_sf)
            self.power_profile()
            self.channel_model()
        except phy.ConfigError as exc:
            raise ScenarioError(str(exc)) from None

    def with_fault(self, time_s: float, action: str, node: int) -> "Scenario":
        return inject_fault(self, time_s, action, node)


def inject_fault(scenario: Scenario, time_s: float, action: str, node: int) -> Scenario:
    """Copy of ``scenario`` with one more kill/revive event."""
    if action not in FAULT_ACTIONS:
        raise ScenarioError(f"unknown fault action {action!r}")
    if node not in {n.id for n in scenario.nodes}:
        raise ScenarioError(f"fault targets unknown node {node}")
    faults = sorted([*scenario.faults, Fault(float(time_s), action, node)], key=lambda f: (f.time_s, f.node))
    return dataclasses.replace(scenario, faults=faults)


# -- (de)serialization --------------------------------------------------------

_SECTIONS = {"meta": Meta, "seed": Seed, "radio": Radio, "power": Power, "channel": Channel,
             "traffic": Traffic, "sync": Sync, "srsn": Srsn, "gateway": Gateway}


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith(key):
            return i
    return None


def _build(cls, data: Any, where: str, text: str | None):
    if not isinstance(data, dict):
        raise ScenarioError(f"[{where}] must be a table", _line_of(text, f"{where}"))
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ScenarioError(f"[{where}] unknown key {unknown[0]!r}", _line_of(text, unknown[0]))
    try:
        obj = cls(**data)
    except TypeError as exc:
        raise ScenarioError(f"[{where}] {exc}", _line_of(text, f"[{where}")) from None
    for f in dataclasses.fields(cls):
        val = getattr(obj, f.name)
        default = f.default if f.default is not dataclasses.MISSING else None
        if isinstance(default, bool) and not isinstance(val, bool):
            raise ScenarioError(f"[{where}] {f.name} must be a boolean", _line_of(text, f.name))
        if isinstance(default, float) and isinstance(val, int) and not isinstance(val, bool):
            setattr(obj, f.name, float(val))
    return obj


def from_dict(doc: dict, text: str | None = None) -> Scenario:
    unknown = sorted(set(doc) - set(_SECTIONS) - {"nodes", "faults"})
    if unknown:
        raise ScenarioError(f"unknown section [{unknown[0]}]", _line_of(text, f"[{unknown[0]}"))
    kwargs: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in doc:
            kwargs[name] = _build(cls, doc[name], name, text)
    kwargs["nodes"] = [_build(NodeSpec, n, "nodes", text) for n in doc.get("nodes", [])]
    kwargs["faults"] = [_build(Fault, f, "faults", text) for f in doc.get("faults", [])]
    for f in kwargs["faults"]:
        f.time_s = float(f.time_s)
    for n in kwargs["nodes"]:
        n.x, n.y, n.battery_mah = float(n.x), float(n.y), float(n.battery_mah)
    sc = Scenario(**kwargs)
    _default_hub(sc)
    sc.power.p_cons_tx = {str(k): float(v) for k, v in sc.power.p_cons_tx.items()}
    sc.channel.sensitivity_dbm = {str(k): float(v) for k, v in sc.channel.sensitivity_dbm.items()}
    sc.validate()
    return sc


def _default_hub(sc: Scenario) -> None:
    """Without an explicit hub, the mesh node closest to the gateway takes the role."""
    if sc.gateway is None or any(n.role == "hub" for n in sc.nodes):
        return
    mesh = [n for n in sc.nodes if n.role == "mesh"]
    if mesh:
        gx, gy = sc.gateway.x, sc.gateway.y
        min(mesh, key=lambda n: (math.hypot(n.x - gx, n.y - gy), n.id)).role = "hub"


def to_dict(sc: Scenario) -> dict:
    doc: dict[str, Any] = {}
    for name in _SECTIONS:
        obj = getattr(sc, name)
        if obj is not None:
            doc[name] = dataclasses.asdict(obj)
    doc["nodes"] = [dataclasses.asdict(n) for n in sc.nodes]
    if sc.faults:
        doc["faults"] = [dataclasses.asdict(f) for f in sc.faults]
    return doc


def loads(text: str) -> Scenario:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(str(exc)) from None
    return from_dict(doc, text)


def dumps(sc: Scenario) -> str:
    return tomli_w.dumps(to_dict(sc))


def load(path: str | Path) -> Scenario:
    return loads(Path(path).read_text())


def save(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps(sc))


def bundled(name: str) -> Scenario:
    """Load one of the shipped scenarios by stem, e.g. ``"campus-13"``."""
    ref = resources.files("hybridmesh") / "scenarios" / f"{name}.toml"
    return loads(ref.read_text())


def bundled_names() -> list[str]:
    folder = resources.files("hybridmesh") / "scenarios"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".toml"))


def reference() -> str:
    """All keys with their defaults, as a commented TOML document."""
    sc = Scenario(gateway=Gateway(), nodes=[NodeSpec(1, role="hub")], faults=[])
    return "# Scenario reference: every key with its default value\n" + dumps(sc)
