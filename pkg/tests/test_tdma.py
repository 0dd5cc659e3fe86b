import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridmesh.routing import ConnectivityTable, NodeDescriptor
from hybridmesh.tdma import (GATEWAY, RECV, SEND, Action, Schedule, SchedulingError, build_schedule,
                             fragment_packets, validate_schedule)

from oracles import plan, random_tree, replay

FIG_EDGES = {(1, 2), (1, 4), (2, 3)}


def test_figure_schedule_slots():
    _, conn, s = plan([1, 2, 3, 4], FIG_EDGES, hub_uplink=True)
    assert s.slots[0] == {1: Action(RECV, 4), 2: Action(RECV, 3), 3: Action(SEND, 2), 4: Action(SEND, 1)}
    for k in (1, 2):
        assert s.slots[k][2] == Action(SEND, 1) and s.slots[k][1] == Action(RECV, 2)
        assert s.slots[k][3].kind == s.slots[k][4].kind == "SLEEP"
    assert [a.peer for a in s.row(1)[3:]] == [GATEWAY] * 4
    assert validate_schedule(s, conn, 1, hub_own_packets=1).ok


def test_figure_schedule_text():
    _, _, s = plan([1, 2, 3, 4], FIG_EDGES, hub_uplink=False)
    lines = s.to_text().splitlines()
    assert lines[0].split() == ["Node", "/", "Timeslot", "1", "2", "3"]
    assert lines[3].split() == ["3", "Tx->2", "Sleep", "Sleep"]


def test_single_node_and_hub():
    _, conn, s = plan([1, 2], {(1, 2)}, hub_uplink=False)
    assert len(s) == 1 and s.slots[0] == {1: Action(RECV, 2), 2: Action(SEND, 1)}


def test_empty_nodelist():
    conn = ConnectivityTable(1, {1}, {1: set()}, {1: 0}, {})
    assert len(build_schedule([], conn, hub_uplink=False, hub_own_packets=0)) == 0


def test_cyclic_descriptors_rejected():
    conn = ConnectivityTable(1, {1, 2, 3}, {1: {2}, 2: {1, 3}, 3: {2}}, {1: 0, 2: 1, 3: 2}, {2: 1, 3: 2})
    bad = [NodeDescriptor(2, 3, {1, 3}, 1, 1), NodeDescriptor(3, 2, {2}, 1, 1)]
    with pytest.raises(SchedulingError):
        build_schedule(bad, conn, hub_uplink=False)


def test_validator_flags_two_senders_to_one_receiver():
    _, conn, s = plan([1, 2, 4], {(1, 2), (1, 4)}, hub_uplink=False)
    forged = Schedule([{1: Action(RECV, 2), 2: Action(SEND, 1), 4: Action(SEND, 1)}], nodes=[1, 2, 4])
    assert any("senders target 1" in v for v in validate_schedule(forged, conn, 1, hub_own_packets=0).violations)
    assert validate_schedule(s, conn, 1, hub_own_packets=0).ok


def test_dict_roundtrip():
    _, _, s = plan([1, 2, 3, 4], FIG_EDGES)
    assert Schedule.from_dict(s.to_dict()) == s


@settings(max_examples=150, deadline=None)
@given(n=st.integers(2, 8), seed=st.integers(0, 2**31), own=st.integers(1, 2), uplink=st.booleans())
def test_random_trees_schedule_cleanly(n, seed, own, uplink):
    nodes, edges = random_tree(n, np.random.default_rng(seed))
    links, conn, s = plan(nodes, edges, hub_uplink=uplink, own=own)
    rep = validate_schedule(s, conn, own, hub_own_packets=own if uplink else 0)
    assert rep.ok, rep.violations
    assert not replay(s, links, 1, own=own, hub_uplink=uplink)
    # Once a node has gone quiet it stays asleep for the rest of the cycle.
    for node in nodes:
        row = s.row(node)
        last = s.last_active_slot(node)
        assert all(a.kind == "SLEEP" for a in row[last + 1:])
        assert s.sends(node) == (own * len(conn.subtree(node)) if node != 1 or uplink else 0)


@pytest.mark.parametrize("total,cap,want", [(1024, 256, 4), (256, 256, 1), (257, 256, 2), (0, 256, 0)])
def test_fragment_packets(total, cap, want):
    assert fragment_packets(total, cap) == want


def test_fragment_packets_zero_cap():
    with pytest.raises(ValueError):
        fragment_packets(10, 0)
