import dataclasses as dc
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridmesh import metrics, scenario, sim
from hybridmesh.metrics import UndefinedRate
from hybridmesh.trace import EventTrace

PAIR = """
[meta]
name = "pair"
[traffic]
cycle_period_s = 60.0
duration_cycles = 10
[[nodes]]
id = 1
role = "hub"
[[nodes]]
id = 2
x = 200.0
"""


def test_rate_examples():
    assert metrics.pdr(9216, 9360) == pytest.approx(0.9846, abs=1e-4)
    assert metrics.pdr(4821, 9360) == pytest.approx(0.5151, abs=1e-4)
    assert metrics.pdr(5, 5) == 1.0
    assert metrics.per(0, 5) == 0.0
    with pytest.raises(UndefinedRate):
        metrics.pdr(0, 0)
    with pytest.raises(ValueError):
        metrics.pdr(6, 5)


@given(expected=st.integers(1, 10_000), data=st.data())
def test_rate_identities(expected, data):
    received = data.draw(st.integers(0, expected))
    assert metrics.pdr(received, expected) + metrics.pmr(expected, received) == pytest.approx(1.0)


def test_pair_conservation():
    sc = scenario.loads(PAIR)
    tr = sim.run(sc)
    assert len(tr.of("deliver", 1)) == 10 and not tr.of("rx_crc_error")
    rep = metrics.build_report(tr)
    assert rep.per_node[2].pdr == 1.0 and rep.per_node[1].pdr is None
    assert rep.per_day == {0: 1.0}
    assert metrics.total_pdr(0, tr) == 1.0
    with pytest.raises(UndefinedRate):
        metrics.total_pdr(3, tr)


def _star(loss=0.0, corrupt=0.0, cycles=400, seed=1):
    text = PAIR.replace("duration_cycles = 10", f"duration_cycles = {cycles}")
    text = text.replace("[traffic]", f"[seed]\nvalue = {seed}\n[channel]\nlink_loss = {loss}\n"
                                     f"corruption_prob = {corrupt}\n[traffic]")
    for i in range(3, 7):
        text += f"[[nodes]]\nid = {i}\nx = {50.0 * i}\ny = 100.0\n"
    return scenario.loads(text)


def _ci(p, n):
    return 4 * math.sqrt(p * (1 - p) / n)


def test_single_hop_loss_matches_binomial():
    tr = sim.run(_star(loss=0.05))
    rep = metrics.build_report(tr)
    n = sum(m.expected for m in rep.per_node.values())
    got = sum(m.received for m in rep.per_node.values()) / n
    assert got == pytest.approx(0.95, abs=_ci(0.95, n))


def test_corruption_rate_measured_as_per():
    tr = sim.run(_star(corrupt=0.04))
    rep = metrics.build_report(tr)
    n = sum(m.expected for m in rep.per_node.values())
    per = sum(m.errored for m in rep.per_node.values()) / n
    assert per == pytest.approx(0.04, abs=_ci(0.04, n))
    strict = metrics.build_report(tr, errored_as_received=False)
    for node, m in strict.per_node.items():
        if m.expected:
            assert m.received == rep.per_node[node].received - rep.per_node[node].errored


def test_counts_match_independent_recount():
    tr = sim.run(_star(loss=0.03, corrupt=0.02, cycles=200, seed=4))
    rep = metrics.build_report(tr, errored_as_received=False)
    # Second pass straight off the CSV text.
    rows = [line.split(",", 3) for line in tr.to_csv().splitlines()[1:]]
    gen = {(int(r[1]), r[3].split("=")[1]) for r in rows if r[2] == "gen"}
    ok = set()
    for r in rows:
        if r[2] == "deliver":
            f = dict(kv.split("=") for kv in r[3].split(";"))
            ok.add((int(f["origin"]), f["seq"]))
    assert sum(m.received for m in rep.per_node.values()) == len(gen & ok)
    assert sum(m.expected for m in rep.per_node.values()) == len(gen)


def test_energy_ledger_matches_mode_integration():
    sc = scenario.bundled("energy-4")
    sc = dc.replace(sc, traffic=dc.replace(sc.traffic, duration_cycles=12))
    tr = sim.run(sc)
    led = metrics.ledger_totals(tr)
    integ = metrics.integrate_modes(tr, sc.power_profile())
    for n in (1, 2, 3, 4):
        assert led[n] == pytest.approx(integ[n], rel=1e-9)


def test_sleeping_node_draws_sleep_current():
    # Node 7 is an ANT spoke of node 2 with ANT made free: only sleep current remains.
    text = PAIR.replace('x = 200.0', 'x = 200.0\ncluster = 3\n[[nodes]]\nid = 7\nrole = "srsn-member"\n'
                                     'cluster = 3\nx = 205.0')
    text = text.replace("[traffic]", "[power]\ni_ant_tx_ma = 1e-9\ni_ant_rx_ma = 1e-9\n[traffic]")
    tr = sim.run(scenario.loads(text))
    ua, years = metrics.avg_current(tr, 7)
    assert ua == pytest.approx(25.0, rel=1e-4)
    assert years == pytest.approx(2500 * 1000 / 25 / (365.25 * 24), rel=1e-4)


def test_truncated_trace_warns_and_uses_whole_cycles():
    tr = sim.run(scenario.loads(PAIR))
    cut = EventTrace([r for r in tr if r.t_ms < 5.5 * 60_000])
    with pytest.warns(UserWarning, match="whole cycles"):
        ua, _ = metrics.avg_current(cut, 2)
    assert ua > 0


def test_trace_csv_roundtrip(tmp_path):
    tr = sim.run(scenario.loads(PAIR))
    tr.write(tmp_path / "t.csv")
    back = EventTrace.read(tmp_path / "t.csv")
    assert back.to_csv() == tr.to_csv()
    assert metrics.build_report(back).to_json() == metrics.build_report(tr).to_json()


def test_trace_rejects_bad_csv():
    with pytest.raises(ValueError, match="header"):
        EventTrace.from_csv("a,b\n")
    with pytest.raises(ValueError, match="line 2"):
        EventTrace.from_csv("t_ms,node,event,detail\n1.0,2,gen\n")


def test_report_renderings():
    rep = metrics.build_report(sim.run(scenario.loads(PAIR)))
    assert rep.to_table().splitlines()[0].split()[:3] == ["node", "expected", "received"]
    assert rep.per_day_csv().splitlines() == ["day,total_pdr", "0,1.000000"]
    assert '"per_node"' in rep.to_json()
