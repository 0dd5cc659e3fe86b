import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridmesh.srsn import (NORMAL, REINITIALIZE, PollPlan, SrsnState, ams_step, elect_hub,
                             failure_timer_step, reform)

members = st.dictionaries(st.integers(1, 50), st.sampled_from([0.1, 0.19, 0.5, 0.7, 0.9, 1.0]), min_size=1, max_size=8)


def test_elect_examples():
    assert elect_hub({1: 0.80, 2: 0.95, 3: 0.90}) == 2
    assert elect_hub([(7, 0.9), (4, 0.9)]) == 4
    with pytest.raises(ValueError):
        elect_hub({})


@given(members)
def test_elect_matches_brute_force(m):
    best = max(m.values())
    assert elect_hub(m) == min(i for i, b in m.items() if b == best)


def test_ams_handoff():
    s = SrsnState({1: 0.19, 2: 0.7, 3: 0.5}, hub=1, poll_period_ms=1000)
    s2, new = ams_step(s, {})
    assert new == 2 and s2.hub == 2
    s = SrsnState({1: 0.5, 2: 0.7}, hub=1, poll_period_ms=1000)
    assert ams_step(s, {})[1] is None


def test_ams_all_low_still_picks_max():
    s = SrsnState({1: 0.05, 2: 0.15, 3: 0.10}, hub=1, poll_period_ms=1000)
    assert ams_step(s, {})[0].hub == 2
    s = SrsnState({1: 0.15, 2: 0.05}, hub=1, poll_period_ms=1000)
    assert ams_step(s, {})[0].hub == 1  # hub already holds the most charge


@given(members, st.data())
def test_ams_never_moves_to_a_worse_member(m, data):
    hub = data.draw(st.sampled_from(sorted(m)))
    s2, new = ams_step(SrsnState(m, hub=hub, poll_period_ms=1000), {})
    if new is not None:
        assert m[new] > m[hub] and m[hub] < 0.2
    assert s2.hub in m


def test_failure_timer():
    s = SrsnState({1: 1.0, 2: 0.5}, hub=1, poll_period_ms=1000, timer_multiplier=5)
    assert failure_timer_step(s, {2: 0.0}, 1000.0) == NORMAL
    assert failure_timer_step(s, {2: 0.0}, 4999.0) == NORMAL
    assert failure_timer_step(s, {2: 0.0}, 5000.0 + 1e-6) == REINITIALIZE


def test_reform_elects_among_survivors():
    s = SrsnState({1: 1.0, 2: 0.5, 3: 0.5}, hub=1, poll_period_ms=1000)
    assert reform(s, 1).hub == 2
    with pytest.raises(ValueError):
        reform(SrsnState({1: 1.0}, hub=1, poll_period_ms=1000), 1)


def test_state_validation():
    with pytest.raises(ValueError):
        SrsnState({1: 1.0}, hub=2, poll_period_ms=1000)
    with pytest.raises(ValueError):
        SrsnState({1: 1.0}, hub=1, poll_period_ms=1000, timer_multiplier=1)


def test_poll_offsets_spread_over_period():
    off = PollPlan(1000.0, [4, 7]).offsets()
    assert off == {4: 250.0, 7: 750.0}
    assert PollPlan(1000.0).offsets() == {}
