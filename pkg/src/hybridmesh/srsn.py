"""Short-range star network: hub election, adaptive mode switching, failure timer."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

MAX_SPOKES = 65_000
ANT_RADIUS_M = 30.0


@dataclass(frozen=True)
class SrsnState:
    members: dict[int, float]  # id -> battery level (fraction of initial charge)
    hub: int
    poll_period_ms: float
    timer_multiplier: float = 5.0
    ams_threshold: float = 0.20

    def __post_init__(self) -> None:
        if self.hub not in self.members:
            raise ValueError(f"hub {self.hub} is not a member")
        if len(self.members) > MAX_SPOKES:
            raise ValueError(f"{len(self.members)} members exceeds {MAX_SPOKES}")
        if self.timer_multiplier <= 1:
            raise ValueError("failure timer must exceed one poll period")

    @property
    def timer_ms(self) -> float:
        return self.timer_multiplier * self.poll_period_ms

    @property
    def spokes(self) -> list[int]:
        return sorted(m for m in self.members if m != self.hub)


def elect_hub(members: Mapping[int, float] | Iterable[tuple[int, float]]) -> int:
    """Highest battery wins; equal batteries go to the lowest id."""
    items = list(members.items()) if isinstance(members, Mapping) else list(members)
    if not items:
        raise ValueError("cannot elect a hub from an empty member set")
    return min(items, key=lambda kv: (-kv[1], kv[0]))[0]


def ams_step(state: SrsnState, battery_readings: Mapping[int, float]) -> tuple[SrsnState, int | None]:
    """Hand the hub role to the best spoke once the hub drains below threshold.

    Returns the new state and the id of the new hub, or ``None`` when no
    handoff happens.
    """
    members = {m: battery_readings.get(m, lvl) for m, lvl in state.members.items()}
    state = replace(state, members=members)
    if members[state.hub] >= state.ams_threshold:
        return state, None
    spokes = {m: b for m, b in members.items() if m != state.hub}
    if not spokes:
        return state, None
    best = elect_hub(spokes)
    # Only hand over to a spoke strictly better off than the draining hub.
    if spokes[best] <= members[state.hub]:
        return state, None
    return replace(state, hub=best), best


NORMAL, REINITIALIZE = "normal", "reinitialize"


def failure_timer_step(state: SrsnState, last_upload_ms: Mapping[int, float], now_ms: float) -> str:
    """Spoke-side watchdog: reinitialize once any spoke's timer has run out."""
    for spoke in state.spokes:
        last = last_upload_ms.get(spoke)
        if last is not None and now_ms - last >= state.timer_ms:
            return REINITIALIZE
    return NORMAL


def reform(state: SrsnState, failed: int, battery_readings: Mapping[int, float] | None = None) -> SrsnState:
    """Re-form the cluster without ``failed``."""
    readings = battery_readings or {}
    members = {m: readings.get(m, lvl) for m, lvl in state.members.items() if m != failed}
    if not members:
        raise ValueError("no surviving members to re-form the cluster")
    return replace(state, members=members, hub=elect_hub(members))


@dataclass
class PollPlan:
    """Uniform round-robin polling offsets within one poll period."""

    period_ms: float
    spokes: list[int] = field(default_factory=list)

    def offsets(self) -> dict[int, float]:
        n = len(self.spokes)
        return {s: (i + 0.5) * self.period_ms / n for i, s in enumerate(self.spokes)} if n else {}
