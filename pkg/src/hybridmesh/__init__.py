"""Hybrid LoRa mesh + ANT star network: protocol models and a discrete-event simulator."""

from .metrics import MetricsReport, build_report
from .scenario import Scenario, ScenarioError, bundled, bundled_names, load, loads
from .sim import Simulator, run
from .trace import EventTrace, TraceRecord

__all__ = [
    "EventTrace",
    "MetricsReport",
    "Scenario",
    "ScenarioError",
    "Simulator",
    "TraceRecord",
    "build_report",
    "bundled",
    "bundled_names",
    "load",
    "loads",
    "run",
]
__version__ = "0.1.0"
