"""Goal-oriented edge learning with a Gaussian information-bottleneck encoder."""

from .gaussian_ib import (
    GaussianSource,
    GibOperatingPoint,
    GibSolution,
    compute_nmse,
    make_synthetic_source,
    operating_point,
    relevance_complexity_curve,
    solve_gib,
)
from .scheduler import ControlParams, SlotDecision, SlotSolver, VirtualQueues, per_slot_decision, update_queues
from .simulator import RunResult, Scenario, default_scenario, feasibility_check, run, sweep
from .system_models import ChannelModel, DeviceConfig, ServerConfig, SlotMetrics

__version__ = "0.1.0"

__all__ = [
    "ChannelModel", "ControlParams", "DeviceConfig", "GaussianSource", "GibOperatingPoint", "GibSolution",
    "RunResult", "Scenario", "ServerConfig", "SlotDecision", "SlotMetrics", "SlotSolver", "VirtualQueues",
    "compute_nmse", "default_scenario", "feasibility_check", "make_synthetic_source", "operating_point",
    "per_slot_decision", "relevance_complexity_curve", "run", "solve_gib", "sweep", "update_queues",
]
