"""Reputation-based consortium-blockchain crowdsourcing simulator."""

from .queueing import QueueNetworkConfig, PerfMetrics, performance, sweep
from .reputation import ReputationLedger, ReputationMode, TpfsParams, final_reputation
from .scenario import ScenarioConfig, load_scenario_config, run_scenario

__version__ = "0.1.0"

__all__ = [
    "PerfMetrics",
    "QueueNetworkConfig",
    "ReputationLedger",
    "ReputationMode",
    "ScenarioConfig",
    "TpfsParams",
    "final_reputation",
    "load_scenario_config",
    "performance",
    "run_scenario",
    "sweep",
    "__version__",
]
