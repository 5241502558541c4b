"""Group cooperative spectrum sensing MAC for cognitive radio networks.

Modules:
    channel: primary-user ON/OFF occupancy and finite-state rate chains.
    detection: energy-detector probabilities and majority fusion.
    selection: choosing cooperators and order statistics of their rates.
    analytics: closed-form throughput, sensing overhead and queueing.
    optimizer: grid search over team count and team size.
    simulator: discrete-event simulation of the MAC protocol.
    config, cli: JSON configuration and the ``gcmac`` command.
"""
from .analytics import MetricsReport, Regime, Scenario, TrafficParams, default_scenario, evaluate
from .optimizer import OptimizationResult, optimize, sweep

__all__ = [
    "MetricsReport",
    "OptimizationResult",
    "Regime",
    "Scenario",
    "TrafficParams",
    "default_scenario",
    "evaluate",
    "optimize",
    "sweep",
]
