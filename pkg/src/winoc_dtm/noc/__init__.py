"""Network-on-chip models: cycle-accurate simulator, flow estimate, traffic sources."""
from .flow import FlowModel, FlowResult
from .sim import Network, NocParams
from .traffic import Pattern, TrafficGenerator, TrafficSource, Workload

__all__ = ["FlowModel", "FlowResult", "Network", "NocParams", "Pattern", "TrafficGenerator",
           "TrafficSource", "Workload"]
