"""Self-aware mixed-criticality multicore simulator organized in five control layers."""

from .model import (Container, Criticality, Event, EventKind, EventMode, OperatingPoint,
                    OperatingRegion, OpRange, Resource, ResourceState, SlotTable, SystemModel,
                    Task, ValidationError, WorkloadClass, criticality_ge, validate_scenario)
from .scenario import Params, Scenario, load_scenario, parse_scenario, write_scenario
from .sim import Simulation, run_scenario

__all__ = [
    "Container", "Criticality", "Event", "EventKind", "EventMode", "OperatingPoint",
    "OperatingRegion", "OpRange", "Resource", "ResourceState", "SlotTable", "SystemModel", "Task",
    "ValidationError", "WorkloadClass", "criticality_ge", "validate_scenario", "Params",
    "Scenario", "load_scenario", "parse_scenario", "write_scenario", "Simulation", "run_scenario",
]
__version__ = "0.1.0"
