"""Scheduler and controller: bounded-parallel execution with atomic commits."""

from fot.runtime.clock import RealClock, VirtualClock
from fot.runtime.controller import Controller, RunConfig, RunResult, run
from fot.runtime.metrics import RunMetrics, critical_path
from fot.runtime.scheduler import STRATEGIES, compute_ready, depth_map, order_frontier

__all__ = [
    "RealClock",
    "VirtualClock",
    "Controller",
    "RunConfig",
    "RunResult",
    "run",
    "RunMetrics",
    "critical_path",
    "STRATEGIES",
    "compute_ready",
    "depth_map",
    "order_frontier",
]
