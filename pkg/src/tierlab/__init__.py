"""tierlab: deterministic discrete-event simulation of tiered memory systems.

Typical use::

    from tierlab import config, run
    cfg = config.from_preset("system_b", "hot_cold_skew", "interleave:ldram+cxl@tiering08")
    metrics = run(cfg)
"""

from . import config, metrics
from ._accel import BACKEND
from .engine import RunSettings, SimConfig, Simulation, loaded_latency_sweep, run, thread_sweep
from .errors import (CapacityError, ConfigError, DestinationFull, EmptyDeviceSet, NotMigratable, OutOfMemory,
                     TierlabError, UnreachableNode)
from .metrics import RunMetrics
from .optimizer import Assignment, BandwidthCurve, assign_threads

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Assignment", "BandwidthCurve", "CapacityError", "ConfigError", "DestinationFull",
    "EmptyDeviceSet", "NotMigratable", "OutOfMemory", "RunMetrics", "RunSettings", "SimConfig", "Simulation",
    "TierlabError", "UnreachableNode", "assign_threads", "config", "loaded_latency_sweep", "metrics", "run",
    "thread_sweep",
]
