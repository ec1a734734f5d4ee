"""Memory devices as a propagation stage plus one FIFO bandwidth server."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError
from .kernels import PS_PER_NS, serve_route

SEQUENTIAL = "sequential"
RANDOM = "random"
PATTERN_CLASSES = (SEQUENTIAL, RANDOM)


class DeviceKind(str, Enum):
    LDRAM = "LDRAM"
    RDRAM = "RDRAM"
    CXL = "CXL"


@dataclass(frozen=True)
class DeviceSpec:
    """Static description of a memory device.

    ``base_latency_ns`` is the unloaded latency of a 64-byte random read,
    device portion only.  ``pattern_latency_ns`` optionally overrides it per
    access-pattern class (e.g. sequential reads with a prefetcher in play).
    """

    device_id: str
    kind: DeviceKind
    capacity_bytes: int
    base_latency_ns: float
    peak_bandwidth_gbps: float
    per_thread_issue_cap_gbps: dict = field(default_factory=dict)
    pattern_latency_ns: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.capacity_bytes <= 0:
            raise ConfigError(f"{self.device_id}: capacity_bytes must be > 0", key="capacity_bytes")
        if self.base_latency_ns <= 0:
            raise ConfigError(f"{self.device_id}: base_latency_ns must be > 0", key="base_latency_ns")
        if self.peak_bandwidth_gbps <= 0:
            raise ConfigError(f"{self.device_id}: peak_bandwidth_gbps must be > 0", key="peak_bandwidth_gbps")
        for pattern, cap in self.per_thread_issue_cap_gbps.items():
            if cap <= 0 or cap > self.peak_bandwidth_gbps:
                raise ConfigError(
                    f"{self.device_id}: per_thread_issue_cap_gbps[{pattern}]={cap} outside (0, peak]",
                    key="per_thread_issue_cap_gbps",
                )

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceSpec":
        try:
            kind = DeviceKind(str(d["kind"]).upper())
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"device {d.get('device_id')}: bad kind", key="kind") from exc
        try:
            return cls(
                device_id=str(d["device_id"]),
                kind=kind,
                capacity_bytes=int(d["capacity_bytes"]),
                base_latency_ns=float(d["base_latency_ns"]),
                peak_bandwidth_gbps=float(d["peak_bandwidth_gbps"]),
                per_thread_issue_cap_gbps={k: float(v) for k, v in d.get("per_thread_issue_cap_gbps", {}).items()},
                pattern_latency_ns={k: float(v) for k, v in d.get("pattern_latency_ns", {}).items()},
            )
        except KeyError as exc:
            raise ConfigError(f"device missing field {exc.args[0]}", key=exc.args[0]) from exc

    def to_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "kind": self.kind.value,
            "capacity_bytes": self.capacity_bytes,
            "base_latency_ns": self.base_latency_ns,
            "peak_bandwidth_gbps": self.peak_bandwidth_gbps,
            "per_thread_issue_cap_gbps": dict(self.per_thread_issue_cap_gbps),
            "pattern_latency_ns": dict(self.pattern_latency_ns),
        }


@dataclass
class DeviceState:
    """Mutable FIFO server state; ``window`` keeps recent ``(completion_ns, bytes)`` pairs."""

    busy_until_ps: int = 0
    window: deque = field(default_factory=lambda: deque(maxlen=65536))

    @property
    def busy_until_ns(self) -> float:
        return self.busy_until_ps / PS_PER_NS

    def bytes_between(self, t1_ns: float, t2_ns: float) -> int:
        return sum(b for t, b in self.window if t1_ns <= t < t2_ns)


def service(state: DeviceState, spec: DeviceSpec, nbytes: int, arrival_ns: float) -> float:
    """Serve one request FIFO; returns its completion time in ns (no propagation latency)."""
    if nbytes <= 0:
        raise ValueError("nbytes must be > 0")
    if arrival_ns < 0:
        raise ValueError("arrival_ns must be >= 0")
    busy = np.array([state.busy_until_ps], dtype=np.int64)
    acc = np.zeros(1, dtype=np.int64)
    rate = np.array([PS_PER_NS / spec.peak_bandwidth_gbps])
    route = np.zeros(1, dtype=np.int64)
    arrival_ps = int(round(arrival_ns * PS_PER_NS))
    done = int(serve_route(busy, acc, rate, route, 1, arrival_ps, nbytes))
    state.busy_until_ps = int(busy[0])
    state.window.append((done / PS_PER_NS, nbytes))
    return done / PS_PER_NS


def unloaded_latency(spec: DeviceSpec, pattern: str = RANDOM) -> float:
    """Device contribution to the unloaded latency, in ns."""
    return spec.pattern_latency_ns.get(pattern, spec.base_latency_ns)


def issue_cap(spec: DeviceSpec, pattern: str) -> float:
    """Per-thread issue cap for a pattern; uncapped (= peak) when not calibrated."""
    return spec.per_thread_issue_cap_gbps.get(pattern, spec.peak_bandwidth_gbps)


def analytic_bandwidth(spec: DeviceSpec, pattern: str, thread_count: int, peak_gbps: float | None = None) -> float:
    """Closed-form ``min(threads * cap, peak)`` bandwidth curve.

    ``peak_gbps`` lets callers substitute a path bottleneck for the device peak.
    """
    if thread_count < 0:
        raise ValueError("thread_count must be >= 0")
    peak = spec.peak_bandwidth_gbps if peak_gbps is None else peak_gbps
    return min(thread_count * issue_cap(spec, pattern), peak)


def pattern_class(pattern: str) -> str:
    """Map workload pattern names onto the two calibrated classes."""
    return SEQUENTIAL if pattern.lower() in ("seq", "seq_stream", "sequential") else RANDOM
