"""Thread-to-device assignment that maximizes aggregate analytic bandwidth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .devices import RANDOM, analytic_bandwidth
from .errors import EmptyDeviceSet
from .topology import Topology, path_bandwidth, path_latency

_EPS = 1e-9


@dataclass(frozen=True)
class BandwidthCurve:
    """Concave nondecreasing ``threads -> GB/s`` curve for one device (or path)."""

    device_id: str
    fn: Callable[[int], float]
    latency_ns: float = 0.0

    def __call__(self, threads: int) -> float:
        return self.fn(threads)

    @classmethod
    def linear_cap(cls, device_id, cap_gbps, peak_gbps, latency_ns=0.0) -> "BandwidthCurve":
        return cls(device_id, lambda t, c=cap_gbps, p=peak_gbps: min(t * c, p), latency_ns)


@dataclass(frozen=True)
class Assignment:
    counts: dict
    total_bandwidth_gbps: float

    def as_list(self, order):
        return [self.counts[d] for d in order]


def assign_threads(curves, total_threads: int) -> Assignment:
    """Greedy marginal-gain allocation of ``total_threads`` threads.

    Each thread goes to the curve with the largest increment; ties go to the
    lowest-latency device, then the lowest id.  Once every curve is flat the
    surplus lands on the lowest-latency device by the same rule.
    """
    curves = list(curves)
    if not curves:
        raise EmptyDeviceSet("assign_threads needs at least one device curve")
    if total_threads < 0:
        raise ValueError("total_threads must be >= 0")
    counts = {c.device_id: 0 for c in curves}
    value = {c.device_id: c(0) for c in curves}
    for _ in range(total_threads):
        best = None
        for c in curves:
            gain = c(counts[c.device_id] + 1) - value[c.device_id]
            key = (-round(gain / _EPS), c.latency_ns, c.device_id)
            if best is None or key < best[0]:
                best = (key, c)
        c = best[1]
        counts[c.device_id] += 1
        value[c.device_id] = c(counts[c.device_id])
    return Assignment(counts, sum(value.values()))


def curves_for(topology: Topology, agent: str | None = None, pattern: str = RANDOM, nodes=None) -> list:
    """Per-path curves from ``agent``: device issue cap, path bottleneck peak, unloaded latency."""
    agent = agent or topology.home_socket
    nodes = topology.node_ids if nodes is None else [topology.find_node(n, topology.host_socket(agent)) for n in nodes]
    out = []
    for n in nodes:
        path = topology.resolve_path(agent, n)
        dev = topology.device(n)
        peak = path_bandwidth(path, topology)
        out.append(BandwidthCurve(n, lambda t, d=dev, p=peak: analytic_bandwidth(d, pattern, t, p),
                                  path_latency(path, topology, pattern)))
    return out

