"""Sockets, CPU-less memory nodes, GPUs and the links between them.

Memory nodes are identified by their device id.  A socket reaches its own
DRAM without a link; everything else goes through FIFO link servers, one per
direction.  A ``HOST_BRIDGE`` link on a socket models the root complex relaying
PCIe traffic between two PCIe ports (GPU <-> CXL under CXL 1.1).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .devices import RANDOM, DeviceKind, DeviceSpec, unloaded_latency
from .errors import ConfigError, UnreachableNode
from .kernels import PS_PER_NS


class LinkKind(str, Enum):
    INTER_SOCKET = "INTER_SOCKET"
    PCIE_CXL = "PCIE_CXL"
    PCIE_GPU = "PCIE_GPU"
    HOST_BRIDGE = "HOST_BRIDGE"


_PCIE = (LinkKind.PCIE_CXL, LinkKind.PCIE_GPU)


@dataclass(frozen=True)
class Link:
    link_id: str
    kind: LinkKind
    ends: tuple
    latency_ns: float
    peak_bandwidth_gbps: float

    def __post_init__(self):
        if self.latency_ns < 0:
            raise ConfigError(f"link {self.link_id}: latency_ns must be >= 0", key="latency_ns")
        if self.peak_bandwidth_gbps <= 0:
            raise ConfigError(f"link {self.link_id}: peak_bandwidth_gbps must be > 0", key="peak_bandwidth_gbps")

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                link_id=str(d["link_id"]),
                kind=LinkKind(str(d["kind"]).upper()),
                ends=tuple(d["ends"]),
                latency_ns=float(d["latency_ns"]),
                peak_bandwidth_gbps=float(d["peak_bandwidth_gbps"]),
            )
        except KeyError as exc:
            raise ConfigError(f"link missing field {exc.args[0]}", key=exc.args[0]) from exc
        except ValueError as exc:
            raise ConfigError(f"link {d.get('link_id')}: {exc}", key="kind") from exc

    def to_dict(self):
        return {
            "link_id": self.link_id,
            "kind": self.kind.value,
            "ends": list(self.ends),
            "latency_ns": self.latency_ns,
            "peak_bandwidth_gbps": self.peak_bandwidth_gbps,
        }


@dataclass(frozen=True)
class Socket:
    socket_id: str
    cores: int
    local_nodes: tuple


@dataclass(frozen=True)
class Gpu:
    gpu_id: str
    transfer_overhead_ns: float = 0.0


@dataclass(frozen=True)
class Segment:
    link: Link
    reverse: bool  # traversed ends[1] -> ends[0]


@dataclass(frozen=True)
class DataPath:
    agent: str
    segments: tuple
    terminal: str

    @property
    def kinds(self):
        return [s.link.kind for s in self.segments]


@dataclass
class Topology:
    devices: list
    sockets: list
    gpus: list = field(default_factory=list)
    links: list = field(default_factory=list)
    home_socket: str | None = None

    def __post_init__(self):
        self._dev = {d.device_id: d for d in self.devices}
        if len(self._dev) != len(self.devices):
            raise ConfigError("duplicate device ids", key="devices")
        self._sock = {s.socket_id: s for s in self.sockets}
        self._gpu = {g.gpu_id: g for g in self.gpus}
        self._adj = {}
        self._bridge = {}
        names = set(self._dev) | set(self._sock) | set(self._gpu)
        for s in self.sockets:
            for n in s.local_nodes:
                if n not in self._dev:
                    raise ConfigError(f"socket {s.socket_id}: unknown local node {n}", key="local_nodes")
                self._adj.setdefault(s.socket_id, []).append((n, None, False))
                self._adj.setdefault(n, []).append((s.socket_id, None, True))
        for link in self.links:
            a, b = link.ends
            for end in (a, b):
                if end not in names:
                    raise ConfigError(f"link {link.link_id}: unknown endpoint {end}", key="ends")
            if link.kind == LinkKind.HOST_BRIDGE:
                self._bridge[a] = link
                continue
            self._adj.setdefault(a, []).append((b, link, False))
            self._adj.setdefault(b, []).append((a, link, True))
        if self.home_socket is None and self.sockets:
            self.home_socket = self.sockets[0].socket_id
        for d in self.devices:
            if d.kind == DeviceKind.CXL and any(d.device_id in s.local_nodes for s in self.sockets):
                raise ConfigError(f"CXL node {d.device_id} cannot be socket-local (CPU-less)", key="local_nodes")
        for s in self.sockets:
            for d in self.devices:
                self.resolve_path(s.socket_id, d.device_id)

    # ---- lookup
    def device(self, device_id) -> DeviceSpec:
        try:
            return self._dev[device_id]
        except KeyError as exc:
            raise UnreachableNode(f"unknown node {device_id}") from exc

    @property
    def node_ids(self):
        return [d.device_id for d in self.devices]

    @property
    def agents(self):
        return [s.socket_id for s in self.sockets] + [g.gpu_id for g in self.gpus]

    def node_index(self, node_id):
        return self.node_ids.index(node_id)

    def agent_overhead_ns(self, agent) -> float:
        g = self._gpu.get(agent)
        return g.transfer_overhead_ns if g else 0.0

    def host_socket(self, agent):
        """Socket an agent issues through (a GPU's attached socket)."""
        if agent in self._sock:
            return agent
        for nb, link, _ in self._adj.get(agent, []):
            if nb in self._sock:
                return nb
        raise UnreachableNode(f"agent {agent} has no host socket")

    def find_node(self, alias, socket=None):
        """Resolve ``ldram``/``rdram``/``cxl`` (relative to ``socket``) or a device id."""
        if alias in self._dev:
            return alias
        socket = socket or self.home_socket
        a = alias.lower()
        order = self.tier_order(socket)
        if a == "ldram":
            return self._sock[socket].local_nodes[0]
        if a == "rdram":
            for n in order:
                if self._dev[n].kind != DeviceKind.CXL and n not in self._sock[socket].local_nodes:
                    return n
        if a == "cxl":
            for n in order:
                if self._dev[n].kind == DeviceKind.CXL:
                    return n
        raise ConfigError(f"unknown node alias {alias!r}", key="node")

    # ---- routing
    def resolve_path(self, agent, target) -> DataPath:
        if agent not in self._sock and agent not in self._gpu:
            raise UnreachableNode(f"unknown agent {agent}")
        if target not in self._dev:
            raise UnreachableNode(f"unknown node {target}")
        # Dijkstra on (hops, latency); memory nodes are leaves.
        best = {agent: (0, 0.0)}
        prev = {}
        heap = [(0, 0.0, agent)]
        while heap:
            hops, lat, v = heapq.heappop(heap)
            if v == target:
                break
            if (hops, lat) != best[v] or (v in self._dev and v != agent):
                continue
            for nb, link, rev in self._adj.get(v, []):
                cand = (hops + 1, lat + (link.latency_ns if link else 0.0))
                if nb not in best or cand < best[nb]:
                    best[nb] = cand
                    prev[nb] = (v, link, rev)
                    heapq.heappush(heap, (cand[0], cand[1], nb))
        if target not in prev and target != agent:
            raise UnreachableNode(f"no path from {agent} to {target}")
        hops = []
        v = target
        while v != agent:
            u, link, rev = prev[v]
            hops.append((u, link, rev))
            v = u
        hops.reverse()
        segments = []
        last_pcie_at = None
        for via, link, rev in hops:
            if link is None:
                last_pcie_at = None
                continue
            if link.kind in _PCIE and last_pcie_at is not None and via == last_pcie_at and via in self._bridge:
                segments.append(Segment(self._bridge[via], False))
            segments.append(Segment(link, rev))
            # vertex on the far side of this link
            far = link.ends[0] if rev else link.ends[1]
            last_pcie_at = far if link.kind in _PCIE else None
        return DataPath(agent=agent, segments=tuple(segments), terminal=target)

    def hops(self, agent, target) -> int:
        return sum(1 for s in self.resolve_path(agent, target).segments if s.link.kind != LinkKind.HOST_BRIDGE)

    @property
    def numa_distance(self):
        """Hop counts, sockets x nodes."""
        return np.array([[self.hops(s.socket_id, n) for n in self.node_ids] for s in self.sockets], dtype=np.int64)

    def tier_order(self, agent, nodes=None):
        """Nodes by ascending unloaded path latency from ``agent`` (ties by index)."""
        nodes = self.node_ids if nodes is None else list(nodes)
        return sorted(nodes, key=lambda n: (path_latency(self.resolve_path(agent, n), self), self.node_index(n)))

    def distance_order(self, agent, nodes=None):
        """Nodes by ascending NUMA distance (hops, then latency, then index)."""
        nodes = self.node_ids if nodes is None else list(nodes)
        return sorted(nodes, key=lambda n: (self.hops(agent, n),
                                            path_latency(self.resolve_path(agent, n), self),
                                            self.node_index(n)))

    # ---- servers
    def server_count(self):
        return len(self.devices) + 2 * len(self.links)

    def server_of(self, segment: Segment):
        return len(self.devices) + 2 * self.links.index(segment.link) + (1 if segment.reverse else 0)

    def server_names(self):
        names = list(self.node_ids)
        for link in self.links:
            a, b = link.ends
            names += [f"{link.link_id}:{a}->{b}", f"{link.link_id}:{b}->{a}"]
        return names

    def ps_per_byte(self):
        rates = [PS_PER_NS / d.peak_bandwidth_gbps for d in self.devices]
        for link in self.links:
            rates += [PS_PER_NS / link.peak_bandwidth_gbps] * 2
        return np.array(rates, dtype=np.float64)

    def read_route(self, agent, target):
        """Servers a read visits in data-flow order (memory -> agent)."""
        path = self.resolve_path(agent, target)
        route = [self.node_index(target)]
        for seg in reversed(path.segments):
            route.append(self.server_of(Segment(seg.link, not seg.reverse)))
        return route

    def migration_route(self, src, dst):
        """Servers a page copy visits, ``src`` device to ``dst`` device, via the nearest socket."""
        best = None
        for s in self.sockets:
            a = self.resolve_path(s.socket_id, src)
            b = self.resolve_path(s.socket_id, dst)
            key = (len(a.segments) + len(b.segments), s.socket_id)
            if best is None or key < best[0]:
                best = (key, a, b)
        _, a, b = best
        route = [self.node_index(src)]
        for seg in reversed(a.segments):
            route.append(self.server_of(Segment(seg.link, not seg.reverse)))
        for seg in b.segments:
            route.append(self.server_of(seg))
        route.append(self.node_index(dst))
        lat = (sum(s.link.latency_ns for s in a.segments) + sum(s.link.latency_ns for s in b.segments)
               + unloaded_latency(self._dev[src]) + unloaded_latency(self._dev[dst]))
        return route, lat

    # ---- serialization
    @classmethod
    def from_config(cls, cfg: dict) -> "Topology":
        try:
            devices = [DeviceSpec.from_dict(d) for d in cfg["devices"]]
            topo = cfg["topology"]
            sockets = [Socket(str(s["socket_id"]), int(s.get("cores", 1)), tuple(s.get("local_nodes", [])))
                       for s in topo["sockets"]]
            gpus = [Gpu(str(g["gpu_id"]), float(g.get("transfer_overhead_ns", 0.0))) for g in topo.get("gpus", [])]
            links = [Link.from_dict(x) for x in cfg.get("links", [])]
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc.args[0]}", key=exc.args[0]) from exc
        return cls(devices, sockets, gpus, links, topo.get("home_socket"))


def path_latency(path: DataPath, topology: Topology, pattern: str = RANDOM) -> float:
    """Unloaded latency of a path: link latencies plus the terminal device's."""
    return sum(s.link.latency_ns for s in path.segments) + unloaded_latency(topology.device(path.terminal), pattern)


def path_bandwidth(path: DataPath, topology: Topology) -> float:
    """Bottleneck bandwidth (pipelined transfer) of a path."""
    peaks = [s.link.peak_bandwidth_gbps for s in path.segments]
    peaks.append(topology.device(path.terminal).peak_bandwidth_gbps)
    return min(peaks)


def resolve_path(topology: Topology, agent: str, target: str) -> DataPath:
    return topology.resolve_path(agent, target)
