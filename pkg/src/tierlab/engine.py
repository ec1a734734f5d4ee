"""Discrete-event simulation of threads issuing memory requests through a topology.

:class:`Simulation` lays the whole run out as numpy arrays (pages, nodes,
threads, routes, FIFO servers, an event heap) and hands them to the compiled
event loop in :mod:`tierlab.kernels`.  Time is kept in integer picoseconds so
sub-nanosecond service times accumulate exactly; every public value is in ns.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels as K
from ._accel import JIT_ENABLED
from .devices import PATTERN_CLASSES, issue_cap
from .errors import ConfigError
from .placement import (ObjectProfile, PlacementKind, PlacementPolicy, allocation_plan, oli_select,
                        preference_order)
from .tiering import KIND_CODE, TieringKind, TieringPolicy
from .topology import Topology, path_latency
from .vmem import DEFAULT_FAULT_DELAY_NS, DEFAULT_LRU_WINDOW_NS, DEFAULT_PAGE_SIZE, Fabric, PageTable
from .workloads import ProxyWorkload, build_arrays

INT64_MAX = np.iinfo(np.int64).max
CACHE_LINE = 64
_CLS_INDEX = {c: i for i, c in enumerate(PATTERN_CLASSES)}  # sequential -> 0, random -> 1
assert _CLS_INDEX["sequential"] == K.CLS_SEQ and _CLS_INDEX["random"] == K.CLS_RAND


@dataclass(frozen=True)
class RunSettings:
    seed: int = 0
    page_size: int = DEFAULT_PAGE_SIZE
    allowed_nodes: tuple = ()
    fault_delay_ns: float = DEFAULT_FAULT_DELAY_NS
    lru_window_ns: float = DEFAULT_LRU_WINDOW_NS
    timeline_bucket_ns: float = 0.0
    capacity_pages: dict = field(default_factory=dict)
    capacity_footprint_fraction: dict = field(default_factory=dict)
    profile_ops: int = 2000

    def __post_init__(self):
        if self.page_size <= 0 or self.page_size & (self.page_size - 1):
            raise ConfigError("page_size must be a positive power of two", key="run.page_size")
        if self.fault_delay_ns < 0:
            raise ConfigError("fault_delay_ns must be >= 0", key="run.fault_delay_ns")
        if self.lru_window_ns <= 0:
            raise ConfigError("lru_window_ns must be > 0", key="run.lru_window_ns")

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunSettings":
        d = dict(d or {})
        known = {f for f in cls.__dataclass_fields__}
        for k in d:
            if k not in known:
                raise ConfigError(f"unknown run setting {k!r}", key=f"run.{k}")
        if "allowed_nodes" in d:
            d["allowed_nodes"] = tuple(d["allowed_nodes"])
        for k in ("capacity_pages", "capacity_footprint_fraction"):
            if k in d:
                d[k] = dict(d[k])
        return cls(**d)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "page_size": self.page_size, "allowed_nodes": list(self.allowed_nodes),
                "fault_delay_ns": self.fault_delay_ns, "lru_window_ns": self.lru_window_ns,
                "timeline_bucket_ns": self.timeline_bucket_ns, "capacity_pages": dict(self.capacity_pages),
                "capacity_footprint_fraction": dict(self.capacity_footprint_fraction),
                "profile_ops": self.profile_ops}


@dataclass(frozen=True)
class SimConfig:
    topology: Topology
    workload: ProxyWorkload
    placement: PlacementPolicy = field(default_factory=lambda: PlacementPolicy(PlacementKind.FIRST_TOUCH))
    tiering: TieringPolicy = field(default_factory=TieringPolicy)
    run: RunSettings = field(default_factory=RunSettings)
    profiles: tuple | None = None  # OLI input; self-profiled when None

    @property
    def policy_label(self) -> str:
        label = self.placement.label
        if self.tiering.kind != TieringKind.NO_BALANCE:
            label += "@" + self.tiering.label
        return label

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class SimThread:
    thread_id: int
    home_socket: str
    agent: str
    max_outstanding: int
    injection_delay_ns: float


class EventQueue:
    """Min-heap of ``(time, sequence, kind, a, b, c, d)`` rows in integer ps.

    Thin Python handle on the kernel heap; ties pop in insertion order.
    """

    def __init__(self, capacity: int):
        self.heap = np.zeros((max(capacity, 1), K.E_COLS), dtype=np.int64)
        self.meta = np.zeros(K.N_META, dtype=np.int64)

    def __len__(self):
        return int(self.meta[K.M_HEAP_N])

    def push(self, t_ps: int, kind: int, a=0, b=0, c=0, d=0):
        K.heap_push(self.heap, self.meta, int(t_ps), int(kind), int(a), int(b), int(c), int(d))

    def pop(self):
        out = np.empty(K.E_COLS, dtype=np.int64)
        K.heap_pop(self.heap, self.meta, out)
        return tuple(int(x) for x in out)

    def peek_time(self):
        return int(self.heap[0, K.E_TIME]) if len(self) else None


def _ps(ns: float) -> int:
    return int(round(float(ns) * K.PS_PER_NS))


def _overflow_guard():
    # numpy warns on wrapping uint64 multiplies; the PRNG relies on wrapping.
    return contextlib.nullcontext() if JIT_ENABLED else np.errstate(over="ignore")


class Simulation:
    def __init__(self, config: SimConfig):
        self.config = config
        topo = self.topology = config.topology
        wl = self.workload = config.workload
        run = config.run
        ps = self.page_size = run.page_size
        self.agent = wl.agent or topo.home_socket
        if self.agent not in topo.agents:
            raise ConfigError(f"unknown agent {self.agent!r}", key="workload.agent")
        self.socket = topo.host_socket(self.agent)
        self.allowed = [topo.find_node(n, self.socket) for n in run.allowed_nodes] or list(topo.node_ids)

        # ---- capacity and allocation
        footprint = wl.footprint_pages(ps)
        caps = {}
        for alias, frac in run.capacity_footprint_fraction.items():
            caps[topo.find_node(alias, self.socket)] = int(footprint * float(frac))
        for alias, pages in run.capacity_pages.items():
            caps[topo.find_node(alias, self.socket)] = int(pages)
        for n in topo.node_ids:
            if n not in self.allowed:
                caps[n] = 0
        self.page_table = PageTable(topo, ps, caps, run.fault_delay_ns, run.lru_window_ns)
        self.fabric = Fabric(topo)
        self.profiles = None
        self.selected = set()
        if config.placement.kind == PlacementKind.OBJECT_LEVEL:
            self.profiles = list(config.profiles) if config.profiles is not None else self_profile(config)
            self.selected = oli_select(self.profiles, config.placement.footprint_share_min,
                                       config.placement.access_share_min)
        self.plan = allocation_plan(config.placement, range(len(wl.objects)), self.selected)
        first_pages = [0] * len(wl.objects)
        ring_pos = 0
        for oid, pol in self.plan:
            npg = wl.objects[oid].pages(ps)
            if pol.kind == PlacementKind.UNIFORM_INTERLEAVE:
                ring = [topo.find_node(n, self.socket) for n in pol.node_set]
                base = ring_pos
                order = lambda i, ring=ring, base=base: _rotate(ring, base + i)  # noqa: E731
                ring_pos += npg
            else:
                order = _static_order(pol, self.socket, topo, self.allowed)
            ids = self.page_table.allocate(oid, npg, order, migratable=not pol.explicit_binding)
            first_pages[oid] = ids[0]
        self.first_pages = first_pages

        # ---- watermarks for the demotion daemon
        tiering = config.tiering
        if not tiering.require_active_lru:
            raise ConfigError("only the LRU-gated TPP variant is modeled", key="tiering.tpp.require_active_lru")
        if tiering.demotes:
            for s in topo.sockets:
                for n in s.local_nodes:
                    i = topo.node_index(n)
                    cap = int(self.page_table.nodes[i, K.ND_CAPACITY])
                    self.page_table.nodes[i, K.ND_PROMOTE_WM] = min(cap, tiering.demotion.headroom_for(cap))

        # ---- routes, latencies and issue caps per agent
        agents = topo.agents
        self.agent_index = agents.index(self.agent)
        nn = len(topo.node_ids)
        routes = {(a, n): topo.read_route(a, n) for a in agents for n in topo.node_ids}
        width = max(len(r) for r in routes.values())
        self.route_srv = np.full((len(agents), nn, width), -1, dtype=np.int64)
        self.route_len = np.zeros((len(agents), nn), dtype=np.int64)
        self.route_lat = np.zeros((len(agents), nn, 2), dtype=np.int64)
        self.node_cap = np.zeros((len(agents), nn, 2), dtype=np.float64)
        for ai, a in enumerate(agents):
            overhead = topo.agent_overhead_ns(a)
            is_gpu = a not in [s.socket_id for s in topo.sockets]
            for ni, n in enumerate(topo.node_ids):
                r = routes[(a, n)]
                self.route_srv[ai, ni, :len(r)] = r
                self.route_len[ai, ni] = len(r)
                path = topo.resolve_path(a, n)
                dev = topo.device(n)
                for cls, ci in _CLS_INDEX.items():
                    self.route_lat[ai, ni, ci] = _ps(path_latency(path, topo, cls) + overhead)
                    if not is_gpu:
                        self.node_cap[ai, ni, ci] = K.PS_PER_NS / issue_cap(dev, cls)
        self.top_node = np.array([topo.node_index(topo.find_node("ldram", topo.host_socket(a))) for a in agents],
                                 dtype=np.int64)
        self.tier_rank = np.zeros((len(agents), nn), dtype=np.int64)
        for ai, a in enumerate(agents):
            order = topo.tier_order(topo.host_socket(a))
            for ni, n in enumerate(topo.node_ids):
                self.tier_rank[ai, ni] = order.index(n)
        self.demote_target = np.full(nn, -1, dtype=np.int64)
        if tiering.demotes:
            for s in topo.sockets:
                order = topo.tier_order(s.socket_id, self.allowed)
                for n in s.local_nodes:
                    if n not in order:
                        continue
                    slower = order[order.index(n) + 1:]
                    cpuless = [m for m in slower if topo.device(m).kind.value == "CXL"]
                    pick = (cpuless or slower or [None])[0]
                    if pick is not None:
                        self.demote_target[topo.node_index(n)] = topo.node_index(pick)

        # ---- workload arrays and threads
        arr = build_arrays(wl, ps, run.seed, first_pages)
        self.objs, self.perm, self.zipf_cdf = arr.objs, arr.perm, arr.zipf_cdf
        self.wcdf, self.cursors, self.rng = arr.wcdf, arr.cursors, arr.rng
        nthr = wl.threads
        self.threads = [SimThread(i, self.socket, self.agent, wl.max_outstanding, wl.injection_delay_ns)
                        for i in range(nthr)]
        self.thr = np.zeros((nthr, K.TH_COLS), dtype=np.int64)
        self.thr[:, K.TH_AGENT] = self.agent_index
        self.thr[:, K.TH_WINDOW] = wl.max_outstanding
        self.thr[:, K.TH_DELAY] = _ps(wl.injection_delay_ns)
        self.thr[:, K.TH_LIMIT] = wl.op_count if wl.op_count is not None else INT64_MAX
        self.thr[:, K.TH_PEND_OBJ] = -1
        self.thr[:, K.TH_ACTIVE] = 1

        # ---- parameters
        t8 = tiering.tiering08
        p = np.zeros(K.N_PARAMS, dtype=np.int64)
        p[K.PR_POLICY] = KIND_CODE[tiering.kind]
        p[K.PR_PAGE] = ps
        p[K.PR_FAULT_DELAY] = _ps(run.fault_delay_ns)
        p[K.PR_LRU_WIN] = _ps(run.lru_window_ns)
        p[K.PR_SCAN_ON] = 1 if tiering.scans else 0
        p[K.PR_SCAN_PERIOD] = _ps(tiering.scanner.scan_period_ns)
        p[K.PR_PER_SCAN] = tiering.scanner.pages_per_scan
        p[K.PR_ADJ_INTERVAL] = _ps(t8.adjust_interval_ns)
        p[K.PR_BUDGET_BPS] = int(t8.promotion_budget_bytes_per_s)
        p[K.PR_TH_MIN] = _ps(t8.threshold_min_ns)
        p[K.PR_TH_MAX] = _ps(t8.threshold_max_ns)
        p[K.PR_DEMOTE_ON] = 1 if tiering.demotes else 0
        p[K.PR_BATCH] = tiering.demotion.batch_pages
        p[K.PR_DEMOTE_PERIOD] = _ps(tiering.demotion.period_ns)
        p[K.PR_DURATION] = _ps(wl.duration_ns) if wl.duration_ns else 0
        p[K.PR_BUCKET] = _ps(run.timeline_bucket_ns)
        p[K.PR_BUDGET_WIN] = int(t8.promotion_budget_bytes_per_s * t8.adjust_interval_ns * 1e-9)
        self.params = p

        # ---- queue, statistics
        n_pages = len(self.page_table)
        self.queue = EventQueue(nthr * (wl.max_outstanding + 2) + n_pages + 64)
        meta = self.queue.meta
        meta[K.M_ACTIVE] = nthr
        meta[K.M_THRESH] = _ps(t8.hot_threshold_ns)
        self.counters = np.zeros(K.N_COUNTERS, dtype=np.int64)
        self.hist = np.zeros((nthr, K.HIST_BUCKETS), dtype=np.int64)
        self.fine_hist = np.zeros(K.HIST_BUCKETS * K.FINE_SUB, dtype=np.int64)
        self.obj_stats = np.zeros((len(wl.objects), 2), dtype=np.int64)
        nserv = topo.server_count()
        if p[K.PR_BUCKET] > 0:
            horizon = _ps(wl.duration_ns) if wl.duration_ns else 0
            nb = int(horizon // p[K.PR_BUCKET]) + 2 if horizon else 4096
            self.timeline = np.zeros((nserv, nb), dtype=np.int64)
        else:
            self.timeline = np.zeros((nserv, 1), dtype=np.int64)
        adj_rows = 1
        if tiering.kind == TieringKind.TIERING_08:
            adj_rows = int(_ps(wl.duration_ns) // p[K.PR_ADJ_INTERVAL]) + 2 if wl.duration_ns else 65536
        self.adj_log = np.zeros((adj_rows, 4), dtype=np.int64)

        # ---- initial events
        phase = np.random.default_rng(np.random.SeedSequence([int(run.seed), 0xFA5E]))
        for i in range(nthr):
            start = int(phase.integers(0, self.thr[i, K.TH_DELAY])) if self.thr[i, K.TH_DELAY] > 0 else 0
            self.thr[i, K.TH_START] = start
            self.queue.push(start, K.EV_ISSUE, i)
        if tiering.scans:
            self.queue.push(p[K.PR_SCAN_PERIOD], K.EV_SCAN)
        if tiering.kind == TieringKind.TIERING_08:
            self.queue.push(p[K.PR_ADJ_INTERVAL], K.EV_ADJUST)
        if tiering.demotes:
            self.queue.push(p[K.PR_DEMOTE_PERIOD], K.EV_DEMOTE)
        self.events_processed = 0

    # ---------------------------------------------------------------- stepping

    @property
    def now_ns(self) -> float:
        return int(self.queue.meta[K.M_NOW]) / K.PS_PER_NS

    @property
    def finished(self) -> bool:
        return len(self.queue) == 0

    def step_until(self, t_ns: float) -> int:
        """Process all events up to ``t_ns``; returns how many were handled."""
        return self._run(_ps(t_ns))

    def run_to_end(self):
        self._run(INT64_MAX)
        return self

    def _run(self, until_ps: int) -> int:
        pt, fab = self.page_table, self.fabric
        with _overflow_guard():
            n = K.run_events(
                np.int64(until_ps), self.queue.meta, self.params, self.queue.heap, fab.busy, fab.busy_acc,
                fab.bytes, fab.ps_per_byte, self.route_srv, self.route_len, self.route_lat, self.node_cap,
                fab.mig_srv, fab.mig_len, fab.mig_lat, pt.pages, pt.nodes, self.objs, self.obj_stats,
                self.perm, self.zipf_cdf, self.thr, self.wcdf, self.cursors, self.rng, self.top_node,
                self.tier_rank, self.demote_target, self.counters, self.hist, self.fine_hist, self.timeline,
                self.adj_log)
        self.events_processed += int(n)
        return int(n)

    def snapshot(self):
        from .metrics import snapshot
        return snapshot(self)

    # ---------------------------------------------------------------- closed forms

    def unloaded_latency_ns(self, node: str, cls: str = "random") -> float:
        """Unloaded path latency from this run's agent to ``node`` (no service time)."""
        return self.route_lat[self.agent_index, self.topology.node_index(node), _CLS_INDEX[cls]] / K.PS_PER_NS

    @property
    def adjust_log(self):
        """``(time_ns, promoted_bytes, candidate_bytes, threshold_ns)`` per Tiering-0.8 window."""
        n = int(self.queue.meta[K.M_ADJ_N])
        rows = self.adj_log[:n]
        return [(int(t) / K.PS_PER_NS, int(pb), int(cb), int(th) / K.PS_PER_NS) for t, pb, cb, th in rows]


def _rotate(ring, k):
    k %= len(ring)
    return ring[k:] + ring[:k]


def _static_order(policy, socket, topo, allowed):
    fixed = preference_order(policy, 0, socket, topo, allowed)
    return lambda i: fixed


def self_profile(config: SimConfig) -> list:
    """Per-object footprint and access counts from a short first-touch profiling run."""
    wl = config.workload
    ops = config.run.profile_ops
    probe_wl = wl.with_(op_count=min(wl.op_count or ops, ops), duration_ns=None)
    probe = replace(config, workload=probe_wl, placement=PlacementPolicy(PlacementKind.FIRST_TOUCH),
                    tiering=TieringPolicy(), profiles=())
    sim = Simulation(probe).run_to_end()
    # memory accesses are counted in cache lines, as hardware counters see them
    return [ObjectProfile(i, o.size_bytes, -(-int(sim.obj_stats[i, 1]) // CACHE_LINE), o.pattern.value)
            for i, o in enumerate(wl.objects)]


def run(config: SimConfig):
    """Run to completion and return :class:`~tierlab.metrics.RunMetrics`."""
    return Simulation(config).run_to_end().snapshot()


def loaded_latency_sweep(config: SimConfig, delays) -> list:
    """One run per injection delay; returns ``(delay_ns, achieved_gbps, mean_latency_ns, metrics)``."""
    delays = list(delays)
    if not delays:
        raise ValueError("delays must be non-empty")
    out = []
    for d in delays:
        m = run(replace(config, workload=config.workload.with_(injection_delay_ns=float(d))))
        out.append((float(d), m.total_gbps, m.mean_latency_ns, m))
    return out


def thread_sweep(config: SimConfig, t_min: int, t_max: int) -> list:
    """One run per thread count; returns ``(threads, total_gbps, metrics)``."""
    if t_min < 1 or t_max < t_min:
        raise ValueError("need 1 <= t_min <= t_max")
    out = []
    for t in range(t_min, t_max + 1):
        m = run(replace(config, workload=config.workload.with_(threads=t)))
        out.append((t, m.total_gbps, m))
    return out


def closed_form_chase_ns(topology: Topology, agent: str, node: str, n_ops: int, access_bytes: int = 64,
                         cls: str = "random") -> float:
    """Serial dependent chain on an idle path: ``n * (latency + service)``."""
    path = topology.resolve_path(agent, node)
    route = topology.read_route(agent, node)
    rates = topology.ps_per_byte()
    svc_ps = 0  # idle cut-through pipeline: the slowest stage sets the tail
    for s in route:
        svc_ps = max(svc_ps, int(np.floor(access_bytes * rates[s] + 0.5)))
    lat_ps = _ps(path_latency(path, topology, cls) + topology.agent_overhead_ns(agent))
    return n_ops * (lat_ps + svc_ps) / K.PS_PER_NS


def unloaded_path_latency(topology: Topology, agent: str, node: str, cls: str = "random") -> float:
    return path_latency(topology.resolve_path(agent, node), topology, cls) + topology.agent_overhead_ns(agent)


__all__ = ["RunSettings", "SimConfig", "SimThread", "EventQueue", "Simulation", "run", "loaded_latency_sweep",
           "thread_sweep", "self_profile", "closed_form_chase_ns", "unloaded_path_latency"]
