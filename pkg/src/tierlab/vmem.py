"""Page-granular memory state: residency, capacity, hint-fault arming, LRU, migration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels as K
from .errors import DestinationFull, MigrationInFlight, NotMigratable, OutOfMemory
from .topology import Topology

DEFAULT_PAGE_SIZE = 4096
DEFAULT_FAULT_DELAY_NS = 1000.0
DEFAULT_LRU_WINDOW_NS = 10_000_000.0


@dataclass(frozen=True)
class Page:
    page_id: int
    object_id: int
    node_id: str
    migratable: bool
    protected: bool
    last_fault_ns: float | None
    prev_fault_ns: float | None
    fault_count: int
    lru: str
    last_touch_ns: float | None


@dataclass(frozen=True)
class NodeResidency:
    node_id: str
    capacity_pages: int
    used_pages: int
    promote_watermark_pages: int
    demote_watermark_pages: int


@dataclass(frozen=True)
class HintFault:
    page_id: int
    accessor_node: str
    now_ns: float
    delay_ns: float


def _opt_ns(v):
    return None if v < 0 else v / K.PS_PER_NS


class Fabric:
    """Server state (devices then link directions) shared by requests and migrations."""

    def __init__(self, topology: Topology):
        self.topology = topology
        n = topology.server_count()
        self.busy = np.zeros(n, dtype=np.int64)
        self.busy_acc = np.zeros(n, dtype=np.int64)
        self.bytes = np.zeros(n, dtype=np.int64)
        self.ps_per_byte = topology.ps_per_byte()
        nn = len(topology.devices)
        routes = {(a, b): topology.migration_route(a, b) for a in topology.node_ids for b in topology.node_ids if a != b}
        width = max([len(r) for r, _ in routes.values()] + [1])
        self.mig_srv = np.full((nn, nn, width), -1, dtype=np.int64)
        self.mig_len = np.zeros((nn, nn), dtype=np.int64)
        self.mig_lat = np.zeros((nn, nn), dtype=np.int64)
        for (a, b), (route, lat) in routes.items():
            i, j = topology.node_index(a), topology.node_index(b)
            self.mig_srv[i, j, :len(route)] = route
            self.mig_len[i, j] = len(route)
            self.mig_lat[i, j] = int(round(lat * K.PS_PER_NS))


class PageTable:
    def __init__(self, topology: Topology, page_size: int = DEFAULT_PAGE_SIZE,
                 capacity_pages: dict | None = None, fault_delay_ns: float = DEFAULT_FAULT_DELAY_NS,
                 lru_window_ns: float = DEFAULT_LRU_WINDOW_NS):
        self.topology = topology
        self.page_size = int(page_size)
        self.fault_delay_ns = fault_delay_ns
        self.lru_window_ps = int(round(lru_window_ns * K.PS_PER_NS))
        ids = topology.node_ids
        self.nodes = np.zeros((len(ids), K.ND_COLS), dtype=np.int64)
        capacity_pages = capacity_pages or {}
        for i, d in enumerate(topology.devices):
            self.nodes[i, K.ND_CAPACITY] = int(capacity_pages.get(d.device_id, d.capacity_bytes // self.page_size))
        self.pages = np.zeros((0, K.PG_COLS), dtype=np.int64)
        self.counters = {"pgmigrate_success": 0, "pgpromote_success": 0, "pgdemote_kswapd": 0}
        self._pending = []  # (completion_ps, page, dst_index, flavour, src_index)

    # ---- views
    def __len__(self):
        return self.pages.shape[0]

    def node_index(self, node_id):
        return self.topology.node_index(node_id)

    def node_id(self, index):
        return self.topology.node_ids[index]

    def free_pages(self, node_id):
        return int(K.node_free(self.nodes, self.node_index(node_id)))

    def residency(self, node_id) -> NodeResidency:
        r = self.nodes[self.node_index(node_id)]
        return NodeResidency(node_id, int(r[K.ND_CAPACITY]), int(r[K.ND_USED]),
                             int(r[K.ND_PROMOTE_WM]), int(r[K.ND_DEMOTE_WM]))

    def set_watermarks(self, node_id, promote_pages, demote_pages=0):
        if demote_pages > promote_pages:
            raise ValueError("demote watermark must not exceed promote watermark")
        i = self.node_index(node_id)
        self.nodes[i, K.ND_PROMOTE_WM] = promote_pages
        self.nodes[i, K.ND_DEMOTE_WM] = demote_pages

    def page(self, pid) -> Page:
        r = self.pages[pid]
        return Page(
            page_id=int(pid), object_id=int(r[K.PG_OBJ]), node_id=self.node_id(int(r[K.PG_NODE])),
            migratable=bool(r[K.PG_MIGRATABLE]), protected=bool(r[K.PG_PROTECTED]),
            last_fault_ns=_opt_ns(r[K.PG_LAST_FAULT]), prev_fault_ns=_opt_ns(r[K.PG_PREV_FAULT]),
            fault_count=int(r[K.PG_FAULTS]), lru="ACTIVE" if r[K.PG_LRU] == K.LRU_ACTIVE else "INACTIVE",
            last_touch_ns=_opt_ns(r[K.PG_LAST_TOUCH]),
        )

    def placement_map(self):
        """Node id of every page, in page order."""
        ids = self.topology.node_ids
        return [ids[n] for n in self.pages[:, K.PG_NODE]]

    # ---- operations
    def allocate(self, object_id: int, n_pages: int, placement: Callable[[int], Sequence[str]],
                 migratable: bool = True) -> list:
        """Create ``n_pages`` pages; ``placement(i)`` gives the node preference order for page ``i``."""
        rows = np.zeros((n_pages, K.PG_COLS), dtype=np.int64)
        rows[:, K.PG_OBJ] = object_id
        rows[:, K.PG_MIGRATABLE] = 1 if migratable else 0
        rows[:, K.PG_LAST_FAULT] = -1
        rows[:, K.PG_PREV_FAULT] = -1
        rows[:, K.PG_LAST_TOUCH] = -1
        rows[:, K.PG_MIGRATING] = -1
        taken = np.zeros(self.nodes.shape[0], dtype=np.int64)
        for i in range(n_pages):
            for node in placement(i):
                n = self.node_index(node)
                if self.nodes[n, K.ND_CAPACITY] - self.nodes[n, K.ND_USED] - taken[n] > 0:
                    rows[i, K.PG_NODE] = n
                    taken[n] += 1
                    break
            else:
                raise OutOfMemory(f"object {object_id}: no allowed node has room for page {i} of {n_pages}")
        first = self.pages.shape[0]
        self.pages = np.concatenate([self.pages, rows])
        self.nodes[:, K.ND_USED] += taken
        return list(range(first, first + n_pages))

    def protect(self, pid):
        """Arm a hint fault on one page (no-op for unmigratable pages)."""
        if self.pages[pid, K.PG_MIGRATABLE]:
            self.pages[pid, K.PG_PROTECTED] = 1

    def touch(self, pid, accessor: str, now_ns: float) -> HintFault | None:
        now = int(round(now_ns * K.PS_PER_NS))
        if K.page_touch(self.pages, pid, now, self.lru_window_ps) == 0:
            return None
        return HintFault(int(pid), self.topology.find_node("ldram", self.topology.host_socket(accessor)),
                         now_ns, self.fault_delay_ns)

    def migrate(self, pid, dst: str, now_ns: float, fabric: Fabric, flavour: int = K.MIG_PLAIN) -> float:
        """Start copying a page to ``dst``; residency flips when ``complete_migrations`` passes the returned time."""
        if not self.pages[pid, K.PG_MIGRATABLE]:
            raise NotMigratable(f"page {pid} is bound by an explicit memory policy")
        j = self.node_index(dst)
        i = int(self.pages[pid, K.PG_NODE])
        if i == j:
            return now_ns
        if self.pages[pid, K.PG_MIGRATING] >= 0:
            raise MigrationInFlight(f"page {pid} is already being migrated")
        if K.node_free(self.nodes, j) < 1:
            raise DestinationFull(f"node {dst} has no free page")
        now = int(round(now_ns * K.PS_PER_NS))
        self.nodes[j, K.ND_INBOUND] += 1
        self.nodes[i, K.ND_OUTBOUND] += 1
        self.pages[pid, K.PG_MIGRATING] = j
        fin = K.serve_route(fabric.busy, fabric.busy_acc, fabric.ps_per_byte, fabric.mig_srv[i, j],
                            fabric.mig_len[i, j], now, self.page_size)
        done = int(fin + fabric.mig_lat[i, j])
        self._pending.append((done, int(pid), j, flavour, i, fabric))
        return done / K.PS_PER_NS

    def complete_migrations(self, until_ns: float):
        until = int(round(until_ns * K.PS_PER_NS))
        keep = []
        for item in sorted(self._pending):
            done, pid, j, flavour, i, fabric = item
            if done > until:
                keep.append(item)
                continue
            self.nodes[i, K.ND_USED] -= 1
            self.nodes[i, K.ND_OUTBOUND] -= 1
            self.nodes[j, K.ND_INBOUND] -= 1
            self.nodes[j, K.ND_USED] += 1
            self.pages[pid, K.PG_NODE] = j
            self.pages[pid, K.PG_MIGRATING] = -1
            for s in fabric.mig_srv[i, j, :fabric.mig_len[i, j]]:
                fabric.bytes[s] += self.page_size
            self.counters["pgmigrate_success"] += 1
            if flavour == K.MIG_PROMOTE:
                self.counters["pgpromote_success"] += 1
            elif flavour == K.MIG_DEMOTE:
                self.counters["pgdemote_kswapd"] += 1
        self._pending = keep

    def check_invariants(self):
        used = np.bincount(self.pages[:, K.PG_NODE], minlength=self.nodes.shape[0])
        assert (used == self.nodes[:, K.ND_USED]).all(), "per-node used pages out of sync"
        assert (self.nodes[:, K.ND_USED] <= self.nodes[:, K.ND_CAPACITY]).all(), "capacity exceeded"
        unbound = self.pages[:, K.PG_MIGRATABLE] == 0
        assert (self.pages[unbound, K.PG_FAULTS] == 0).all(), "unmigratable page faulted"
