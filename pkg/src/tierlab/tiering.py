"""Hint-fault driven page migration: AutoNUMA-, Tiering-0.8- and TPP-style policies.

The event engine runs these rules inside the compiled loop; the functions here
expose the same kernels on a :class:`~tierlab.vmem.PageTable` so each rule can
be exercised and tested in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import kernels as K
from .errors import ConfigError, DestinationFull
from .vmem import Fabric, HintFault, PageTable

MS = 1_000_000.0  # ns


class TieringKind(str, Enum):
    NO_BALANCE = "NO_BALANCE"
    AUTONUMA = "AUTONUMA"
    TIERING_08 = "TIERING_08"
    TPP = "TPP"


KIND_CODE = {
    TieringKind.NO_BALANCE: K.POL_NONE,
    TieringKind.AUTONUMA: K.POL_AUTONUMA,
    TieringKind.TIERING_08: K.POL_T08,
    TieringKind.TPP: K.POL_TPP,
}

# TPP profiles more pages per pass than Tiering-0.8; AutoNUMA sits in between.
DEFAULT_PAGES_PER_SCAN = {
    TieringKind.NO_BALANCE: 1,
    TieringKind.AUTONUMA: 4096,
    TieringKind.TIERING_08: 2048,
    TieringKind.TPP: 8192,
}


@dataclass(frozen=True)
class ScannerConfig:
    scan_period_ns: float = 10 * MS
    pages_per_scan: int = 2048

    def __post_init__(self):
        if self.scan_period_ns <= 0:
            raise ConfigError("scan_period_ns must be > 0", key="tiering.scanner.scan_period_ns")
        if self.pages_per_scan < 1:
            raise ConfigError("pages_per_scan must be >= 1", key="tiering.scanner.pages_per_scan")


@dataclass(frozen=True)
class Tiering08Config:
    hot_threshold_ns: float = 1000 * MS
    promotion_budget_bytes_per_s: float = 64 * 2**20
    adjust_interval_ns: float = 20 * MS
    threshold_min_ns: float = 1 * MS
    threshold_max_ns: float = 1000 * MS

    def __post_init__(self):
        if self.promotion_budget_bytes_per_s <= 0:
            raise ConfigError("promotion budget must be > 0", key="tiering.tiering08.promotion_budget_bytes_per_s")
        if self.adjust_interval_ns <= 0:
            raise ConfigError("adjust_interval_ns must be > 0", key="tiering.tiering08.adjust_interval_ns")
        if not 0 < self.threshold_min_ns <= self.threshold_max_ns:
            raise ConfigError("need 0 < threshold_min_ns <= threshold_max_ns", key="tiering.tiering08")


@dataclass(frozen=True)
class DemotionConfig:
    enabled: bool = True
    headroom_pages: int | None = None  # None: 2% of the top tier's capacity
    headroom_fraction: float = 0.02
    batch_pages: int = 32
    period_ns: float = 1 * MS

    def headroom_for(self, capacity_pages: int) -> int:
        if self.headroom_pages is not None:
            return int(self.headroom_pages)
        return max(1, int(capacity_pages * self.headroom_fraction))


@dataclass(frozen=True)
class TieringPolicy:
    kind: TieringKind = TieringKind.NO_BALANCE
    scanner: ScannerConfig = field(default_factory=ScannerConfig)
    tiering08: Tiering08Config = field(default_factory=Tiering08Config)
    require_active_lru: bool = True
    demotion: DemotionConfig = field(default_factory=DemotionConfig)

    @property
    def scans(self) -> bool:
        return self.kind != TieringKind.NO_BALANCE

    @property
    def demotes(self) -> bool:
        return self.demotion.enabled and self.kind in (TieringKind.TIERING_08, TieringKind.TPP)

    @property
    def label(self) -> str:
        return {TieringKind.NO_BALANCE: "no_balance", TieringKind.AUTONUMA: "autonuma",
                TieringKind.TIERING_08: "tiering08", TieringKind.TPP: "tpp"}[self.kind]

    @classmethod
    def of(cls, kind, **kw) -> "TieringPolicy":
        kind = parse_kind(kind) if isinstance(kind, str) else kind
        scanner = kw.pop("scanner", None) or ScannerConfig(pages_per_scan=DEFAULT_PAGES_PER_SCAN[kind])
        return cls(kind=kind, scanner=scanner, **kw)

    @classmethod
    def from_dict(cls, d: dict | None) -> "TieringPolicy":
        d = dict(d or {})
        kind = parse_kind(d.get("kind", "no_balance"))
        sc = d.get("scanner", {})
        scanner = ScannerConfig(float(sc.get("scan_period_ns", 10 * MS)),
                                int(sc.get("pages_per_scan", DEFAULT_PAGES_PER_SCAN[kind])))
        t8 = Tiering08Config(**{k: float(v) for k, v in d.get("tiering08", {}).items()})
        dm = dict(d.get("demotion", {}))
        demotion = DemotionConfig(
            enabled=bool(dm.get("enabled", True)),
            headroom_pages=None if dm.get("headroom_pages") is None else int(dm["headroom_pages"]),
            headroom_fraction=float(dm.get("headroom_fraction", 0.02)),
            batch_pages=int(dm.get("batch_pages", 32)),
            period_ns=float(dm.get("period_ns", 1 * MS)),
        )
        return cls(kind, scanner, t8, bool(d.get("tpp", {}).get("require_active_lru", True)), demotion)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "scanner": {"scan_period_ns": self.scanner.scan_period_ns, "pages_per_scan": self.scanner.pages_per_scan},
            "tiering08": dict(self.tiering08.__dict__),
            "tpp": {"require_active_lru": self.require_active_lru},
            "demotion": dict(self.demotion.__dict__),
        }


def parse_kind(text: str) -> TieringKind:
    key = str(text).strip().upper().replace("-", "_").replace(".", "")
    aliases = {"NONE": "NO_BALANCE", "NOBALANCE": "NO_BALANCE", "OFF": "NO_BALANCE",
               "TIERING08": "TIERING_08", "TIERING_08": "TIERING_08", "T08": "TIERING_08"}
    try:
        return TieringKind(aliases.get(key, key))
    except ValueError as exc:
        raise ConfigError(f"unknown tiering policy {text!r}", key="tiering.kind") from exc


# ---------------------------------------------------------------- python-level rules


@dataclass
class ScannerState:
    cursor: int = 0
    protected_total: int = 0


def scan(page_table: PageTable, scanner: ScannerConfig, now_ns: float = 0.0, state: ScannerState | None = None) -> int:
    """Arm up to ``pages_per_scan`` migratable pages from the round-robin cursor."""
    state = state if state is not None else ScannerState()
    armed, state.cursor = K.scan_protect(page_table.pages, state.cursor, scanner.pages_per_scan)
    state.protected_total += int(armed)
    return int(armed)


@dataclass(frozen=True)
class Action:
    kind: str  # "none" | "migrate" | "promote"
    dst: str | None = None
    blocked: bool = False


@dataclass
class Tiering08State:
    hot_threshold_ns: float = 1000 * MS
    window_candidate_bytes: int = 0
    window_promoted_bytes: int = 0


def _ps(ns):
    return int(round(ns * K.PS_PER_NS))


def on_fault(policy: TieringPolicy, fault: HintFault, page_table: PageTable,
             state: Tiering08State | None = None) -> Action:
    """Policy reaction to one hint fault (decision only; nothing is moved)."""
    if policy.kind == TieringKind.NO_BALANCE:
        return Action("none")
    topo = page_table.topology
    pid = fault.page_id
    top_id = fault.accessor_node
    top = topo.node_index(top_id)
    node = int(page_table.pages[pid, K.PG_NODE])
    order = topo.tier_order(topo.host_socket(top_id) if top_id in topo.agents else _socket_of(topo, top_id))
    slow = 1 if order.index(topo.node_ids[node]) > order.index(top_id) else 0
    state = state or Tiering08State(policy.tiering08.hot_threshold_ns)
    budget_win = int(policy.tiering08.promotion_budget_bytes_per_s * policy.tiering08.adjust_interval_ns * 1e-9)
    lru = int(page_table.pages[pid, K.PG_LRU]) if policy.require_active_lru else K.LRU_ACTIVE
    act, cand = K.fault_decision(
        KIND_CODE[policy.kind], node, top, slow, int(page_table.pages[pid, K.PG_PREV_FAULT]), lru,
        _ps(fault.now_ns), _ps(state.hot_threshold_ns), int(K.node_free(page_table.nodes, top)),
        int(page_table.nodes[top, K.ND_DEMOTE_WM]), state.window_promoted_bytes, budget_win, page_table.page_size)
    if cand:
        state.window_candidate_bytes += page_table.page_size
    if act == K.ACT_MIGRATE:
        return Action("migrate", top_id)
    if act == K.ACT_PROMOTE:
        state.window_promoted_bytes += page_table.page_size
        return Action("promote", top_id)
    return Action("none", blocked=act == K.ACT_BLOCKED)


def _socket_of(topo, node_id):
    for s in topo.sockets:
        if node_id in s.local_nodes:
            return s.socket_id
    raise ConfigError(f"{node_id} is not a socket-local node", key="accessor_node")


def adjust_threshold(policy: TieringPolicy, state: Tiering08State, window_bytes: int | None = None,
                     now_ns: float = 0.0) -> float:
    """Halve/double the hot threshold from the traffic seen in the last window; resets the window."""
    cfg = policy.tiering08
    wb = state.window_candidate_bytes if window_bytes is None else int(window_bytes)
    new = K.adjust_threshold(_ps(state.hot_threshold_ns), wb, _ps(cfg.adjust_interval_ns),
                             cfg.promotion_budget_bytes_per_s, _ps(cfg.threshold_min_ns), _ps(cfg.threshold_max_ns))
    state.hot_threshold_ns = new / K.PS_PER_NS
    state.window_candidate_bytes = 0
    state.window_promoted_bytes = 0
    return state.hot_threshold_ns


def demote_daemon(page_table: PageTable, policy: TieringPolicy, now_ns: float, fabric: Fabric,
                  node: str, target: str) -> int:
    """Demote the coldest pages of ``node`` to ``target`` until free pages reach the headroom.

    Returns the number of demotions started (at most ``batch_pages``).
    """
    n = page_table.node_index(node)
    nodes = page_table.nodes
    headroom = nodes[n, K.ND_PROMOTE_WM] or policy.demotion.headroom_for(int(nodes[n, K.ND_CAPACITY]))
    free = int(K.node_free(nodes, n) + nodes[n, K.ND_OUTBOUND])
    want = min(int(headroom) - free, policy.demotion.batch_pages)
    if want <= 0:
        return 0
    started = 0
    for pid in K.coldest_pages(page_table.pages, n, want):
        try:
            page_table.migrate(int(pid), target, now_ns, fabric, K.MIG_DEMOTE)
        except DestinationFull:
            break
        started += 1
    return started
