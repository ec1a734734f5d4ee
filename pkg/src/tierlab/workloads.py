"""Synthetic access generators and multi-object proxy workloads."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import kernels as K
from .errors import ConfigError

MIB = 2**20


class Pattern(str, Enum):
    POINTER_CHASE = "POINTER_CHASE"
    SEQ_STREAM = "SEQ_STREAM"
    RAND_STREAM = "RAND_STREAM"
    GUPS = "GUPS"
    ZIPF = "ZIPF"


PATTERN_CODE = {
    Pattern.SEQ_STREAM: K.PAT_SEQ,
    Pattern.RAND_STREAM: K.PAT_RAND,
    Pattern.POINTER_CHASE: K.PAT_CHASE,
    Pattern.ZIPF: K.PAT_ZIPF,
    Pattern.GUPS: K.PAT_GUPS,
}

_PATTERN_ALIASES = {"SEQ": "SEQ_STREAM", "SEQUENTIAL": "SEQ_STREAM", "RAND": "RAND_STREAM", "RANDOM": "RAND_STREAM",
                    "CHASE": "POINTER_CHASE", "POINTER": "POINTER_CHASE"}


def parse_pattern(text) -> Pattern:
    if isinstance(text, Pattern):
        return text
    key = str(text).strip().upper()
    try:
        return Pattern(_PATTERN_ALIASES.get(key, key))
    except ValueError as exc:
        raise ConfigError(f"unknown access pattern {text!r}", key="workload.objects.pattern") from exc


def pattern_class(pattern: Pattern) -> str:
    """Calibration class for a generator: sequential streams vs everything else."""
    return "sequential" if pattern == Pattern.SEQ_STREAM else "random"


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    size_bytes: int
    pattern: Pattern = Pattern.RAND_STREAM
    access_share: float = 1.0
    access_bytes: int = 64
    compute_gap_ns: float = 0.0
    theta: float = 0.99
    hot_fraction: float = 0.1

    def __post_init__(self):
        if self.size_bytes <= 0:
            raise ConfigError(f"object {self.name}: size_bytes must be > 0", key="workload.objects.size_bytes")
        if self.access_bytes <= 0:
            raise ConfigError(f"object {self.name}: access_bytes must be > 0", key="workload.objects.access_bytes")
        if self.access_share < 0:
            raise ConfigError(f"object {self.name}: access_share must be >= 0", key="workload.objects.access_share")
        if self.theta <= 0:
            raise ConfigError(f"object {self.name}: theta must be > 0", key="workload.objects.theta")
        if not 0 < self.hot_fraction <= 1:
            raise ConfigError(f"object {self.name}: hot_fraction must be in (0, 1]", key="workload.objects.hot_fraction")

    @property
    def dependent(self) -> bool:
        return self.pattern == Pattern.POINTER_CHASE

    def pages(self, page_size: int) -> int:
        return -(-self.size_bytes // page_size)

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectSpec":
        try:
            return cls(
                name=str(d.get("name", "obj")),
                size_bytes=int(d["size_bytes"]),
                pattern=parse_pattern(d.get("pattern", "RAND_STREAM")),
                access_share=float(d.get("access_share", 1.0)),
                access_bytes=int(d.get("access_bytes", 64)),
                compute_gap_ns=float(d.get("compute_gap_ns", 0.0)),
                theta=float(d.get("theta", 0.99)),
                hot_fraction=float(d.get("hot_fraction", 0.1)),
            )
        except KeyError as exc:
            raise ConfigError(f"workload object missing {exc.args[0]}", key=f"workload.objects.{exc.args[0]}") from exc

    def to_dict(self) -> dict:
        return {"name": self.name, "size_bytes": self.size_bytes, "pattern": self.pattern.value,
                "access_share": self.access_share, "access_bytes": self.access_bytes,
                "compute_gap_ns": self.compute_gap_ns, "theta": self.theta, "hot_fraction": self.hot_fraction}


@dataclass(frozen=True)
class ProxyWorkload:
    """Objects plus the threads that access them.

    Every thread draws its next object by ``access_share`` and issues through
    ``agent`` (a socket or a GPU; ``None`` means the home socket).
    """

    name: str
    objects: tuple
    threads: int = 1
    agent: str | None = None
    max_outstanding: int = 10
    injection_delay_ns: float = 0.0
    op_count: int | None = 10_000  # per thread
    duration_ns: float | None = None

    def __post_init__(self):
        if not self.objects:
            raise ConfigError("workload needs at least one object", key="workload.objects")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1", key="workload.threads")
        if self.max_outstanding < 1:
            raise ConfigError("max_outstanding must be >= 1", key="workload.max_outstanding")
        if self.injection_delay_ns < 0:
            raise ConfigError("injection_delay_ns must be >= 0", key="workload.injection_delay_ns")
        total = sum(o.access_share for o in self.objects)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"access shares sum to {total}, expected 1", key="workload.objects.access_share")
        if self.op_count is None and self.duration_ns is None:
            raise ConfigError("workload needs op_count or duration_ns", key="workload.op_count")

    @property
    def footprint_bytes(self) -> int:
        return sum(o.size_bytes for o in self.objects)

    def footprint_pages(self, page_size: int) -> int:
        return sum(o.pages(page_size) for o in self.objects)

    def with_(self, **kw) -> "ProxyWorkload":
        return replace(self, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ProxyWorkload":
        d = dict(d)
        if "proxy" in d:
            base = build_proxy(d.pop("proxy"))
            objs = d.pop("objects", None)
            if objs is not None:
                base = replace(base, objects=tuple(ObjectSpec.from_dict(o) for o in objs))
            return replace(base, **_workload_fields(d))
        try:
            objects = tuple(ObjectSpec.from_dict(o) for o in d.pop("objects"))
        except KeyError as exc:
            raise ConfigError("workload needs 'proxy' or 'objects'", key="workload.objects") from exc
        return cls(name=str(d.pop("name", "custom")), objects=objects, **_workload_fields(d))

    def to_dict(self) -> dict:
        return {"name": self.name, "objects": [o.to_dict() for o in self.objects], "threads": self.threads,
                "agent": self.agent, "max_outstanding": self.max_outstanding,
                "injection_delay_ns": self.injection_delay_ns, "op_count": self.op_count,
                "duration_ns": self.duration_ns}


def _workload_fields(d: dict) -> dict:
    out = {}
    casts = {"name": str, "threads": int, "agent": lambda v: None if v is None else str(v),
             "max_outstanding": int, "injection_delay_ns": float,
             "op_count": lambda v: None if v is None else int(v),
             "duration_ns": lambda v: None if v is None else float(v)}
    for k, v in d.items():
        if k not in casts:
            raise ConfigError(f"unknown workload field {k!r}", key=f"workload.{k}")
        out[k] = casts[k](v)
    return out


class ProxyKind(str, Enum):
    BANDWIDTH_BOUND = "BANDWIDTH_BOUND"
    LATENCY_BOUND = "LATENCY_BOUND"
    MIXED_TWO_OBJECT = "MIXED_TWO_OBJECT"
    HOT_COLD_SKEW = "HOT_COLD_SKEW"


def build_proxy(kind) -> ProxyWorkload:
    """Canonical proxy workloads, addressable by name (case-insensitive)."""
    try:
        kind = ProxyKind(str(kind.value if isinstance(kind, Enum) else kind).upper())
    except ValueError as exc:
        raise ConfigError(f"unknown proxy workload {kind!r}", key="workload.proxy") from exc
    if kind == ProxyKind.BANDWIDTH_BOUND:
        return ProxyWorkload("bandwidth_bound", (
            ObjectSpec("stream", 64 * MIB, Pattern.SEQ_STREAM, 1.0, access_bytes=4096),
        ), threads=16, max_outstanding=10, op_count=2000)
    if kind == ProxyKind.LATENCY_BOUND:
        return ProxyWorkload("latency_bound", (
            ObjectSpec("chain", 64 * MIB, Pattern.POINTER_CHASE, 1.0, access_bytes=64),
        ), threads=1, max_outstanding=1, op_count=10_000)
    if kind == ProxyKind.MIXED_TWO_OBJECT:
        # streaming object allocated first so it claims LDRAM under preferred placement;
        # 8 threads keep the stream issue-bound rather than CXL-bandwidth-bound
        return ProxyWorkload("mixed_two_object", (
            ObjectSpec("stream", 48 * MIB, Pattern.SEQ_STREAM, 0.8, access_bytes=4096),
            ObjectSpec("chain", 16 * MIB, Pattern.POINTER_CHASE, 0.2, access_bytes=64),
        ), threads=8, max_outstanding=10, op_count=2000)
    return ProxyWorkload("hot_cold_skew", (
        ObjectSpec("heap", 64 * MIB, Pattern.ZIPF, 1.0, access_bytes=64, compute_gap_ns=1000.0,
                   theta=0.99, hot_fraction=0.1),
    ), threads=4, max_outstanding=10, op_count=None, duration_ns=400e6)


# ---------------------------------------------------------------- generator state


@dataclass(frozen=True)
class GeneratorSpec:
    pattern: Pattern
    targets: tuple  # ((object_index, weight), ...)
    access_bytes: int = 64
    compute_gap_ns: float = 0.0
    op_count: int | None = None
    duration_ns: float | None = None
    theta: float = 0.99
    hot_fraction: float = 0.1

    def __post_init__(self):
        if self.theta <= 0:
            raise ConfigError("theta must be > 0", key="theta")
        if not 0 < self.hot_fraction <= 1:
            raise ConfigError("hot_fraction must be in (0, 1]", key="hot_fraction")
        total = sum(w for _, w in self.targets)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"target weights sum to {total}, expected 1", key="targets")


@dataclass(frozen=True)
class Access:
    object_id: int
    offset_bytes: int
    page_offset: int
    dependent: bool


def zipf_cdf(n: int, theta: float) -> np.ndarray:
    """CDF over ranks 1..n of the Zipf(theta) law."""
    w = np.arange(1, n + 1, dtype=np.float64) ** -theta
    c = np.cumsum(w)
    return c / c[-1]


def hot_mass(n: int, theta: float, k: int) -> float:
    """Probability that a Zipf(theta) draw over n ranks lands in the top k."""
    w = np.arange(1, n + 1, dtype=np.float64) ** -theta
    return float(w[:k].sum() / w.sum())


@dataclass
class WorkloadArrays:
    """Flattened generator state for all threads, as consumed by the kernels."""

    objs: np.ndarray
    perm: np.ndarray
    zipf_cdf: np.ndarray
    wcdf: np.ndarray
    cursors: np.ndarray
    rng: np.ndarray


def thread_rng_states(seed: int, threads: int) -> np.ndarray:
    """One independent splitmix64 state per thread, split from the run seed."""
    return np.random.SeedSequence(int(seed)).generate_state(max(threads, 1), dtype=np.uint64)[:threads].copy()


def build_arrays(workload: ProxyWorkload, page_size: int, seed: int, first_pages=None) -> WorkloadArrays:
    """Kernel arrays for ``workload``; ``first_pages[i]`` is object i's first page id."""
    nobj = len(workload.objects)
    objs = np.zeros((nobj, K.OB_COLS), dtype=np.int64)
    total_pages = workload.footprint_pages(page_size)
    perm = np.zeros(total_pages, dtype=np.int64)
    cdfs = []
    zoff = 0
    if first_pages is None:
        first_pages = np.cumsum([0] + [o.pages(page_size) for o in workload.objects])[:-1]
    shuffler = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    for i, o in enumerate(workload.objects):
        npg = o.pages(page_size)
        fp = int(first_pages[i])
        objs[i] = (fp, npg, PATTERN_CODE[o.pattern], o.access_bytes, int(round(o.compute_gap_ns * K.PS_PER_NS)),
                   zoff, 1 if o.dependent else 0)
        if o.pattern == Pattern.ZIPF:
            perm[fp:fp + npg] = shuffler.permutation(npg)
            cdfs.append(zipf_cdf(npg, o.theta))
            zoff += npg
        else:
            perm[fp:fp + npg] = np.arange(npg)
    zcdf = np.concatenate(cdfs) if cdfs else np.zeros(1)
    shares = np.array([o.access_share for o in workload.objects], dtype=np.float64)
    wc = np.cumsum(shares)
    wc[-1] = 1.0
    wcdf = np.tile(wc, (workload.threads, 1))
    cursors = np.zeros((workload.threads, nobj, 3), dtype=np.int64)
    for j, o in enumerate(workload.objects):
        span = (o.size_bytes // workload.threads) // o.access_bytes * o.access_bytes
        if span < o.access_bytes:
            span = o.size_bytes // o.access_bytes * o.access_bytes
            starts = [0] * workload.threads
        else:
            starts = [t * span for t in range(workload.threads)]
        for t in range(workload.threads):
            cursors[t, j] = (starts[t], max(span, o.access_bytes), 0)
    return WorkloadArrays(objs, perm, zcdf, wcdf, cursors, thread_rng_states(seed, workload.threads))


class GeneratorState:
    """Single-thread view over the kernel generator (used for testing and replay)."""

    def __init__(self, workload: ProxyWorkload, page_size: int = 4096, seed: int = 0, thread: int = 0):
        self.workload = workload
        self.page_size = page_size
        self.arrays = build_arrays(workload, page_size, seed)
        self.thread = thread


def next_access(state: GeneratorState, rng: np.ndarray | None = None) -> Access:
    """Draw the next access of ``state.thread``; ``rng`` defaults to the state's own stream."""
    a = state.arrays
    rng = a.rng if rng is None else rng
    with np.errstate(over="ignore"):
        o, off = K.next_access(a.wcdf, a.cursors, a.objs, a.perm, a.zipf_cdf, rng, state.thread, state.page_size)
    o, off = int(o), int(off)
    return Access(o, off, off // state.page_size, state.workload.objects[o].dependent)
