"""Run measurements: latency histograms, achieved bandwidth, vmstat-style counters, exports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels as K

COUNTER_NAMES = ("numa_hint_faults", "numa_hint_faults_local", "pgpromote_success", "pgdemote_kswapd",
                 "pgmigrate_success", "blocked_promotions")
_COUNTER_SLOTS = (K.C_FAULTS, K.C_FAULTS_LOCAL, K.C_PROMOTE, K.C_DEMOTE, K.C_MIGRATE, K.C_BLOCKED)
HEAD_COLUMNS = ("run_id", "policy", "workload", "threads", "simulated_runtime_ns", "mean_latency_ns",
                "p50_latency_ns", "p99_latency_ns", "total_gbps")


@dataclass(frozen=True)
class RunMetrics:
    run_id: str
    policy: str
    workload: str
    threads: int
    seed: int
    config_digest: str
    simulated_runtime_ns: float
    mean_latency_ns: float
    p50_latency_ns: float
    p99_latency_ns: float
    total_gbps: float
    device_ids: tuple = ()
    device_bytes: tuple = ()
    device_gbps: tuple = ()
    device_utilization: tuple = ()
    counters: dict = field(default_factory=lambda: {k: 0 for k in COUNTER_NAMES})
    object_access_count: tuple = ()
    object_bytes: tuple = ()
    latency_histogram: tuple = ()  # per thread, log2 ns buckets
    issued: int = 0
    completed: int = 0
    outstanding: int = 0
    migration_bytes: int = 0

    @property
    def total_bytes(self) -> int:
        return int(sum(self.object_bytes))

    def device(self, device_id) -> dict:
        i = self.device_ids.index(device_id)
        return {"bytes_served": self.device_bytes[i], "achieved_gbps": self.device_gbps[i],
                "utilization": self.device_utilization[i]}

    def row(self) -> dict:
        out = {"run_id": self.run_id, "policy": self.policy, "workload": self.workload, "threads": self.threads,
               "simulated_runtime_ns": self.simulated_runtime_ns, "mean_latency_ns": self.mean_latency_ns,
               "p50_latency_ns": self.p50_latency_ns, "p99_latency_ns": self.p99_latency_ns,
               "total_gbps": self.total_gbps}
        for d, g in zip(self.device_ids, self.device_gbps):
            out[f"{d}_gbps"] = g
        out.update(self.counters)
        return out


def empty_metrics(device_ids=(), run_id="empty", policy="", workload="", threads=0) -> RunMetrics:
    n = len(device_ids)
    return RunMetrics(run_id, policy, workload, threads, 0, "", 0.0, 0.0, 0.0, 0.0, 0.0,
                      tuple(device_ids), (0,) * n, (0.0,) * n, (0.0,) * n)


# ---------------------------------------------------------------- snapshot


def _quantile_ns(fine_hist: np.ndarray, q: float) -> float:
    total = int(fine_hist.sum())
    if total == 0:
        return 0.0
    target = max(1, int(np.ceil(q * total)))
    idx = int(np.searchsorted(np.cumsum(fine_hist), target))
    k, sub = divmod(idx, K.FINE_SUB)
    lo = float(1 << k)
    return round(lo + (sub + 0.5) * lo / K.FINE_SUB, 3)


def config_digest(config) -> str:
    from .config import sim_config_to_dict
    text = json.dumps(sim_config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def snapshot(sim) -> RunMetrics:
    """Immutable cumulative view of a :class:`~tierlab.engine.Simulation` at its current clock."""
    cfg = sim.config
    topo = sim.topology
    runtime_ps = int(sim.queue.meta[K.M_END])
    runtime_ns = runtime_ps / K.PS_PER_NS
    completed = int(sim.counters[K.C_COMPLETED])
    issued = int(sim.counters[K.C_ISSUED])
    lat_sum = int(sim.thr[:, K.TH_LAT_SUM].sum())
    nd = len(topo.node_ids)
    dev_bytes = tuple(int(b) for b in sim.fabric.bytes[:nd])

    def gbps(nbytes):
        return round(nbytes / runtime_ns, 6) if runtime_ps > 0 else 0.0

    util = tuple(round(float(b) / runtime_ps, 6) if runtime_ps > 0 else 0.0 for b in sim.fabric.busy_acc[:nd])
    obj_bytes = tuple(int(b) for b in sim.obj_stats[:, 1])
    digest = config_digest(cfg)
    wl = sim.workload
    return RunMetrics(
        run_id=f"{wl.name}-{cfg.policy_label}-t{wl.threads}-s{cfg.run.seed}-{digest[:8]}",
        policy=cfg.policy_label,
        workload=wl.name,
        threads=wl.threads,
        seed=cfg.run.seed,
        config_digest=digest,
        simulated_runtime_ns=runtime_ns,
        mean_latency_ns=round(lat_sum / completed / K.PS_PER_NS, 3) if completed else 0.0,
        p50_latency_ns=_quantile_ns(sim.fine_hist, 0.50),
        p99_latency_ns=_quantile_ns(sim.fine_hist, 0.99),
        total_gbps=gbps(sum(obj_bytes)),
        device_ids=tuple(topo.node_ids),
        device_bytes=dev_bytes,
        device_gbps=tuple(gbps(b) for b in dev_bytes),
        device_utilization=util,
        counters={name: int(sim.counters[slot]) for name, slot in zip(COUNTER_NAMES, _COUNTER_SLOTS)},
        object_access_count=tuple(int(c) for c in sim.obj_stats[:, 0]),
        object_bytes=obj_bytes,
        latency_histogram=tuple(tuple(int(x) for x in row) for row in sim.hist),
        issued=issued,
        completed=completed,
        outstanding=issued - completed,
        migration_bytes=int(sim.counters[K.C_MIG_BYTES]),
    )


# ---------------------------------------------------------------- export


def _fmt(col: str, v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if col.endswith("_ns"):
        return f"{float(v):.3f}"
    return f"{float(v):.6f}"


def columns_for(device_ids) -> list:
    return list(HEAD_COLUMNS) + [f"{d}_gbps" for d in device_ids] + list(COUNTER_NAMES)


def export_csv(metrics) -> bytes:
    """CSV with the fixed column order; accepts one RunMetrics or a list (same topology)."""
    rows = [metrics] if isinstance(metrics, RunMetrics) else list(metrics)
    if not rows:
        raise ValueError("nothing to export")
    cols = columns_for(rows[0].device_ids)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for m in rows:
        r = m.row()
        w.writerow([_fmt(c, r[c]) for c in cols])
    return buf.getvalue().encode()


def to_dict(m: RunMetrics) -> dict:
    d = asdict(m)
    for k, v in list(d.items()):
        if isinstance(v, tuple):
            d[k] = [list(x) if isinstance(x, tuple) else x for x in v]
    return d


def export_json(metrics) -> bytes:
    """JSON mirror of the metrics fields; a list for several runs."""
    if isinstance(metrics, RunMetrics):
        payload = to_dict(metrics)
    else:
        payload = [to_dict(m) for m in metrics]
    return (json.dumps(payload, indent=2) + "\n").encode()


def export(metrics, fmt: str = "csv") -> bytes:
    fmt = fmt.lower()
    if fmt == "csv":
        return export_csv(metrics)
    if fmt == "json":
        return export_json(metrics)
    raise ValueError(f"unknown export format {fmt!r}")


def from_dict(d: dict) -> RunMetrics:
    d = dict(d)
    for k in ("device_ids", "device_bytes", "device_gbps", "device_utilization", "object_access_count",
              "object_bytes"):
        d[k] = tuple(d.get(k, ()))
    d["latency_histogram"] = tuple(tuple(r) for r in d.get("latency_histogram", ()))
    return RunMetrics(**d)


def load_json(data) -> RunMetrics | list:
    obj = json.loads(data)
    return [from_dict(x) for x in obj] if isinstance(obj, list) else from_dict(obj)


def read_csv(data) -> list:
    text = data.decode() if isinstance(data, bytes) else data
    return list(csv.DictReader(io.StringIO(text)))


def write_plot_data(path, xs, ys, header=("x", "y")) -> Path:
    """Two-column (x, y) series file for plotting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, y in zip(xs, ys):
            w.writerow([_fmt("x", x), _fmt("y", y)])
    return path
