import numpy as np
import pytest

from tierlab import config as C
from tierlab import kernels as K
from tierlab.placement import parse_policy
from tierlab.engine import EventQueue, Simulation, closed_form_chase_ns, loaded_latency_sweep, run

from conftest import tiny_doc

MIB = 2**20


def tiny_cfg(objects, **wl):
    doc = tiny_doc()
    doc["workload"] = {"name": "t", "objects": objects, **wl}
    return C.build(doc)


def chase(n):
    return tiny_cfg([{"name": "c", "size_bytes": MIB, "pattern": "POINTER_CHASE"}], threads=1, op_count=n)


def test_four_access_chase_oracle():
    # 4 x (100 ns device + 64 B at 64 GB/s = 1 ns)
    m = run(chase(4))
    assert m.simulated_runtime_ns == 404.0
    assert m.completed == 4 and m.mean_latency_ns == 101.0


def test_chase_ignores_outstanding_window():
    cfg = chase(50)
    wide = cfg.with_(workload=cfg.workload.with_(max_outstanding=10))
    assert run(wide).simulated_runtime_ns == run(cfg).simulated_runtime_ns == 50 * 101.0
    assert closed_form_chase_ns(cfg.topology, "socket0", "ldram0", 50) == 50 * 101.0


def test_remote_chase_adds_link():
    cfg = tiny_cfg([{"name": "c", "size_bytes": MIB, "pattern": "POINTER_CHASE"}], threads=1, op_count=10,
                   agent="socket1")
    cfg = cfg.with_(placement=parse_policy("preferred:ldram0"))
    # 100 device + 50 link; service bottleneck is the link: 64 B at 48 GB/s, rounded to whole ps
    svc_ps = int(64 * 1000 / 48 + 0.5)
    assert run(cfg).simulated_runtime_ns == 10 * (150_000 + svc_ps) / 1000


def test_two_streams_split_peak():
    doc = tiny_doc()
    del doc["devices"][0]["per_thread_issue_cap_gbps"]
    doc["workload"] = {"name": "s", "objects": [{"name": "a", "size_bytes": 64 * MIB, "pattern": "SEQ_STREAM"}],
                       "threads": 2, "max_outstanding": 128, "op_count": 20000}
    # 128 outstanding x 64 B over ~101 ns is far above 32 GB/s per thread, so the device is the bottleneck
    sim = Simulation(C.build(doc)).run_to_end()
    m = sim.snapshot()
    rt = m.simulated_runtime_ns
    assert m.total_gbps == pytest.approx(64.0, rel=0.01)
    for t in range(2):
        assert sim.thr[t, K.TH_BYTES] / rt == pytest.approx(32.0, rel=0.01)


def test_seed_determinism():
    cfg = C.from_preset("system_b", "hot_cold_skew", overrides=["workload.op_count=20000", "run.seed=7"])
    assert run(cfg) == run(cfg)
    other = run(cfg.with_(run=cfg.run.__class__(seed=8)))
    assert other.config_digest != run(cfg).config_digest


def test_conservation_and_causality():
    cfg = C.from_preset("system_b", "MIXED_TWO_OBJECT", overrides=["workload.op_count=5000"])
    sim = Simulation(cfg)
    last_now = 0.0
    for t in np.linspace(1e3, 2e5, 12):
        sim.step_until(t)
        m = sim.snapshot()
        assert m.issued == m.completed + m.outstanding
        assert m.outstanding >= 0
        assert sim.now_ns >= last_now
        last_now = sim.now_ns
    sim.run_to_end()
    m = sim.snapshot()
    assert m.outstanding == 0 and m.completed == m.issued
    # every completion has a latency >= the fastest unloaded path, so none precedes its issue
    assert sum(map(sum, m.latency_histogram)) == m.completed
    assert sum(m.latency_histogram[t][0] for t in range(len(m.latency_histogram))) == 0


def test_event_queue_order():
    q = EventQueue(16)
    for t, tag in [(5, 1), (3, 2), (5, 3), (1, 4), (3, 5)]:
        q.push(t, 0, tag)
    out = [q.pop() for _ in range(5)]
    assert [(o[K.E_TIME], o[K.E_A]) for o in out] == [(1, 4), (3, 2), (3, 5), (5, 1), (5, 3)]


def test_loaded_sweep_shape():
    d = C.apply_policy(C.load("system_b"), "preferred:ldram")
    d["workload"] = {"name": "ll", "objects": [{"name": "l", "size_bytes": 16 * MIB, "pattern": "RAND_STREAM"}],
                     "threads": 8, "max_outstanding": 16, "op_count": 400}
    d["run"] = {"allowed_nodes": ["ldram"]}
    cfg = C.build(d)
    pts = loaded_latency_sweep(cfg, [20000, 2000, 200, 0])
    bw = [p[1] for p in pts]
    lat = [p[2] for p in pts]
    assert bw == sorted(bw) and lat == sorted(lat)
    with pytest.raises(ValueError):
        loaded_latency_sweep(cfg, [])
