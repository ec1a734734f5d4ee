import numpy as np
import pytest

from tierlab.errors import ConfigError
from tierlab.workloads import (GeneratorSpec, GeneratorState, ObjectSpec, Pattern, ProxyWorkload, build_proxy,
                               hot_mass, next_access, thread_rng_states, zipf_cdf)

MIB = 2**20


def one(pattern, size=MIB, ab=64, **kw):
    return ProxyWorkload("t", (ObjectSpec("o", size, pattern, 1.0, access_bytes=ab, **kw),), threads=1)


def test_sequential_offsets():
    g = GeneratorState(one(Pattern.SEQ_STREAM))
    assert [next_access(g).offset_bytes for _ in range(4)] == [0, 64, 128, 192]


def test_sequential_wraps_within_thread_partition():
    wl = one(Pattern.SEQ_STREAM, size=4096 * 4, ab=4096).with_(threads=2)
    g0, g1 = GeneratorState(wl, thread=0), GeneratorState(wl, thread=1)
    assert [next_access(g0).offset_bytes for _ in range(3)] == [0, 4096, 0]
    assert [next_access(g1).offset_bytes for _ in range(3)] == [8192, 12288, 8192]


def test_pointer_chase_is_dependent():
    g = GeneratorState(one(Pattern.POINTER_CHASE))
    a = [next_access(g) for _ in range(50)]
    assert all(x.dependent for x in a)
    assert all(0 <= x.offset_bytes < MIB and x.offset_bytes % 64 == 0 for x in a)


def _analytic_top_mass(n, theta, k):
    # independent of the module: harmonic-style sums in plain Python
    total = sum(r ** -theta for r in range(1, n + 1))
    return sum(r ** -theta for r in range(1, k + 1)) / total


def test_zipf_hot_set_mass():
    wl = one(Pattern.ZIPF, size=1000 * 4096, theta=0.99, hot_fraction=0.1)
    g = GeneratorState(wl, seed=11)
    hot = set(int(p) for p in g.arrays.perm[:100])
    draws = [next_access(g).page_offset for _ in range(100_000)]
    frac = sum(1 for p in draws if p in hot) / len(draws)
    expect = _analytic_top_mass(1000, 0.99, 100)
    assert hot_mass(1000, 0.99, 100) == pytest.approx(expect, rel=1e-12)
    assert frac >= 0.60
    assert frac == pytest.approx(expect, abs=0.01)


def test_zipf_cdf_shape():
    c = zipf_cdf(10, 1.0)
    assert c[-1] == pytest.approx(1.0) and np.all(np.diff(c) > 0)
    assert c[0] == pytest.approx(1 / sum(1 / r for r in range(1, 11)))


def test_object_selection_follows_shares():
    wl = ProxyWorkload("m", (ObjectSpec("a", MIB, Pattern.RAND_STREAM, 0.8),
                             ObjectSpec("b", MIB, Pattern.RAND_STREAM, 0.2)), threads=1)
    g = GeneratorState(wl, seed=5)
    n = 50_000
    share = sum(next_access(g).object_id == 0 for _ in range(n)) / n
    assert share == pytest.approx(0.8, abs=0.01)


def test_replay_is_exact():
    wl = build_proxy("hot_cold_skew")
    a = [next_access(GeneratorState(wl, seed=9)) for _ in range(1)]
    g1, g2 = GeneratorState(wl, seed=9), GeneratorState(wl, seed=9)
    assert [next_access(g1) for _ in range(500)] == [next_access(g2) for _ in range(500)]
    g3 = GeneratorState(wl, seed=10)
    assert [next_access(g3) for _ in range(50)] != [next_access(GeneratorState(wl, seed=9)) for _ in range(50)]
    del a


def test_thread_streams_are_distinct():
    s = thread_rng_states(0, 8)
    assert len(set(int(x) for x in s)) == 8
    assert np.array_equal(s, thread_rng_states(0, 8))


def test_canonical_proxies():
    m = build_proxy("MIXED_TWO_OBJECT")
    assert len(m.objects) == 2
    assert [o.access_share for o in m.objects] == [0.8, 0.2]
    stream, chain = m.objects
    assert stream.pattern == Pattern.SEQ_STREAM and chain.pattern == Pattern.POINTER_CHASE
    assert stream.size_bytes / m.footprint_bytes >= 0.10
    lat = build_proxy("latency_bound")
    assert len(lat.objects) == 1 and lat.objects[0].pattern == Pattern.POINTER_CHASE
    hc = build_proxy("hot_cold_skew")
    assert len(hc.objects) == 1 and hc.objects[0].pattern == Pattern.ZIPF
    with pytest.raises(ConfigError):
        build_proxy("gromacs")


@pytest.mark.parametrize("kw", [dict(theta=0.0), dict(hot_fraction=0.0), dict(hot_fraction=1.5),
                                dict(targets=((0, 0.5),))])
def test_generator_spec_invariants(kw):
    base = dict(pattern=Pattern.ZIPF, targets=((0, 1.0),))
    base.update(kw)
    with pytest.raises(ConfigError):
        GeneratorSpec(**base)


def test_workload_invariants():
    with pytest.raises(ConfigError):
        ProxyWorkload("x", (ObjectSpec("a", MIB, Pattern.SEQ_STREAM, 0.5),))
    with pytest.raises(ConfigError):
        one(Pattern.SEQ_STREAM).with_(threads=0)
    with pytest.raises(ConfigError):
        ProxyWorkload.from_dict({"proxy": "latency_bound", "colour": "red"})
    wl = ProxyWorkload.from_dict({"proxy": "latency_bound", "threads": 3})
    assert wl.threads == 3 and ProxyWorkload.from_dict(wl.to_dict()) == wl


def test_interleaved_stream_alternates_nodes():
    from tierlab import config as C
    from tierlab.engine import Simulation
    doc = C.apply_policy(C.load("system_b"), "interleave:ldram+cxl")
    doc["workload"] = {"name": "s", "threads": 1, "max_outstanding": 1, "op_count": 8,
                       "objects": [{"name": "a", "size_bytes": 8 * 4096, "pattern": "SEQ_STREAM",
                                    "access_bytes": 4096}]}
    sim = Simulation(C.build(doc)).run_to_end()
    assert sim.page_table.placement_map() == ["ldram", "cxl"] * 4
    m = sim.snapshot()
    assert m.device("ldram")["bytes_served"] == m.device("cxl")["bytes_served"] == 4 * 4096


def test_skew_at_twice_ldram_promotes_under_tiering08():
    from tierlab import config as C
    from tierlab.engine import run
    doc = C.apply_policy(C.load("tiering_hot_cold"), "first_touch@tiering08")
    doc["run"]["capacity_footprint_fraction"] = {"ldram": 0.5}
    doc["workload"]["duration_ns"] = 150e6
    assert run(C.build(doc)).counters["pgpromote_success"] > 0
