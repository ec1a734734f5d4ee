import itertools

import pytest
from hypothesis import given, settings, strategies as st

from tierlab import config as C
from tierlab.devices import RANDOM
from tierlab.errors import EmptyDeviceSet
from tierlab.optimizer import BandwidthCurve, assign_threads, curves_for
from tierlab.topology import Topology

lin = BandwidthCurve.linear_cap


def exhaustive(curves, total):
    best = 0.0
    for split in itertools.product(range(total + 1), repeat=len(curves) - 1):
        rest = total - sum(split)
        if rest < 0:
            continue
        best = max(best, sum(c(t) for c, t in zip(curves, split + (rest,))))
    return best


def test_single_device():
    a = assign_threads([lin("x", 8.0, 64.0)], 12)
    assert a.counts == {"x": 12} and a.total_bandwidth_gbps == 64.0


def test_three_device_example():
    curves = [lin("A", 10.0, 100.0, 100), lin("B", 10.0, 50.0, 200), lin("C", 10.0, 20.0, 300)]
    a = assign_threads(curves, 20)
    assert a.total_bandwidth_gbps == pytest.approx(170.0)
    assert a.total_bandwidth_gbps == pytest.approx(exhaustive(curves, 20))
    assert a.counts["B"] == 5 and a.counts["C"] == 2
    assert a.counts["A"] == 13  # 3 surplus threads parked on the lowest-latency device
    assert sum(a.counts.values()) == 20


def test_tie_breaks():
    a = assign_threads([lin("b", 1.0, 10.0, 50), lin("a", 1.0, 10.0, 100)], 1)
    assert a.counts == {"b": 1, "a": 0}
    a = assign_threads([lin("b", 1.0, 10.0, 50), lin("a", 1.0, 10.0, 50)], 1)
    assert a.counts == {"b": 0, "a": 1}


def test_empty_and_negative():
    with pytest.raises(EmptyDeviceSet):
        assign_threads([], 4)
    with pytest.raises(ValueError):
        assign_threads([lin("x", 1, 1)], -1)
    assert assign_threads([lin("x", 1, 1)], 0).total_bandwidth_gbps == 0.0


curve_st = st.tuples(st.floats(0.5, 20.0), st.floats(1.0, 200.0), st.floats(50, 500))


@settings(max_examples=60, deadline=None)
@given(st.lists(curve_st, min_size=1, max_size=3), st.integers(0, 24))
def test_greedy_matches_exhaustive(specs, total):
    curves = [lin(f"d{i}", c, p, l) for i, (c, p, l) in enumerate(specs)]
    a = assign_threads(curves, total)
    assert sum(a.counts.values()) == total
    assert a.total_bandwidth_gbps == pytest.approx(exhaustive(curves, total), rel=1e-9, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(curve_st, min_size=1, max_size=4), st.integers(0, 40))
def test_monotone_and_dominant(specs, total):
    curves = [lin(f"d{i}", c, p, l) for i, (c, p, l) in enumerate(specs)]
    now = assign_threads(curves, total).total_bandwidth_gbps
    assert assign_threads(curves, total + 1).total_bandwidth_gbps >= now - 1e-9
    for c in curves:
        assert now >= c(total) - 1e-9


def test_system_b_52_threads():
    topo = Topology.from_config(C.load("system_b"))
    curves = curves_for(topo, pattern=RANDOM)
    a = assign_threads(curves, 52)
    peaks = sum(c(10_000) for c in curves)
    assert a.total_bandwidth_gbps == pytest.approx(peaks, rel=0.02)
    assert a.total_bandwidth_gbps == pytest.approx(420.0, rel=0.10)
    assert a.counts == {"ldram": 23, "rdram": 23, "cxl": 6}
