import copy

import pytest

from tierlab import config as C
from tierlab.devices import DeviceKind, DeviceSpec
from tierlab.topology import Gpu, Link, LinkKind, Socket, Topology

GIB = 2**30


def tiny_doc():
    """Two sockets; socket0 owns ldram0 and a CXL node; 100 ns / 64 GB/s everywhere."""
    return {
        "devices": [
            {"device_id": "ldram0", "kind": "LDRAM", "capacity_bytes": GIB, "base_latency_ns": 100.0,
             "peak_bandwidth_gbps": 64.0, "per_thread_issue_cap_gbps": {"sequential": 8.0, "random": 8.0}},
            {"device_id": "ldram1", "kind": "RDRAM", "capacity_bytes": GIB, "base_latency_ns": 100.0,
             "peak_bandwidth_gbps": 64.0},
            {"device_id": "cxl0", "kind": "CXL", "capacity_bytes": GIB, "base_latency_ns": 250.0,
             "peak_bandwidth_gbps": 32.0},
        ],
        "topology": {"home_socket": "socket0",
                     "sockets": [{"socket_id": "socket0", "cores": 8, "local_nodes": ["ldram0"]},
                                 {"socket_id": "socket1", "cores": 8, "local_nodes": ["ldram1"]}]},
        "links": [
            {"link_id": "xsock", "kind": "INTER_SOCKET", "ends": ["socket0", "socket1"], "latency_ns": 50.0,
             "peak_bandwidth_gbps": 48.0},
            {"link_id": "pcie", "kind": "PCIE_CXL", "ends": ["socket0", "cxl0"], "latency_ns": 20.0,
             "peak_bandwidth_gbps": 40.0},
        ],
        "workload": {"proxy": "latency_bound"},
        "placement": {"kind": "first_touch"},
        "tiering": {"kind": "no_balance"},
        "run": {"seed": 0},
    }


@pytest.fixture
def tiny():
    return Topology.from_config(tiny_doc())


@pytest.fixture
def tiny_cfg_doc():
    return copy.deepcopy(tiny_doc())


@pytest.fixture(scope="session")
def system_a():
    return C.build(C.load("system_a")).topology


@pytest.fixture(scope="session")
def system_b():
    return C.build(C.load("system_b")).topology


def spec(device_id="d", peak=100.0, cap=None, latency=100.0, kind=DeviceKind.LDRAM):
    caps = {} if cap is None else {"sequential": cap, "random": cap}
    return DeviceSpec(device_id, kind, GIB, latency, peak, caps)


__all__ = ["tiny_doc", "spec", "GIB", "ACCEPTANCE", "Gpu", "Link", "LinkKind", "Socket", "Topology"]


# acceptance results, filled by test_acceptance and printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, secs, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n:>2}. {title} ({secs:.1f} s) {detail}".rstrip())
