import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tierlab import kernels as K
from tierlab.errors import DestinationFull, MigrationInFlight, NotMigratable, OutOfMemory
from tierlab.placement import PlacementKind, PlacementPolicy, preference_order
from tierlab.vmem import Fabric, PageTable


def order_for(policy, topo, socket="socket0"):
    return lambda i: preference_order(policy, i, socket, topo)


def test_first_touch_allocation(tiny):
    pt = PageTable(tiny)
    ids = pt.allocate(0, 10, order_for(PlacementPolicy(PlacementKind.FIRST_TOUCH), tiny))
    assert ids == list(range(10))
    assert {pt.page(i).node_id for i in ids} == {"ldram0"}
    assert all(pt.page(i).migratable for i in ids)


def test_interleave_allocation_is_round_robin_and_bound(tiny):
    pt = PageTable(tiny)
    pol = PlacementPolicy(PlacementKind.UNIFORM_INTERLEAVE, node_set=("ldram0", "cxl0"))
    ids = pt.allocate(0, 10, order_for(pol, tiny), migratable=not pol.explicit_binding)
    assert pt.placement_map() == ["ldram0", "cxl0"] * 5
    assert not any(pt.page(i).migratable for i in ids)


def test_preferred_overflows_by_numa_distance(tiny):
    pt = PageTable(tiny, capacity_pages={"ldram0": 3})
    pt.allocate(0, 10, order_for(PlacementPolicy(PlacementKind.PREFERRED, node_order=("ldram0",)), tiny))
    # from socket0: ldram1 is one hop at 150 ns, cxl0 one hop at 270 ns
    assert pt.placement_map() == ["ldram0"] * 3 + ["ldram1"] * 7


def test_out_of_memory(tiny):
    pt = PageTable(tiny, capacity_pages={"ldram0": 2, "ldram1": 0, "cxl0": 1})
    with pytest.raises(OutOfMemory):
        pt.allocate(0, 4, order_for(PlacementPolicy(PlacementKind.FIRST_TOUCH), tiny))
    assert len(pt) == 0 and pt.residency("ldram0").used_pages == 0


def test_touch_and_hint_fault(tiny):
    pt = PageTable(tiny)
    pt.allocate(0, 2, lambda i: ["cxl0"])
    assert pt.touch(0, "socket0", 5.0) is None
    assert pt.page(0).last_touch_ns == 5.0
    pt.protect(0)
    f = pt.touch(0, "socket0", 7.0)
    assert f.page_id == 0 and f.accessor_node == "ldram0" and f.now_ns == 7.0
    assert pt.page(0).fault_count == 1 and not pt.page(0).protected
    assert pt.touch(0, "socket0", 8.0) is None


def test_lru_second_touch_within_window(tiny):
    pt = PageTable(tiny, lru_window_ns=10.0)
    pt.allocate(0, 1, lambda i: ["cxl0"])
    pt.touch(0, "socket0", 0.0)
    assert pt.page(0).lru == "INACTIVE"
    pt.touch(0, "socket0", 5.0)
    assert pt.page(0).lru == "ACTIVE"
    pt.touch(0, "socket0", 50.0)
    assert pt.page(0).lru == "INACTIVE"


def test_migrate_idle_completion_time(tiny):
    pt, fab = PageTable(tiny), Fabric(tiny)
    pt.allocate(0, 1, lambda i: ["cxl0"])
    done = pt.migrate(0, "ldram0", 1000.0, fab)
    # read 250 + port 20 + write 100, then 4096 B through the 32 GB/s CXL device (slowest stage)
    assert done == pytest.approx(1000.0 + 370.0 + 4096 / 32.0)
    assert pt.page(0).node_id == "cxl0"
    pt.complete_migrations(done)
    assert pt.page(0).node_id == "ldram0"
    assert pt.counters["pgmigrate_success"] == 1
    pt.check_invariants()


def test_unmigratable_and_full_destination(tiny):
    pt, fab = PageTable(tiny, capacity_pages={"ldram0": 1}), Fabric(tiny)
    pt.allocate(0, 1, lambda i: ["cxl0"], migratable=False)
    with pytest.raises(NotMigratable):
        pt.migrate(0, "ldram0", 0.0, fab)
    pt.allocate(1, 2, lambda i: ["ldram0", "cxl0"])
    with pytest.raises(DestinationFull):
        pt.migrate(2, "ldram0", 0.0, fab)


def test_page_in_flight_cannot_move_again(tiny):
    pt, fab = PageTable(tiny), Fabric(tiny)
    pt.allocate(0, 1, lambda i: ["cxl0"])
    pt.migrate(0, "ldram0", 0.0, fab)
    with pytest.raises(MigrationInFlight):
        pt.migrate(0, "ldram1", 0.0, fab)


def test_promotion_byte_accounting(tiny):
    pt, fab = PageTable(tiny), Fabric(tiny)
    pt.allocate(0, 100, lambda i: ["cxl0"])
    for pid in range(100):
        pt.migrate(pid, "ldram0", 0.0, fab, K.MIG_PROMOTE)
    pt.complete_migrations(1e9)
    assert fab.bytes[tiny.node_index("ldram0")] == 409600
    assert pt.counters["pgpromote_success"] == 100
    # back-to-back copies serialize on the slowest stage
    assert fab.busy[tiny.node_index("cxl0")] == pytest.approx(100 * 4096 / 32.0 * K.PS_PER_NS, abs=100)


@settings(max_examples=40, deadline=None)
@given(moves=st.lists(st.tuples(st.integers(0, 29), st.sampled_from(["ldram0", "ldram1", "cxl0"]),
                                st.floats(0, 1e5)), max_size=60))
def test_conservation_under_migrations(moves):
    from tierlab.topology import Topology
    from conftest import tiny_doc
    topo = Topology.from_config(tiny_doc())
    pt, fab = PageTable(topo, capacity_pages={"ldram0": 12, "ldram1": 12, "cxl0": 12}), Fabric(topo)
    pt.allocate(0, 30, lambda i: ["ldram0", "ldram1", "cxl0"])
    for pid, dst, t in sorted(moves, key=lambda m: m[2]):
        pt.complete_migrations(t)
        try:
            pt.migrate(pid, dst, t, fab)
        except (DestinationFull, MigrationInFlight):
            pass
        pt.check_invariants()
    pt.complete_migrations(1e12)
    pt.check_invariants()
    assert len(pt) == 30 and sum(pt.residency(n).used_pages for n in topo.node_ids) == 30
