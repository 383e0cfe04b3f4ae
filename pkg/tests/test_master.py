import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farmsim.master import (
    A_FIRST,
    B_FIRST,
    EQUAL,
    SchedulingPolicy,
    SnapshotRegistry,
    SnapshotReplica,
    compare_priority,
    parse_registry_dump,
)

MATURITY = SchedulingPolicy("maturity")
REGION = SchedulingPolicy("sensitive_region", 5.1815, 5.18525)


def replica(sid=0, beta=5.185, seed=0, maturity=0):
    return SnapshotReplica(snapshot_id=sid, beta=beta, seed=seed, maturity=maturity)


def fresh_registry(policy=MATURITY, betas=(5.185,), counts=None, granularity=3):
    counts = counts or {b: 2 for b in betas}
    reg = SnapshotRegistry(policy, granularity=granularity, lease_timeout_fn=lambda b: 100.0)
    return reg.register_snapshots(list(betas), counts, seed_base=1000)


class TestComparePriority:
    def test_maturity_policy_prefers_least_mature(self):
        a, b = replica(0, maturity=10), replica(1, maturity=40)
        assert compare_priority(a, b, MATURITY) == A_FIRST

    def test_region_beats_maturity(self):
        a = replica(0, beta=5.182, maturity=900)
        b = replica(1, beta=5.19, maturity=0)
        assert compare_priority(a, b, REGION) == A_FIRST

    def test_within_region_smaller_beta_first(self):
        a = replica(0, beta=5.1830, maturity=50)
        b = replica(1, beta=5.1820, maturity=500)
        assert compare_priority(a, b, REGION) == B_FIRST

    def test_outside_region_maturity_applies(self):
        a = replica(0, beta=5.19, maturity=3)
        b = replica(1, beta=5.20, maturity=6)
        assert compare_priority(a, b, REGION) == A_FIRST

    def test_tiebreak_by_seed_then_id(self):
        a = replica(0, seed=7, maturity=5)
        b = replica(1, seed=3, maturity=5)
        assert compare_priority(a, b, MATURITY) == B_FIRST

    def test_equal_only_for_identical_keys(self):
        a = replica(0, seed=1)
        assert compare_priority(a, a, MATURITY) == EQUAL


@st.composite
def replicas(draw):
    return replica(
        sid=draw(st.integers(0, 999)),
        beta=draw(st.sampled_from([5.180, 5.1815, 5.183, 5.18525, 5.186, 5.19])),
        seed=draw(st.integers(0, 50)),
        maturity=draw(st.integers(0, 1000)),
    )


@settings(max_examples=300)
@given(replicas(), replicas(), replicas(), st.sampled_from([MATURITY, REGION]))
def test_ordering_is_total_and_transitive(a, b, c, policy):
    ab = compare_priority(a, b, policy)
    ba = compare_priority(b, a, policy)
    assert ab == -ba  # antisymmetric
    if ab == A_FIRST and compare_priority(b, c, policy) == A_FIRST:
        assert compare_priority(a, c, policy) == A_FIRST


@settings(max_examples=300)
@given(replicas(), replicas())
def test_region_casework_exhaustive(a, b):
    # Exactly one of the three branch conditions decides each comparison.
    in_a, in_b = REGION.in_region(a.beta), REGION.in_region(b.beta)
    got = compare_priority(a, b, REGION)
    if in_a and not in_b:
        assert got == A_FIRST
    elif in_b and not in_a:
        assert got == B_FIRST
    elif in_a and in_b and a.beta != b.beta:
        assert got == (A_FIRST if a.beta < b.beta else B_FIRST)
    elif not in_a and not in_b and a.maturity != b.maturity:
        assert got == (A_FIRST if a.maturity < b.maturity else B_FIRST)


class TestRegistry:
    def test_register_run2_shape(self):
        betas = [round(5.1805 + i * 0.0003, 6) for i in range(24)]
        counts = {b: (61 if i < 10 else 60) for i, b in enumerate(betas)}
        reg = SnapshotRegistry(MATURITY, lease_timeout_fn=lambda b: 1.0)
        reg.register_snapshots(betas, counts, seed_base=0)
        assert len(reg.replicas) == 1450
        seeds = [r.seed for r in reg.replicas.values()]
        assert len(set(seeds)) == 1450

    def test_register_single(self):
        reg = fresh_registry(betas=(5.2,), counts={5.2: 1})
        assert len(reg.replicas) == 1
        assert reg.replicas[0].maturity == 0

    def test_register_duplicate_beta_rejected(self):
        reg = SnapshotRegistry(MATURITY)
        with pytest.raises(ValueError):
            reg.register_snapshots([5.2, 5.2], {5.2: 1}, seed_base=0)

    def test_register_zero_count_rejected(self):
        reg = SnapshotRegistry(MATURITY)
        with pytest.raises(ValueError):
            reg.register_snapshots([5.2], {5.2: 0}, seed_base=0)

    def test_assign_prefers_least_mature(self):
        reg = fresh_registry()
        reg.replicas[0].maturity = 3
        task = reg.assign_task(worker_id=1, cached_snapshot=None, now=0.0)
        assert task.snapshot_id == 1

    def test_affinity_overrides_policy_order(self):
        reg = fresh_registry()
        reg.replicas[1].maturity = 99  # cached replica is the worst-ranked
        task = reg.assign_task(worker_id=1, cached_snapshot=1, now=0.0)
        assert task.snapshot_id == 1

    def test_all_leased_returns_none(self):
        reg = fresh_registry(betas=(5.2,), counts={5.2: 1})
        assert reg.assign_task(1, None, 0.0) is not None
        assert reg.assign_task(2, None, 0.0) is None

    def test_complete_increments_maturity_by_granularity(self):
        reg = fresh_registry()
        reg.replicas[0].maturity = 300
        task = reg.assign_task(1, 0, now=0.0)
        updated = reg.complete_task(task, now=10.0)
        assert updated.maturity == 303

    def test_stale_upload_after_reclaim_discarded(self):
        reg = fresh_registry(betas=(5.2,), counts={5.2: 1})
        task = reg.assign_task(1, None, now=0.0)
        assert reg.reclaim_expired_leases(now=200.0) == 1
        task2 = reg.assign_task(2, None, now=200.0)
        assert task2.snapshot_id == task.snapshot_id
        assert reg.complete_task(task, now=210.0) is None
        assert reg.stale_uploads == 1
        assert reg.replicas[0].maturity == 0
        assert reg.complete_task(task2, now=220.0) is not None

    def test_reclaim_counts(self):
        reg = fresh_registry()
        reg.assign_task(1, None, now=0.0)
        assert reg.reclaim_expired_leases(now=50.0) == 0
        assert reg.reclaim_expired_leases(now=101.0) == 1
        assert reg.reclaim_expired_leases(now=102.0) == 0

    def test_reassignment_after_silent_worker_death(self):
        # Worker 1 leases, dies silently; after the lease expires the replica
        # must go to worker 2 on the next reclaim + assign cycle.
        reg = fresh_registry(betas=(5.2,), counts={5.2: 1})
        reg.assign_task(1, None, now=0.0)
        assert reg.assign_task(2, None, now=50.0) is None
        reg.reclaim_expired_leases(now=150.0)
        task = reg.assign_task(2, None, now=150.0)
        assert task is not None and task.assigned_worker == 2

    def test_lease_exclusivity(self):
        reg = fresh_registry(betas=(5.2,), counts={5.2: 4})
        tasks = [reg.assign_task(w, None, 0.0) for w in range(4)]
        assert len({t.snapshot_id for t in tasks}) == 4

    def test_conservation_maturity_vs_uploads(self):
        reg = fresh_registry(betas=(5.2,), counts={5.2: 3}, granularity=3)
        for w in range(10):
            task = reg.assign_task(w, None, now=float(w))
            if task is not None:
                reg.complete_task(task, now=float(w))
        assert reg.total_maturity == 3 * reg.uploads

    def test_dump_roundtrip_sorted(self):
        reg = fresh_registry(betas=(5.19, 5.18), counts={5.19: 2, 5.18: 2})
        reg.replicas[2].maturity = 6
        buf = io.StringIO()
        reg.dump(buf)
        rows = parse_registry_dump(io.StringIO(buf.getvalue()))
        assert [r[0] for r in rows] == [0, 1, 2, 3]
        assert rows[2][3] == 6

    def test_parse_registry_dump_rejects_bad_line(self):
        with pytest.raises(ValueError, match="line 1"):
            parse_registry_dump(io.StringIO("1\t2\t3\n"))
