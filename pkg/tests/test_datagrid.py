import threading
from concurrent.futures import ThreadPoolExecutor

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsim.datagrid import (
    AllMembers,
    Cluster,
    ConfigurationError,
    DataUnavailableError,
    InProcess,
    KeyOwner,
    MemberId,
    NoSuchMemberError,
    PartitionTable,
    TaskEnvelope,
    ToMember,
    codec,
    drop_cluster,
    fnv1a_64,
    get_cluster,
    join_cluster,
    partition_id,
    partition_owner,
    task,
)
from gridsim.datagrid.partitions import partition_of_hash


@task("test.ordinal")
def _ordinal(ctx):
    return ctx.member_id.ordinal


@task("test.local_read")
def _local_read(ctx, map_name, key):
    return ctx.member.local_get(map_name, key)


def balanced_counts(partitions, members):
    """Oracle: the only per-member counts a balanced assignment can have."""
    base, extra = divmod(partitions, members)
    return sorted([base + 1] * extra + [base] * (members - extra))


# -- membership and partition table ---------------------------------------------------


def test_first_member_is_master_and_owns_everything(make_cluster):
    c = make_cluster(1)
    assert c.master.id.ordinal == 0
    assert c.table.counts() == {c.master.id: 271}


def test_second_join_splits_271_as_136_135(make_cluster):
    c = make_cluster(2)
    assert [m.ordinal for m in c.member_ids] == [0, 1]
    assert sorted(c.table.counts().values()) == balanced_counts(271, 2) == [135, 136]


def test_ordinals_follow_join_order(make_cluster):
    c = make_cluster(0)
    ids = [c.join().id.ordinal for _ in range(5)]
    assert ids == [0, 1, 2, 3, 4]


def test_member_leaves_and_its_partitions_move_minimally(make_cluster):
    c = make_cluster(3)
    departed = c.member_ids[1]
    before = list(c.table.assignment)
    c.remove(departed)
    after = c.table.assignment
    counts = c.table.counts()
    assert departed not in counts
    assert max(counts.values()) - min(counts.values()) <= 1
    moved = [p for p in range(271) if before[p] != after[p]]
    # replay oracle: every orphaned partition moves; survivors need at most
    # the surplus imposed by the new quota to rebalance
    orphaned = [p for p in range(271) if before[p] == departed]
    assert set(orphaned) <= set(moved)
    assert len(moved) - len(orphaned) <= 1


def test_master_takes_over_at_lowest_surviving_ordinal(make_cluster):
    c = make_cluster(3)
    c.remove(c.member_ids[0])
    assert c.master.id.ordinal == 1


def test_lite_members_hold_no_partitions(make_cluster):
    c = make_cluster(1)
    lite = c.join(lite=True)
    assert lite.id not in c.table.counts()
    assert lite in c.lite_members


def test_membership_callbacks_fire_on_prior_members(make_cluster):
    c = make_cluster(0)
    a = c.join()
    seen = []
    a.on_membership_change(lambda event, mid: seen.append((event, mid.ordinal)))
    b = c.join()
    c.remove(b)
    assert seen == [("joined", 1), ("left", 1)]


def test_empty_cluster_name_is_rejected():
    with pytest.raises(ConfigurationError):
        Cluster("")
    with pytest.raises(ConfigurationError):
        join_cluster("", InProcess())


def test_join_cluster_uses_named_registry():
    try:
        first = join_cluster("registry-test")
        second = join_cluster("registry-test")
        assert (first.ordinal, second.ordinal) == (0, 1)
        assert get_cluster("registry-test").member_ids == [first, second]
    finally:
        drop_cluster("registry-test")


def test_tenants_are_isolated_by_name(make_cluster):
    a = make_cluster(1, name="iso-main")
    b = make_cluster(1, name="iso-main2")
    a.get_map("m").put("k", 1)
    assert b.get_map("m").get("k") is None


@given(st.integers(min_value=1, max_value=16))
def test_partition_counts_balanced_for_up_to_16_members(n):
    table = PartitionTable()
    table.rebalance([MemberId(i) for i in range(n)])
    assert sorted(table.counts().values()) == balanced_counts(271, n)
    assert all(owner is not None for owner in table.assignment)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 1000)), min_size=1, max_size=25))
def test_rebalance_moves_only_orphaned_and_surplus_partitions(log):
    """Replay a random join/leave log against the minimal-movement oracle."""
    table = PartitionTable(61)
    live = []
    next_ordinal = 0
    for join, pick in log:
        before = list(table.assignment)
        if join or not live:
            live.append(MemberId(next_ordinal))
            next_ordinal += 1
        elif len(live) > 1:
            live.pop(pick % len(live))
        else:
            continue
        table.rebalance(live)
        counts = [table.counts().get(m, 0) for m in live]
        assert max(counts) - min(counts) <= 1
        base, extra = divmod(61, len(live))
        moved = [p for p in range(61) if before[p] != table.assignment[p]]
        forced = [p for p in range(61) if before[p] not in live]
        # a survivor above its quota sheds only its surplus, one above base at most
        surplus = sum(max(0, sum(1 for o in before if o == m) - base) for m in live if m in before)
        assert set(forced) <= set(moved)
        assert len(moved) <= len(forced) + surplus


# -- hashing ------------------------------------------------------------------------


def test_fnv1a_reference_vectors():
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


@pytest.mark.parametrize("h, count, expected", [(0, 271, 0), (542, 271, 0), (7, 4, 3)])
def test_partition_of_hash(h, count, expected):
    assert partition_of_hash(h, count) == expected


@given(st.one_of(st.integers(-2**63, 2**63 - 1), st.text(), st.binary()))
def test_partition_owner_is_deterministic_and_total(key):
    table = PartitionTable()
    table.rebalance([MemberId(i) for i in range(3)])
    p = partition_id(key)
    assert 0 <= p < 271
    assert partition_owner(key, table) == partition_owner(key, table) == table.assignment[p]


@given(st.recursive(
    st.none() | st.booleans() | st.integers(-2**70, 2**70) | st.floats(allow_nan=False) | st.text() | st.binary(),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=5), inner, max_size=4),
    max_leaves=12))
def test_codec_round_trip(value):
    assert codec.decode(codec.encode(value)) == value


def test_codec_rejects_bad_header():
    with pytest.raises(codec.CodecError):
        codec.decode(b"X\x01N")


# -- maps ---------------------------------------------------------------------------


def test_put_then_get_and_absent_keys(make_cluster):
    m = make_cluster(3).get_map("m")
    assert m.put("k", "v") is None
    assert m.get("k") == "v"
    assert m.get("missing") is None
    assert m.put("k", "w") == "v"


def test_backup_promoted_when_owner_removed(make_cluster):
    c = make_cluster(3, backup_count=1)
    m = c.get_map("m")
    m.put("k", "v")
    c.remove(c.partition_owner("k"))
    assert m.get("k") == "v"
    assert not c.data_lost


def test_owner_removed_without_backup_makes_data_unavailable(make_cluster):
    c = make_cluster(3, backup_count=0)
    m = c.get_map("m")
    m.put("k", "v")
    owner = c.partition_owner("k")
    if owner == c.master.id:
        pytest.skip("key landed on the master")
    c.remove(owner)
    assert c.data_lost
    with pytest.raises(DataUnavailableError):
        m.get("k")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=2, max_size=8), st.randoms(use_true_random=False))
def test_single_member_loss_with_backup_loses_nothing(ops, rnd):
    c = Cluster("prop-backup", partition_count=31, backup_count=1)
    try:
        for _ in range(3):
            c.join()
        m = c.get_map("m")
        oracle = {}
        for i, op in enumerate(ops):
            if op == 0 and len(c.member_ids) > 1:
                c.remove(rnd.choice(c.member_ids))
            elif op == 1:
                c.join()
            else:
                m.put(i, i * 10)
                oracle[i] = i * 10
        assert not c.data_lost
        assert {k: m.get(k) for k in oracle} == oracle
    finally:
        c.shutdown()


def test_single_key_history_is_linearizable(make_cluster):
    """Writer puts 1..N in order; every reader must see a nondecreasing sequence."""
    m = make_cluster(4).get_map("lin")
    m.put("x", 0)
    n = 400
    seen = [[] for _ in range(3)]
    done = threading.Event()

    def writer():
        for i in range(1, n + 1):
            m.put("x", i)
        done.set()

    def reader(out):
        while not done.is_set():
            out.append(m.get("x"))
        out.append(m.get("x"))

    threads = [threading.Thread(target=writer)] + [threading.Thread(target=reader, args=(s,)) for s in seen]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for s in seen:
        assert s == sorted(s)
        assert s[-1] == n


# -- atomic cells -------------------------------------------------------------------


def test_compare_exchange_examples(make_cluster):
    cell = make_cluster(2).get_atomic("key")
    r = cell.compare_exchange(0, 1)
    assert (r.swapped, r.witnessed) == (True, 0)
    r = cell.compare_exchange(0, 1)
    assert (r.swapped, r.witnessed) == (False, 1)


def test_atomic_values_are_signed_64_bit(make_cluster):
    cell = make_cluster(1).get_atomic("c")
    cell.set(-2**63)
    assert cell.get() == -2**63
    with pytest.raises((ValueError, OverflowError)):
        cell.set(2**63)


def test_concurrent_compare_exchange_has_one_winner(make_cluster):
    c = make_cluster(3)
    trials, callers = 1000, 8
    with ThreadPoolExecutor(max_workers=callers) as pool:
        for t in range(trials):
            cell = c.get_atomic(f"cas-{t}")
            barrier = threading.Barrier(callers)

            def attempt(v):
                barrier.wait()
                return cell.compare_exchange(0, v).swapped

            wins = sum(pool.map(attempt, range(1, callers + 1)))
            assert wins == 1, f"trial {t}: {wins} winners"


# -- tasks --------------------------------------------------------------------


def test_all_members_routing_gathers_in_ordinal_order(make_cluster):
    c = make_cluster(3)
    results = c.execute(TaskEnvelope.of("test.ordinal", AllMembers()))
    assert [r.value for r in results] == [0, 1, 2]


def test_key_owner_task_reads_local_entry(make_cluster):
    c = make_cluster(4)
    m = c.get_map("data")
    for k in range(20):
        m.put(k, f"v{k}")
    for k in range(20):
        res = c.execute(TaskEnvelope.of("test.local_read", KeyOwner(k), map_name="data", key=k))[0]
        assert res.member == c.partition_owner(k)
        assert res.value == m.get(k)


def test_member_routing_to_missing_ordinal_fails(make_cluster):
    c = make_cluster(2)
    with pytest.raises(NoSuchMemberError):
        c.submit(TaskEnvelope.of("test.ordinal", ToMember(MemberId(2))))


def test_task_on_departed_member_is_reported_failed(make_cluster):
    c = make_cluster(2)
    gone = c.member(1)
    c.remove(gone)
    res = gone.run_task(TaskEnvelope.of("test.ordinal", ToMember(gone.id)).payload)
    with pytest.raises(Exception):
        res.result(timeout=5)
