import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridsim.datagrid import MemberId
from gridsim.partition import (
    PartitionRange,
    deployment_offsets,
    partition_final,
    partition_init,
    partition_range,
)


def oracle_bounds(total, offset, parallel):
    """Unclamped listing formula, clamped afterwards."""
    size = math.ceil(total / parallel)
    return min(total, offset * size), min(total, (offset + 1) * size)


@pytest.mark.parametrize("args, expected", [((400, 0, 2), 0), ((400, 1, 2), 200), ((4, 2, 3), 4)])
def test_partition_init_examples(args, expected):
    assert partition_init(*args) == expected


@pytest.mark.parametrize("args, expected", [((400, 0, 2), 200), ((10, 2, 3), 10), ((10, 0, 1), 10)])
def test_partition_final_examples(args, expected):
    assert partition_final(*args) == expected


@pytest.mark.parametrize("offset, parallel", [(2, 2), (5, 3), (-1, 3)])
def test_offset_out_of_range_is_a_domain_error(offset, parallel):
    with pytest.raises(ValueError):
        partition_init(10, offset, parallel)
    with pytest.raises(ValueError):
        partition_final(10, offset, parallel)


def test_nonpositive_totals_rejected():
    with pytest.raises(ValueError):
        partition_range(0, 0, 1)
    with pytest.raises(ValueError):
        partition_range(5, 0, 0)


def test_tiling_exhaustive():
    """Every total up to 10 000 and parallel count up to 32: disjoint exact cover."""
    for parallel in range(1, 33):
        for total in range(1, 10001):
            expected_next = 0
            for o in range(parallel):
                init, final = partition_init(total, o, parallel), partition_final(total, o, parallel)
                # contiguous ranges that start where the last one ended are disjoint
                assert init == expected_next or (init == final == total)
                assert init <= final
                expected_next = final
            assert expected_next == total


def test_tiling_by_marking_indices():
    for total in (1, 2, 7, 100, 401, 1000):
        for parallel in (1, 2, 3, 5, 8, 31, 32):
            marks = [0] * total
            for o in range(parallel):
                for i in partition_range(total, o, parallel):
                    marks[i] += 1
            assert marks == [1] * total


@given(st.integers(1, 10000), st.integers(1, 32), st.data())
def test_matches_formula_oracle_and_is_monotone(total, parallel, data):
    o = data.draw(st.integers(0, parallel - 1))
    assert (partition_init(total, o, parallel), partition_final(total, o, parallel)) == oracle_bounds(total, o, parallel)
    if o + 1 < parallel:
        assert partition_init(total, o, parallel) <= partition_init(total, o + 1, parallel)
        assert partition_final(total, o, parallel) <= partition_final(total, o + 1, parallel)


@given(st.integers(1, 10000))
def test_single_member_owns_everything(total):
    assert partition_range(total, 0, 1) == PartitionRange(0, total)


def test_range_rejects_inversion():
    with pytest.raises(ValueError):
        PartitionRange(3, 2)
    r = PartitionRange(2, 5)
    assert list(r) == [2, 3, 4] and len(r) == 3 and 4 in r and 5 not in r


def test_deployment_offsets_are_join_order_permutation():
    ids = [MemberId(5), MemberId(0), MemberId(2)]
    offsets = deployment_offsets(ids)
    assert offsets == {MemberId(0): 0, MemberId(2): 1, MemberId(5): 2}
    assert sorted(offsets.values()) == list(range(len(ids)))
