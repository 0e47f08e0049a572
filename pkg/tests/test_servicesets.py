import numpy as np
import pytest

from brutes import brute_walk
from parkroute.errors import ResourceLimitError, UnsupportedError
from parkroute.instance import Instance, gen_geo_instance
from parkroute.servicesets import (
    count_sets,
    dump_catalog_csv,
    enumerate_catalog,
    pair_count,
    reduce_catalog,
    reduced_pair_count,
    removed_pair_count,
    walk_time,
    walk_tour,
)


def test_pair_counts_n50_reference_values():
    assert pair_count(50, 1) == 2_500
    assert pair_count(50, 2) == 63_750
    assert pair_count(50, 3) == 1_043_750
    assert pair_count(50, 4) == 12_558_750
    assert reduced_pair_count(50, 1) == 2_500
    assert reduced_pair_count(50, 2) == 61_300
    assert reduced_pair_count(50, 3) == 982_500
    assert reduced_pair_count(50, 4) == 11_576_300


def test_enumerated_counts_agree_with_closed_forms():
    inst = gen_geo_instance(9, seed=1, q=3)
    cat = enumerate_catalog(inst)
    assert len(cat.sets) == count_sets(9, 3)
    assert cat.pair_count() == pair_count(9, 3)
    red = reduce_catalog(cat)
    assert red.removed_pair_count() == removed_pair_count(9, 3)
    assert red.admissible_pair_count() == reduced_pair_count(9, 3)
    assert red.reduction.removed_pairs == removed_pair_count(9, 3)


def test_weight_capacity_filters_sets():
    inst = Instance(
        drive=np.zeros((4, 4)), walk=np.zeros((3, 3)), park_time=[1, 1, 1],
        capacity_count=2, capacity_weight=10.0, weights=[5.0, 5.0, 9.0],
    )
    cat = enumerate_catalog(inst)
    assert [s.members for s in cat.sets] == [(1,), (2,), (3,), (1, 2)]


def test_unbounded_count_with_weight_cap_enumerates():
    inst = Instance(
        drive=np.zeros((4, 4)), walk=np.zeros((3, 3)), park_time=[1, 1, 1],
        capacity_count=None, capacity_weight=10.0, weights=[5.0, 5.0, 9.0],
    )
    cat = enumerate_catalog(inst)
    assert [s.members for s in cat.sets] == [(1,), (2,), (3,), (1, 2)]


def test_no_capacity_at_all_is_unsupported():
    inst = Instance(drive=np.zeros((3, 3)), walk=np.zeros((2, 2)), park_time=[1, 1])
    with pytest.raises(UnsupportedError):
        enumerate_catalog(inst)


def test_catalog_order_is_size_then_lexicographic():
    inst = gen_geo_instance(4, seed=0, q=3)
    cat = enumerate_catalog(inst)
    keys = [(s.size, s.members) for s in cat.sets]
    assert keys == sorted(keys)


def test_reduction_predicate():
    inst = gen_geo_instance(5, seed=2, q=3)
    cat = enumerate_catalog(inst)
    red = reduce_catalog(cat)
    for j, s in enumerate(red.sets):
        for i in inst.spots:
            expected = not (s.size >= 2 and i in s.members)
            assert red.admissible(i, j) == expected
            assert cat.admissible(i, j)  # unreduced admits everything


def test_walk_time_zero_at_own_singleton():
    inst = gen_geo_instance(4, seed=3)
    assert walk_time(inst, 2, (2,)) == 0.0


def test_walk_time_out_and_back():
    inst = gen_geo_instance(4, seed=3)
    assert walk_time(inst, 1, (3,)) == pytest.approx(2 * inst.W(1, 3))


def test_walk_time_pair_example():
    # W(i,a)=2, W(i,b)=5, W(a,b)=2 with i=1, a=2, b=3 -> tour 2+2+5 = 9 via (a, b)
    walk = np.array([[0, 2, 5], [2, 0, 2], [5, 2, 0.0]])
    inst = Instance(drive=np.zeros((4, 4)), walk=walk, park_time=[1, 1, 1], capacity_count=2)
    cost, order = walk_tour(inst, 1, (2, 3))
    assert cost == pytest.approx(9.0)
    assert order == (2, 3)


@pytest.mark.parametrize("size", [2, 3, 4, 5, 6])
def test_walk_time_matches_permutation_brute_force(size):
    inst = gen_geo_instance(8, seed=size, q=6)
    members = tuple(range(2, 2 + size))
    for parking in (1, 2):
        assert walk_time(inst, parking, members) == pytest.approx(
            brute_walk(inst, parking, members), abs=1e-9
        )


def test_walk_tour_ties_break_lexicographically():
    # symmetric W makes both pair orders equal; the smaller sequence wins
    inst = gen_geo_instance(5, seed=9)
    cost, order = walk_tour(inst, 1, (4, 3))
    assert cost == pytest.approx(brute_walk(inst, 1, (3, 4)), abs=1e-12)
    assert order == (3, 4)


def test_walk_time_respects_asymmetric_matrices():
    walk = np.array([[0, 3, 1], [5, 0, 1], [1, 1, 0.0]])
    inst = Instance(drive=np.zeros((4, 4)), walk=walk, park_time=[1, 1, 1], capacity_count=2)
    assert walk_time(inst, 1, (2,)) == pytest.approx(3 + 5)  # out and back differ
    assert walk_time(inst, 1, (2, 3)) == pytest.approx(
        min(3 + 1 + 1, 1 + 1 + 5)  # both service orders priced directionally
    )


def test_walk_set_size_cap():
    inst = gen_geo_instance(14, seed=1, q=13)
    with pytest.raises(UnsupportedError):
        walk_time(inst, 1, tuple(range(1, 14)))


def test_pair_cap_resource_error():
    inst = gen_geo_instance(12, seed=4, q=4)
    with pytest.raises(ResourceLimitError):
        enumerate_catalog(inst, max_pairs=100)


def test_removed_pairs_closed_form_small():
    # removed = n * sum_{s=2..q} C(n-1, s-1)
    for n, q in [(4, 2), (5, 3), (6, 3)]:
        inst = gen_geo_instance(n, seed=n, q=q)
        red = reduce_catalog(enumerate_catalog(inst))
        assert red.removed_pair_count() == removed_pair_count(n, q)


def test_catalog_walk_costs_memoized_and_consistent():
    inst = gen_geo_instance(5, seed=6, q=2)
    cat = enumerate_catalog(inst)
    j = cat.index_of((2, 4))
    first = cat.walk_cost(1, j)
    assert cat.walk_cost(1, j) == first
    assert first == pytest.approx(walk_time(inst, 1, (2, 4)))
    assert sorted(cat.walk_order(1, j)) == [2, 4]


def test_precompute_matches_lazy_and_is_thread_safe():
    inst = gen_geo_instance(6, seed=12, q=2)
    lazy = enumerate_catalog(inst)
    eager = enumerate_catalog(inst)
    eager.precompute_walk_costs(threads=2)
    assert len(eager._walk) == eager.pair_count()
    for i in inst.spots:
        for j in range(len(lazy.sets)):
            assert eager.walk_cost(i, j) == lazy.walk_cost(i, j)


def test_catalog_csv_dump(tmp_path):
    inst = gen_geo_instance(3, seed=1, q=2)
    cat = enumerate_catalog(inst)
    out = tmp_path / "catalog.csv"
    dump_catalog_csv(cat, out, parkings=[1, 2])
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "set_id,members,cost_from_1,cost_from_2"
    assert len(lines) == 1 + len(cat.sets)


def test_every_customer_has_its_singleton():
    inst = gen_geo_instance(7, seed=8, q=2)
    cat = enumerate_catalog(inst)
    for c in inst.customers:
        assert cat.index_of((c,)) in cat.sets_containing(c)
