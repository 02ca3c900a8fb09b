import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import t_two_sided_p, welch_by_hand
from rpclust.cluster import ClusterConfig, KClusters
from rpclust.errors import DegenerateVariance, TooFewRecords
from rpclust.evaluation import (
    QH,
    RN,
    RPC,
    community_count,
    mean_difference_test,
    node_sweep,
    rn_partition,
    synthetic_purchases,
)
from rpclust.ingest import PurchaseRecord

# textbook Welch cases, frozen from the hand formula + integrated t density
WELCH_CASES = [
    ([1, 2, 3, 4, 5], [2, 3, 4, 5, 6], -1.0, 8.0, 0.346594),
    (
        [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4],
        [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4],
        -2.455356,
        24.988529,
        0.021378,
    ),
    (
        [17.2, 20.9, 22.6, 18.1, 21.7, 21.4, 23.5, 24.2, 14.7, 21.8],
        [21.5, 22.8, 21.0, 23.0, 21.6, 23.6, 22.5, 20.7, 23.4, 21.8,
         20.7, 21.7, 21.5, 22.5, 23.6, 21.5, 22.5, 23.5, 21.5, 21.8],
        -1.565434,
        9.904741,
        0.148842,
    ),
]


def rec(item, place, city="c"):
    return PurchaseRecord(item, place, city)


def test_rn_rule1_same_category():
    p = rn_partition([rec("Cake", "Department store"), rec("Cake", "Department store")])
    assert p.assignment == (0, 0)


def test_rn_rule2_same_item():
    p = rn_partition([rec("Cake", "Department store"), rec("Cake", "Supermarket"), rec("Desk", "Shop")])
    assert p.assignment == (0, 0, 1)


def test_rn_purchase_cascade():
    recs = [
        rec("Hair dryer", "Home electronics retailer"),
        rec("Refrigerator", "Home electronics retailer"),
        rec("Clothing", "Department store"),
        rec("Cake", "Department store"),
        rec("Cake", "Supermarket"),
        rec("Cake", "Department store"),
        rec("Desk", "Supermarket"),
    ]
    p = rn_partition(recs)
    a = p.assignment
    # rule 1 takes the two cake/department-store rows, rule 2 has nothing left
    # for cake/supermarket, rule 3 groups it with the desk by place
    assert a[3] == a[5]
    assert a[4] == a[6] != a[3]
    assert a[0] == a[1]
    assert len({a[2], a[3], a[4], a[0]}) == 4
    assert p.n_communities == 4


def test_rn_all_distinct_singletons():
    recs = [rec(f"i{k}", f"p{k}") for k in range(5)]
    assert rn_partition(recs).n_communities == 5
    with pytest.raises(TooFewRecords):
        rn_partition([])


def _rn_brute(records):
    """Straight transcription of the cascade with explicit sets."""
    left = set(range(len(records)))
    groups = []
    for key in (lambda r: (r.item, r.place), lambda r: r.item, lambda r: r.place):
        by = {}
        for i in sorted(left):
            by.setdefault(key(records[i]), set()).add(i)
        for members in by.values():
            if len(members) > 1:
                groups.append(members)
                left -= members
    return len(groups) + len(left)


records_st = st.lists(
    st.builds(rec, st.sampled_from("abcd"), st.sampled_from("xyz")), min_size=1, max_size=25
)


@settings(max_examples=100)
@given(records_st)
def test_rn_matches_bruteforce_and_prefixes_grow(records):
    counts = [rn_partition(records[:n]).n_communities for n in range(1, len(records) + 1)]
    assert counts == [_rn_brute(records[:n]) for n in range(1, len(records) + 1)]
    assert all(1 <= c <= n for n, c in enumerate(counts, start=1))


@settings(max_examples=50)
@given(records_st, st.randoms(use_true_random=False))
def test_rn_rule1_groups_survive_reordering(records, rnd):
    shuffled = list(records)
    rnd.shuffle(shuffled)
    p = rn_partition(records)
    q = rn_partition(shuffled)

    def rule1_groups(recs, part):
        keys = {}
        for r, c in zip(recs, part.assignment):
            keys.setdefault((r.item, r.place), set()).add(c)
        return {k for k, cs in keys.items() if len(cs) == 1 and sum(1 for r in recs if (r.item, r.place) == k) > 1}

    assert rule1_groups(records, p) == rule1_groups(shuffled, q)


@pytest.mark.parametrize("a, b, t, df, p", WELCH_CASES)
def test_welch_textbook(a, b, t, df, p):
    res = mean_difference_test(a, b)
    assert res.variant == "welch"
    assert res.t == pytest.approx(t, abs=1e-6)
    assert res.df == pytest.approx(df, abs=1e-6)
    assert res.p == pytest.approx(p, abs=1e-6)
    # and against the slow oracle
    ot, odf, op = welch_by_hand(a, b)
    assert (res.t, res.df, res.p) == pytest.approx((ot, odf, op), abs=1e-8)


def test_student_variant():
    res = mean_difference_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6], variant="student")
    assert res.df == 8
    assert res.p == pytest.approx(t_two_sided_p(res.t, 8), abs=1e-9)
    with pytest.raises(ValueError):
        mean_difference_test([1, 2], [3, 4], variant="paired")


def test_identical_series():
    res = mean_difference_test([1, 2, 4], [1, 2, 4])
    assert res.t == 0 and res.p == pytest.approx(1.0)
    with pytest.raises(DegenerateVariance):
        mean_difference_test([3, 3, 3], [3, 3, 3])
    sep = mean_difference_test([1, 1], [2, 2])
    assert sep.t == -np.inf and sep.p == 0


def test_non_overlapping_series_significant():
    a = [10, 12, 11, 13, 12, 14, 13]
    b = [20, 22, 21, 23, 22, 24, 25]
    assert mean_difference_test(a, b).p < 0.05


def test_short_series_rejected():
    with pytest.raises(ValueError):
        mean_difference_test([1], [1, 2])


series = st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=10)


@settings(max_examples=100)
@given(series, series)
def test_t_antisymmetric(a, b):
    try:
        ab = mean_difference_test(a, b)
    except DegenerateVariance:
        return
    ba = mean_difference_test(b, a)
    assert ab.t == pytest.approx(-ba.t)
    assert ab.p == pytest.approx(ba.p)
    assert 0 <= ab.p <= 1


def test_sweep_shape_and_report():
    recs = synthetic_purchases(300, seed=1)
    rep = node_sweep(recs, step=100)
    assert rep.node_counts == [100, 200, 300]
    assert set(rep.counts) == {RN, RPC, QH}
    for method, cs in rep.counts.items():
        assert len(cs) == 3
        assert all(1 <= c <= n for c, n in zip(cs, rep.node_counts))
    assert rep.t_statistic is not None and 0 <= rep.p_value <= 1
    data = json.loads(rep.to_json())
    assert data["metadata"]["t_test"] == "welch"
    assert data["metadata"]["linkage"] == "ward"
    rows = rep.to_csv().splitlines()
    assert rows[0] == "node_count,method,community_count" and len(rows) == 1 + 9


def test_sweep_single_point_and_too_few():
    recs = synthetic_purchases(100, seed=2)
    rep = node_sweep(recs, step=100)
    assert rep.node_counts == [100]
    assert rep.t_statistic is None
    with pytest.raises(TooFewRecords):
        node_sweep(recs[:99], step=100)


def test_sweep_identical_methods_p_one():
    recs = synthetic_purchases(200, seed=3)
    rep = node_sweep(recs, step=50, methods=(RN, RPC), compare=(RN, RN))
    assert rep.t_statistic == 0.0 and rep.p_value == 1.0


def test_community_count_with_fixed_k():
    recs = synthetic_purchases(50, seed=4)
    assert community_count(RPC, recs, ClusterConfig(criterion=KClusters(3))) == 3


def test_synthetic_is_seeded():
    assert synthetic_purchases(50, seed=9) == synthetic_purchases(50, seed=9)
    assert synthetic_purchases(50, seed=9) != synthetic_purchases(50, seed=10)
