import itertools

import numpy as np
import pytest

from clickseg.errors import InputError
from clickseg.evaluation import iou
from clickseg.spacetime import Window
from clickseg.tracking import IdMapping, WindowPrediction, associate, stitch


def wp(start, length, labels_per_scan, overlap=None):
    return WindowPrediction(
        window=Window(start=start, length=length, overlap_scan=overlap),
        labels_per_scan={t: np.asarray(v) for t, v in labels_per_scan.items()},
    )


class TestAssociate:
    def test_identical_labels_match(self):
        left = wp(0, 2, {0: [1, 1, 2], 1: [1, 2, 2]}, overlap=1)
        right = wp(1, 2, {1: [1, 2, 2], 2: [1, 1, 2]})
        m = associate(left, right, 1)
        assert sorted(m.pairs) == [(1, 1), (2, 2)]
        assert m.unmatched_left == m.unmatched_right == []

    def test_relabeled_instances_match_by_overlap(self):
        left = wp(0, 2, {0: [1, 1], 1: [1, 1, 2, 2]}, overlap=1)
        right = wp(1, 2, {1: [7, 7, 9, 9], 2: [7, 9]})
        m = associate(left, right, 1)
        assert sorted(m.pairs) == [(1, 7), (2, 9)]

    def test_diagonal_ambiguity_resolved_greedily(self):
        # left ids A,B vs right ids X,Y with IoUs:
        #   A-X 0.9, A-Y 0.6, B-X 0.45(below), B-Y arranged high
        # 20 slots; construct masks giving approximately those overlaps
        lv = np.array([1] * 10 + [2] * 10)
        rv = np.array([3] * 9 + [4] * 11)
        left = wp(0, 1, {0: lv}, overlap=0)
        right = wp(0, 1, {0: rv})
        m = associate(left, right, 0)
        # 1-3: iou 9/10; 2-4: iou 10/11 -- both above 0.5, unique pairing
        assert sorted(m.pairs) == [(1, 3), (2, 4)]

    def test_below_threshold_left_unmatched(self):
        left = wp(0, 1, {0: [1, 1, 1, 1]}, overlap=0)
        right = wp(0, 1, {0: [5, 0, 0, 0]})
        m = associate(left, right, 0)
        assert m.pairs == []
        assert m.unmatched_left == [1]
        assert m.unmatched_right == [5]

    def test_stuff_ids_skip_geometry(self):
        left = wp(0, 1, {0: [9, 9, 1, 1]}, overlap=0)
        right = wp(0, 1, {0: [1, 1, 9, 9]})  # stuff moved; things swapped slots
        m = associate(left, right, 0, stuff_ids={9})
        assert m.pairs == []  # thing id 1 has zero overlap with itself
        assert m.unmatched_left == [1] and m.unmatched_right == [1]

    def test_point_count_mismatch_rejected(self):
        left = wp(0, 1, {0: [1, 1]}, overlap=0)
        right = wp(0, 1, {0: [1, 1, 1]})
        with pytest.raises(InputError):
            associate(left, right, 0)

    def test_missing_overlap_scan_rejected(self):
        left = wp(0, 1, {0: [1]}, overlap=0)
        right = wp(1, 1, {1: [1]})
        with pytest.raises(InputError):
            associate(left, right, 0)


def optimal_matching(lv, rv, threshold=0.5):
    """Exhaustive max-cardinality, max-total-IoU matching (oracle)."""
    lids = [int(i) for i in np.unique(lv) if i != 0]
    rids = [int(i) for i in np.unique(rv) if i != 0]
    pairs = [
        (li, ri, iou(rv == ri, lv == li))
        for li in lids
        for ri in rids
        if iou(rv == ri, lv == li) >= threshold
    ]
    best, best_key = [], (-1, -1.0)
    for r in range(len(pairs) + 1):
        for combo in itertools.combinations(pairs, r):
            if len({c[0] for c in combo}) < r or len({c[1] for c in combo}) < r:
                continue
            key = (r, sum(c[2] for c in combo))
            if key > best_key:
                best, best_key = combo, key
    return sorted((li, ri) for li, ri, _ in best)


class TestAssociateOptimality:
    @pytest.mark.parametrize("seed", range(25))
    def test_greedy_equals_optimal_at_half_threshold(self, seed):
        rng = np.random.default_rng(seed)
        n = 40
        lv = rng.integers(0, 5, size=n)
        rv = lv.copy()
        # perturb: random relabeling plus noise flips
        perm = rng.permutation(5)
        rv = perm[rv]
        flips = rng.random(n) < 0.15
        rv[flips] = rng.integers(0, 5, size=flips.sum())
        left = wp(0, 1, {0: lv}, overlap=0)
        right = wp(0, 1, {0: rv})
        got = sorted(associate(left, right, 0).pairs)
        assert got == optimal_matching(lv, rv)


class TestStitch:
    def test_static_two_window_single_global_id(self):
        # one object seen in both windows under different local ids
        left = wp(0, 3, {0: [1, 1, 0], 1: [1, 1, 0], 2: [1, 1, 0]}, overlap=2)
        right = wp(2, 3, {2: [4, 4, 0], 3: [4, 4, 0], 4: [4, 4, 0]})
        out = stitch([left, right])
        ids = {int(i) for t in range(5) for i in np.unique(out[t]) if i != 0}
        assert len(ids) == 1  # one tracklet end to end

    def test_left_window_owns_shared_scan(self):
        left = wp(0, 2, {0: [1, 0], 1: [1, 0]}, overlap=1)
        right = wp(1, 2, {1: [0, 2], 2: [0, 2]})  # disagrees on scan 1
        out = stitch([left, right])
        np.testing.assert_array_equal(out[1], [1, 0])

    def test_new_object_gets_fresh_id_above_locals(self):
        left = wp(0, 2, {0: [3, 0], 1: [3, 0]}, overlap=1)
        right = wp(1, 2, {1: [7, 0], 2: [7, 5]})  # id 5 appears only later
        out = stitch([left, right])
        assert int(out[2][0]) == 3  # id 7 matched onto left id 3
        fresh = int(out[2][1])
        assert fresh not in (0, 3, 7) and fresh > 7

    def test_missed_then_reappearing_instance_forks(self):
        # present in window 0, absent on the shared scan, present again in
        # window 1 -> association impossible, so the reappearance forks
        left = wp(0, 2, {0: [1, 1, 0, 0], 1: [0, 0, 0, 0]}, overlap=1)
        right = wp(1, 2, {1: [0, 0, 0, 0], 2: [2, 2, 0, 0]})
        out = stitch([left, right])
        id0 = {int(i) for i in np.unique(out[0]) if i != 0}
        id2 = {int(i) for i in np.unique(out[2]) if i != 0}
        assert id0 and id2 and id0.isdisjoint(id2)

    def test_three_window_chain(self):
        w0 = wp(0, 2, {0: [1, 0], 1: [1, 0]}, overlap=1)
        w1 = wp(1, 2, {1: [2, 0], 2: [2, 0]}, overlap=2)
        w2 = wp(2, 2, {2: [8, 0], 3: [8, 0]})
        out = stitch([w0, w1, w2])
        ids = {int(out[t][0]) for t in range(4)}
        assert ids == {1}

    def test_stuff_id_constant_across_windows(self):
        left = wp(0, 2, {0: [40, 1, 1], 1: [40, 1, 1]}, overlap=1)
        right = wp(1, 2, {1: [1, 1, 40], 2: [1, 1, 40]})
        out = stitch([left, right], stuff_ids={40})
        assert 40 in out[0] and 40 in out[2]

    def test_broken_chain_rejected(self):
        w0 = wp(0, 2, {0: [1], 1: [1]}, overlap=1)
        w2 = wp(3, 2, {3: [1], 4: [1]})
        with pytest.raises(InputError):
            stitch([w0, w2])

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            stitch([])

    def test_single_window_identity(self):
        w0 = wp(0, 2, {0: [1, 2], 1: [2, 1]})
        out = stitch([w0])
        np.testing.assert_array_equal(out[0], [1, 2])
        np.testing.assert_array_equal(out[1], [2, 1])


def test_window_prediction_requires_all_scans():
    with pytest.raises(InputError):
        wp(0, 3, {0: [1], 1: [1]})


def test_id_mapping_defaults():
    m = IdMapping()
    assert m.pairs == [] and m.unmatched_left == [] and m.unmatched_right == []
