import json

import numpy as np
import pytest

from ocgnet.errors import InvalidInputError
from ocgnet.metrics import Box, acc_at_t, iou, per_class_report

from util import raster_iou


def corner_box(x0, y0, x1, y1):
    return Box.from_corners(x0, y0, x1, y1)


class TestIou:
    def test_identical(self):
        b = Box(10, 10, 4, 6)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(Box(0, 0, 2, 2), Box(10, 10, 2, 2)) == 0.0

    def test_corner_overlap_one_seventh(self):
        a = corner_box(0, 0, 2, 2)
        b = corner_box(1, 1, 3, 3)
        assert iou(a, b) == pytest.approx(1 / 7)
        assert raster_iou(a, b, grid=8) == pytest.approx(1 / 7)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = Box(*rng.uniform(1, 30, 2), *rng.uniform(1, 10, 2))
            b = Box(*rng.uniform(1, 30, 2), *rng.uniform(1, 10, 2))
            assert iou(a, b) == iou(b, a)

    def test_translation_and_scale_invariance(self):
        a = Box(10, 12, 4, 6)
        b = Box(11, 13, 5, 3)
        base = iou(a, b)
        for dx, dy, s in [(5, -3, 1.0), (0, 0, 2.5), (7, 7, 0.25)]:
            a2 = Box((a.cx + dx) * s, (a.cy + dy) * s, a.w * s, a.h * s)
            b2 = Box((b.cx + dx) * s, (b.cy + dy) * s, b.w * s, b.h * s)
            assert iou(a2, b2) == pytest.approx(base, abs=1e-9)

    def test_rasterization_oracle_random_integer_boxes(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            x0, y0 = rng.integers(0, 50, 2)
            x1 = rng.integers(x0 + 1, 64)
            y1 = rng.integers(y0 + 1, 64)
            u0, v0 = rng.integers(0, 50, 2)
            u1 = rng.integers(u0 + 1, 64)
            v1 = rng.integers(v0 + 1, 64)
            a = corner_box(x0, y0, x1, y1)
            b = corner_box(u0, v0, u1, v1)
            assert iou(a, b) == pytest.approx(raster_iou(a, b), abs=0)

    def test_degenerate_box_rejected(self):
        with pytest.raises(InvalidInputError):
            iou(Box(0, 0, 0, 2), Box(0, 0, 2, 2))


class TestAccAtT:
    def _pairs_with_ious(self, targets):
        # unit-height boxes overlapping a fixed gt by a chosen fraction
        pairs = []
        gt = corner_box(0, 0, 10, 1)
        for t in targets:
            # overlap o over union 20-o solves o = 20t/(1+t)
            o = 20 * t / (1 + t)
            pred = corner_box(10 - o, 0, 20 - o, 1)
            pairs.append((pred, gt))
        return pairs

    def test_all_perfect(self):
        b = Box(5, 5, 2, 2)
        assert acc_at_t([(b, b)] * 3, 0.25) == 100.0

    def test_hand_counted_fixture(self):
        pairs = self._pairs_with_ious([0.3, 0.3, 0.6, 0.1])
        assert acc_at_t(pairs, 0.25) == pytest.approx(75.0)
        assert acc_at_t(pairs, 0.50) == pytest.approx(25.0)

    def test_boundary_iou_counts_as_hit(self):
        pairs = self._pairs_with_ious([0.5])
        assert iou(*pairs[0]) == pytest.approx(0.5, abs=1e-12)
        assert acc_at_t(pairs, 0.50) == 100.0

    def test_monotone_in_threshold(self):
        pairs = self._pairs_with_ious([0.1, 0.2, 0.4, 0.6, 0.9])
        accs = [acc_at_t(pairs, t) for t in (0.1, 0.25, 0.5, 0.75, 0.9)]
        assert accs == sorted(accs, reverse=True)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            acc_at_t([], 0.25)


class TestPerClassReport:
    def test_single_class_equals_overall(self):
        b = Box(5, 5, 2, 2)
        rep = per_class_report([(b, b, "building")] * 4)
        assert rep.per_class["building"]["acc_at_25"] == rep.acc_at_25 == 100.0
        assert rep.n == 4

    def test_disjoint_correctness(self):
        good = Box(5, 5, 2, 2)
        bad = Box(50, 50, 2, 2)
        rep = per_class_report([(good, good, "a"), (bad, good, "b")])
        assert rep.per_class["a"]["acc_at_25"] == 100.0
        assert rep.per_class["b"]["acc_at_25"] == 0.0
        assert rep.acc_at_25 == 50.0

    def test_unknown_label_bucketed_with_warning(self):
        b = Box(5, 5, 2, 2)
        with pytest.warns(UserWarning):
            rep = per_class_report([(b, b, "mystery")], known_labels=["building"])
        assert "other" in rep.per_class

    def test_counts_sum_and_threshold_order(self):
        rng = np.random.default_rng(1)
        items = []
        for i in range(20):
            gt = Box(*rng.uniform(10, 50, 2), *rng.uniform(2, 8, 2))
            pred = Box(gt.cx + rng.uniform(0, 4), gt.cy, gt.w, gt.h)
            items.append((pred, gt, "c" + str(i % 3)))
        rep = per_class_report(items)
        assert sum(v["count"] for v in rep.per_class.values()) == rep.n == 20
        assert rep.acc_at_50 <= rep.acc_at_25

    def test_report_serialization(self):
        b = Box(5, 5, 2, 2)
        rep = per_class_report([(b, b, "building")])
        parsed = json.loads(rep.to_json())
        assert parsed["acc_at_25"] == 100.0
        table = rep.to_table()
        assert "acc@0.25" in table and "overall" in table
