import numpy as np
import pytest

from comicdet import Box, Label, LabeledBox, decode, encode_targets, filter_objectness, nms
from comicdet.network import DetectionHeads
from comicdet.postprocess import Detection, decode_arrays
from comicdet.targets import targets_to_heads

from util import anchor_set, default_cfg, greedy_nms_oracle, random_detections


@pytest.fixture(scope="module")
def cfg():
    return default_cfg()


@pytest.fixture(scope="module")
def anchors():
    return anchor_set()


def zero_heads(cfg):
    return DetectionHeads(*[np.zeros((s, s, cfg.head_depth)) for s in cfg.grid_sizes])


class TestDecode:
    def test_candidate_count_default(self, cfg, anchors):
        dets = decode(zero_heads(cfg), anchors, cfg)
        assert len(dets) == 10647

    def test_candidate_count_formula(self, anchors):
        cfg = default_cfg(input_size=224)
        heads = DetectionHeads(*[np.zeros((s, s, cfg.head_depth)) for s in cfg.grid_sizes])
        assert len(decode(heads, anchors, cfg)) == (7 * 7 + 14 * 14 + 28 * 28) * 3

    def test_zero_raw_values_first_cell(self, cfg, anchors):
        dets = decode(zero_heads(cfg), anchors, cfg)
        first = dets[0]  # coarsest scale, cell (0, 0), anchor 0, stride 32
        pw, ph = anchors.anchors[0]
        assert (first.box.cx, first.box.cy) == (16.0, 16.0)
        assert (first.box.w, first.box.h) == (pw, ph)
        assert first.objectness == pytest.approx(0.5)

    def test_encoded_target_slot_reproduces_gt(self, cfg, anchors):
        rng = np.random.default_rng(0)
        gts = []
        for _ in range(25):
            w, h = rng.uniform(4, 350, 2)
            gts.append(
                LabeledBox(Box(rng.uniform(2, 414), rng.uniform(2, 414), w, h), Label(int(rng.integers(2))))
            )
        t = encode_targets(gts, anchors, cfg)
        dets = decode(targets_to_heads(t, cfg), anchors, cfg)
        strong = [d for d in dets if d.objectness > 0.9]
        assert len(strong) == t.num_responsible
        for d in strong:
            err = min(
                max(
                    abs(d.box.cx - g.box.cx),
                    abs(d.box.cy - g.box.cy),
                    abs(d.box.w - g.box.w),
                    abs(d.box.h - g.box.h),
                )
                for g in gts
                if g.label == d.label
            )
            assert err < 1e-6

    def test_nonfinite_rejected(self, cfg, anchors):
        heads = zero_heads(cfg)
        heads.p2[3, 3, 3] = np.inf
        with pytest.raises(ValueError):
            decode(heads, anchors, cfg)

    def test_softmax_mode_probs_sum_to_one(self, anchors):
        cfg = default_cfg(head_mode="softmax")
        rng = np.random.default_rng(1)
        heads = DetectionHeads(*[rng.normal(0, 2, (s, s, cfg.head_depth)) for s in cfg.grid_sizes])
        _, _, probs = decode_arrays(heads, anchors, cfg)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


class TestFilterObjectness:
    def _det(self, obj):
        return Detection(Box(10, 10, 5, 5), Label.PANEL, obj, 0.9)

    def test_below_threshold_dropped(self):
        dets = [self._det(0.5)] * 4
        assert filter_objectness(dets, 0.7) == []

    def test_threshold_zero_keeps_all(self):
        dets = [self._det(0.01), self._det(0.99)]
        assert filter_objectness(dets, 0.0) == dets

    def test_strict_boundary(self):
        dets = [self._det(0.69), self._det(0.70), self._det(0.71)]
        kept = filter_objectness(dets, 0.70)
        assert [d.objectness for d in kept] == [0.71]

    def test_order_preserving(self):
        rng = np.random.default_rng(2)
        dets = random_detections(rng, 30)
        kept = filter_objectness(dets, 0.4)
        assert kept == [d for d in dets if d.objectness > 0.4]

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            filter_objectness([], 1.5)


class TestNMS:
    def test_single_detection_kept(self):
        d = Detection(Box(10, 10, 5, 5), Label.PANEL, 0.9, 0.9)
        assert nms([d]) == [d]

    def test_duplicate_keeps_higher_score(self):
        hi = Detection(Box(10, 10, 8, 8), Label.PANEL, 0.9, 1.0)
        lo = Detection(Box(10, 10, 8, 8), Label.PANEL, 0.8, 1.0)
        assert nms([lo, hi]) == [hi]

    def test_classes_do_not_suppress_each_other(self):
        a = Detection(Box(10, 10, 8, 8), Label.PANEL, 0.9, 1.0)
        b = Detection(Box(10, 10, 8, 8), Label.CHARACTER, 0.8, 1.0)
        assert set(nms([a, b])) == {a, b}

    def test_exact_threshold_not_suppressed(self):
        a = Detection(Box.from_corners(0, 0, 10, 10), Label.PANEL, 0.9, 1.0)
        b = Detection(Box.from_corners(0, 0, 10, 5), Label.PANEL, 0.8, 1.0)  # IoU exactly 0.5
        assert len(nms([a, b], 0.5)) == 2

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            dets = random_detections(rng, int(rng.integers(1, 7)))
            assert nms(dets, 0.5) == greedy_nms_oracle(dets, 0.5)

    def test_top_scorer_always_kept(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            dets = random_detections(rng, 6)
            top = max(dets, key=lambda d: d.score)
            assert top in nms(dets, 0.3)

    def test_kept_pairwise_iou_bounded(self):
        from comicdet import iou

        rng = np.random.default_rng(5)
        for _ in range(50):
            kept = nms(random_detections(rng, 10), 0.45)
            for i, a in enumerate(kept):
                for b in kept[i + 1 :]:
                    if a.label == b.label:
                        assert iou(a.box, b.box) <= 0.45
