import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comicdet import Box, ImageSpace, from_network_space, iou, to_network_space
from comicdet.errors import ConfigError

from util import rasterized_iou

finite_box = st.builds(
    Box,
    cx=st.floats(-500, 500),
    cy=st.floats(-500, 500),
    w=st.floats(0.5, 400),
    h=st.floats(0.5, 400),
)


class TestIoU:
    def test_identical_boxes(self):
        b = Box(5, 5, 10, 10)
        assert iou(b, Box(5, 5, 10, 10)) == 1.0

    def test_disjoint_boxes(self):
        assert iou(Box(5, 5, 10, 10), Box(100, 100, 10, 10)) == 0.0

    def test_partial_overlap(self):
        a = Box.from_corners(0, 0, 10, 10)
        b = Box.from_corners(5, 0, 15, 10)
        expected = 50 / 150
        assert iou(a, b) == pytest.approx(expected, abs=1e-12)
        assert rasterized_iou(a, b) == pytest.approx(expected, rel=0.02)

    def test_shared_edge_is_zero(self):
        a = Box.from_corners(0, 0, 10, 10)
        b = Box.from_corners(10, 0, 20, 10)
        assert iou(a, b) == 0.0

    @pytest.mark.parametrize("bad", [Box(0, 0, 0, 10), Box(0, 0, 10, -1)])
    def test_degenerate_box_rejected(self, bad):
        with pytest.raises(ValueError):
            iou(bad, Box(0, 0, 5, 5))

    def test_agrees_with_rasterization(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x0, y0 = rng.integers(0, 300, 2)
            x1 = x0 + rng.integers(5, 200)
            y1 = y0 + rng.integers(5, 200)
            u0, v0 = rng.integers(0, 300, 2)
            u1 = u0 + rng.integers(5, 200)
            v1 = v0 + rng.integers(5, 200)
            a = Box.from_corners(x0, y0, x1, y1)
            b = Box.from_corners(u0, v0, u1, v1)
            assert iou(a, b) == pytest.approx(rasterized_iou(a, b), abs=0.02)

    @settings(max_examples=200, deadline=None)
    @given(a=finite_box, b=finite_box)
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == iou(b, a)

    @settings(max_examples=100, deadline=None)
    @given(b=finite_box)
    def test_self_iou_is_one(self, b):
        assert iou(b, b) == pytest.approx(1.0, abs=1e-12)


class TestConversions:
    @settings(max_examples=200, deadline=None)
    @given(b=finite_box)
    def test_corner_center_bijection(self, b):
        rt = Box.from_corners(*b.corners())
        assert rt.cx == pytest.approx(b.cx, rel=1e-9, abs=1e-9)
        assert rt.cy == pytest.approx(b.cy, rel=1e-9, abs=1e-9)
        assert rt.w == pytest.approx(b.w, rel=1e-9)
        assert rt.h == pytest.approx(b.h, rel=1e-9)

    def test_identity_scale(self):
        b = Box(100, 200, 50, 60)
        assert to_network_space(b, ImageSpace(416, 416)) == b
        assert from_network_space(b, ImageSpace(416, 416)) == b

    def test_factor_two(self):
        out = to_network_space(Box(416, 416, 416, 416), ImageSpace(832, 832))
        assert out == Box(208, 208, 208, 208)

    def test_known_upscale(self):
        out = from_network_space(Box(208, 208, 100, 100), ImageSpace(2232, 3072))
        assert out.cx == pytest.approx(1116)
        assert out.cy == pytest.approx(1536)
        assert out.w == pytest.approx(100 * 2232 / 416)
        assert out.h == pytest.approx(100 * 3072 / 416)

    @settings(max_examples=200, deadline=None)
    @given(
        b=st.builds(Box, cx=st.floats(1, 1600), cy=st.floats(1, 2100), w=st.floats(1, 1000), h=st.floats(1, 1000)),
        w=st.integers(1, 8000),
        h=st.integers(1, 8000),
    )
    def test_network_space_roundtrip(self, b, w, h):
        space = ImageSpace(w, h)
        rt = from_network_space(to_network_space(b, space), space)
        for got, want in zip((rt.cx, rt.cy, rt.w, rt.h), (b.cx, b.cy, b.w, b.h)):
            assert got == pytest.approx(want, rel=1e-9)

    def test_space_validation(self):
        with pytest.raises(ConfigError):
            ImageSpace(0, 100)
