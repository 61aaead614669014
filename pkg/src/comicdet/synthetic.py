"""Synthetic comic pages for desk-scale training and pipeline tests.

Each page is a light background with 2-6 dark-bordered rectangular panels
laid out on a jittered grid; every panel encloses 0-3 blob figures (an
ellipse body with a circular head).  Figures within a panel are confined to
disjoint vertical strips, so no two ground-truth boxes share a grid cell
after target encoding.  Ground-truth boxes are recorded exactly from the
drawn geometry, and everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .data import AnnotatedPage, pages_to_via_json
from .geometry import Box, ImageSpace, Label, LabeledBox

_BACKGROUND = 240
_PANEL_FILL = 252
_BORDER_INK = 25
_FIGURE_INK = 35

# (rows, cols) grids with 2..6 cells
_LAYOUTS = ((1, 2), (2, 1), (1, 3), (3, 1), (2, 2), (2, 3), (3, 2))


def generate_synthetic_dataset(n_pages: int, seed: int, page_size=(832, 1152)):
    """Generate ``n_pages`` annotated pages; ``page_size`` is (width, height)."""
    if n_pages < 1:
        raise ValueError("n_pages must be at least 1")
    rng = np.random.default_rng(seed)
    return [generate_page(rng, page_size, f"synthetic_{i:04d}.png") for i in range(n_pages)]


def generate_page(rng: np.random.Generator, page_size, image_id: str) -> AnnotatedPage:
    width, height = page_size
    canvas = np.full((height, width), _BACKGROUND, dtype=np.uint8)
    gts: list[LabeledBox] = []

    rows, cols = _LAYOUTS[rng.integers(len(_LAYOUTS))]
    margin_x = 0.04 * width
    margin_y = 0.04 * height
    gutter_x = 0.025 * width
    gutter_y = 0.025 * height
    cell_w = (width - 2 * margin_x - (cols - 1) * gutter_x) / cols
    cell_h = (height - 2 * margin_y - (rows - 1) * gutter_y) / rows
    border = max(2, round(0.004 * max(width, height)))

    for r in range(rows):
        for c in range(cols):
            x0 = margin_x + c * (cell_w + gutter_x)
            y0 = margin_y + r * (cell_h + gutter_y)
            # Jitter the edges without shrinking below 70% of the cell.
            jx = 0.015 * width
            jy = 0.015 * height
            px0 = x0 + rng.uniform(0, jx)
            py0 = y0 + rng.uniform(0, jy)
            px1 = x0 + cell_w - rng.uniform(0, jx)
            py1 = y0 + cell_h - rng.uniform(0, jy)
            panel = _draw_panel(canvas, px0, py0, px1, py1, border)
            gts.append(LabeledBox(panel, Label.PANEL))
            gts.extend(_draw_figures(canvas, rng, px0, py0, px1, py1, border))

    pixels = np.repeat(canvas[:, :, None], 3, axis=2)
    return AnnotatedPage(
        image_id=image_id,
        image=pixels,
        space=ImageSpace(width, height),
        gts=gts,
    )


def _draw_panel(canvas, x0, y0, x1, y1, border) -> Box:
    ix0, iy0, ix1, iy1 = int(round(x0)), int(round(y0)), int(round(x1)), int(round(y1))
    canvas[iy0:iy1, ix0:ix1] = _BORDER_INK
    canvas[iy0 + border : iy1 - border, ix0 + border : ix1 - border] = _PANEL_FILL
    return Box.from_corners(ix0, iy0, ix1, iy1)


def _draw_figures(canvas, rng, px0, py0, px1, py1, border):
    """0-3 blob figures, each in its own vertical strip of the panel."""
    inner_x0 = px0 + border + 2
    inner_y0 = py0 + border + 2
    inner_x1 = px1 - border - 2
    inner_y1 = py1 - border - 2
    pw = inner_x1 - inner_x0
    ph = inner_y1 - inner_y0
    if pw < 40 or ph < 40:
        return []

    n_figures = int(rng.integers(0, 4))
    strips = rng.permutation(3)[:n_figures]
    gts = []
    for strip in sorted(strips):
        strip_x0 = inner_x0 + strip * pw / 3
        rx = rng.uniform(0.10, 0.15) * pw / 2
        ry = rng.uniform(0.14, 0.24) * ph / 2
        hr = 0.55 * rx
        # Body center confined to the middle of the strip, clear of edges.
        bx = strip_x0 + pw / 6 + rng.uniform(-0.1, 0.1) * pw / 6
        top_extent = ry + 1.6 * hr
        by = rng.uniform(inner_y0 + top_extent + 2, inner_y1 - ry - 2)
        hy = by - ry - 0.6 * hr

        _fill_ellipse(canvas, bx, by, rx, ry)
        _fill_ellipse(canvas, bx, hy, hr, hr)
        box = Box.from_corners(bx - rx, hy - hr, bx + rx, by + ry)
        gts.append(LabeledBox(box, Label.CHARACTER))
    return gts


def _fill_ellipse(canvas, cx, cy, rx, ry):
    h, w = canvas.shape
    y0, y1 = max(0, int(cy - ry) - 1), min(h, int(cy + ry) + 2)
    x0, x1 = max(0, int(cx - rx) - 1), min(w, int(cx + rx) + 2)
    yy, xx = np.ogrid[y0:y1, x0:x1]
    mask = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    canvas[y0:y1, x0:x1][mask] = _FIGURE_INK


def save_dataset(pages, out_dir) -> str:
    """Write page PNGs plus a VIA annotation file; returns the JSON path."""
    images_dir = os.path.join(out_dir, "images")
    os.makedirs(images_dir, exist_ok=True)
    for page in pages:
        path = os.path.join(images_dir, page.image_id)
        Image.fromarray(page.image).save(path)
        page.path = path
    json_path = os.path.join(out_dir, "via_region_data.json")
    with open(json_path, "w") as fh:
        fh.write(pages_to_via_json(pages))
    return json_path
