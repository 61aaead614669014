"""Dataset ingestion: VIA-style region annotations, splits and serialization.

Annotations follow the VGG Image Annotator region schema: a JSON object
mapping per-image keys to ``{"filename", "regions", ...}`` where each
region carries ``shape_attributes`` (only ``"rect"`` shapes with x, y,
width, height are consumed) and ``region_attributes`` with a ``label``.
Project exports wrapping the mapping in ``_via_img_metadata`` are unwrapped
transparently.  Labels outside the two target classes (e.g. balloons) are
parsed, excluded and counted; "person" is accepted as a synonym for
character.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DataError
from .geometry import Box, ImageSpace, Label, LabeledBox
from .postprocess import Detection

LABEL_ALIASES = {
    "panel": Label.PANEL,
    "character": Label.CHARACTER,
    "person": Label.CHARACTER,
}

SPLIT_NAMES = ("train", "val", "test")


@dataclass
class AnnotatedPage:
    """One comic page image with its ground-truth boxes (original pixels)."""

    image_id: str
    image: np.ndarray | None
    space: ImageSpace
    gts: list[LabeledBox]
    source_split: str | None = None
    path: str | None = None


@dataclass
class ParseStats:
    pages: int = 0
    boxes: int = 0
    dropped_labels: dict[str, int] = field(default_factory=dict)
    dropped_shapes: int = 0
    missing_images: list[str] = field(default_factory=list)


@dataclass
class DatasetManifest:
    """A named dataset partitioned into train / val / test."""

    name: str
    splits: dict[str, list[AnnotatedPage]]
    split_ratios: tuple[float, float, float]

    @property
    def counts(self) -> tuple[int, int, int]:
        return tuple(len(self.splits[s]) for s in SPLIT_NAMES)

    @property
    def pages(self) -> list[AnnotatedPage]:
        return [p for s in SPLIT_NAMES for p in self.splits[s]]


def parse_vgg_annotations(json_text: str, image_dir=None, *, load_images: bool = True):
    """Parse VIA region JSON into annotated pages.

    Returns ``(pages, stats)``.  Rectangles become LabeledBoxes in center
    form, clamped to the image bounds.  Pages whose image file is missing
    are skipped and recorded in the stats.  With ``load_images=False`` only
    the image dimensions are read (the pixel data stays on disk).
    """
    try:
        payload = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed annotation JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise DataError("annotation JSON must be an object keyed by image")
    if "_via_img_metadata" in payload:
        payload = payload["_via_img_metadata"]

    stats = ParseStats()
    pages: list[AnnotatedPage] = []
    for key, entry in payload.items():
        if not isinstance(entry, dict) or "filename" not in entry:
            continue
        filename = entry["filename"]
        path = os.path.join(image_dir, filename) if image_dir else filename
        try:
            with Image.open(path) as im:
                if load_images:
                    pixels = np.asarray(im.convert("RGB"))
                    height, width = pixels.shape[:2]
                else:
                    pixels = None
                    width, height = im.size
        except (FileNotFoundError, OSError):
            stats.missing_images.append(filename)
            continue

        space = ImageSpace(width, height)
        gts: list[LabeledBox] = []
        regions = entry.get("regions") or []
        if isinstance(regions, dict):  # VIA v1 keys regions by index
            regions = [regions[k] for k in sorted(regions)]
        for region in regions:
            shape = region.get("shape_attributes", {})
            if shape.get("name") != "rect":
                stats.dropped_shapes += 1
                continue
            attrs = region.get("region_attributes", {})
            raw_label = attrs.get("label", attrs.get("class", ""))
            label = LABEL_ALIASES.get(str(raw_label).strip().lower())
            if label is None:
                name = str(raw_label) or "<unlabeled>"
                stats.dropped_labels[name] = stats.dropped_labels.get(name, 0) + 1
                continue
            box = _clamped_box(shape, space)
            if box is None:
                stats.dropped_shapes += 1
                continue
            gts.append(LabeledBox(box, label))
        pages.append(AnnotatedPage(image_id=filename, image=pixels, space=space, gts=gts, path=path))
        stats.pages += 1
        stats.boxes += len(gts)
    return pages, stats


def _clamped_box(shape, space: ImageSpace):
    x, y = float(shape["x"]), float(shape["y"])
    w, h = float(shape["width"]), float(shape["height"])
    if w <= 0 or h <= 0:
        return None
    if x >= 0 and y >= 0 and x + w <= space.width and y + h <= space.height:
        # In-bounds fast path keeps width/height verbatim so that
        # parse -> serialize -> parse is bit-exact.
        return Box(cx=x + w / 2.0, cy=y + h / 2.0, w=w, h=h)
    x_min = min(max(x, 0.0), space.width)
    y_min = min(max(y, 0.0), space.height)
    x_max = min(max(x + w, 0.0), space.width)
    y_max = min(max(y + h, 0.0), space.height)
    if x_max - x_min <= 0 or y_max - y_min <= 0:
        return None
    return Box.from_corners(x_min, y_min, x_max, y_max)


def pages_to_via_json(pages) -> str:
    """Serialize pages back to the VIA region schema (lossless for rects)."""
    payload = {}
    for page in pages:
        regions = []
        for gt in page.gts:
            regions.append(
                {
                    "shape_attributes": {
                        "name": "rect",
                        "x": gt.box.x_min,
                        "y": gt.box.y_min,
                        "width": gt.box.w,
                        "height": gt.box.h,
                    },
                    "region_attributes": {"label": gt.label.display_name},
                }
            )
        payload[page.image_id] = {
            "filename": page.image_id,
            "regions": regions,
            "file_attributes": {},
        }
    return json.dumps(payload, indent=2)


def make_splits(pages, ratios=(0.6, 0.2, 0.2), *, seed: int, name: str = "dataset") -> DatasetManifest:
    """Deterministic seeded shuffle, then a floor/remainder partition.

    980 pages split (588, 196, 196); 1400 -> (840, 280, 280);
    1750 -> (1050, 350, 350).
    """
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise DataError(f"split ratios must sum to 1, got {ratios}")
    pages = list(pages)
    n = len(pages)
    if n < len(SPLIT_NAMES):
        raise DataError(f"need at least {len(SPLIT_NAMES)} pages to split, got {n}")

    order = np.random.default_rng(seed).permutation(n)
    n_train = int(n * ratios[0])
    n_val = int(n * ratios[1])
    splits = {
        "train": [pages[i] for i in order[:n_train]],
        "val": [pages[i] for i in order[n_train : n_train + n_val]],
        "test": [pages[i] for i in order[n_train + n_val :]],
    }
    for split_name, split_pages in splits.items():
        for p in split_pages:
            p.source_split = split_name
    return DatasetManifest(name=name, splits=splits, split_ratios=tuple(ratios))


def resize_image(image: np.ndarray, size: int) -> np.ndarray:
    """Anisotropic resize to (size, size, 3), normalized to [0, 1] float32."""
    im = Image.fromarray(image).convert("RGB").resize((size, size), Image.BILINEAR)
    return np.asarray(im, dtype=np.float32) / 255.0


def detections_to_jsonl(image_id: str, detections) -> str:
    """One JSON line per detection, boxes in corner form."""
    lines = []
    for d in detections:
        lines.append(
            json.dumps(
                {
                    "image_id": image_id,
                    "label": d.label.display_name,
                    "x_min": d.box.x_min,
                    "y_min": d.box.y_min,
                    "x_max": d.box.x_max,
                    "y_max": d.box.y_max,
                    "objectness": d.objectness,
                    "class_prob": d.class_prob,
                }
            )
        )
    return "".join(line + "\n" for line in lines)


def load_detections_jsonl(text: str) -> dict[str, list[Detection]]:
    """Parse detection JSON lines grouped by image id."""
    out: dict[str, list[Detection]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            label = {l.display_name: l for l in Label}[row["label"]]
            det = Detection(
                box=Box.from_corners(row["x_min"], row["y_min"], row["x_max"], row["y_max"]),
                label=label,
                objectness=float(row["objectness"]),
                class_prob=float(row["class_prob"]),
            )
            out.setdefault(row["image_id"], []).append(det)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad detection record on line {lineno}: {exc}") from exc
    return out
