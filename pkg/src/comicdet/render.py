"""Overlay detections on a page image and write the result to disk."""

from __future__ import annotations

from PIL import Image, ImageDraw

from .geometry import Label

BOX_COLORS = {
    Label.PANEL: (214, 40, 40),
    Label.CHARACTER: (40, 80, 214),
}
_BORDER_WIDTH = 3


def render_detections(page, detections, out_path) -> None:
    """Draw color-coded labeled boxes (original image coordinates).

    Score captions are placed just above each box and omitted when there is
    no room, so box interiors are never painted over.  With no detections
    the output is pixel-identical to the input.
    """
    im = Image.fromarray(page.image).convert("RGB")
    draw = ImageDraw.Draw(im)
    for det in detections:
        color = BOX_COLORS[det.label]
        x0, y0, x1, y1 = (round(v) for v in det.box.corners())
        draw.rectangle((x0, y0, x1 - 1, y1 - 1), outline=color, width=_BORDER_WIDTH)
        caption = f"{det.label.display_name} {det.score:.2f}"
        text_h = 11
        if y0 >= text_h + 2:
            draw.text((x0 + 1, y0 - text_h - 2), caption, fill=color)
    im.save(out_path)
