"""Command-line interface: synth | anchors | train | detect | eval | render.

Flag defaults follow the reference pipeline: 416 input, 3 boxes per cell,
2 classes, sigmoid head, objectness threshold 0.70, match IoU 0.80, NMS
IoU 0.5, learning rate 0.001 switching to 0.0001 at 42,000 of 70,000
iterations.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from . import __version__
from .anchors import AnchorSet, cluster_anchors
from .data import (
    detections_to_jsonl,
    load_detections_jsonl,
    make_splits,
    parse_vgg_annotations,
    resize_image,
)
from .errors import ComicdetError, ConfigError, DataError, DivergenceError
from .evaluation import evaluate, format_report_table, match_to_ground_truth, report_csv, report_rows
from .geometry import Box, ImageSpace, from_network_space, to_network_space
from .network import NetworkConfig, build_network, forward, load_checkpoint
from .postprocess import Detection, decode, filter_objectness, nms
from .render import render_detections
from .synthetic import generate_synthetic_dataset, save_dataset
from .training import TrainSchedule, train


def _network_options(fn):
    fn = click.option("--input-size", default=416, show_default=True, help="Network input side; multiple of 32.")(fn)
    fn = click.option("--boxes-per-cell", default=3, show_default=True, help="Boxes predicted per grid cell.")(fn)
    fn = click.option("--classes", default=2, show_default=True, help="Number of target classes.")(fn)
    fn = click.option("--head", type=click.Choice(["sigmoid", "softmax"]), default="sigmoid", show_default=True)(fn)
    fn = click.option("--width-multiplier", default=1.0, show_default=True, help="Channel shrink factor for desk-scale runs.")(fn)
    return fn


@click.group()
@click.version_option(__version__)
def cli():
    """Comic page panel/character detection pipeline."""


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--pages", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--page-width", default=832, show_default=True)
@click.option("--page-height", default=1152, show_default=True)
def synth(out_dir, pages, seed, page_width, page_height):
    """Generate a synthetic dataset (images + VIA annotation JSON)."""
    dataset = generate_synthetic_dataset(pages, seed, (page_width, page_height))
    json_path = save_dataset(dataset, out_dir)
    n_boxes = sum(len(p.gts) for p in dataset)
    click.echo(f"wrote {len(dataset)} pages ({n_boxes} boxes) under {out_dir}; annotations: {json_path}")


@cli.command()
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--images", "image_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--num-anchors", default=9, show_default=True)
@click.option("--input-size", default=416, show_default=True)
@click.option("--seed", default=0, show_default=True)
def anchors(annotations, image_dir, out_path, num_anchors, input_size, seed):
    """Cluster ground-truth dimensions into anchor priors."""
    pages, stats = _load_pages(annotations, image_dir, load_images=False)
    dims = [
        (b.w, b.h)
        for page in pages
        for b in (to_network_space(gt.box, page.space, input_size) for gt in page.gts)
    ]
    anchor_set = cluster_anchors(dims, num_anchors, seed=seed)
    anchor_set.save(out_path)
    click.echo(f"clustered {len(dims)} boxes from {stats.pages} pages into {num_anchors} anchors -> {out_path}")


@cli.command()
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--images", "image_dir", required=True, type=click.Path(exists=True))
@click.option("--anchors", "anchor_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--iterations", default=70_000, show_default=True)
@click.option("--phase-boundary", default=42_000, show_default=True)
@click.option("--lr1", default=1e-3, show_default=True)
@click.option("--lr2", default=1e-4, show_default=True)
@click.option("--batch-size", default=4, show_default=True)
@click.option("--val-every", default=100, show_default=True)
@click.option("--checkpoint-every", default=0, show_default=True, help="0 disables intermediate checkpoints.")
@click.option("--seed", default=0, show_default=True)
@click.option("--split-seed", default=0, show_default=True)
@click.option("--no-split", is_flag=True, help="Train on every page (no validation split); for overfit runs.")
@click.option("--init-checkpoint", type=click.Path(exists=True), help="Warm-start weights (transfer learning).")
@_network_options
def train_cmd(
    annotations, image_dir, anchor_path, out_dir, iterations, phase_boundary, lr1, lr2,
    batch_size, val_every, checkpoint_every, seed, split_seed, no_split, init_checkpoint,
    input_size, boxes_per_cell, classes, head, width_multiplier,
):
    """Train a detector; writes checkpoints and the loss CSV."""
    anchor_set = AnchorSet.load(anchor_path)
    cfg = NetworkConfig(
        anchors=anchor_set,
        input_size=input_size,
        num_classes=classes,
        boxes_per_cell=boxes_per_cell,
        head_mode=head,
        width_multiplier=width_multiplier,
    )
    pages, _ = _load_pages(annotations, image_dir)
    if no_split:
        train_pages, val_pages = pages, []
    else:
        manifest = make_splits(pages, seed=split_seed)
        train_pages, val_pages = manifest.splits["train"], manifest.splits["val"]
    schedule = TrainSchedule(
        total_iterations=iterations,
        phase_boundary=phase_boundary,
        lr_phase1=lr1,
        lr_phase2=lr2,
        batch_size=batch_size,
        val_every=val_every,
    )
    net = build_network(cfg, seed=seed)
    if init_checkpoint:
        from .network import load_pretrained_backbone

        copied = load_pretrained_backbone(net, init_checkpoint)
        click.echo(f"warm start: copied {copied} tensors from {init_checkpoint}")
    os.makedirs(out_dir, exist_ok=True)
    result = train(
        net,
        train_pages,
        schedule,
        seed,
        val_pages=val_pages,
        out_dir=out_dir,
        checkpoint_every=checkpoint_every or None,
    )
    final_val = result.final_val_loss
    click.echo(
        f"trained {iterations} iterations on {len(train_pages)} pages; "
        f"final train loss {result.final_loss:.4f}"
        + (f", val loss {final_val:.4f}" if final_val is not None else "")
    )


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--images", "image_paths", required=True, multiple=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--obj-threshold", default=0.70, show_default=True)
@click.option("--nms-iou", default=0.5, show_default=True)
def detect(checkpoint, image_paths, out_path, obj_threshold, nms_iou):
    """Run the detection pipeline on images; emits JSON lines."""
    from PIL import Image

    net = load_checkpoint(checkpoint)
    cfg = net.cfg
    files = []
    for p in image_paths:
        if os.path.isdir(p):
            files.extend(sorted(os.path.join(p, f) for f in os.listdir(p) if _is_image(f)))
        else:
            files.append(p)
    if not files:
        raise DataError("no input images found")

    with open(out_path, "w") as fh:
        for path in files:
            pixels = np.asarray(Image.open(path).convert("RGB"))
            space = ImageSpace(pixels.shape[1], pixels.shape[0])
            heads = forward(net, resize_image(pixels, cfg.input_size))
            dets = nms(filter_objectness(decode(heads, cfg.anchors, cfg), obj_threshold), nms_iou)
            rescaled = []
            for d in dets:
                box = _clip_box(from_network_space(d.box, space, cfg.input_size), space)
                if box is not None:
                    rescaled.append(Detection(box=box, label=d.label, objectness=d.objectness, class_prob=d.class_prob))
            image_id = os.path.basename(path)
            fh.write(detections_to_jsonl(image_id, rescaled))
            click.echo(f"{image_id}: {len(rescaled)} detections")
    click.echo(f"wrote detections to {out_path}")


@cli.command(name="eval")
@click.option("--detections", "det_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--images", "image_dir", required=True, type=click.Path(exists=True))
@click.option("--iou-match", default=0.80, show_default=True)
@click.option("--method-name", default="ours", show_default=True)
@click.option("--dataset-name", default="custom", show_default=True)
@click.option("--csv-out", type=click.Path(), help="Also write the table as CSV.")
def eval_cmd(det_path, annotations, image_dir, iou_match, method_name, dataset_name, csv_out):
    """Match detections against ground truth and print the metric table."""
    pages, _ = _load_pages(annotations, image_dir, load_images=False)
    with open(det_path) as fh:
        per_image = load_detections_jsonl(fh.read())
    results = [
        match_to_ground_truth(per_image.get(page.image_id, []), page.gts, iou_match)
        for page in pages
    ]
    report = evaluate(results)
    rows = report_rows(report, method_name, dataset_name)
    click.echo(format_report_table(rows))
    if csv_out:
        with open(csv_out, "w") as fh:
            fh.write(report_csv(rows))
        click.echo(f"wrote {csv_out}")


@cli.command()
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--detections", "det_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def render(image_path, det_path, out_path):
    """Overlay detections from a JSONL file onto an image."""
    from PIL import Image

    from .data import AnnotatedPage

    pixels = np.asarray(Image.open(image_path).convert("RGB"))
    page = AnnotatedPage(
        image_id=os.path.basename(image_path),
        image=pixels,
        space=ImageSpace(pixels.shape[1], pixels.shape[0]),
        gts=[],
    )
    with open(det_path) as fh:
        per_image = load_detections_jsonl(fh.read())
    dets = per_image.get(page.image_id, [])
    render_detections(page, dets, out_path)
    click.echo(f"rendered {len(dets)} boxes -> {out_path}")


def _is_image(name: str) -> bool:
    return name.lower().endswith((".png", ".jpg", ".jpeg"))


def _clip_box(box: Box, space: ImageSpace):
    """Clip a box to the image frame; None if nothing remains."""
    x_min = max(box.x_min, 0.0)
    y_min = max(box.y_min, 0.0)
    x_max = min(box.x_max, float(space.width))
    y_max = min(box.y_max, float(space.height))
    if x_max - x_min <= 0 or y_max - y_min <= 0:
        return None
    return Box.from_corners(x_min, y_min, x_max, y_max)


def _load_pages(annotations_path, image_dir, *, load_images=True):
    with open(annotations_path) as fh:
        pages, stats = parse_vgg_annotations(fh.read(), image_dir, load_images=load_images)
    if stats.missing_images:
        click.echo(f"warning: {len(stats.missing_images)} annotated images missing on disk", err=True)
    if not pages:
        raise DataError(f"no usable pages in {annotations_path}")
    return pages, stats


cli.add_command(train_cmd, name="train")


def main():
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(130)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(3)
    except DivergenceError as exc:
        click.echo(f"training error: {exc}", err=True)
        sys.exit(4)
    except ComicdetError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except FileNotFoundError as exc:
        click.echo(f"missing file: {exc}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()
