"""Optimization loop: Adam with the two-phase learning-rate schedule.

Iterations are 1-based; the learning rate is ``lr_phase1`` through the
phase boundary and ``lr_phase2`` afterwards (the reference schedule is
70,000 iterations with the switch at 42,000).  Batches are sampled with
replacement by a seeded generator and targets are encoded once up front,
so a fixed seed reproduces the loss history exactly.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
import torch

from .data import resize_image
from .errors import ConfigError, DivergenceError
from .geometry import LabeledBox, to_network_space
from .losses import batch_loss, stack_targets
from .network import ComicDetector, save_checkpoint
from .targets import encode_targets


@dataclass(frozen=True)
class TrainSchedule:
    total_iterations: int = 70_000
    phase_boundary: int = 42_000
    lr_phase1: float = 1e-3
    lr_phase2: float = 1e-4
    batch_size: int = 4
    val_every: int = 100

    def __post_init__(self):
        if self.total_iterations < 1:
            raise ConfigError("total_iterations must be positive")
        if not (0 < self.phase_boundary <= self.total_iterations):
            raise ConfigError("phase boundary must lie within the run")
        if self.lr_phase1 <= 0 or self.lr_phase2 <= 0:
            raise ConfigError("learning rates must be positive")
        if self.batch_size < 1 or self.val_every < 1:
            raise ConfigError("batch_size and val_every must be positive")

    def learning_rate(self, iteration: int) -> float:
        """Learning rate for a 1-based iteration index."""
        return self.lr_phase1 if iteration <= self.phase_boundary else self.lr_phase2


@dataclass
class HistoryRow:
    iteration: int
    lr: float
    train_loss: float
    val_loss: float | None
    coord: float
    objectness: float
    classification: float


@dataclass
class TrainingResult:
    net: ComicDetector
    history: list[HistoryRow]
    skipped_small: int = 0
    collisions: int = 0

    @property
    def final_loss(self) -> float:
        return self.history[-1].train_loss

    @property
    def final_val_loss(self) -> float | None:
        for row in reversed(self.history):
            if row.val_loss is not None:
                return row.val_loss
        return None


def _prepare(pages, cfg):
    """Resize images and encode targets once; returns (images, targets, stats)."""
    images, targets = [], []
    skipped = collisions = 0
    for page in pages:
        if page.image is None:
            raise ConfigError(f"page {page.image_id} has no pixel data (annotations parsed without images)")
        pixels = resize_image(page.image, cfg.input_size)
        images.append(torch.from_numpy(pixels).permute(2, 0, 1))
        gts_net = [
            LabeledBox(to_network_space(gt.box, page.space, cfg.input_size), gt.label)
            for gt in page.gts
        ]
        t = encode_targets(gts_net, cfg.anchors, cfg)
        skipped += t.skipped_small
        collisions += t.collisions
        targets.append(t)
    return images, targets, skipped, collisions


def train(
    net: ComicDetector,
    train_pages,
    schedule: TrainSchedule,
    seed: int,
    *,
    val_pages=(),
    weights=(1.0, 1.0, 1.0),
    out_dir=None,
    checkpoint_every: int | None = None,
) -> TrainingResult:
    """Run the optimization loop; returns the trained net and loss history.

    Validation loss is computed every ``schedule.val_every`` iterations and
    at the end (when ``val_pages`` is non-empty).  A NaN loss aborts with
    the failing iteration index.
    """
    if not train_pages:
        raise ConfigError("training requires a non-empty dataset")
    cfg = net.cfg

    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    images, targets, skipped, collisions = _prepare(train_pages, cfg)
    val_batches = _make_eval_batches(val_pages, cfg, schedule.batch_size) if val_pages else []

    optimizer = torch.optim.Adam(net.parameters(), lr=schedule.lr_phase1)
    history: list[HistoryRow] = []

    for it in range(1, schedule.total_iterations + 1):
        lr = schedule.learning_rate(it)
        for group in optimizer.param_groups:
            group["lr"] = lr

        idx = rng.integers(0, len(images), size=schedule.batch_size)
        x = torch.stack([images[i] for i in idx])
        batched = stack_targets([targets[i] for i in idx])

        net.train()
        optimizer.zero_grad()
        try:
            total, breakdown = batch_loss(net(x), batched, cfg, weights)
        except DivergenceError as exc:
            raise DivergenceError(f"training diverged at iteration {it}: {exc}", iteration=it) from exc
        if not torch.isfinite(total):
            raise DivergenceError(f"training diverged at iteration {it}: non-finite loss", iteration=it)
        total.backward()
        optimizer.step()

        val_loss = None
        if val_batches and (it % schedule.val_every == 0 or it == schedule.total_iterations):
            val_loss = _validation_loss(net, val_batches, cfg, weights)
        history.append(
            HistoryRow(
                iteration=it,
                lr=lr,
                train_loss=breakdown.total,
                val_loss=val_loss,
                coord=breakdown.coord,
                objectness=breakdown.objectness,
                classification=breakdown.classification,
            )
        )

        if out_dir and checkpoint_every and it % checkpoint_every == 0:
            save_checkpoint(os.path.join(out_dir, f"checkpoint_{it:06d}.pt"), net)

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        save_checkpoint(os.path.join(out_dir, "checkpoint_final.pt"), net)
        write_history_csv(history, os.path.join(out_dir, "loss_history.csv"))
    return TrainingResult(net=net, history=history, skipped_small=skipped, collisions=collisions)


def _make_eval_batches(pages, cfg, batch_size):
    images, targets, _, _ = _prepare(pages, cfg)
    batches = []
    for i in range(0, len(images), batch_size):
        chunk = slice(i, i + batch_size)
        batches.append((torch.stack(images[chunk]), stack_targets(targets[chunk]), len(images[chunk])))
    return batches


def _validation_loss(net, batches, cfg, weights) -> float:
    net.eval()
    total = 0.0
    count = 0
    with torch.no_grad():
        for x, batched, n in batches:
            _, breakdown = batch_loss(net(x), batched, cfg, weights)
            total += breakdown.total * n
            count += n
    return total / count


def write_history_csv(history, path) -> None:
    """Columns: iteration, lr, train_loss, val_loss, coord, obj, class."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "lr", "train_loss", "val_loss", "coord", "obj", "class"])
        for row in history:
            writer.writerow(
                [
                    row.iteration,
                    f"{row.lr:g}",
                    f"{row.train_loss:.6f}",
                    "" if row.val_loss is None else f"{row.val_loss:.6f}",
                    f"{row.coord:.6f}",
                    f"{row.objectness:.6f}",
                    f"{row.classification:.6f}",
                ]
            )
