"""Matching detections to ground truth and computing detection metrics.

Matching is greedy and one-to-one: detections are visited in descending
score order and each claims the unmatched same-class ground-truth box of
highest IoU, provided that IoU is strictly greater than the 0.80 minimum.
Every ground truth therefore ends up in at most one matched pair.  Counts
are aggregated over images before the precision / recall / F-measure
ratios are formed; mean IoU averages the IoU of all matched pairs.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .geometry import Label
from .kernels import iou_matrix
from .postprocess import Detection

DEFAULT_IOU_MIN = 0.80


@dataclass(frozen=True)
class MatchResult:
    """One image's matching outcome."""

    true_positives: int
    false_positives: int
    false_negatives: int
    matched_pairs: tuple  # (Detection, LabeledBox, iou) triples
    detections_per_class: dict[Label, int] = field(default_factory=dict)
    ground_truths_per_class: dict[Label, int] = field(default_factory=dict)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f_measure: float
    mean_iou: float
    true_positives: int
    false_positives: int
    false_negatives: int
    degenerate: frozenset[str] = frozenset()


@dataclass(frozen=True)
class EvalReport:
    per_class: dict[Label, ClassMetrics]
    overall: ClassMetrics


def match_to_ground_truth(dets, gts, iou_min: float = DEFAULT_IOU_MIN) -> MatchResult:
    """Greedily match detections against ground truth, same class only."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    matched_gt = [False] * len(gts)
    pairs = []
    if dets and gts:
        ious = iou_matrix(
            np.array([d.box.corners() for d in dets]),
            np.array([g.box.corners() for g in gts]),
        )
    for i in order:
        det = dets[i]
        best_j = -1
        best_iou = iou_min
        for j, gt in enumerate(gts):
            if matched_gt[j] or gt.label != det.label:
                continue
            if ious[i, j] > best_iou:
                best_iou = ious[i, j]
                best_j = j
        if best_j >= 0:
            matched_gt[best_j] = True
            pairs.append((det, gts[best_j], float(ious[i, best_j])))

    tp = len(pairs)
    det_counts: dict[Label, int] = {}
    gt_counts: dict[Label, int] = {}
    for d in dets:
        det_counts[d.label] = det_counts.get(d.label, 0) + 1
    for g in gts:
        gt_counts[g.label] = gt_counts.get(g.label, 0) + 1
    return MatchResult(
        true_positives=tp,
        false_positives=len(dets) - tp,
        false_negatives=len(gts) - tp,
        matched_pairs=tuple(pairs),
        detections_per_class=det_counts,
        ground_truths_per_class=gt_counts,
    )


def confidence_score(det: Detection, iou: float) -> float:
    """Objectness times IoU with the matched ground truth; only defined
    during evaluation, where ground truth is available."""
    return det.objectness * iou


def f_measure(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall (0 when both are 0)."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _metrics(tp: int, fp: int, fn: int, ious) -> ClassMetrics:
    degenerate = set()
    if tp + fp == 0:
        precision = 0.0
        degenerate.add("precision")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        degenerate.add("recall")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        degenerate.add("f_measure")
    if len(ious) == 0:
        mean_iou = 0.0
        degenerate.add("mean_iou")
    else:
        mean_iou = float(np.mean(ious))
    return ClassMetrics(
        precision=precision,
        recall=recall,
        f_measure=f_measure(precision, recall),
        mean_iou=mean_iou,
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        degenerate=frozenset(degenerate),
    )


def evaluate(match_results) -> EvalReport:
    """Aggregate per-image match results into per-class and overall metrics."""
    match_results = list(match_results)
    if not match_results:
        raise ValueError("evaluate requires at least one image's match result")

    per_class = {}
    for label in Label:
        tp = sum(sum(1 for d, _, _ in m.matched_pairs if d.label == label) for m in match_results)
        n_det = sum(m.detections_per_class.get(label, 0) for m in match_results)
        n_gt = sum(m.ground_truths_per_class.get(label, 0) for m in match_results)
        ious = [i for m in match_results for d, _, i in m.matched_pairs if d.label == label]
        per_class[label] = _metrics(tp, n_det - tp, n_gt - tp, ious)

    tp = sum(m.true_positives for m in match_results)
    fp = sum(m.false_positives for m in match_results)
    fn = sum(m.false_negatives for m in match_results)
    all_ious = [i for m in match_results for _, _, i in m.matched_pairs]
    return EvalReport(per_class=per_class, overall=_metrics(tp, fp, fn, all_ious))


def report_rows(report: EvalReport, method: str, dataset: str):
    """Flatten a report into (Method, Dataset, Class, P%, R%, F%, IoU%) rows."""
    rows = []
    for label, m in report.per_class.items():
        rows.append(_row(method, dataset, label.display_name, m))
    rows.append(_row(method, dataset, "overall", report.overall))
    return rows


def _row(method, dataset, cls, m: ClassMetrics):
    return {
        "Method": method,
        "Dataset": dataset,
        "Class": cls,
        "Precision": 100.0 * m.precision,
        "Recall": 100.0 * m.recall,
        "F-measure": 100.0 * m.f_measure,
        "IoU": 100.0 * m.mean_iou,
    }


def format_report_table(rows) -> str:
    """Fixed-column plain-text table of percentage metrics."""
    headers = ["Method", "Dataset", "Class", "Precision", "Recall", "F-measure", "IoU"]
    body = [
        [
            str(r["Method"]),
            str(r["Dataset"]),
            str(r["Class"]),
            f"{r['Precision']:.2f}",
            f"{r['Recall']:.2f}",
            f"{r['F-measure']:.2f}",
            f"{r['IoU']:.2f}",
        ]
        for r in rows
    ]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    lines += ["  ".join(b[i].ljust(widths[i]) for i in range(len(headers))) for b in body]
    return "\n".join(lines)


def report_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["Method", "Dataset", "Class", "Precision", "Recall", "F-measure", "IoU"])
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
