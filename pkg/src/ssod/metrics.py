"""Detection and classification metrics.

Detection scoring follows the COCO recipe: greedy confidence-ranked matching
at an IoU threshold, 101-point interpolated AP per class, and mAP as the
unweighted mean over classes present in the ground truth. IoU thresholds run
0.50..0.95 in steps of 0.05.

Recall thresholds are the exact fractions i/100. A recall level ``tp / n_gt``
is compared against them in integer arithmetic, so points that land exactly
on a threshold (e.g. 3/5 vs 0.60) are never lost to float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ssod.core import DatasetManifest, Detection, GroundTruthBox, iou
from ssod.errors import ValidationError
from ssod.parallel import pmap

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))
RECALL_POINTS = 101
REPORT_SCHEMA_VERSION = 1


@dataclass
class MatchResult:
    """Greedy matching of one image's detections to ground truth for one class.

    ``order`` lists detection indices (into the caller's list) by descending
    confidence; ``matched_gt`` and ``is_tp`` align with it. ``gt_indices`` are
    the caller's indices of the class's ground-truth boxes, ``gt_matched``
    aligned with them.
    """

    order: list[int]
    confidences: list[float]
    matched_gt: list[int | None]
    is_tp: list[bool]
    gt_indices: list[int]
    gt_matched: list[bool]

    @property
    def n_tp(self) -> int:
        return sum(self.is_tp)

    @property
    def n_fp(self) -> int:
        return len(self.is_tp) - self.n_tp

    @property
    def n_fn(self) -> int:
        return len(self.gt_matched) - sum(self.gt_matched)


def match_at_iou(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthBox],
    iou_thr: float,
    class_id: int,
) -> MatchResult:
    """Each detection, highest confidence first, claims the best free same-class GT.

    A claim needs IoU >= ``iou_thr``; equal IoUs go to the lowest GT index and
    equal confidences keep input order.
    """
    if not 0.0 < iou_thr <= 1.0:
        raise ValidationError(f"iou threshold must lie in (0, 1], got {iou_thr}")
    det_idx = [k for k, d in enumerate(dets) if d.class_id == class_id]
    det_idx.sort(key=lambda k: -dets[k].confidence)
    gt_idx = [k for k, g in enumerate(gts) if g.class_id == class_id]
    taken = [False] * len(gt_idx)
    matched: list[int | None] = []
    for k in det_idx:
        best, best_iou = None, iou_thr
        for j, g in enumerate(gt_idx):
            if taken[j]:
                continue
            v = iou(dets[k].bbox, gts[g].bbox)
            if v >= best_iou and (best is None or v > best_iou):
                best, best_iou = j, v
        if best is not None:
            taken[best] = True
            matched.append(gt_idx[best])
        else:
            matched.append(None)
    return MatchResult(
        order=det_idx,
        confidences=[dets[k].confidence for k in det_idx],
        matched_gt=matched,
        is_tp=[m is not None for m in matched],
        gt_indices=gt_idx,
        gt_matched=taken,
    )


def ap_from_ranked(is_tp: Sequence[bool], n_gt: int) -> float:
    """101-point interpolated AP for detections already ranked by confidence."""
    if n_gt == 0 or len(is_tp) == 0:
        return 0.0
    tp = np.cumsum(np.asarray(is_tp, dtype=np.int64))
    ranks = np.arange(1, len(tp) + 1)
    precision = tp / ranks
    # precision envelope: best precision at this rank or any later one
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    # first rank whose recall tp/n_gt reaches i/100, via tp*100 >= i*n_gt
    needed = np.arange(RECALL_POINTS, dtype=np.int64) * n_gt
    first = np.searchsorted(tp * 100, needed, side="left")
    hit = first < len(tp)
    return float(envelope[first[hit]].sum() / RECALL_POINTS)


def average_precision(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthBox],
    iou_thr: float,
    class_id: int,
) -> float:
    """AP for one class on a single image's detections and ground truth."""
    m = match_at_iou(dets, gts, iou_thr, class_id)
    return ap_from_ranked(m.is_tp, len(m.gt_indices))


@dataclass
class MetricsReport:
    """Detection metrics; every value lies in [0, 1]."""

    class_names: dict[int, str]
    ap: dict[int, dict[float, float]]
    gt_counts: dict[int, int]
    conf_threshold: float
    precision: float
    recall: float
    precision_undefined: bool
    tp: int
    fp: int
    fn: int
    iou_thresholds: tuple[float, ...] = IOU_THRESHOLDS

    @property
    def evaluated_classes(self) -> list[int]:
        return [c for c in sorted(self.ap) if self.gt_counts.get(c, 0) > 0]

    def class_ap50(self, c: int) -> float:
        return self.ap[c][0.5]

    def class_ap50_95(self, c: int) -> float:
        return float(np.mean([self.ap[c][t] for t in self.iou_thresholds]))

    @property
    def map50(self) -> float:
        cs = self.evaluated_classes
        return float(np.mean([self.class_ap50(c) for c in cs])) if cs else 0.0

    @property
    def map50_95(self) -> float:
        cs = self.evaluated_classes
        return float(np.mean([self.class_ap50_95(c) for c in cs])) if cs else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "detection",
            "mAP@50": self.map50,
            "mAP@50-95": self.map50_95,
            "precision": self.precision,
            "precision_undefined": self.precision_undefined,
            "recall": self.recall,
            "f1": self.f1,
            "conf_threshold": self.conf_threshold,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "per_class": {
                self.class_names[c]: {
                    "gt": self.gt_counts.get(c, 0),
                    "evaluated": c in self.evaluated_classes,
                    "AP@50": self.class_ap50(c),
                    "AP@50-95": self.class_ap50_95(c),
                    "AP_by_iou": {f"{t:.2f}": self.ap[c][t] for t in self.iou_thresholds},
                }
                for c in sorted(self.ap)
            },
        }

    def text(self) -> str:
        head = f"{'class':<16}{'mAP@50':>9}{'mAP@50-95':>11}{'Precision':>11}{'Recall':>9}"
        lines = [head, "-" * len(head)]
        for c in self.evaluated_classes:
            lines.append(
                f"{self.class_names[c]:<16}{self.class_ap50(c):>9.3f}{self.class_ap50_95(c):>11.3f}"
                f"{'':>11}{'':>9}"
            )
        prec = "n/a" if self.precision_undefined else f"{self.precision:.3f}"
        lines.append("-" * len(head))
        lines.append(
            f"{'all':<16}{self.map50:>9.3f}{self.map50_95:>11.3f}{prec:>11}{self.recall:>9.3f}"
        )
        lines.append(f"(precision/recall at confidence >= {self.conf_threshold:g}, IoU 0.50)")
        return "\n".join(lines)


def _check_images(preds: Mapping[str, Sequence[Detection]], truth: DatasetManifest) -> None:
    known = set(truth.image_ids)
    unknown = sorted(set(preds) - known)
    if unknown:
        raise ValidationError(f"predictions for unknown image_ids: {unknown}")


def ranked_matches(
    preds: Mapping[str, Sequence[Detection]],
    truth: DatasetManifest,
    class_id: int,
    iou_thr: float,
    *,
    jobs: int | None = None,
) -> tuple[list[bool], int]:
    """TP flags over all images in global rank order, plus the class's GT count.

    Global order: confidence descending, ties by image_id then detection index.
    """
    records = sorted(truth.records, key=lambda r: r.image_id)

    def one(rec):
        dets = list(preds.get(rec.image_id, ()))
        m = match_at_iou(dets, rec.boxes, iou_thr, class_id)
        return rec.image_id, m

    ranked = []
    n_gt = 0
    for image_id, m in pmap(one, records, jobs):
        n_gt += len(m.gt_indices)
        for k, conf, tp in zip(m.order, m.confidences, m.is_tp):
            ranked.append((-conf, image_id, k, tp))
    ranked.sort(key=lambda t: t[:3])
    return [t[3] for t in ranked], n_gt


def precision_recall(
    preds: Mapping[str, Sequence[Detection]],
    truth: DatasetManifest,
    conf_thr: float,
    iou_thr: float = 0.5,
) -> tuple[int, int, int]:
    """Dataset-wide (tp, fp, fn) over all classes for detections with confidence >= conf_thr."""
    tp = fp = fn = 0
    for rec in truth.records:
        dets = [d for d in preds.get(rec.image_id, ()) if d.confidence >= conf_thr]
        for c in truth.class_map.ids:
            m = match_at_iou(dets, rec.boxes, iou_thr, c)
            tp += m.n_tp
            fp += m.n_fp
            fn += m.n_fn
    return tp, fp, fn


def evaluate_detection(
    preds: Mapping[str, Sequence[Detection]],
    truth: DatasetManifest,
    conf_thr_for_pr: float,
    *,
    jobs: int | None = None,
) -> MetricsReport:
    _check_images(preds, truth)
    if not 0.0 <= conf_thr_for_pr <= 1.0:
        raise ValidationError(f"confidence threshold must lie in [0, 1], got {conf_thr_for_pr}")
    ap: dict[int, dict[float, float]] = {}
    gt_counts: dict[int, int] = {}
    for c in truth.class_map.ids:
        ap[c] = {}
        for t in IOU_THRESHOLDS:
            flags, n_gt = ranked_matches(preds, truth, c, t, jobs=jobs)
            ap[c][t] = ap_from_ranked(flags, n_gt)
            gt_counts[c] = n_gt
    tp, fp, fn = precision_recall(preds, truth, conf_thr_for_pr)
    undefined = tp + fp == 0
    return MetricsReport(
        class_names=dict(truth.class_map.entries),
        ap=ap,
        gt_counts=gt_counts,
        conf_threshold=conf_thr_for_pr,
        precision=0.0 if undefined else tp / (tp + fp),
        recall=tp / (tp + fn) if tp + fn else 0.0,
        precision_undefined=undefined,
        tp=tp,
        fp=fp,
        fn=fn,
    )


def pr_curve(
    preds: Mapping[str, Sequence[Detection]],
    truth: DatasetManifest,
    class_id: int,
    iou_thr: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw (recall, precision) points at every rank, for plotting."""
    flags, n_gt = ranked_matches(preds, truth, class_id, iou_thr)
    if not flags or n_gt == 0:
        return np.zeros(0), np.zeros(0)
    tp = np.cumsum(flags)
    return tp / n_gt, tp / np.arange(1, len(tp) + 1)


@dataclass
class ClassificationReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision_undefined: bool = field(default=False)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    @property
    def confusion(self) -> list[list[int]]:
        """Rows are truth (0, 1), columns are prediction (0, 1)."""
        return [[self.tn, self.fp], [self.fn, self.tp]]

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "classification",
            "n": self.n,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "precision_undefined": self.precision_undefined,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": self.confusion,
        }

    def text(self) -> str:
        return "\n".join(
            [
                f"{'Accuracy':>9}{'Precision':>11}{'Recall':>9}{'F1':>8}",
                f"{self.accuracy:>9.3f}{self.precision:>11.3f}{self.recall:>9.3f}{self.f1:>8.3f}",
                "",
                "            pred 0  pred 1",
                f"true 0  {self.tn:>8}{self.fp:>8}",
                f"true 1  {self.fn:>8}{self.tp:>8}",
            ]
        )


def evaluate_classification(
    pred_labels: Sequence[int], true_labels: Sequence[int]
) -> ClassificationReport:
    if len(pred_labels) != len(true_labels):
        raise ValidationError(
            f"length mismatch: {len(pred_labels)} predictions vs {len(true_labels)} labels"
        )
    if not pred_labels:
        raise ValidationError("need at least one label")
    bad = {v for v in (*pred_labels, *true_labels) if v not in (0, 1)}
    if bad:
        raise ValidationError(f"labels must be 0 or 1, got {sorted(bad)}")
    tp = sum(1 for p, t in zip(pred_labels, true_labels) if p == 1 and t == 1)
    fp = sum(1 for p, t in zip(pred_labels, true_labels) if p == 1 and t == 0)
    fn = sum(1 for p, t in zip(pred_labels, true_labels) if p == 0 and t == 1)
    tn = len(pred_labels) - tp - fp - fn
    return ClassificationReport(tp, fp, fn, tn, precision_undefined=tp + fp == 0)
