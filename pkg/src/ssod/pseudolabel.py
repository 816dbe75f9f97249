"""Teacher-prediction filtering, student-set merging and the weighted SSL objective.

A detection becomes a pseudo-label only if its confidence strictly exceeds
the class threshold and its area is at least ``min_area_fraction`` of the
image. The combined objective is

    mean(supervised losses) + lambda * mean(1[conf > c] * pseudo loss)

with the pseudo mean taken over all supplied pseudo samples.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ssod.core import ClassMap, DatasetManifest, Detection, ImageRecord, ManifestEntry
from ssod.errors import ValidationError
from ssod.parallel import pmap

DEFAULT_MIN_AREA_FRACTION = 0.0004
DEFAULT_LAMBDA = 1.0

# Threshold presets: uniform 0.5 for YOLO, 0.8 on the hard class for DETR,
# and 0.99 for the quadrant classifier's pseudo-labels.
YOLO_THRESHOLD = 0.5
DETR_DIFFICULT_THRESHOLD = 0.8
DETR_DEFAULT_THRESHOLD = 0.5
CLS_THRESHOLD = 0.99
PRESETS = ("yolo", "detr", "cls")


@dataclass(frozen=True)
class PseudoLabelConfig:
    per_class_threshold: Mapping[int, float] = field(default_factory=dict)
    default_threshold: float = YOLO_THRESHOLD
    min_area_fraction: float = DEFAULT_MIN_AREA_FRACTION
    lambda_weight: float = DEFAULT_LAMBDA

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "per_class_threshold", {int(k): float(v) for k, v in self.per_class_threshold.items()}
        )
        for c in [self.default_threshold, *self.per_class_threshold.values()]:
            if not 0.0 <= c < 1.0:
                raise ValidationError(f"confidence thresholds must lie in [0, 1), got {c}")
        if not 0.0 <= self.min_area_fraction < 1.0:
            raise ValidationError(
                f"min_area_fraction must lie in [0, 1), got {self.min_area_fraction}"
            )
        if not self.lambda_weight >= 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lambda_weight}")

    def threshold(self, class_id: int) -> float:
        return self.per_class_threshold.get(class_id, self.default_threshold)

    def to_dict(self) -> dict:
        return {
            "per_class_threshold": {str(k): v for k, v in sorted(self.per_class_threshold.items())},
            "default_threshold": self.default_threshold,
            "min_area_fraction": self.min_area_fraction,
            "lambda_weight": self.lambda_weight,
        }


def find_difficult_class(class_map: ClassMap) -> int:
    """The Guinea Grass class, located by name."""
    for cid, name in class_map.entries:
        key = name.lower().replace("_", " ").replace("-", " ")
        if "guinea" in key or key == "gg":
            return cid
    raise ValidationError(
        f"no Guinea Grass class among {class_map.names}; name the difficult class explicitly"
    )


def preset(
    name: str,
    *,
    difficult_classes: Sequence[int] = (),
    min_area_fraction: float = DEFAULT_MIN_AREA_FRACTION,
    lambda_weight: float = DEFAULT_LAMBDA,
) -> PseudoLabelConfig:
    if name == "yolo":
        return PseudoLabelConfig({}, YOLO_THRESHOLD, min_area_fraction, lambda_weight)
    if name == "detr":
        if not difficult_classes:
            raise ValidationError("detr preset needs at least one difficult class")
        per_class = {c: DETR_DIFFICULT_THRESHOLD for c in difficult_classes}
        return PseudoLabelConfig(per_class, DETR_DEFAULT_THRESHOLD, min_area_fraction, lambda_weight)
    if name == "cls":
        return PseudoLabelConfig({}, CLS_THRESHOLD, min_area_fraction, lambda_weight)
    raise ValidationError(f"unknown preset {name!r}; choose from {PRESETS}")


@dataclass
class FilterReport:
    """Per-class tallies. Confidence is tested first, so a faint tiny box counts as low-confidence."""

    kept: Counter = field(default_factory=Counter)
    dropped_low_confidence: Counter = field(default_factory=Counter)
    dropped_small: Counter = field(default_factory=Counter)
    images_in: int = 0
    images_kept: int = 0
    config: PseudoLabelConfig | None = None

    @property
    def total(self) -> int:
        return sum(self.kept.values()) + sum(self.dropped_low_confidence.values()) + sum(
            self.dropped_small.values()
        )

    def merge(self, other: FilterReport) -> None:
        self.kept.update(other.kept)
        self.dropped_low_confidence.update(other.dropped_low_confidence)
        self.dropped_small.update(other.dropped_small)
        self.images_in += other.images_in
        self.images_kept += other.images_kept

    def to_dict(self, class_map: ClassMap | None = None) -> dict:
        def named(c: Counter) -> dict:
            keys = class_map.ids if class_map is not None else sorted(c)
            label = class_map.name_of if class_map is not None else str
            return {label(k): c.get(k, 0) for k in keys}

        return {
            "detections_in": self.total,
            "kept": named(self.kept),
            "dropped_low_confidence": named(self.dropped_low_confidence),
            "dropped_small": named(self.dropped_small),
            "images_in": self.images_in,
            "images_kept": self.images_kept,
            "config": self.config.to_dict() if self.config else None,
        }


def _filter_image(
    record: ImageRecord, dets: Sequence[Detection], cfg: PseudoLabelConfig
) -> tuple[list[Detection], FilterReport]:
    report = FilterReport(images_in=1)
    kept = []
    for d in dets:
        if not d.confidence > cfg.threshold(d.class_id):
            report.dropped_low_confidence[d.class_id] += 1
        elif d.bbox.area / record.area < cfg.min_area_fraction:
            report.dropped_small[d.class_id] += 1
        else:
            report.kept[d.class_id] += 1
            kept.append(d)
    report.images_kept = int(bool(kept))
    return kept, report


def filter_predictions(
    preds: Mapping[str, Sequence[Detection]],
    unlabeled: DatasetManifest,
    cfg: PseudoLabelConfig,
    *,
    jobs: int | None = None,
) -> tuple[DatasetManifest, FilterReport]:
    """Turn teacher detections into a pseudo-labeled manifest weighted by lambda.

    Images left with no boxes are excluded from the output.
    """
    index = unlabeled.index()
    unknown = sorted(set(preds) - set(index))
    if unknown:
        raise ValidationError(f"predictions reference unknown image_ids: {unknown}")
    for dets in preds.values():
        for d in dets:
            if d.class_id not in unlabeled.class_map:
                raise ValidationError(f"prediction class_id {d.class_id} not in class map")

    image_ids = sorted(preds)
    results = pmap(lambda i: _filter_image(index[i], preds[i], cfg), image_ids, jobs)

    report = FilterReport(config=cfg)
    entries = []
    for image_id, (kept, part) in zip(image_ids, results):
        report.merge(part)
        if not kept:
            continue
        rec = index[image_id]
        entries.append(
            ManifestEntry(
                ImageRecord(rec.image_id, rec.width, rec.height, rec.group_id,
                            tuple(d.as_box() for d in kept)),
                "pseudo",
                cfg.lambda_weight,
            )
        )
    manifest = DatasetManifest(
        f"{unlabeled.name}-pseudo", unlabeled.class_map, tuple(entries), unlabeled.split_tag
    )
    return manifest, report


def build_student_manifest(
    labeled: DatasetManifest, pseudo: DatasetManifest, lambda_weight: float = DEFAULT_LAMBDA
) -> DatasetManifest:
    """Union of labeled (weight 1.0) and pseudo (weight lambda) records."""
    if not lambda_weight >= 0:
        raise ValidationError(f"lambda must be >= 0, got {lambda_weight}")
    if labeled.class_map != pseudo.class_map:
        raise ValidationError(
            f"class map mismatch: {labeled.class_map.names} vs {pseudo.class_map.names}"
        )
    collisions = sorted(set(labeled.image_ids) & set(pseudo.image_ids))
    if collisions:
        raise ValidationError(f"image_id collision between labeled and pseudo sets: {collisions}")
    entries = [ManifestEntry(e.record, "labeled", 1.0, e.extras) for e in labeled]
    entries += [ManifestEntry(e.record, "pseudo", lambda_weight, e.extras) for e in pseudo]
    entries.sort(key=lambda e: e.image_id)
    return DatasetManifest(
        f"{labeled.name}+{pseudo.name}", labeled.class_map, tuple(entries), labeled.split_tag
    )


def combined_objective(
    sup_losses: Sequence[float],
    pseudo: Sequence[tuple[float, float]],
    lambda_weight: float,
    threshold: float = 0.0,
) -> float:
    """Supervised mean plus lambda times the confidence-gated pseudo mean.

    ``pseudo`` holds ``(loss, confidence)`` pairs; a pair contributes only
    when its confidence strictly exceeds ``threshold``. Sums use ``math.fsum``
    so the result does not depend on list order.
    """
    if len(sup_losses) == 0:
        raise ValidationError("combined objective needs at least one supervised loss")
    sup = math.fsum(sup_losses) / len(sup_losses)
    if not pseudo:
        return sup
    gated = math.fsum(loss for loss, conf in pseudo if conf > threshold)
    return sup + lambda_weight * (gated / len(pseudo))
