"""Quadrant splitting and overlap-threshold labels for the classification pipeline.

Each image is cut into four quadrants at ``floor(w/2)``, ``floor(h/2)``; a
quadrant is positive when at least one target-class box has at least ``tau``
of its own area inside it. The rule is per box, never an aggregate over boxes.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Iterable

from ssod.core import BBox, DatasetManifest, ImageRecord, overlap_fraction
from ssod.errors import ValidationError

DEFAULT_TAU = 0.33

# Absorbs last-ulp drift so a fraction landing exactly on tau stays inclusive
# after scaling.
_FRACTION_EPS = 1e-12


class Quadrant(str, enum.Enum):
    TL = "TL"
    TR = "TR"
    BL = "BL"
    BR = "BR"


@dataclass(frozen=True)
class QuadrantRegion:
    parent_image_id: str
    index: Quadrant
    rect: BBox


@dataclass(frozen=True)
class QuadrantSample:
    region: QuadrantRegion
    label: int
    target_class: int

    def row(self) -> tuple[str, str, int, int, int, int, int]:
        r = self.region.rect
        return (
            self.region.parent_image_id,
            self.region.index.value,
            int(r.x_min),
            int(r.y_min),
            int(r.x_max),
            int(r.y_max),
            self.label,
        )


def split_quadrants(record: ImageRecord) -> list[QuadrantRegion]:
    """Four disjoint regions covering the image, ordered TL, TR, BL, BR.

    Odd dimensions put the extra column/row in the right/bottom quadrants.
    """
    w, h = record.width, record.height
    if w < 2 or h < 2:
        raise ValidationError(f"{record.image_id}: image too small to split ({w}x{h})")
    mx, my = w // 2, h // 2
    rects = {
        Quadrant.TL: BBox(0, 0, mx, my),
        Quadrant.TR: BBox(mx, 0, w, my),
        Quadrant.BL: BBox(0, my, mx, h),
        Quadrant.BR: BBox(mx, my, w, h),
    }
    return [QuadrantRegion(record.image_id, q, rect) for q, rect in rects.items()]


def _check_tau(tau: float) -> None:
    if not 0.0 < tau <= 1.0:
        raise ValidationError(f"tau must lie in (0, 1], got {tau}")


def quadrant_label(
    record: ImageRecord, region: QuadrantRegion, target_class: int, tau: float = DEFAULT_TAU
) -> int:
    _check_tau(tau)
    for b in record.boxes:
        if b.class_id != target_class:
            continue
        if overlap_fraction(b.bbox, region.rect) >= tau - _FRACTION_EPS:
            return 1
    return 0


def label_image(record: ImageRecord, target_class: int, tau: float = DEFAULT_TAU) -> list[QuadrantSample]:
    _check_tau(tau)
    return [
        QuadrantSample(region, quadrant_label(record, region, target_class, tau), target_class)
        for region in split_quadrants(record)
    ]


def emit_classification_dataset(
    manifest: DatasetManifest, target_class: int, tau: float = DEFAULT_TAU
) -> list[QuadrantSample]:
    """Four samples per image, ordered by (image_id, quadrant)."""
    _check_tau(tau)
    if target_class not in manifest.class_map:
        raise ValidationError(f"target class {target_class} not in class map")
    samples: list[QuadrantSample] = []
    for record in sorted(manifest.records, key=lambda r: r.image_id):
        try:
            samples.extend(label_image(record, target_class, tau))
        except ValidationError as exc:
            raise ValidationError(f"quadrants: image {record.image_id!r}: {exc}") from exc
    return samples


CSV_HEADER = ("image_id", "quadrant", "x0", "y0", "x1", "y1", "label")


def samples_to_csv(samples: Iterable[QuadrantSample]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in samples:
        writer.writerow(s.row())
    return buf.getvalue()


def read_label_csv(text: str) -> dict[tuple[str, str], int]:
    """Parse a quadrant table (ours or a classifier's) into ``(image_id, quadrant) -> label``."""
    reader = csv.DictReader(io.StringIO(text))
    missing = {"image_id", "quadrant", "label"} - set(reader.fieldnames or ())
    if missing:
        raise ValidationError(f"quadrant table missing columns {sorted(missing)}")
    out: dict[tuple[str, str], int] = {}
    for row in reader:
        label = int(row["label"])
        if label not in (0, 1):
            raise ValidationError(f"line {reader.line_num}: label must be 0 or 1, got {label}")
        out[(row["image_id"], row["quadrant"])] = label
    return out
