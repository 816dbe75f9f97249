"""Geometry and dataset types shared by every pipeline stage.

Boxes are absolute-pixel corner form ``(x_min, y_min, x_max, y_max)`` with the
origin at the top-left pixel corner. Normalized formats convert at the parser
boundary and never leak in here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator, Mapping

from ssod.errors import ValidationError

PROVENANCES = ("labeled", "pseudo")
SPLIT_TAGS = ("train", "val", "test", "unsplit")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle in pixels; strictly positive area."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(
                f"degenerate box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def scaled(self, s: float) -> BBox:
        return BBox(self.x_min * s, self.y_min * s, self.x_max * s, self.y_max * s)

    def within(self, width: float, height: float) -> bool:
        return (
            self.x_min >= 0 and self.y_min >= 0 and self.x_max <= width and self.y_max <= height
        )


def intersection_area(a: BBox, b: BBox) -> float:
    """Area of the geometric intersection; boxes sharing only an edge give 0."""
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def overlap_fraction(box: BBox, region: BBox) -> float:
    """Fraction of ``box``'s own area that falls inside ``region``."""
    area = box.area
    if not area > 0:
        raise ValidationError("degenerate box")
    return min(1.0, intersection_area(box, region) / area)


def iou(a: BBox, b: BBox) -> float:
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class ClassMap:
    """Ordered ``(class_id, class_name)`` pairs with ids contiguous from 0."""

    entries: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        entries = tuple((int(i), str(n)) for i, n in self.entries)
        object.__setattr__(self, "entries", entries)
        ids = [i for i, _ in entries]
        if ids != list(range(len(entries))):
            raise ValidationError(f"class ids must be contiguous from 0, got {ids}")
        names = [n for _, n in entries]
        if any(not n.strip() for n in names):
            raise ValidationError("class names must be non-empty")
        if len(set(names)) != len(names):
            raise ValidationError(f"class names must be unique, got {names}")

    @classmethod
    def from_names(cls, names: Iterable[str]) -> ClassMap:
        return cls(tuple(enumerate(names)))

    @property
    def names(self) -> list[str]:
        return [n for _, n in self.entries]

    @property
    def ids(self) -> list[int]:
        return [i for i, _ in self.entries]

    def name_of(self, class_id: int) -> str:
        return self.entries[class_id][1]

    def resolve(self, key: int | str) -> int:
        """Map a class id or (case-insensitive) name to its id."""
        if isinstance(key, int) or (isinstance(key, str) and key.strip().isdigit()):
            cid = int(key)
            if cid in self:
                return cid
            raise ValidationError(f"unknown class id {cid}")
        lowered = {n.lower(): i for i, n in self.entries}
        try:
            return lowered[str(key).lower()]
        except KeyError:
            raise ValidationError(f"unknown class {key!r}; known: {self.names}") from None

    def __contains__(self, class_id: object) -> bool:
        return isinstance(class_id, int) and 0 <= class_id < len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class GroundTruthBox:
    """Annotated box. ``confidence`` is set only when the box came from a model."""

    bbox: BBox
    class_id: int
    confidence: float | None = None


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    class_id: int
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")

    def as_box(self) -> GroundTruthBox:
        return GroundTruthBox(self.bbox, self.class_id, self.confidence)


# image_id -> detections on that image
TeacherPredictions = Mapping[str, list[Detection]]


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    width: int
    height: int
    group_id: str = ""
    boxes: tuple[GroundTruthBox, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not self.image_id:
            raise ValidationError("image_id must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"{self.image_id}: image dimensions must be positive, got {self.width}x{self.height}"
            )
        for k, b in enumerate(self.boxes):
            if not b.bbox.within(self.width, self.height):
                raise ValidationError(
                    f"{self.image_id}: box {k} {b.bbox.as_tuple()} outside "
                    f"{self.width}x{self.height} image"
                )

    @property
    def area(self) -> int:
        return self.width * self.height

    def boxes_of(self, class_id: int) -> list[GroundTruthBox]:
        return [b for b in self.boxes if b.class_id == class_id]

    def detections(self) -> list[Detection]:
        """Boxes as detections; boxes without a confidence count as certain."""
        return [
            Detection(b.bbox, b.class_id, 1.0 if b.confidence is None else b.confidence)
            for b in self.boxes
        ]


@dataclass(frozen=True)
class ManifestEntry:
    record: ImageRecord
    provenance: str = "labeled"
    loss_weight: float = 1.0
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValidationError(
                f"{self.record.image_id}: provenance must be one of {PROVENANCES}"
            )
        if not self.loss_weight >= 0:
            raise ValidationError(f"{self.record.image_id}: loss_weight must be >= 0")
        if self.provenance == "labeled" and self.loss_weight != 1.0:
            raise ValidationError(
                f"{self.record.image_id}: labeled records carry loss_weight 1.0, "
                f"got {self.loss_weight}"
            )

    @property
    def image_id(self) -> str:
        return self.record.image_id


@dataclass(frozen=True)
class DatasetManifest:
    """Named collection of image records with provenance and loss weights."""

    name: str
    class_map: ClassMap
    entries: tuple[ManifestEntry, ...] = ()
    split_tag: str = "unsplit"
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.split_tag not in SPLIT_TAGS:
            raise ValidationError(f"split_tag must be one of {SPLIT_TAGS}, got {self.split_tag!r}")
        seen: set[str] = set()
        for e in self.entries:
            if e.image_id in seen:
                raise ValidationError(f"{self.name}: duplicate image_id {e.image_id!r}")
            seen.add(e.image_id)
            for b in e.record.boxes:
                if b.class_id not in self.class_map:
                    raise ValidationError(
                        f"{self.name}/{e.image_id}: class_id {b.class_id} not in class map"
                    )

    @classmethod
    def from_records(
        cls,
        name: str,
        class_map: ClassMap,
        records: Iterable[ImageRecord],
        *,
        provenance: str = "labeled",
        loss_weight: float = 1.0,
        split_tag: str = "unsplit",
    ) -> DatasetManifest:
        entries = tuple(ManifestEntry(r, provenance, loss_weight) for r in records)
        return cls(name, class_map, entries, split_tag)

    @property
    def records(self) -> list[ImageRecord]:
        return [e.record for e in self.entries]

    @property
    def image_ids(self) -> list[str]:
        return [e.image_id for e in self.entries]

    def get(self, image_id: str) -> ImageRecord:
        for e in self.entries:
            if e.image_id == image_id:
                return e.record
        raise KeyError(image_id)

    def index(self) -> dict[str, ImageRecord]:
        return {e.image_id: e.record for e in self.entries}

    def with_entries(self, entries: Iterable[ManifestEntry], **changes: Any) -> DatasetManifest:
        return replace(self, entries=tuple(entries), **changes)

    def sorted(self) -> DatasetManifest:
        return self.with_entries(sorted(self.entries, key=lambda e: e.image_id))

    def box_count(self) -> int:
        return sum(len(e.record.boxes) for e in self.entries)

    def predictions(self) -> dict[str, list[Detection]]:
        """View a predictions manifest (boxes with confidences) as detections."""
        return {e.image_id: e.record.detections() for e in self.entries}

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)
