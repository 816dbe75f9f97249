"""Annotation parsers and writers: YOLO label directories, COCO JSON, manifests.

The manifest JSON is the only format that carries provenance, paddock group
ids, loss weights and split tags, so every pipeline stage reads and writes it.
Floats are emitted with Python's shortest round-trip repr, which keeps every
round-trip lossless.
"""

from __future__ import annotations

import csv
import json
import os
from collections.abc import Mapping
from pathlib import Path, PurePosixPath
from typing import Any

from ssod.core import (
    BBox,
    ClassMap,
    DatasetManifest,
    Detection,
    GroundTruthBox,
    ImageRecord,
    ManifestEntry,
)
from ssod.errors import ParseError, ValidationError

SCHEMA_VERSION = 1

MANIFEST_KEYS = ("schema_version", "name", "split_tag", "classes", "records")
RECORD_KEYS = ("image_id", "group_id", "width", "height", "provenance", "loss_weight", "boxes")
BOX_KEYS = ("class_id", "bbox", "confidence")

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".pgm", ".tif", ".tiff", ".bmp")

# Slack for normalized values that denormalize a hair outside the image.
_EDGE_TOL = 1e-6


# -- YOLO ---------------------------------------------------------------------


def _parse_yolo_line(
    text: str, path: Path, lineno: int, width: int, height: int, class_map: ClassMap
) -> GroundTruthBox:
    fields = text.split()
    if len(fields) != 5:
        raise ParseError(f"expected 5 fields 'class cx cy w h', got {len(fields)}", path, lineno)
    try:
        class_id = int(fields[0])
        cx, cy, w, h = (float(v) for v in fields[1:])
    except ValueError as exc:
        raise ParseError(f"non-numeric field ({exc})", path, lineno) from None
    if class_id not in class_map:
        raise ParseError(f"unknown class_id {class_id}", path, lineno)
    for name, v in (("cx", cx), ("cy", cy), ("w", w), ("h", h)):
        if not 0.0 <= v <= 1.0:
            raise ParseError(f"{name}={v} out of range [0, 1]", path, lineno)
    x0, x1 = (cx - w / 2) * width, (cx + w / 2) * width
    y0, y1 = (cy - h / 2) * height, (cy + h / 2) * height
    if x0 < -_EDGE_TOL * width or y0 < -_EDGE_TOL * height:
        raise ParseError("box extends past the top-left image edge", path, lineno)
    if x1 > width * (1 + _EDGE_TOL) or y1 > height * (1 + _EDGE_TOL):
        raise ParseError("box extends past the bottom-right image edge", path, lineno)
    x0, y0 = max(0.0, x0), max(0.0, y0)
    x1, y1 = min(float(width), x1), min(float(height), y1)
    try:
        bbox = BBox(x0, y0, x1, y1)
    except ValidationError:
        raise ParseError("zero-area box", path, lineno) from None
    return GroundTruthBox(bbox, class_id)


def parse_yolo_dir(
    label_directory: str | os.PathLike,
    image_dims: Mapping[str, tuple[int, int]],
    class_map: ClassMap,
    *,
    name: str | None = None,
    groups: Mapping[str, str] | None = None,
) -> DatasetManifest:
    """Read ``<image_id>.txt`` label files into a labeled manifest.

    ``image_dims`` maps image_id to ``(width, height)``; label files carry no
    dimensions. Every label file needs dims and every dims entry needs a label
    file (an empty file means no objects).
    """
    root = Path(label_directory)
    if not root.is_dir():
        raise ParseError("label directory not found", root)
    groups = groups or {}
    files = {p.stem: p for p in root.glob("*.txt")}
    undimensioned = sorted(set(files) - set(image_dims))
    if undimensioned:
        raise ParseError(f"no image dimensions for label files: {undimensioned}", root)
    unlabeled = sorted(set(image_dims) - set(files))
    if unlabeled:
        raise ParseError(f"missing label files for images: {unlabeled}", root)

    records = []
    for image_id in sorted(files):
        path = files[image_id]
        width, height = image_dims[image_id]
        boxes = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                boxes.append(_parse_yolo_line(line, path, lineno, width, height, class_map))
        records.append(
            ImageRecord(image_id, int(width), int(height), groups.get(image_id, ""), tuple(boxes))
        )
    return DatasetManifest.from_records(name or root.name, class_map, records)


def write_yolo_dir(manifest: DatasetManifest, out_directory: str | os.PathLike) -> list[Path]:
    """Write one label file per image, including empty files for box-less images."""
    out = Path(out_directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for entry in sorted(manifest.entries, key=lambda e: e.image_id):
        rec = entry.record
        lines = []
        for b in rec.boxes:
            bb = b.bbox
            cx = (bb.x_min + bb.x_max) / 2 / rec.width
            cy = (bb.y_min + bb.y_max) / 2 / rec.height
            w = bb.width / rec.width
            h = bb.height / rec.height
            lines.append(f"{b.class_id} {cx!r} {cy!r} {w!r} {h!r}\n")
        path = out / f"{rec.image_id}.txt"
        path.write_text("".join(lines), encoding="utf-8")
        written.append(path)
    return written


def read_dims_table(path: str | os.PathLike) -> tuple[dict[str, tuple[int, int]], dict[str, str]]:
    """Read the YOLO sidecar CSV: ``image_id,width,height[,group_id]``."""
    dims: dict[str, tuple[int, int]] = {}
    groups: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"image_id", "width", "height"} - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"dims table missing columns {sorted(missing)}", path)
        for row in reader:
            try:
                dims[row["image_id"]] = (int(row["width"]), int(row["height"]))
            except ValueError:
                raise ParseError("non-integer dimension", path, reader.line_num) from None
            if row.get("group_id"):
                groups[row["image_id"]] = row["group_id"]
    return dims, groups


def write_dims_table(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "width", "height", "group_id"])
        for e in sorted(manifest.entries, key=lambda e: e.image_id):
            writer.writerow([e.image_id, e.record.width, e.record.height, e.record.group_id])


# -- COCO ---------------------------------------------------------------------


def _image_id_from_file_name(file_name: str) -> str:
    p = PurePosixPath(file_name)
    if p.suffix.lower() in IMAGE_SUFFIXES:
        return str(p.with_suffix(""))
    return file_name


def parse_coco(file: str | os.PathLike, *, name: str | None = None) -> DatasetManifest:
    """Read a COCO-style document; category ids are remapped to 0..n-1 by sorted id.

    Annotations carrying a ``score`` keep it as the box confidence.
    """
    path = Path(file)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc})", path) from None
    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise ParseError(f"missing array {key!r}", path)

    cats = sorted(doc["categories"], key=lambda c: c["id"])
    cat_to_class = {c["id"]: k for k, c in enumerate(cats)}
    class_map = ClassMap(tuple((k, c["name"]) for k, c in enumerate(cats)))
    images = {im["id"]: im for im in doc["images"]}

    dangling_img = sorted({a["image_id"] for a in doc["annotations"]} - set(images), key=str)
    dangling_cat = sorted({a["category_id"] for a in doc["annotations"]} - set(cat_to_class), key=str)
    if dangling_img or dangling_cat:
        raise ParseError(
            f"dangling references: image_ids {dangling_img}, category_ids {dangling_cat}", path
        )

    per_image: dict[Any, list[GroundTruthBox]] = {k: [] for k in images}
    for ann in doc["annotations"]:
        x, y, w, h = ann["bbox"]
        if not (w > 0 and h > 0):
            raise ParseError(f"annotation {ann.get('id')}: bbox w,h must be > 0", path)
        score = ann.get("score")
        per_image[ann["image_id"]].append(
            GroundTruthBox(
                BBox(x, y, x + w, y + h),
                cat_to_class[ann["category_id"]],
                None if score is None else float(score),
            )
        )

    records = []
    for key, im in images.items():
        image_id = _image_id_from_file_name(str(im.get("file_name", key)))
        try:
            records.append(
                ImageRecord(
                    image_id,
                    int(im["width"]),
                    int(im["height"]),
                    str(im.get("group_id", "")),
                    tuple(per_image[key]),
                )
            )
        except ValidationError as exc:
            raise ParseError(str(exc), path) from None
    records.sort(key=lambda r: r.image_id)
    return DatasetManifest.from_records(name or path.stem, class_map, records)


def write_coco(
    manifest: DatasetManifest, file: str | os.PathLike, *, image_suffix: str = ".jpg"
) -> None:
    images, annotations = [], []
    ann_id = 1
    for k, entry in enumerate(sorted(manifest.entries, key=lambda e: e.image_id), start=1):
        rec = entry.record
        images.append(
            {
                "id": k,
                "file_name": rec.image_id + image_suffix,
                "width": rec.width,
                "height": rec.height,
                "group_id": rec.group_id,
            }
        )
        for b in rec.boxes:
            bb = b.bbox
            ann = {
                "id": ann_id,
                "image_id": k,
                "category_id": b.class_id + 1,
                "bbox": [bb.x_min, bb.y_min, bb.width, bb.height],
                "area": bb.area,
                "iscrowd": 0,
            }
            if b.confidence is not None:
                ann["score"] = b.confidence
            annotations.append(ann)
            ann_id += 1
    categories = [{"id": cid + 1, "name": n} for cid, n in manifest.class_map.entries]
    doc = {"images": images, "annotations": annotations, "categories": categories}
    Path(file).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# -- manifest -----------------------------------------------------------------


def manifest_to_dict(manifest: DatasetManifest) -> dict[str, Any]:
    records = []
    for e in sorted(manifest.entries, key=lambda e: e.image_id):
        r = e.record
        boxes = []
        for b in r.boxes:
            item: dict[str, Any] = {"class_id": b.class_id, "bbox": list(b.bbox.as_tuple())}
            if b.confidence is not None:
                item["confidence"] = b.confidence
            boxes.append(item)
        records.append(
            {
                **e.extras,
                "image_id": r.image_id,
                "group_id": r.group_id,
                "width": r.width,
                "height": r.height,
                "provenance": e.provenance,
                "loss_weight": e.loss_weight,
                "boxes": boxes,
            }
        )
    return {
        **manifest.extras,
        "schema_version": SCHEMA_VERSION,
        "name": manifest.name,
        "split_tag": manifest.split_tag,
        "classes": [{"id": i, "name": n} for i, n in manifest.class_map.entries],
        "records": records,
    }


def dumps_manifest(manifest: DatasetManifest, *, indent: int | None = 1) -> str:
    separators = (",", ":") if indent is None else None
    return json.dumps(manifest_to_dict(manifest), indent=indent, separators=separators) + "\n"


def write_manifest(
    manifest: DatasetManifest, file: str | os.PathLike, *, indent: int | None = 1
) -> None:
    """Write a manifest; records are sorted by image_id so output is order-independent."""
    Path(file).write_text(dumps_manifest(manifest, indent=indent), encoding="utf-8")


def _split_known(obj: dict, known: tuple[str, ...], strict: bool, where: str, path) -> dict:
    unknown = {k: v for k, v in obj.items() if k not in known}
    if unknown and strict:
        raise ParseError(f"{where}: unknown fields {sorted(unknown)}", path)
    return unknown


def manifest_from_dict(
    doc: Mapping[str, Any], *, strict: bool = False, path: object = "<memory>"
) -> DatasetManifest:
    """Build a manifest from its JSON form.

    Unknown top-level and record-level keys are kept in ``extras`` unless
    ``strict``, in which case they are rejected. Unknown box keys are always
    rejected, since boxes have nowhere to keep them.
    """
    if not isinstance(doc, Mapping):
        raise ParseError("manifest must be a JSON object", path)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(
            f"schema_version mismatch: expected {SCHEMA_VERSION}, got {version!r}", path
        )
    missing = [k for k in MANIFEST_KEYS if k not in doc]
    if missing:
        raise ParseError(f"missing keys {missing}", path)
    extras = _split_known(dict(doc), MANIFEST_KEYS, strict, "manifest", path)

    try:
        classes = sorted(doc["classes"], key=lambda c: c["id"])
        class_map = ClassMap(tuple((c["id"], c["name"]) for c in classes))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed classes ({exc})", path) from None
    except ValidationError as exc:
        raise ParseError(str(exc), path) from None

    entries = []
    for k, raw in enumerate(doc["records"]):
        where = f"record {k} ({raw.get('image_id', '?')})"
        missing = [key for key in RECORD_KEYS if key not in raw]
        if missing:
            raise ParseError(f"{where}: missing keys {missing}", path)
        rec_extras = _split_known(raw, RECORD_KEYS, strict, where, path)
        try:
            boxes = []
            for j, b in enumerate(raw["boxes"]):
                bad = sorted(set(b) - set(BOX_KEYS))
                if bad:
                    raise ParseError(f"{where}: box {j}: unknown fields {bad}", path)
                conf = b.get("confidence")
                boxes.append(
                    GroundTruthBox(
                        BBox(*(float(v) for v in b["bbox"])),
                        int(b["class_id"]),
                        None if conf is None else float(conf),
                    )
                )
            record = ImageRecord(
                str(raw["image_id"]),
                int(raw["width"]),
                int(raw["height"]),
                str(raw["group_id"]),
                tuple(boxes),
            )
            entries.append(
                ManifestEntry(record, raw["provenance"], float(raw["loss_weight"]), rec_extras)
            )
        except ParseError:
            raise
        except (ValidationError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}", path) from None
    try:
        return DatasetManifest(
            str(doc["name"]), class_map, tuple(entries), str(doc["split_tag"]), extras
        )
    except ValidationError as exc:
        raise ParseError(str(exc), path) from None


def parse_manifest(file: str | os.PathLike, *, strict: bool = False) -> DatasetManifest:
    path = Path(file)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError("file not found", path) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc})", path) from None
    return manifest_from_dict(doc, strict=strict, path=path)


def predictions_manifest(
    preds: Mapping[str, list[Detection]], template: DatasetManifest, *, name: str | None = None
) -> DatasetManifest:
    """Package detections as a manifest (same schema, boxes carry ``confidence``).

    Image dimensions and group ids come from ``template``; every template image
    is emitted, with an empty box list when it has no detections.
    """
    index = template.index()
    unknown = sorted(set(preds) - set(index))
    if unknown:
        raise ValidationError(f"predictions for unknown image_ids: {unknown}")
    entries = []
    for image_id in sorted(index):
        rec = index[image_id]
        boxes = tuple(d.as_box() for d in preds.get(image_id, ()))
        entries.append(
            ManifestEntry(
                ImageRecord(rec.image_id, rec.width, rec.height, rec.group_id, boxes),
                "pseudo",
                1.0,
            )
        )
    return DatasetManifest(
        name or f"{template.name}-predictions", template.class_map, tuple(entries), template.split_tag
    )


def parse_predictions(file: str | os.PathLike) -> dict[str, list[Detection]]:
    """Read a teacher predictions file into ``image_id -> detections``."""
    manifest = parse_manifest(file)
    for e in manifest:
        for k, b in enumerate(e.record.boxes):
            if b.confidence is None:
                raise ParseError(f"{e.image_id}: box {k} has no confidence", file)
    return manifest.predictions()
