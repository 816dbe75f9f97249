"""Synthetic scenes, a calibrated mock teacher and a one-parameter toy detector.

Scenes are flat grayscale backgrounds with filled rectangles whose intensity
encodes the class, plus optional dark "shadow" rectangles that carry no
ground truth. The toy detector thresholds intensity at a single parameter and
boxes the connected components; fitting it is an exact grid search over that
parameter, minimising the mean per-image ``1 - F1`` at IoU 0.5.

Per-image randomness is drawn from ``default_rng([seed, index])`` so serial
and parallel generation agree.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from ssod.core import (
    BBox,
    ClassMap,
    DatasetManifest,
    Detection,
    GroundTruthBox,
    ImageRecord,
    intersection_area,
)
from ssod.errors import ParseError, ValidationError
from ssod.metrics import match_at_iou
from ssod.parallel import pmap
from ssod.pseudolabel import combined_objective

MAX_PLACEMENT_ATTEMPTS = 1000


# -- rasters ------------------------------------------------------------------


def write_pgm(path: str | os.PathLike, pixels: np.ndarray) -> None:
    """Binary PGM (P5), maxval 255."""
    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ParseError("not a binary PGM (P5)", path)
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ParseError(f"unsupported maxval {maxval}", path)
    body = data[pos + 1 : pos + 1 + w * h]
    if len(body) != w * h:
        raise ParseError("truncated raster", path)
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def load_rasters(directory: str | os.PathLike, image_ids: Sequence[str]) -> dict[str, np.ndarray]:
    root = Path(directory)
    return {i: read_pgm(root / f"{i}.pgm") for i in image_ids}


# -- scene generation -----------------------------------------------------------


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 0
    n_images: int = 10
    width: int = 128
    height: int = 96
    class_names: tuple[str, ...] = ("sugarcane", "guinea_grass")
    # per class id: inclusive (min, max) boxes per image
    boxes_per_class: Mapping[int, tuple[int, int]] = field(
        default_factory=lambda: {0: (1, 3), 1: (0, 2)}
    )
    # box side as a fraction of the image side
    box_size_range: tuple[float, float] = (0.08, 0.2)
    class_intensity: Mapping[int, float] = field(default_factory=lambda: {0: 0.6, 1: 0.9})
    background: float = 0.2
    shadow_rate: float = 0.0
    shadow_intensity: float = 0.05
    n_groups: int = 4
    prefix: str = "scene"

    def __post_init__(self) -> None:
        if self.n_images < 0 or self.width < 4 or self.height < 4:
            raise ValidationError("scene config needs n_images >= 0 and images at least 4x4")
        n = len(self.class_names)
        if set(self.boxes_per_class) - set(range(n)) or set(self.class_intensity) != set(range(n)):
            raise ValidationError("boxes_per_class/class_intensity must be keyed by class id")
        for lo, hi in self.boxes_per_class.values():
            if not 0 <= lo <= hi:
                raise ValidationError(f"invalid box count range ({lo}, {hi})")
        lo, hi = self.box_size_range
        if not 0 < lo <= hi <= 1:
            raise ValidationError(f"invalid box size range {self.box_size_range}")
        levels = [*self.class_intensity.values(), self.background, self.shadow_intensity]
        if len({_to_level(v) for v in levels}) != len(levels):
            raise ValidationError("class, background and shadow intensities must be distinct")
        if not 0 <= self.shadow_rate <= 1:
            raise ValidationError("shadow_rate must lie in [0, 1]")
        if self.n_groups < 1:
            raise ValidationError("n_groups must be >= 1")

    @property
    def class_map(self) -> ClassMap:
        return ClassMap.from_names(self.class_names)


@dataclass
class Scene:
    record: ImageRecord
    pixels: np.ndarray
    shadows: list[BBox]


def _to_level(v: float) -> int:
    return int(round(v * 255))


def _touches(a: BBox, others: Sequence[BBox], margin: int = 1) -> bool:
    grown = BBox(a.x_min - margin, a.y_min - margin, a.x_max + margin, a.y_max + margin)
    return any(intersection_area(grown, o) > 0 for o in others)


def _place_box(rng: np.random.Generator, cfg: SceneConfig, placed: list[BBox], image_id: str) -> BBox:
    lo, hi = cfg.box_size_range
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        w = max(2, int(round(rng.uniform(lo, hi) * cfg.width)))
        h = max(2, int(round(rng.uniform(lo, hi) * cfg.height)))
        w, h = min(w, cfg.width), min(h, cfg.height)
        x = int(rng.integers(0, cfg.width - w + 1))
        y = int(rng.integers(0, cfg.height - h + 1))
        box = BBox(x, y, x + w, y + h)
        # 1-px gap keeps neighbouring boxes in separate connected components
        if not _touches(box, placed):
            return box
    raise ValidationError(
        f"{image_id}: could not place a non-overlapping box in {MAX_PLACEMENT_ATTEMPTS} attempts"
    )


def _generate_one(cfg: SceneConfig, index: int) -> Scene:
    rng = np.random.default_rng([cfg.seed, index])
    image_id = f"{cfg.prefix}_{index:05d}"
    placed: list[BBox] = []
    boxes: list[GroundTruthBox] = []
    for cid in range(len(cfg.class_names)):
        lo, hi = cfg.boxes_per_class.get(cid, (0, 0))
        for _ in range(int(rng.integers(lo, hi + 1))):
            box = _place_box(rng, cfg, placed, image_id)
            placed.append(box)
            boxes.append(GroundTruthBox(box, cid))
    shadows = []
    if rng.random() < cfg.shadow_rate:
        shadow = _place_box(rng, cfg, placed, image_id)
        placed.append(shadow)
        shadows.append(shadow)

    pixels = np.full((cfg.height, cfg.width), _to_level(cfg.background), dtype=np.uint8)
    for s in shadows:
        pixels[int(s.y_min) : int(s.y_max), int(s.x_min) : int(s.x_max)] = _to_level(
            cfg.shadow_intensity
        )
    for b in boxes:
        bb = b.bbox
        pixels[int(bb.y_min) : int(bb.y_max), int(bb.x_min) : int(bb.x_max)] = _to_level(
            cfg.class_intensity[b.class_id]
        )
    group = f"paddock_{index % cfg.n_groups}"
    record = ImageRecord(image_id, cfg.width, cfg.height, group, tuple(boxes))
    return Scene(record, pixels, shadows)


def generate_scenes(
    cfg: SceneConfig, *, name: str = "synth", jobs: int | None = None
) -> tuple[DatasetManifest, dict[str, np.ndarray], dict[str, list[BBox]]]:
    """Seeded scenes: (manifest, rasters by image_id, shadow rectangles by image_id)."""
    scenes = pmap(lambda i: _generate_one(cfg, i), range(cfg.n_images), jobs)
    manifest = DatasetManifest.from_records(name, cfg.class_map, [s.record for s in scenes])
    rasters = {s.record.image_id: s.pixels for s in scenes}
    shadows = {s.record.image_id: s.shadows for s in scenes}
    return manifest, rasters, shadows


# -- mock teacher -------------------------------------------------------------


@dataclass(frozen=True)
class MockTeacherConfig:
    miss_rate: float = 0.1
    false_positive_rate: float = 0.5
    tp_confidence_range: tuple[float, float] = (0.6, 1.0)
    fp_confidence_range: tuple[float, float] = (0.0, 0.7)
    jitter_sigma: float = 0.0
    seed: int = 0
    # spurious box side as a fraction of the image side
    fp_size_range: tuple[float, float] = (0.05, 0.15)

    def __post_init__(self) -> None:
        if not 0 <= self.miss_rate <= 1:
            raise ValidationError("miss_rate must lie in [0, 1]")
        if not self.false_positive_rate >= 0:
            raise ValidationError("false_positive_rate must be >= 0")
        for lo, hi in (self.tp_confidence_range, self.fp_confidence_range):
            if not 0 <= lo <= hi <= 1:
                raise ValidationError(f"invalid confidence range ({lo}, {hi})")
        if not self.jitter_sigma >= 0:
            raise ValidationError("jitter_sigma must be >= 0")
        lo, hi = self.fp_size_range
        if not 0 < lo <= hi <= 1:
            raise ValidationError(f"invalid fp size range {self.fp_size_range}")


def _jitter(rng: np.random.Generator, box: BBox, sigma: float, w: int, h: int) -> BBox:
    if sigma == 0:
        return box
    x0, y0, x1, y1 = np.asarray(box.as_tuple()) + rng.normal(0.0, sigma, 4)
    x0, x1 = np.clip([x0, x1], 0, w)
    y0, y1 = np.clip([y0, y1], 0, h)
    if x1 - x0 < 1 or y1 - y0 < 1:
        return box
    return BBox(float(x0), float(y0), float(x1), float(y1))


def _spurious_box(rng: np.random.Generator, cfg: MockTeacherConfig, rec: ImageRecord) -> BBox:
    lo, hi = cfg.fp_size_range
    gts = [b.bbox for b in rec.boxes]
    box = None
    for _ in range(100):
        w = min(rec.width, max(1.0, rng.uniform(lo, hi) * rec.width))
        h = min(rec.height, max(1.0, rng.uniform(lo, hi) * rec.height))
        x = rng.uniform(0, rec.width - w)
        y = rng.uniform(0, rec.height - h)
        box = BBox(float(x), float(y), float(x + w), float(y + h))
        if not any(intersection_area(box, g) > 0 for g in gts):
            break
    return box


def _teach_one(rec: ImageRecord, index: int, n_classes: int, cfg: MockTeacherConfig) -> list[Detection]:
    rng = np.random.default_rng([cfg.seed, index])
    out = []
    for b in rec.boxes:
        missed = rng.random() < cfg.miss_rate
        box = _jitter(rng, b.bbox, cfg.jitter_sigma, rec.width, rec.height)
        conf = float(rng.uniform(*cfg.tp_confidence_range))
        if not missed:
            out.append(Detection(box, b.class_id, conf))
    for _ in range(int(rng.poisson(cfg.false_positive_rate))):
        box = _spurious_box(rng, cfg, rec)
        cls = int(rng.integers(0, n_classes))
        out.append(Detection(box, cls, float(rng.uniform(*cfg.fp_confidence_range))))
    return out


def mock_teacher(
    truth: DatasetManifest, cfg: MockTeacherConfig, *, jobs: int | None = None
) -> dict[str, list[Detection]]:
    """Noisy detector stand-in: misses, jitter, and Poisson spurious boxes.

    Spurious boxes avoid every ground-truth box when a free spot is found
    within 100 tries.
    """
    records = sorted(truth.records, key=lambda r: r.image_id)
    n_classes = len(truth.class_map)
    dets = pmap(lambda ir: _teach_one(ir[1], ir[0], n_classes, cfg), list(enumerate(records)), jobs)
    return {r.image_id: d for r, d in zip(records, dets)}


def _prob_above(rng_range: tuple[float, float], c: float) -> float:
    lo, hi = rng_range
    if hi == lo:
        return float(lo > c)
    return float(np.clip((hi - c) / (hi - lo), 0.0, 1.0))


def expected_kept_precision(
    n_gt: int, n_images: int, cfg: MockTeacherConfig, threshold: float
) -> float:
    """Closed-form precision of the kept set after a strict ``conf > threshold`` cut.

    Assumes spurious boxes never hit ground truth and no size filter.
    """
    tp = n_gt * (1 - cfg.miss_rate) * _prob_above(cfg.tp_confidence_range, threshold)
    fp = n_images * cfg.false_positive_rate * _prob_above(cfg.fp_confidence_range, threshold)
    return tp / (tp + fp) if tp + fp > 0 else 0.0


# -- toy detector and grid-search trainer ---------------------------------------


def toy_detect(pixels: np.ndarray, theta: float, class_id: int) -> list[Detection]:
    """Pixels with intensity >= theta, grouped into 4-connected components."""
    mask = pixels.astype(np.float64) >= theta * 255 - 1e-9
    labels, n = ndimage.label(mask)
    dets = []
    for sl in ndimage.find_objects(labels):
        if sl is None:
            continue
        ys, xs = sl
        dets.append(Detection(BBox(xs.start, ys.start, xs.stop, ys.stop), class_id, 1.0))
    return dets


def image_loss(record: ImageRecord, dets: Sequence[Detection], class_id: int) -> float:
    """``1 - F1`` at IoU 0.5 for one class; an image with nothing to find and nothing found scores 0."""
    m = match_at_iou(dets, record.boxes, 0.5, class_id)
    tp, fp, fn = m.n_tp, m.n_fp, m.n_fn
    if tp + fp + fn == 0:
        return 0.0
    return 1.0 - 2 * tp / (2 * tp + fp + fn)


def objective_at(
    train: DatasetManifest,
    rasters: Mapping[str, np.ndarray],
    theta: float,
    target_class: int,
    pseudo_threshold: float = 0.0,
) -> float:
    """Training objective for one parameter value.

    Labeled images form the supervised mean; pseudo images are weighted by
    their ``loss_weight`` through :func:`combined_objective`, gated on the
    lowest box confidence in the image.
    """
    sup, pseudo = [], []
    weights = set()
    for e in train:
        dets = toy_detect(rasters[e.image_id], theta, target_class)
        loss = image_loss(e.record, dets, target_class)
        if e.provenance == "labeled":
            sup.append(loss)
        else:
            confs = [b.confidence for b in e.record.boxes if b.confidence is not None]
            pseudo.append((loss, min(confs) if confs else 1.0))
            weights.add(e.loss_weight)
    if len(weights) > 1:
        raise ValidationError(f"pseudo records carry mixed loss weights {sorted(weights)}")
    lam = weights.pop() if weights else 0.0
    return combined_objective(sup, pseudo, lam, pseudo_threshold)


def fit_toy_detector(
    train: DatasetManifest,
    rasters: Mapping[str, np.ndarray],
    param_grid: Sequence[float],
    target_class: int = 1,
    *,
    pseudo_threshold: float = 0.0,
) -> tuple[float, float]:
    """Exact argmin over ``param_grid``; ties go to the smallest parameter."""
    if not param_grid:
        raise ValidationError("parameter grid is empty")
    if not any(e.provenance == "labeled" for e in train):
        raise ValidationError("training set has no labeled images")
    missing = sorted(set(train.image_ids) - set(rasters))
    if missing:
        raise ValidationError(f"no raster for images {missing[:5]}")
    scored = [
        (objective_at(train, rasters, theta, target_class, pseudo_threshold), theta)
        for theta in param_grid
    ]
    best_loss, best = min(scored, key=lambda t: (t[0], t[1]))
    return best, best_loss


def mean_loss(
    manifest: DatasetManifest, rasters: Mapping[str, np.ndarray], theta: float, target_class: int
) -> float:
    """Unweighted mean per-image loss, for scoring a fitted parameter on held-out scenes."""
    losses = [
        image_loss(r, toy_detect(rasters[r.image_id], theta, target_class), target_class)
        for r in manifest.records
    ]
    return float(np.mean(losses)) if losses else 0.0


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive stop) or a comma list; values rounded to 10 places."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise ValidationError(f"grid must be start:stop:step, got {text!r}") from None
        if step <= 0 or stop < start:
            raise ValidationError(f"invalid grid {text!r}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 10) for k in range(n)]
    try:
        return [round(float(v), 10) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"invalid grid {text!r}") from None
