from __future__ import annotations

import sys

import numpy as np
import pytest

from ssod.core import BBox, ClassMap, DatasetManifest, Detection, GroundTruthBox, ImageRecord

CLASSES = ClassMap.from_names(["sugarcane", "guinea_grass"])


def box(x0, y0, x1, y1, cls=0, conf=None):
    return GroundTruthBox(BBox(x0, y0, x1, y1), cls, conf)


def det(x0, y0, x1, y1, cls=0, conf=1.0):
    return Detection(BBox(x0, y0, x1, y1), cls, conf)


def manifest_of(records, name="m", **kw):
    return DatasetManifest.from_records(name, CLASSES, records, **kw)


def random_manifest(rng: np.random.Generator, n_images=5, max_boxes=4, name="rand", prefix="img"):
    records = []
    for i in range(n_images):
        w, h = int(rng.integers(16, 2000)), int(rng.integers(16, 2000))
        boxes = []
        for _ in range(int(rng.integers(0, max_boxes + 1))):
            x0, x1 = sorted(rng.uniform(0, w, 2))
            y0, y1 = sorted(rng.uniform(0, h, 2))
            if x1 - x0 < 1e-3 or y1 - y0 < 1e-3:
                continue
            boxes.append(GroundTruthBox(BBox(float(x0), float(y0), float(x1), float(y1)),
                                        int(rng.integers(0, 2))))
        records.append(ImageRecord(f"{prefix}_{i:03d}", w, h, f"paddock_{i % 3}", tuple(boxes)))
    return DatasetManifest.from_records(name, CLASSES, records)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_detection_instance(rng: np.random.Generator, n_images=5, max_gt=3, max_fp=2):
    """Ground truth plus noisy predictions: jittered copies of GT, duplicates and
    stray boxes. Confidences are coarse so rank ties occur."""
    records, preds = [], {}
    for i in range(n_images):
        w, h = 200, 150
        gts = []
        for _ in range(int(rng.integers(0, max_gt + 1))):
            x0, y0 = rng.uniform(0, w - 40), rng.uniform(0, h - 40)
            bw, bh = rng.uniform(8, 40, 2)
            gts.append(GroundTruthBox(BBox(float(x0), float(y0), float(x0 + bw), float(y0 + bh)),
                                      int(rng.integers(0, 2))))
        dets = []
        for g in gts:
            for _ in range(int(rng.integers(0, 3))):
                b = g.bbox
                dx, dy = rng.normal(0, 0.15 * b.width), rng.normal(0, 0.15 * b.height)
                x0 = min(max(b.x_min + dx, 0.0), w - 2)
                y0 = min(max(b.y_min + dy, 0.0), h - 2)
                x1 = min(max(x0 + b.width * rng.uniform(0.7, 1.3), x0 + 1), w)
                y1 = min(max(y0 + b.height * rng.uniform(0.7, 1.3), y0 + 1), h)
                cls = g.class_id if rng.uniform() < 0.9 else 1 - g.class_id
                dets.append(Detection(BBox(float(x0), float(y0), float(x1), float(y1)), cls,
                                      round(float(rng.uniform(0.05, 1.0)), 1)))
        for _ in range(int(rng.integers(0, max_fp + 1))):
            x0, y0 = rng.uniform(0, w - 20), rng.uniform(0, h - 20)
            dets.append(Detection(BBox(float(x0), float(y0), float(x0 + 15), float(y0 + 12)),
                                  int(rng.integers(0, 2)), round(float(rng.uniform(0.05, 1.0)), 1)))
        order = rng.permutation(len(dets))
        image_id = f"im{i:02d}"
        preds[image_id] = [dets[k] for k in order]
        records.append(ImageRecord(image_id, w, h, "", tuple(gts)))
    return preds, DatasetManifest.from_records("inst", CLASSES, records)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
