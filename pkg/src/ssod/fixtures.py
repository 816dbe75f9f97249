"""Fixture manifests reproducing the labeled datasets' bounding-box counts.

Per-paddock box counts are the published ones; image counts, image size and
box geometry are made up (seeded) since only the counts are known.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from ssod.core import BBox, ClassMap, DatasetManifest, GroundTruthBox, ImageRecord
from ssod.formats import manifest_from_dict

CLASS_NAMES = ("sugarcane", "guinea_grass")
SUGARCANE, GUINEA_GRASS = 0, 1

# paddock -> (sugarcane boxes, guinea grass boxes)
PADDOCK_COUNTS = {
    "A": {"paddock_A1": (3605, 239), "paddock_A2": (837, 112)},
    "B": {"paddock_B1": (170, 29), "paddock_B2": (336, 252)},
}
DATASET_TOTALS = {"A": (4442, 351), "B": (506, 281)}

# Invented split of the ~975 labeled images across paddocks.
PADDOCK_IMAGES = {"paddock_A1": 420, "paddock_A2": 180, "paddock_B1": 125, "paddock_B2": 250}
IMAGE_SIZE = (2048, 1536)
FIXTURE_SEED = 2025


def build_paddock_manifest(dataset: str, seed: int = FIXTURE_SEED) -> DatasetManifest:
    """Deterministically synthesize the Dataset A or B fixture."""
    paddocks = PADDOCK_COUNTS[dataset]
    rng = np.random.default_rng([seed, ord(dataset)])
    width, height = IMAGE_SIZE
    records = []
    for paddock, counts in paddocks.items():
        n_images = PADDOCK_IMAGES[paddock]
        per_image: list[list[GroundTruthBox]] = [[] for _ in range(n_images)]
        for class_id, n_boxes in enumerate(counts):
            owners = rng.integers(0, n_images, size=n_boxes)
            for owner in owners:
                w = int(rng.integers(40, 400))
                h = int(rng.integers(40, 400))
                x = int(rng.integers(0, width - w + 1))
                y = int(rng.integers(0, height - h + 1))
                per_image[owner].append(GroundTruthBox(BBox(x, y, x + w, y + h), class_id))
        for k, boxes in enumerate(per_image):
            records.append(
                ImageRecord(f"{paddock}_{k:04d}", width, height, paddock, tuple(boxes))
            )
    return DatasetManifest.from_records(
        f"dataset_{dataset}", ClassMap.from_names(CLASS_NAMES), records
    )


def fixture_path(dataset: str):
    return resources.files("ssod") / "data" / f"paddock_dataset_{dataset.lower()}.json"


def load_paddock_manifest(dataset: str) -> DatasetManifest:
    """Parse the shipped fixture file for Dataset A or B."""
    return manifest_from_dict(json.loads(fixture_path(dataset).read_text(encoding="utf-8")))
