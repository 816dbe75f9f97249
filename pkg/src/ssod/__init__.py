"""Data pipeline toolkit for semi-supervised weed detection.

Quadrant label generation, dataset curation and leakage-safe splitting,
pseudo-label filtering and merging, and detection/classification metrics.
"""

from ssod.core import (
    BBox,
    ClassMap,
    DatasetManifest,
    Detection,
    GroundTruthBox,
    ImageRecord,
    ManifestEntry,
    intersection_area,
    iou,
    overlap_fraction,
)
from ssod.errors import ParseError, SSODError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "ClassMap",
    "DatasetManifest",
    "Detection",
    "GroundTruthBox",
    "ImageRecord",
    "ManifestEntry",
    "ParseError",
    "SSODError",
    "ValidationError",
    "intersection_area",
    "iou",
    "overlap_fraction",
]
