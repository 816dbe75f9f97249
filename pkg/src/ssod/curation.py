"""Dataset statistics, majority-class downsampling, grouped splits and leakage audits.

Randomness comes from numpy's PCG64 generator (``numpy.random.default_rng``),
whose stream is fixed across platforms for a given seed.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ssod.core import DatasetManifest, ManifestEntry
from ssod.errors import ValidationError

DEFAULT_TARGET_RATIO = 4.0
DEFAULT_FRACTIONS = (0.7, 0.2, 0.1)
SPLIT_NAMES = ("train", "val", "test")


@dataclass
class CountsTable:
    """Box counts per class, per (group, class), and class presence per image."""

    class_names: dict[int, str]
    per_class: dict[int, int]
    per_group: dict[str, dict[int, int]]
    presence: dict[str, frozenset[int]]

    @property
    def n_images(self) -> int:
        return len(self.presence)

    @property
    def n_boxes(self) -> int:
        return sum(self.per_class.values())

    def to_dict(self) -> dict:
        names = self.class_names
        return {
            "images": self.n_images,
            "boxes": self.n_boxes,
            "per_class": {names[c]: n for c, n in self.per_class.items()},
            "per_group": {
                g: {names[c]: n for c, n in counts.items()} for g, counts in self.per_group.items()
            },
        }

    def text(self) -> str:
        names = [self.class_names[c] for c in sorted(self.class_names)]
        width = max([len("group")] + [len(g) for g in self.per_group] + [len("total")])
        cols = [max(len(n), 6) for n in names]
        head = "group".ljust(width) + "".join(f"  {n:>{w}}" for n, w in zip(names, cols))
        lines = [head, "-" * len(head)]
        for g in sorted(self.per_group):
            row = self.per_group[g]
            lines.append(
                g.ljust(width)
                + "".join(f"  {row[c]:>{w}}" for c, w in zip(sorted(self.class_names), cols))
            )
        lines.append("-" * len(head))
        lines.append(
            "total".ljust(width)
            + "".join(f"  {self.per_class[c]:>{w}}" for c, w in zip(sorted(self.class_names), cols))
        )
        return "\n".join(lines)


def class_counts(manifest: DatasetManifest) -> CountsTable:
    ids = manifest.class_map.ids
    per_class = {c: 0 for c in ids}
    per_group: dict[str, dict[int, int]] = {}
    presence = {}
    for e in manifest:
        rec = e.record
        group = per_group.setdefault(rec.group_id, {c: 0 for c in ids})
        for b in rec.boxes:
            per_class[b.class_id] += 1
            group[b.class_id] += 1
        presence[rec.image_id] = frozenset(b.class_id for b in rec.boxes)
    return CountsTable(dict(manifest.class_map.entries), per_class, per_group, presence)


def _majority_ratio(majority: int, minority: int) -> float:
    return majority / minority


def rebalance(
    manifest: DatasetManifest,
    majority_class: int,
    target_ratio: float = DEFAULT_TARGET_RATIO,
    seed: int = 0,
) -> DatasetManifest:
    """Drop randomly chosen majority-only images until majority:minority <= target_ratio.

    Images holding any non-majority box are never removed. If every
    majority-only image goes and the ratio is still above target, the
    result is simply the best achievable.
    """
    if not target_ratio >= 1:
        raise ValidationError(f"target_ratio must be >= 1, got {target_ratio}")
    if majority_class not in manifest.class_map:
        raise ValidationError(f"unknown majority class {majority_class}")
    n_major = sum(1 for e in manifest for b in e.record.boxes if b.class_id == majority_class)
    n_minor = manifest.box_count() - n_major
    if n_minor == 0:
        raise ValidationError("cannot rebalance: no minority instances")
    if _majority_ratio(n_major, n_minor) <= target_ratio:
        return manifest

    removable = sorted(
        e.image_id
        for e in manifest
        if e.record.boxes and all(b.class_id == majority_class for b in e.record.boxes)
    )
    rng = np.random.default_rng(seed)
    order = [removable[i] for i in rng.permutation(len(removable))]
    sizes = {e.image_id: len(e.record.boxes) for e in manifest}
    dropped: set[str] = set()
    for image_id in order:
        if _majority_ratio(n_major, n_minor) <= target_ratio:
            break
        dropped.add(image_id)
        n_major -= sizes[image_id]
    return manifest.with_entries(e for e in manifest if e.image_id not in dropped)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = DEFAULT_FRACTIONS[0]
    val_frac: float = DEFAULT_FRACTIONS[1]
    test_frac: float = DEFAULT_FRACTIONS[2]
    seed: int = 0
    group_by: str = "image"

    def __post_init__(self) -> None:
        fracs = self.fractions
        if any(not f > 0 for f in fracs):
            raise ValidationError(f"split fractions must be positive, got {fracs}")
        if abs(math.fsum(fracs) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {math.fsum(fracs)}")
        if self.group_by not in ("image", "group_id"):
            raise ValidationError(f"group_by must be 'image' or 'group_id', got {self.group_by!r}")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_frac, self.val_frac, self.test_frac)


def allocate(total: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of ``total`` units; each share within 1 of its quota."""
    quotas = [f * total for f in fractions]
    # round() first: 0.29 * 100 is 28.999999999999996 and must floor to 29.
    counts = [math.floor(round(q, 9)) for q in quotas]
    leftover = total - sum(counts)
    by_remainder = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in by_remainder[:leftover]:
        counts[i] += 1
    return counts


def _unit_of(entry: ManifestEntry, group_by: str) -> str:
    return entry.record.group_id if group_by == "group_id" else entry.image_id


def split_dataset(
    manifest: DatasetManifest, spec: SplitSpec
) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Seeded shuffle of whole units (images or groups), then a fraction cut."""
    units = sorted({_unit_of(e, spec.group_by) for e in manifest})
    if len(units) < len(SPLIT_NAMES):
        raise ValidationError(
            f"need at least {len(SPLIT_NAMES)} split units, got {len(units)} ({spec.group_by})"
        )
    rng = np.random.default_rng(spec.seed)
    shuffled = [units[i] for i in rng.permutation(len(units))]
    counts = allocate(len(units), spec.fractions)
    assignment: dict[str, str] = {}
    start = 0
    for split, n in zip(SPLIT_NAMES, counts):
        for u in shuffled[start : start + n]:
            assignment[u] = split
        start += n
    out = []
    for split in SPLIT_NAMES:
        entries = [e for e in manifest if assignment[_unit_of(e, spec.group_by)] == split]
        out.append(
            manifest.with_entries(entries, name=f"{manifest.name}-{split}", split_tag=split)
        )
    return out[0], out[1], out[2]


@dataclass
class AuditReport:
    """Ids seen in more than one manifest. Verdict is PASS iff no leak counts.

    Shared group ids are always reported; they only fail the audit when
    ``strict_groups`` is set, because image-level splits share paddocks by design.
    """

    manifests: list[str]
    shared_image_ids: dict[str, list[str]] = field(default_factory=dict)
    shared_group_ids: dict[str, list[str]] = field(default_factory=dict)
    strict_groups: bool = False

    @property
    def passed(self) -> bool:
        if self.shared_image_ids:
            return False
        return not (self.strict_groups and self.shared_group_ids)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "manifests": self.manifests,
            "strict_groups": self.strict_groups,
            "shared_image_ids": self.shared_image_ids,
            "shared_group_ids": self.shared_group_ids,
        }

    def text(self) -> str:
        lines = [f"leakage audit: {self.verdict} ({', '.join(self.manifests)})"]
        for image_id, where in self.shared_image_ids.items():
            lines.append(f"  image {image_id}: {', '.join(where)}")
        tag = "group" if self.strict_groups else "group (info)"
        for group_id, where in self.shared_group_ids.items():
            lines.append(f"  {tag} {group_id}: {', '.join(where)}")
        return "\n".join(lines)


def leakage_audit(manifests: Sequence[DatasetManifest], *, strict_groups: bool = False) -> AuditReport:
    """Id-based overlap check across manifests.

    Identical image content stored under two different ids is not detected.
    """
    if len(manifests) < 2:
        raise ValidationError("leakage audit needs at least two manifests")
    labels = [m.name for m in manifests]
    dupes = Counter(labels)
    if len(dupes) < len(labels):
        labels = [f"{k}:{n}" for k, n in enumerate(labels)]
    image_where: dict[str, list[str]] = defaultdict(list)
    group_where: dict[str, list[str]] = defaultdict(list)
    for label, m in zip(labels, manifests):
        for image_id in sorted(set(m.image_ids)):
            image_where[image_id].append(label)
        for group_id in sorted({e.record.group_id for e in m if e.record.group_id}):
            group_where[group_id].append(label)
    return AuditReport(
        labels,
        {k: v for k, v in sorted(image_where.items()) if len(v) > 1},
        {k: v for k, v in sorted(group_where.items()) if len(v) > 1},
        strict_groups,
    )
