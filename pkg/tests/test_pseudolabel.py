from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CLASSES, det, manifest_of
from ssod.core import ClassMap, DatasetManifest, ImageRecord
from ssod.errors import ValidationError
from ssod.pseudolabel import (
    PseudoLabelConfig,
    build_student_manifest,
    combined_objective,
    filter_predictions,
    find_difficult_class,
    preset,
)

SC, GG = 0, 1

# (sup losses, [(pseudo loss, confidence)], lambda, threshold, hand-computed value)
OBJECTIVE_CASES = [
    ([1.0], [(1.0, 0.9), (1.0, 0.1)], 1.0, 0.5, 1.5),
    ([2.0], [], 1.0, 0.5, 2.0),
    ([1.0, 3.0], [], 0.5, 0.5, 2.0),
    ([1.0, 3.0], [(4.0, 0.9)], 0.5, 0.5, 4.0),
    ([0.0], [(2.0, 0.6), (2.0, 0.7)], 1.0, 0.5, 2.0),
    ([0.0], [(2.0, 0.5)], 1.0, 0.5, 0.0),
    ([1.0], [(2.0, 0.51)], 2.0, 0.5, 5.0),
    ([1.0, 2.0, 3.0], [(6.0, 0.9), (6.0, 0.2), (6.0, 0.8)], 0.25, 0.5, 3.0),
    ([0.5, 0.5], [(1.0, 0.8), (1.0, 0.79)], 1.0, 0.8, 0.5),
    ([0.5, 0.5], [(1.0, 0.81), (1.0, 0.79)], 1.0, 0.8, 1.0),
    ([4.0], [(8.0, 1.0)] * 4, 0.5, 0.99, 8.0),
    ([4.0], [(8.0, 0.99)] * 4, 0.5, 0.99, 4.0),
    ([1.0] * 8, [(3.0, 0.9)] + [(3.0, 0.1)] * 3, 1.0, 0.5, 1.75),
    ([0.25, 0.75], [(0.5, 0.6)], 0.0, 0.5, 0.5),
    ([10.0], [(1.0, 0.9), (2.0, 0.9), (3.0, 0.9), (4.0, 0.9)], 0.1, 0.5, 10.25),
    ([2.0, 4.0, 6.0, 8.0], [(1.0, 0.3)], 3.0, 0.25, 8.0),
    ([2.0], [(1.0, 0.0)], 1.0, 0.0, 2.0),
    ([2.0], [(1.0, 1e-9)], 1.0, 0.0, 3.0),
    ([0.0], [(5.0, 0.9), (3.0, 0.9)], 0.5, 0.5, 2.0),
    ([1.5, 2.5], [(2.0, 0.95), (4.0, 0.4), (6.0, 0.85)], 2.0, 0.8, 2.0 + 16.0 / 3.0),
]


@pytest.mark.parametrize("sup, pseudo, lam, c, expected", OBJECTIVE_CASES)
def test_combined_objective_hand_cases(sup, pseudo, lam, c, expected):
    assert combined_objective(sup, pseudo, lam, c) == pytest.approx(expected, abs=1e-12)


def test_combined_objective_lambda_zero_is_mean():
    sup = [0.1, 0.7, 0.35]
    assert combined_objective(sup, [(9.0, 0.99)] * 5, 0.0, 0.5) == sum(sup) / 3


def test_combined_objective_requires_supervised():
    with pytest.raises(ValidationError):
        combined_objective([], [(1.0, 1.0)], 1.0, 0.5)


@given(
    st.lists(st.floats(0, 10), min_size=1, max_size=8),
    st.lists(st.tuples(st.floats(0, 10), st.floats(0, 1)), max_size=8),
    st.floats(0, 5),
    st.floats(0, 5),
    st.floats(0, 1),
    st.randoms(use_true_random=False),
)
def test_combined_objective_linear_and_permutation_invariant(sup, pseudo, l1, l2, c, rnd):
    base = combined_objective(sup, pseudo, 0.0, c)
    f1 = combined_objective(sup, pseudo, l1, c)
    f2 = combined_objective(sup, pseudo, l2, c)
    f12 = combined_objective(sup, pseudo, l1 + l2, c)
    assert f12 - base == pytest.approx((f1 - base) + (f2 - base), abs=1e-9)
    s2, p2 = sup[:], pseudo[:]
    rnd.shuffle(s2)
    rnd.shuffle(p2)
    assert combined_objective(s2, p2, l1, c) == f1


def test_all_below_threshold_contributes_nothing():
    assert combined_objective([3.0], [(100.0, 0.2), (50.0, 0.5)], 7.0, 0.5) == 3.0


# -- filtering ------------------------------------------------------------------


def unlabeled(n=3, size=100):
    return manifest_of([ImageRecord(f"u{k}", size, size, "p") for k in range(n)], name="unl")


def kept_total(report):
    return sum(report.kept.values())


def test_vacuous_filter_keeps_positive_confidence():
    preds = {"u0": [det(0, 0, 1, 1, SC, 0.01), det(0, 0, 50, 50, GG, 1.0), det(5, 5, 6, 6, SC, 0.0)]}
    cfg = PseudoLabelConfig({}, 0.0, 0.0, 1.0)
    out, report = filter_predictions(preds, unlabeled(), cfg)
    assert len(out.get("u0").boxes) == 2
    assert report.dropped_low_confidence[SC] == 1


def test_threshold_is_strict():
    preds = {"u0": [det(0, 0, 50, 50, SC, 0.5)]}
    out, report = filter_predictions(preds, unlabeled(), preset("yolo"))
    assert len(out) == 0 and report.dropped_low_confidence[SC] == 1


def test_mixed_detr_thresholds():
    preds = {"u0": [det(0, 0, 50, 50, GG, 0.7), det(50, 50, 100, 100, SC, 0.7)]}
    cfg = preset("detr", difficult_classes=[GG])
    assert cfg.threshold(GG) == 0.8 and cfg.threshold(SC) == 0.5
    out, _ = filter_predictions(preds, unlabeled(), cfg)
    assert [b.class_id for b in out.get("u0").boxes] == [SC]


def test_presets():
    assert preset("yolo").default_threshold == 0.5
    assert preset("cls").default_threshold == 0.99
    assert find_difficult_class(CLASSES) == GG
    with pytest.raises(ValidationError):
        find_difficult_class(ClassMap.from_names(["cat", "dog"]))
    with pytest.raises(ValidationError):
        preset("detr")
    with pytest.raises(ValidationError):
        preset("nope")


def test_config_validation():
    with pytest.raises(ValidationError):
        PseudoLabelConfig({}, 1.0)
    with pytest.raises(ValidationError):
        PseudoLabelConfig({0: -0.1})
    with pytest.raises(ValidationError):
        PseudoLabelConfig(min_area_fraction=1.0)
    with pytest.raises(ValidationError):
        PseudoLabelConfig(lambda_weight=-1)


def test_small_boxes_dropped_after_confidence():
    # 100x100 image: area fraction 0.0004 is 4 px^2
    preds = {"u0": [det(0, 0, 1, 3, SC, 0.9), det(0, 0, 2, 2, SC, 0.9), det(0, 0, 1, 1, SC, 0.1)]}
    out, report = filter_predictions(preds, unlabeled(), preset("yolo"))
    assert [b.bbox.area for b in out.get("u0").boxes] == [4]
    assert report.dropped_small[SC] == 1
    assert report.dropped_low_confidence[SC] == 1


def test_output_manifest_shape():
    preds = {"u0": [det(0, 0, 50, 50, SC, 0.9)], "u2": [det(0, 0, 50, 50, SC, 0.2)]}
    out, report = filter_predictions(preds, unlabeled(), preset("yolo", lambda_weight=0.3))
    assert out.image_ids == ["u0"]
    assert out.entries[0].provenance == "pseudo" and out.entries[0].loss_weight == 0.3
    assert out.get("u0").boxes[0].confidence == 0.9
    assert (report.images_in, report.images_kept) == (2, 1)


def test_unknown_image_rejected():
    with pytest.raises(ValidationError, match="unknown image_ids"):
        filter_predictions({"zzz": []}, unlabeled(), preset("yolo"))


def random_preds(seed, n_images=6, per_image=12):
    rng = np.random.default_rng(seed)
    preds = {}
    for k in range(n_images):
        dets = []
        for _ in range(int(rng.integers(0, per_image))):
            x0, y0 = rng.uniform(0, 90, 2)
            w, h = rng.uniform(0.1, 10, 2)
            dets.append(det(x0, y0, x0 + w, y0 + h, int(rng.integers(0, 2)), float(rng.uniform())))
        preds[f"u{k}"] = dets
    return preds


thresholds = st.floats(0, 0.999)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), thresholds, thresholds, thresholds, st.floats(0, 0.01), st.floats(0, 0.01))
def test_filter_properties(seed, c_lo, c_hi, c_gg, a1, a2):
    c_lo, c_hi = sorted((c_lo, c_hi))
    a_lo, a_hi = sorted((a1, a2))
    preds = random_preds(seed)
    unl = unlabeled(6)
    n_in = sum(len(v) for v in preds.values())

    out, rep = filter_predictions(preds, unl, PseudoLabelConfig({GG: c_gg}, c_lo, a_lo))
    assert rep.total == n_in

    _, stricter = filter_predictions(preds, unl, PseudoLabelConfig({GG: c_gg}, c_hi, a_lo))
    _, smaller = filter_predictions(preds, unl, PseudoLabelConfig({GG: c_gg}, c_lo, a_hi))
    assert kept_total(stricter) <= kept_total(rep)
    assert kept_total(smaller) <= kept_total(rep)

    again, rep2 = filter_predictions(out.predictions(), out, PseudoLabelConfig({GG: c_gg}, c_lo, a_lo))
    assert kept_total(rep2) == kept_total(rep)
    assert again.image_ids == out.image_ids


def test_filter_independent_of_jobs():
    preds = random_preds(3, n_images=40)
    unl = unlabeled(40)
    a = filter_predictions(preds, unl, preset("yolo"), jobs=1)
    b = filter_predictions(preds, unl, preset("yolo"), jobs=8)
    assert a[0] == b[0] and a[1].to_dict() == b[1].to_dict()


# -- student manifest -------------------------------------------------------------


def _many(prefix, n, provenance="labeled", weight=1.0):
    return DatasetManifest.from_records(
        prefix, CLASSES, [ImageRecord(f"{prefix}{k:05d}", 8, 8) for k in range(n)],
        provenance=provenance, loss_weight=weight,
    )


def test_student_counts_and_weights():
    student = build_student_manifest(_many("lab", 975), _many("pse", 1390, "pseudo", 1.0), 0.4)
    assert len(student) == 2365
    weights = {e.provenance: e.loss_weight for e in student}
    assert weights == {"labeled": 1.0, "pseudo": 0.4}


def test_student_lambda_zero_keeps_records():
    student = build_student_manifest(_many("lab", 2), _many("pse", 3, "pseudo", 1.0), 0.0)
    assert sum(1 for e in student if e.provenance == "pseudo" and e.loss_weight == 0.0) == 3


def test_student_collision_and_class_mismatch():
    with pytest.raises(ValidationError, match="lab00001"):
        build_student_manifest(_many("lab", 2), _many("lab", 3, "pseudo", 1.0).with_entries(
            _many("lab", 3, "pseudo", 1.0).entries[1:2]))
    other = DatasetManifest("x", ClassMap.from_names(["a", "b"]))
    with pytest.raises(ValidationError, match="class map mismatch"):
        build_student_manifest(_many("lab", 1), other)


def test_conservation_exhaustive_small():
    # every (confidence, size) combination lands in exactly one bucket
    confs = [0.0, 0.5, 0.51, 0.99]
    sides = [1, 2, 3]
    dets = [det(0, 0, s, s, GG, c) for c, s in itertools.product(confs, sides)]
    _, rep = filter_predictions({"u0": dets}, unlabeled(), preset("yolo"))
    assert rep.total == len(dets)
    assert rep.kept[GG] == 2 * 2  # conf 0.51, 0.99 x sides 2, 3
    assert rep.dropped_small[GG] == 2
    assert rep.dropped_low_confidence[GG] == 6
