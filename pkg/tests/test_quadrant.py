from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import box, manifest_of
from ssod.core import GroundTruthBox, ImageRecord
from ssod.errors import ValidationError
from ssod.quadrant import (
    Quadrant,
    emit_classification_dataset,
    quadrant_label,
    read_label_csv,
    samples_to_csv,
    split_quadrants,
)

GG = 1


def sizes(regions):
    return [(r.rect.width, r.rect.height) for r in regions]


def labels(record, tau=0.33, target=GG):
    return {r.index.value: quadrant_label(record, r, target, tau) for r in split_quadrants(record)}


def test_split_even():
    assert sizes(split_quadrants(ImageRecord("a", 100, 100))) == [(50, 50)] * 4


def test_split_odd_floor():
    tl, tr, bl, br = split_quadrants(ImageRecord("a", 101, 101))
    assert (tl.rect.width, tl.rect.height) == (50, 50)
    assert (br.rect.width, br.rect.height) == (51, 51)
    assert tr.rect.as_tuple() == (50, 0, 101, 50)
    assert bl.rect.as_tuple() == (0, 50, 50, 101)


def test_split_minimal():
    assert sizes(split_quadrants(ImageRecord("a", 2, 2))) == [(1, 1)] * 4


def test_split_too_small():
    with pytest.raises(ValidationError, match="image too small to split"):
        split_quadrants(ImageRecord("a", 1, 7))


def test_corner_box_labels_top_left_only():
    rec = ImageRecord("a", 100, 100, "", (box(0, 0, 10, 10, GG),))
    assert labels(rec) == {"TL": 1, "TR": 0, "BL": 0, "BR": 0}


def test_straddling_box_25_75():
    # 5 px left of the x=50 midline, 15 px right: fractions 0.25 / 0.75
    rec = ImageRecord("a", 100, 100, "", (box(45, 10, 65, 20, GG),))
    assert labels(rec) == {"TL": 0, "TR": 1, "BL": 0, "BR": 0}


def test_fraction_exactly_tau_is_positive():
    # 33 of 100 columns left of the x=100 midline -> fraction exactly 0.33
    rec = ImageRecord("a", 200, 200, "", (box(67, 10, 167, 20, GG),))
    assert labels(rec) == {"TL": 1, "TR": 1, "BL": 0, "BR": 0}
    rec = ImageRecord("a", 200, 200, "", (box(68, 10, 168, 20, GG),))
    assert labels(rec)["TL"] == 0


def test_rule_is_per_box_not_aggregate():
    # two boxes each with 0.2 of their area in TL: sum would pass 0.33, neither box does
    rec = ImageRecord("a", 100, 100, "", (box(46, 0, 66, 10, GG), box(46, 20, 66, 30, GG)))
    assert labels(rec)["TL"] == 0


def test_tau_range():
    rec = ImageRecord("a", 10, 10)
    region = split_quadrants(rec)[0]
    for tau in (0.0, -0.1, 1.01):
        with pytest.raises(ValidationError):
            quadrant_label(rec, region, GG, tau)
    assert quadrant_label(rec, region, GG, 1.0) == 0


def test_emit_dataset_counts_and_order():
    recs = [ImageRecord(f"img{k}", 64, 48, "", ()) for k in range(10)]
    samples = emit_classification_dataset(manifest_of(recs), GG)
    assert len(samples) == 40
    assert all(s.label == 0 for s in samples)
    assert [s.region.index for s in samples[:4]] == list(Quadrant)


def test_emit_dataset_error_context():
    m = manifest_of([ImageRecord("tiny", 1, 1)])
    with pytest.raises(ValidationError, match="'tiny'.*too small"):
        emit_classification_dataset(m, GG)


def test_csv_round_trip():
    rec = ImageRecord("a", 100, 100, "", (box(0, 0, 10, 10, GG),))
    text = samples_to_csv(emit_classification_dataset(manifest_of([rec]), GG))
    assert text.splitlines()[0] == "image_id,quadrant,x0,y0,x1,y1,label"
    assert text.splitlines()[1] == "a,TL,0,0,50,50,1"
    assert read_label_csv(text) == {("a", "TL"): 1, ("a", "TR"): 0, ("a", "BL"): 0, ("a", "BR"): 0}


# -- properties ----------------------------------------------------------------


@st.composite
def image_with_boxes(draw, even=False):
    half_w = draw(st.integers(1, 400))
    half_h = draw(st.integers(1, 400))
    w = 2 * half_w if even else draw(st.integers(2, 800))
    h = 2 * half_h if even else draw(st.integers(2, 800))
    boxes = []
    for _ in range(draw(st.integers(0, 4))):
        x0 = draw(st.floats(0, w - 0.01))
        y0 = draw(st.floats(0, h - 0.01))
        x1 = draw(st.floats(x0 + 0.005, w))
        y1 = draw(st.floats(y0 + 0.005, h))
        if x1 > x0 and y1 > y0:
            boxes.append(box(x0, y0, x1, y1, draw(st.integers(0, 1))))
    return ImageRecord("img", w, h, "", tuple(boxes))


@given(image_with_boxes(), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_monotone_in_tau(rec, t1, t2):
    lo, hi = sorted((t1, t2))
    for region in split_quadrants(rec):
        assert quadrant_label(rec, region, GG, hi) <= quadrant_label(rec, region, GG, lo)


@given(image_with_boxes(even=True), st.integers(1, 8), st.floats(0.05, 1.0))
def test_scale_invariant(rec, s, tau):
    scaled = ImageRecord(
        rec.image_id, rec.width * s, rec.height * s, "",
        tuple(GroundTruthBox(b.bbox.scaled(s), b.class_id) for b in rec.boxes),
    )
    assert labels(rec, tau) == labels(scaled, tau)


@given(image_with_boxes(), st.floats(0.01, 1.0), st.data())
def test_contained_box_labels_its_quadrant_only(rec, tau, data):
    regions = split_quadrants(rec)
    region = data.draw(st.sampled_from(regions))
    r = region.rect
    x0 = data.draw(st.floats(r.x_min, r.x_max - 0.5))
    y0 = data.draw(st.floats(r.y_min, r.y_max - 0.5))
    inner = box(x0, y0, data.draw(st.floats(x0 + 0.25, r.x_max)),
                data.draw(st.floats(y0 + 0.25, r.y_max)), GG)
    lone = ImageRecord(rec.image_id, rec.width, rec.height, "", (inner,))
    got = {q.index: quadrant_label(lone, q, GG, tau) for q in regions}
    assert got == {q.index: int(q.index == region.index) for q in regions}


@given(image_with_boxes(), st.floats(0.01, 1.0))
def test_other_classes_do_not_matter(rec, tau):
    only_target = ImageRecord(rec.image_id, rec.width, rec.height, "", tuple(rec.boxes_of(GG)))
    assert labels(rec, tau) == labels(only_target, tau)
