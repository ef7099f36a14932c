import dataclasses
import math
import random

import numpy as np
import pytest

from .. import dataset, geometry, reports, rle, scoring, synth
from ..dataset import (CategoryInfo, Dataset, ImageRecord, InstanceRecord,
                       PolygonSet, RasterRle)
from ..util import ArgumentError, DegenerateGeometryError

SQUARE_Q = 4 / math.pi
SQUARE_10 = [(0, 0), (10, 0), (10, 10), (0, 10)]
RECT_20_5 = [(0, 0), (20, 0), (20, 5), (0, 5)]
SLIVER = [(0, 0), (5, 5), (10, 10)]


def make_score(instance_id, si, category_id=1, image_id=1, degenerate=False):
    return scoring.InstanceScore(
        instance_id=instance_id,
        image_id=image_id,
        category_id=category_id,
        perimeter=0.0,
        area=0.0,
        raw_scs=si,
        si_scs=si,
        degenerate=degenerate,
    )


def equal_area_trio(area: float = 10_000.0):
    """Circle, square and 5-pointed star, scaled to the same area."""
    specs = [
        synth.SynthSpec.circle(100),
        synth.SynthSpec.square(100),
        synth.SynthSpec.star(5, 100, 38),
    ]
    scaled = []
    for spec in specs:
        factor = math.sqrt(area / synth.analytic_metrics(spec).area)
        scaled.append(
            dataclasses.replace(spec.scaled(factor), center=(150.0, 150.0))
        )
    return scaled


@pytest.mark.parametrize(
    "perimeter, area, expected",
    [
        pytest.param(40, 100, 0.4, id="square_10"),
        pytest.param(80, 400, 0.2, id="square_20"),
        pytest.param(16, 16, 1.0, id="identity"),
    ],
)
def test_scs(perimeter, area, expected):
    metrics = geometry.ShapeMetrics(perimeter, area)
    assert scoring.scs(metrics) == pytest.approx(expected)


def test_si_circle():
    spec = synth.SynthSpec.circle(100, sides=360)
    metrics = geometry.polygon_set_metrics(
        PolygonSet.from_vertices([spec.vertices()])
    )
    expected = 360 * math.tan(math.pi / 360) / math.pi
    assert scoring.si_scs(metrics) == pytest.approx(expected, rel=1e-9)
    assert scoring.si_scs(metrics) == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("side", [1.0, 3.5, 10.0, 1234.0])
def test_si_square(side):
    metrics = geometry.ShapeMetrics(4 * side, side**2)
    assert scoring.si_scs(metrics) == pytest.approx(SQUARE_Q, rel=1e-12)
    assert scoring.si_scs(metrics) == pytest.approx(1.27324, abs=1e-5)


def test_si_star_ordering():
    q = [
        scoring.si_scs(
            geometry.polygon_set_metrics(
                PolygonSet.from_vertices([spec.vertices()])
            )
        )
        for spec in (
            synth.SynthSpec.circle(100),
            synth.SynthSpec.square(100),
            synth.SynthSpec.star(5, 100, 38),
        )
    ]
    circle, square, star = q
    assert star > square > circle


@pytest.mark.parametrize("func", [scoring.scs, scoring.si_scs])
def test_zero_area(func):
    with pytest.raises(DegenerateGeometryError):
        func(geometry.ShapeMetrics(4.0, 0.0))


def test_cb_normalize_example():
    scores = [make_score(1, 1.2732), make_score(2, 2.0), make_score(3, 3.5)]
    cb = [score.cb_scs for score in scoring.cb_normalize(scores)]
    assert cb[0] == 0.0
    assert cb[1] == pytest.approx((2.0 - 1.2732) / (3.5 - 1.2732))
    assert cb[1] == pytest.approx(0.3264, abs=1e-4)
    assert cb[2] == 1.0


def test_cb_normalize_singleton():
    (score,) = scoring.cb_normalize([make_score(1, 7.3)])
    assert score.cb_scs == 1.0


def test_cb_normalize_near_equal():
    scores = [make_score(1, SQUARE_Q), make_score(2, SQUARE_Q * (1 + 1e-15))]
    assert [s.cb_scs for s in scoring.cb_normalize(scores)] == [1.0, 1.0]


def test_cb_normalize_classes_independent(rng):
    first = [make_score(idx, rng.uniform(1, 5), 1) for idx in range(10)]
    second = [make_score(idx, rng.uniform(1, 5), 2) for idx in range(10, 25)]
    joint = scoring.cb_normalize(first + second)
    separate = scoring.cb_normalize(first) + scoring.cb_normalize(second)
    assert joint == separate


def test_cb_normalize_affine_invariant(rng):
    scores = [make_score(idx, rng.uniform(1, 5)) for idx in range(20)]
    scaled = [dataclasses.replace(s, si_scs=3.7 * s.si_scs) for s in scores]
    before = [s.cb_scs for s in scoring.cb_normalize(scores)]
    after = [s.cb_scs for s in scoring.cb_normalize(scaled)]
    np.testing.assert_allclose(after, before, atol=1e-12)
    assert max(before) == 1.0
    assert min(before) == 0.0


def test_cb_normalize_degenerate_excluded():
    scores = [
        make_score(1, 2.0),
        make_score(2, 3.0),
        make_score(3, 0.0, degenerate=True),
    ]
    cb = [score.cb_scs for score in scoring.cb_normalize(scores)]
    assert cb == [0.0, 1.0, 0.0]


def test_cb_normalize_raw_basis():
    scores = [
        dataclasses.replace(make_score(1, 1.0), raw_scs=0.5),
        dataclasses.replace(make_score(2, 1.0), raw_scs=1.5),
    ]
    cb = [s.cb_scs for s in scoring.cb_normalize(scores, basis="raw_scs")]
    assert cb == [0.0, 1.0]
    with pytest.raises(ArgumentError):
        scoring.cb_normalize(scores, basis="area")


def test_cb_normalize_empty():
    assert scoring.cb_normalize([]) == []


def test_image_scores_sum(sample):
    scores = [
        dataclasses.replace(make_score(1, 0), cb_scs=0.0),
        dataclasses.replace(make_score(2, 0), cb_scs=1.0),
        dataclasses.replace(make_score(3, 0), cb_scs=0.3264),
    ]
    images = scoring.image_scores(sample, scores)
    assert [img.image_id for img in images] == [1, 2, 3]
    assert images[0].value == pytest.approx(1.3264)
    assert images[0].instance_count == 3
    # Image 3 has no instances; image 2's instance is not in ``scores``.
    assert images[1].value == 0.0
    assert images[2].value == 0.0
    assert images[2].instance_count == 0

    duplicated = scores + [dataclasses.replace(scores[2], instance_id=9)]
    again = scoring.image_scores(sample, duplicated)
    assert again[0].value == pytest.approx(images[0].value + 0.3264)


def test_rank_images():
    scores = [
        scoring.ImageScore(3, 2.0, 1),
        scoring.ImageScore(1, 1.0, 1),
        scoring.ImageScore(2, 2.0, 1),
    ]
    assert [s.image_id for s in scoring.rank_images(scores)] == [2, 3, 1]


@pytest.mark.parametrize("method", ["scs", "si", "cb", "cb-scs"])
def test_shape_ordering(method):
    ds = synth.build_dataset([[spec] for spec in equal_area_trio()],
                             image_size=(300, 300))
    _, images = scoring.score_dataset(ds, method=method)
    circle, square, star = (img.value for img in images)
    if method in ("cb", "cb-scs"):
        assert star == 1.0
        assert circle == 0.0
    assert star > square > circle


def test_identical_squares():
    images = [
        [synth.SynthSpec.square(20, (30 + 40 * idx, 50)) for idx in range(n)]
        for n in (1, 2, 3, 0, 4)
    ]
    ds = synth.build_dataset(images, image_size=(200, 100))
    _, scores = scoring.score_dataset(ds)
    assert [img.value for img in scores] == [1.0, 2.0, 3.0, 0.0, 4.0]
    assert [img.value for img in scores] == [
        float(img.instance_count) for img in scores
    ]


def test_permutation_invariance(ladder):
    instances = list(ladder.instances)
    random.Random(4).shuffle(instances)
    shuffled = dataclasses.replace(ladder, instances=tuple(instances))

    def report(ds):
        inst, img = scoring.score_dataset(ds)
        return reports.instance_scores_csv(inst), reports.image_scores_csv(img)

    assert report(shuffled) == report(ladder)


def test_workers_invariance(ladder):
    assert scoring.score_dataset(ladder, workers=1) == scoring.score_dataset(
        ladder, workers=3
    )


def test_degenerate_instances(caplog):
    ds = Dataset(
        images=[
            ImageRecord(1, "a.png", 50, 50),
            ImageRecord(2, "b.png", 50, 50),
        ],
        instances=[
            InstanceRecord(1, 1, 1, PolygonSet.from_vertices([SQUARE_10])),
            InstanceRecord(2, 1, 1, PolygonSet.from_vertices([RECT_20_5])),
            InstanceRecord(3, 2, 1, PolygonSet.from_vertices([SLIVER])),
        ],
        categories=[CategoryInfo(1, "thing")],
    )
    instance_scores, images = scoring.score_dataset(ds)
    degenerate = instance_scores[2]
    assert degenerate.degenerate
    assert (degenerate.raw_scs, degenerate.si_scs, degenerate.cb_scs) == (
        0.0,
        0.0,
        0.0,
    )
    assert [s.cb_scs for s in instance_scores[:2]] == [0.0, 1.0]
    assert images[1].value == 0.0
    assert images[1].instance_count == 1
    assert "degenerate" in caplog.text


@pytest.mark.parametrize(
    "mask",
    [
        pytest.param(RasterRle(3, 3, (5, -1, 5)), id="negative_run"),
        pytest.param(PolygonSet(rings=((0, 0, None, 0, 1, 1),)), id="null"),
    ],
)
@pytest.mark.parametrize("workers", [1, 2])
def test_malformed_mask_scored_as_degenerate(mask, workers):
    ds = Dataset(
        images=[
            ImageRecord(1, "a.png", 50, 50),
            ImageRecord(2, "b.png", 50, 50),
        ],
        instances=[
            InstanceRecord(1, 1, 1, PolygonSet.from_vertices([SQUARE_10])),
            InstanceRecord(2, 2, 1, mask),
        ],
        categories=[CategoryInfo(1, "thing")],
    )
    instance_scores, images = scoring.score_dataset(ds, workers=workers)
    assert [s.degenerate for s in instance_scores] == [False, True]
    assert instance_scores[1].si_scs == 0.0
    assert instance_scores[0].cb_scs == 1.0
    assert [img.value for img in images] == [1.0, 0.0]
    assert images[1].instance_count == 1


def test_crowd_policy(sample):
    scored, images = scoring.score_dataset(sample, crowd="score")
    assert [s.instance_id for s in scored] == [1, 2, 3, 4]
    crowd = scored[3]
    assert (crowd.perimeter, crowd.area) == (12.0, 9.0)
    assert crowd.cb_scs == 1.0
    assert images[1].value == 1.0

    scored, images = scoring.score_dataset(sample, crowd="skip")
    assert [s.instance_id for s in scored] == [1, 2, 3]
    assert images[1].value == 0.0
    assert images[1].instance_count == 1


def test_random_method_rejected(sample):
    with pytest.raises(ArgumentError):
        scoring.score_dataset(sample, method="random")


def test_method_fields():
    assert scoring.Method("cb-scs") is scoring.Method.cb_scs
    assert scoring.Method.cb_scs.basis == "raw_scs"
    assert scoring.Method.cb.basis == "si_scs"
    assert scoring.Method.scs.field == "raw_scs"
    assert scoring.Method.si.field == "si_scs"


def test_scale_invariance_polygons(rng):
    for _ in range(50):
        ring = synth.random_star_shaped_ring(rng, int(rng.integers(3, 20)))
        reference = scoring.si_scs(
            geometry.polygon_set_metrics(PolygonSet.from_vertices([ring]))
        )
        for k in (0.5, 2.0, 10.0):
            mask = PolygonSet.from_vertices([ring * k])
            value = scoring.si_scs(geometry.polygon_set_metrics(mask))
            assert value == pytest.approx(reference, rel=1e-9)


def test_scale_invariance_digital_circles():
    q = [
        scoring.si_scs(geometry.raster_metrics(synth.rasterize_disk(radius)))
        for radius in (64, 128)
    ]
    assert abs(q[0] - q[1]) / q[1] < 0.02


def test_isoperimetric_bound_polygons(rng):
    for _ in range(1000):
        ring = synth.random_star_shaped_ring(rng, int(rng.integers(3, 30)))
        mask = PolygonSet.from_vertices([ring])
        metrics = geometry.polygon_set_metrics(mask)
        assert scoring.si_scs(metrics) >= 1 - 1e-6


def test_isoperimetric_bound_rasters(rng):
    checked = 0
    for _ in range(1000):
        height, width = (int(v) for v in rng.integers(1, 16, size=2))
        bits = rng.random((height, width)) < rng.uniform(0.05, 0.95)
        mask = RasterRle.from_bitmask(rle.BitMask(height, width, bits))
        try:
            metrics = geometry.instance_metrics(mask)
        except DegenerateGeometryError:
            continue
        assert scoring.si_scs(metrics) >= SQUARE_Q - 1e-6
        checked += 1
    assert checked > 900


def test_digital_square_minimum():
    bits = np.ones((7, 7), dtype=bool)
    metrics = geometry.raster_metrics(rle.BitMask(7, 7, bits))
    assert scoring.si_scs(metrics) == pytest.approx(SQUARE_Q, rel=1e-12)


def test_ladder_scores(ladder):
    instance_scores, images = scoring.score_dataset(ladder, method="cb")
    by_id = {s.instance_id: s for s in instance_scores}
    assert by_id[102].cb_scs == 1.0
    assert by_id[101].cb_scs == 0.0
    assert by_id[103].cb_scs == 1.0
    assert by_id[104].si_scs == pytest.approx(SQUARE_Q)
    assert by_id[102].raw_scs == pytest.approx(0.22)
    assert len(images) == 10


def test_rescored_subset_keeps_si(ladder):
    full, _ = scoring.score_dataset(ladder)
    subset = ladder.subset([1, 2, 3, 4])
    partial, _ = scoring.score_dataset(subset)
    full_by_id = {s.instance_id: s for s in full}
    for score in partial:
        assert score.si_scs == full_by_id[score.instance_id].si_scs


def test_parse_then_score(sample):
    again = dataset.parse_coco(dataset.emit_coco(sample))
    assert scoring.score_dataset(again) == scoring.score_dataset(sample)
