import collections

import numpy as np
import pytest

from .. import scoring, selector, synth
from ..scoring import ImageScore
from ..util import ArgumentError, kept_count

# Kept images at p=0.5 on the ablation ladder; pairwise different.
LADDER_KEPT = {
    "scs": {1, 3, 4, 6, 9},
    "si": {1, 2, 5, 7, 9},
    "cb": {2, 3, 5, 7, 9},
}


def image_scores(values):
    return [
        ImageScore(image_id=idx, value=value, instance_count=1)
        for idx, value in enumerate(values, 1)
    ]


@pytest.fixture(params=[0.2, 0.3, 0.4, 0.5])
def pruning_rate(request) -> float:
    return request.param


@pytest.mark.parametrize(
    "num_images, expected",
    [
        pytest.param(10, {0.2: 8, 0.3: 7, 0.4: 6, 0.5: 5}, id="D10"),
        pytest.param(117, {0.2: 94, 0.3: 82, 0.4: 70, 0.5: 59}, id="D117"),
        pytest.param(
            1000, {0.2: 800, 0.3: 700, 0.4: 600, 0.5: 500}, id="D1000"
        ),
    ],
)
def test_k_exactness(num_images, expected, pruning_rate, rng):
    values = list(rng.random(num_images))
    result = selector.select_top_k(image_scores(values), pruning_rate)
    assert result.K == expected[pruning_rate]
    assert kept_count(num_images, pruning_rate) == expected[pruning_rate]

    fraction = result.K / num_images
    slack = 1 / (2 * num_images) + 1e-12
    assert 1 - pruning_rate - slack <= fraction <= 1 - pruning_rate + slack

    random_result = selector.select_random(
        range(num_images), pruning_rate, seed=3
    )
    assert random_result.K == expected[pruning_rate]


def test_top_k_examples():
    result = selector.select_top_k(image_scores(range(10)), 0.4)
    assert result.K == 6
    assert result.kept_image_ids == (10, 9, 8, 7, 6, 5)
    assert result.num_images == 10

    result = selector.select_top_k(image_scores([1, 2, 3, 4, 5]), 0.5)
    assert result.K == 3


def test_tie_break():
    scores = image_scores([5.0, 2.0, 2.0, 1.0])
    result = selector.select_top_k(scores, 0.5)
    assert result.kept_image_ids == (1, 2)


def test_top_k_dominance(rng):
    scores = image_scores(np.round(rng.random(200), 1))
    result = selector.select_top_k(scores, 0.3)
    kept = set(result.kept_image_ids)
    kept_values = [s.value for s in scores if s.image_id in kept]
    dropped = [s for s in scores if s.image_id not in kept]
    assert min(kept_values) >= max(s.value for s in dropped)
    worst_kept = max(
        (s for s in scores if s.image_id in kept),
        key=lambda s: (-s.value, s.image_id),
    )
    for score in dropped:
        if score.value == worst_kept.value:
            assert score.image_id > worst_kept.image_id


@pytest.mark.parametrize("pruning_rate", [-0.1, 1.0, 1.5, float("nan")])
def test_invalid_pruning_rate(pruning_rate):
    with pytest.raises(ArgumentError):
        selector.select_top_k(image_scores([1.0, 2.0]), pruning_rate)
    with pytest.raises(ArgumentError):
        selector.select_random([1, 2], pruning_rate, seed=0)


def test_top_k_empty():
    with pytest.raises(ArgumentError):
        selector.select_top_k([], 0.5)


def test_random_determinism():
    ids = list(range(100, 200))
    first = selector.select_random(ids, 0.5, seed=7)
    second = selector.select_random(ids, 0.5, seed=7)
    assert first == second
    assert first.method == "random"
    assert len(set(first.kept_image_ids)) == 50
    assert set(first.kept_image_ids) <= set(ids)


def test_random_keep_all():
    result = selector.select_random([4, 5, 6], 0.0, seed=1)
    assert sorted(result.kept_image_ids) == [4, 5, 6]


def test_random_uniformity():
    counts = collections.Counter()
    trials = 10_000
    for seed in range(trials):
        result = selector.select_random(range(10), 0.5, seed)
        counts.update(result.kept_image_ids)
    for image_id in range(10):
        assert counts[image_id] / trials == pytest.approx(0.5, abs=0.02)


def test_prune_keep_all(ladder):
    result = selector.select_top_k(scoring.score_dataset(ladder)[1], 0.0)
    pruned = selector.prune(ladder, result)
    assert set(pruned.image_ids) == set(ladder.image_ids)
    assert pruned.instances == ladder.instances
    assert pruned.categories == ladder.categories


def test_prune_one_of_three(sample):
    pruned = selector.prune(sample, [2])
    assert pruned.image_ids == (2,)
    assert [inst.id for inst in pruned.instances] == [4]
    assert pruned.categories == sample.categories


def test_prune_unknown_id(sample):
    with pytest.raises(ArgumentError):
        selector.prune(sample, [1, 99])


def test_prune_instance_recount(seeded_rng):
    corpus = synth.gen_corpus(40, seed=int(seeded_rng.integers(1000)),
                              circle_sides=16)
    result = selector.select_random(corpus.image_ids, 0.4, seed=5)
    pruned = selector.prune(corpus, result)
    assert len(pruned.instances) == sum(
        corpus.instance_count(image_id) for image_id in result.kept_image_ids
    )


def test_idempotence(ladder):
    _, images = scoring.score_dataset(ladder)
    pruned = selector.prune(ladder, selector.select_top_k(images, 0.5))
    _, again = scoring.score_dataset(pruned)
    result = selector.select_top_k(again, 0.0)
    assert set(result.kept_image_ids) == set(pruned.image_ids)


@pytest.mark.parametrize("method", sorted(LADDER_KEPT))
def test_ablation_ladder(ladder, method):
    _, images = scoring.score_dataset(ladder, method=method)
    result = selector.select_top_k(images, 0.5, method=method)
    assert set(result.kept_image_ids) == LADDER_KEPT[method]
    assert result.method == method


def test_ablation_ladder_distinct():
    kept = list(LADDER_KEPT.values())
    for idx, first in enumerate(kept):
        for second in kept[idx + 1:]:
            assert first != second
