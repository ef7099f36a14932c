"""
Training-free image importance from instance boundary complexity.

Scoring runs in two phases:

1. Per instance (parallel over instances): perimeter and area, the raw
   shape complexity ``P / A`` and its scale-invariant form
   ``P**2 / (4 * pi * A)``.
2. Global reduction: per-category min-max normalization of the chosen basis
   score across the whole dataset, then summation per image.

Results are a pure function of the dataset content; neither annotation order
nor worker count changes a value.
"""
import concurrent.futures
import dataclasses
import enum
import logging
import math
import time
import typing
from typing import Dict, List, Sequence, Tuple

from . import geometry
from .dataset import Dataset, MaskGeometry
from .util import ArgumentError, DegenerateGeometryError, GeometryError

logger = logging.getLogger(__name__)

__all__ = [
    'Method',
    'CrowdPolicy',
    'InstanceScore',
    'ImageScore',
    'scs',
    'si_scs',
    'measure_instance',
    'cb_normalize',
    'image_scores',
    'rank_images',
    'score_dataset',
]

# Relative tolerance under which a category's score range counts as empty.
RANGE_RTOL = 1e-9


class Method(str, enum.Enum):
    """Ranking method; the ablation ladder plus the random baseline."""
    scs = 'scs'
    si = 'si'
    cb = 'cb'
    cb_scs = 'cb-scs'
    random = 'random'

    @property
    def basis(self) -> str:
        """Instance score field that class balancing normalizes."""
        return 'raw_scs' if self is Method.cb_scs else 'si_scs'

    @property
    def field(self) -> str:
        """Instance score field summed into the image score."""
        return {
            Method.scs: 'raw_scs',
            Method.si: 'si_scs',
            Method.cb: 'cb_scs',
            Method.cb_scs: 'cb_scs',
        }[self]


class CrowdPolicy(str, enum.Enum):
    score = 'score'
    skip = 'skip'


@dataclasses.dataclass(frozen=True)
class InstanceScore:
    instance_id: int
    image_id: int
    category_id: int
    perimeter: float
    area: float
    raw_scs: float
    si_scs: float
    cb_scs: float = 0.0
    degenerate: bool = False


@dataclasses.dataclass(frozen=True)
class ImageScore:
    image_id: int
    value: float
    instance_count: int


def _check_area(metrics: geometry.ShapeMetrics):
    if not metrics.area > 0.0:
        raise DegenerateGeometryError(
            f'Cannot score a mask of area {metrics.area}'
        )


def scs(metrics: geometry.ShapeMetrics) -> float:
    """
    Shape complexity: perimeter over area. [1/px]

    Raises
    ------
    DegenerateGeometryError
        If the area is not positive.
    """
    _check_area(metrics)
    return metrics.perimeter / metrics.area


def si_scs(metrics: geometry.ShapeMetrics) -> float:
    """
    Scale-invariant shape complexity relative to a circle.

    ``P**2 / (4 * pi * A)``: 1 for a circle, ``4 / pi`` for a square, growing
    with boundary intricacy, unchanged under uniform scaling.

    Raises
    ------
    DegenerateGeometryError
        If the area is not positive.
    """
    _check_area(metrics)
    return metrics.perimeter ** 2 / (4.0 * math.pi * metrics.area)


def measure_instance(instance_id: int, image_id: int, category_id: int,
                     mask: MaskGeometry) -> InstanceScore:
    """
    Phase 1 for a single instance.

    Masks that cannot be measured score zero and are flagged
    ``degenerate``; empty and malformed masks alike.
    """
    try:
        metrics = geometry.instance_metrics(mask, instance_id=instance_id)
    except GeometryError as ex:
        logger.debug('Unmeasurable instance %d: %s', instance_id, ex)
        return InstanceScore(
            instance_id=instance_id, image_id=image_id,
            category_id=category_id, perimeter=0.0, area=0.0,
            raw_scs=0.0, si_scs=0.0, degenerate=True,
        )

    return InstanceScore(
        instance_id=instance_id,
        image_id=image_id,
        category_id=category_id,
        perimeter=metrics.perimeter,
        area=metrics.area,
        raw_scs=scs(metrics),
        si_scs=si_scs(metrics),
    )


def _measure_chunk(chunk: Sequence[tuple]) -> List[InstanceScore]:
    """Worker entry point: measure ``(id, image_id, category_id, mask)``."""
    return [measure_instance(*item) for item in chunk]


def _chunks(items: Sequence, count: int) -> List[Sequence]:
    size = max(1, math.ceil(len(items) / count))
    return [items[idx:idx + size] for idx in range(0, len(items), size)]


def _measure_all(items: Sequence[tuple],
                 workers: int) -> List[InstanceScore]:
    if workers <= 1 or len(items) < 2:
        return _measure_chunk(items)

    # Several chunks per worker to even out mask size differences;
    # ``map`` yields in submission order.
    chunks = _chunks(items, workers * 4)
    results: List[InstanceScore] = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
        for chunk_scores in ex.map(_measure_chunk, chunks):
            results.extend(chunk_scores)
    return results


def cb_normalize(scores: Sequence[InstanceScore],
                 basis: str = 'si_scs') -> List[InstanceScore]:
    """
    Class-balance ``basis`` scores with a per-category min-max scaling.

    Parameters
    ----------
    scores : sequence of InstanceScore
        Every scored instance of the dataset.  Categories are normalized
        independently.

    basis : {'si_scs', 'raw_scs'}
        The score to normalize.

    Returns
    -------
    list of InstanceScore
        Copies of ``scores`` (same order) with ``cb_scs`` set.  Within a
        category, the minimum maps to 0.0 and the maximum to 1.0; a
        category whose scores are all equal maps to 1.0.  Degenerate
        instances get 0.0 and do not take part in the min/max.
    """
    if basis not in ('si_scs', 'raw_scs'):
        raise ArgumentError(f'Unsupported normalization basis: {basis!r}')

    bounds: Dict[int, Tuple[float, float]] = {}
    for score in scores:
        if score.degenerate:
            continue
        value = getattr(score, basis)
        low, high = bounds.get(score.category_id, (value, value))
        bounds[score.category_id] = (min(low, value), max(high, value))

    normalized = []
    for score in scores:
        if score.degenerate:
            cb = 0.0
        else:
            low, high = bounds[score.category_id]
            if math.isclose(low, high, rel_tol=RANGE_RTOL):
                cb = 1.0
            else:
                cb = (getattr(score, basis) - low) / (high - low)
                cb = min(1.0, max(0.0, cb))
        normalized.append(dataclasses.replace(score, cb_scs=cb))
    return normalized


def image_scores(dataset: Dataset, scores: Sequence[InstanceScore],
                 field: str = 'cb_scs') -> List[ImageScore]:
    """
    Sum instance scores per image.

    Parameters
    ----------
    dataset : Dataset
        Supplies the images (all of them, including instance-free ones) and
        the instance count G_i of each.

    scores : sequence of InstanceScore
        Scored instances; instances missing here contribute nothing.

    field : str
        The instance score field to sum.

    Returns
    -------
    list of ImageScore
        One per image, in dataset image order.  ``value`` is 0 for an
        image without instances, or when none of its instances contributes
        a score: all degenerate, or all crowd under ``CrowdPolicy.skip``.
        ``instance_count`` counts every instance either way.
    """
    per_image: Dict[int, List[float]] = {}
    for score in scores:
        value = 0.0 if score.degenerate else getattr(score, field)
        per_image.setdefault(score.image_id, []).append(value)

    return [
        ImageScore(
            image_id=image_id,
            # fsum is exact, so the sum does not depend on instance order.
            value=math.fsum(per_image.get(image_id, ())),
            instance_count=dataset.instance_count(image_id),
        )
        for image_id in dataset.image_ids
    ]


def rank_images(scores: typing.Iterable[ImageScore]) -> List[ImageScore]:
    """Image scores by value, descending; ties by ascending image id."""
    return sorted(scores, key=lambda score: (-score.value, score.image_id))


def score_dataset(
        dataset: Dataset,
        method: typing.Union[Method, str] = Method.cb,
        crowd: typing.Union[CrowdPolicy, str] = CrowdPolicy.score,
        workers: int = 1,
        ) -> Tuple[List[InstanceScore], List[ImageScore]]:
    """
    Score every instance and image of ``dataset``.

    Parameters
    ----------
    dataset : Dataset
        The dataset to score.

    method : Method or str
        ``'cb'`` (default), ``'cb-scs'``, ``'si'`` or ``'scs'``; decides the
        image score.  ``cb_scs`` is always filled in.

    crowd : CrowdPolicy or str
        ``'skip'`` leaves crowd instances out of the instance scores; they
        still count towards each image's instance count.

    workers : int
        Processes used for per-instance measurement.

    Returns
    -------
    instance_scores : list of InstanceScore
        Sorted by instance id.

    image_scores : list of ImageScore
        In dataset image order.
    """
    method = Method(method)
    crowd = CrowdPolicy(crowd)
    if method is Method.random:
        raise ArgumentError('The random baseline does not score images')

    items = [
        (inst.id, inst.image_id, inst.category_id, inst.mask)
        for inst in dataset.instances
        if not (crowd is CrowdPolicy.skip and inst.is_crowd)
    ]
    items.sort(key=lambda item: item[0])
    t0 = time.monotonic()
    measured = _measure_all(items, workers)
    logger.info('Measured %d instances in %.2f s (workers=%d)',
                len(measured), time.monotonic() - t0, workers)

    degenerate = [score.instance_id for score in measured
                  if score.degenerate]
    if degenerate:
        logger.warning(
            '%d degenerate instance(s) scored as zero: %s%s',
            len(degenerate), ', '.join(str(id_) for id_ in degenerate[:10]),
            ' ...' if len(degenerate) > 10 else '',
        )

    normalized = cb_normalize(measured, basis=method.basis)
    return normalized, image_scores(dataset, normalized, field=method.field)
