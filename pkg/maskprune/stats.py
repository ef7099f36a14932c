"""
Distribution reports: instances per class, instance area histograms, and
class coverage of a pruned dataset relative to the full one.
"""
import collections
import dataclasses
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import geometry
from .dataset import Dataset
from .util import ArgumentError, DegenerateGeometryError, IntegrityError

logger = logging.getLogger(__name__)

__all__ = [
    'DEFAULT_AREA_EDGES',
    'AreaHistogram',
    'DistributionReport',
    'class_histogram',
    'area_distribution',
    'distribution_report',
    'coverage_delta',
]

# px^2; includes the COCO small/medium/large boundaries 32**2 and 96**2.
DEFAULT_AREA_EDGES = (
    8 ** 2,
    16 ** 2,
    32 ** 2,
    64 ** 2,
    96 ** 2,
    128 ** 2,
    256 ** 2,
    512 ** 2,
    1024 ** 2,
)


@dataclasses.dataclass(frozen=True)
class AreaHistogram:
    """
    Instance areas bucketed by ``edges``.

    ``counts[0]`` holds areas in ``(0, edges[0])``, ``counts[i]`` those in
    ``[edges[i - 1], edges[i])`` and ``counts[-1]`` those at or above
    ``edges[-1]``.  Zero-area instances are only counted in ``degenerate``.
    """
    edges: Tuple[float, ...]
    counts: Tuple[int, ...]
    degenerate: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts)

    def bucket_labels(self) -> List[str]:
        edges = [f'{edge:g}' for edge in self.edges]
        labels = [f'(0, {edges[0]})']
        labels += [f'[{low}, {high})' for low, high in zip(edges, edges[1:])]
        labels.append(f'[{edges[-1]}, inf)')
        return labels


@dataclasses.dataclass(frozen=True)
class DistributionReport:
    num_images: int
    num_instances: int
    class_counts: Dict[int, int]
    area_histogram: AreaHistogram
    class_area_quartiles: Dict[int, Tuple[float, float, float]]

    def to_dict(self) -> dict:
        """JSON-ready form; category keys become strings."""
        hist = self.area_histogram
        return {
            'images': self.num_images,
            'instances': self.num_instances,
            'degenerate': hist.degenerate,
            'class_counts': {
                str(cat): count for cat, count in self.class_counts.items()
            },
            'area_histogram': {
                'edges': list(hist.edges),
                'counts': list(hist.counts),
                'labels': hist.bucket_labels(),
            },
            'class_area_quartiles': {
                str(cat): list(quartiles)
                for cat, quartiles in self.class_area_quartiles.items()
            },
        }


def class_histogram(dataset: Dataset) -> Dict[int, int]:
    """Instances per category id, zero-count categories included."""
    counts = collections.Counter(inst.category_id
                                 for inst in dataset.instances)
    return {cat: counts.get(cat, 0) for cat in sorted(dataset.category_ids)}


def _check_edges(edges: Sequence[float]) -> Tuple[float, ...]:
    edges = tuple(float(edge) for edge in edges)
    if not edges:
        raise ArgumentError('At least one bucket edge is required')
    if edges[0] <= 0 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ArgumentError(
            f'Bucket edges must be positive and ascending: {edges}'
        )
    return edges


def _instance_areas(dataset: Dataset) -> Dict[int, Optional[float]]:
    """Recomputed area per instance id; ``None`` for degenerate masks."""
    areas = {}
    for inst in dataset.instances:
        try:
            metrics = geometry.instance_metrics(inst.mask,
                                                instance_id=inst.id)
        except DegenerateGeometryError:
            areas[inst.id] = None
        else:
            areas[inst.id] = metrics.area
    return areas


def _histogram(areas: Sequence[Optional[float]],
               edges: Tuple[float, ...]) -> AreaHistogram:
    valid = np.asarray([area for area in areas if area is not None],
                       dtype=float)
    buckets = np.searchsorted(np.asarray(edges), valid, side='right')
    counts = np.bincount(buckets, minlength=len(edges) + 1)
    return AreaHistogram(
        edges=edges,
        counts=tuple(int(count) for count in counts),
        degenerate=len(areas) - len(valid),
    )


def area_distribution(dataset: Dataset,
                      edges: Sequence[float] = DEFAULT_AREA_EDGES
                      ) -> AreaHistogram:
    """
    Histogram of recomputed instance areas.

    Parameters
    ----------
    dataset : Dataset
        Source of instances; ``area`` fields of the source file are ignored.

    edges : sequence of float
        Positive, strictly ascending bucket edges. [px^2]

    Raises
    ------
    ArgumentError
        If ``edges`` is empty or not ascending.
    """
    edges = _check_edges(edges)
    return _histogram(list(_instance_areas(dataset).values()), edges)


def distribution_report(dataset: Dataset,
                        edges: Sequence[float] = DEFAULT_AREA_EDGES
                        ) -> DistributionReport:
    """Class counts, area histogram and per-class area quartiles."""
    edges = _check_edges(edges)
    areas = _instance_areas(dataset)

    per_class: Dict[int, List[float]] = {
        cat: [] for cat in sorted(dataset.category_ids)
    }
    for inst in dataset.instances:
        area = areas[inst.id]
        if area is not None:
            per_class.setdefault(inst.category_id, []).append(area)

    quartiles = {}
    for cat, values in per_class.items():
        if values:
            q1, q2, q3 = np.percentile(values, [25, 50, 75])
            quartiles[cat] = (float(q1), float(q2), float(q3))
        else:
            quartiles[cat] = (math.nan, math.nan, math.nan)

    return DistributionReport(
        num_images=len(dataset.images),
        num_instances=len(dataset.instances),
        class_counts=class_histogram(dataset),
        area_histogram=_histogram(list(areas.values()), edges),
        class_area_quartiles=quartiles,
    )


def coverage_delta(full: Dataset, pruned: Dataset) -> Dict[int, float]:
    """
    Fraction of each category's instances retained in ``pruned``.

    Returns
    -------
    dict
        Category id to ``kept / full`` instance count, for every category of
        ``full``.  Categories without instances in ``full`` map to ``nan``.

    Raises
    ------
    IntegrityError
        If ``pruned`` has a category, or instances of a category, that
        ``full`` does not.
    """
    full_counts = class_histogram(full)
    pruned_counts = class_histogram(pruned)

    for cat, count in pruned_counts.items():
        if cat not in full_counts:
            raise IntegrityError(
                f'Category {cat} is in the pruned dataset only'
            )
        if count > full_counts[cat]:
            raise IntegrityError(
                f'Category {cat} has {count} pruned instances but only '
                f'{full_counts[cat]} in the full dataset'
            )

    return {
        cat: (pruned_counts.get(cat, 0) / count) if count else math.nan
        for cat, count in full_counts.items()
    }
