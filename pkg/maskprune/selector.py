"""
Image selection: top-K by score, or a seeded random baseline.
"""
import dataclasses
import logging
import typing
from typing import Sequence, Tuple

import numpy as np

from .dataset import Dataset
from .scoring import ImageScore, rank_images
from .util import ArgumentError, check_pruning_rate, kept_count

logger = logging.getLogger(__name__)

__all__ = [
    'SelectionResult',
    'select_top_k',
    'select_random',
    'prune',
]


@dataclasses.dataclass(frozen=True)
class SelectionResult:
    """
    The images kept after pruning.

    Parameters
    ----------
    kept_image_ids : tuple of int
        Kept images in rank order, best first (draw order for ``random``).

    pruning_rate : float
        Fraction of images removed, in ``[0, 1)``.

    method : str
        The method that produced the selection.

    num_images : int
        Size of the dataset the selection was made from.
    """
    kept_image_ids: Tuple[int, ...]
    pruning_rate: float
    method: str
    num_images: int

    @property
    def K(self) -> int:  # noqa: N802
        return len(self.kept_image_ids)


def select_top_k(image_scores: Sequence[ImageScore], pruning_rate: float,
                 method: str = 'cb') -> SelectionResult:
    """
    Keep the ``K = round_half_up((1 - p) * D)`` highest-scored images.

    Ties are broken by ascending image id.

    Raises
    ------
    ArgumentError
        If ``pruning_rate`` is outside of ``[0, 1)`` or there are no scores.
    """
    pruning_rate = check_pruning_rate(pruning_rate)
    if not image_scores:
        raise ArgumentError('No image scores to select from')

    num_images = len(image_scores)
    k = kept_count(num_images, pruning_rate)
    ranked = rank_images(image_scores)
    logger.info('Keeping %d of %d images (p=%g, method=%s)', k, num_images,
                pruning_rate, method)
    return SelectionResult(
        kept_image_ids=tuple(score.image_id for score in ranked[:k]),
        pruning_rate=pruning_rate,
        method=str(method),
        num_images=num_images,
    )


def select_random(image_ids: Sequence[int], pruning_rate: float,
                  seed: int) -> SelectionResult:
    """
    Keep a uniform sample of ``K`` images drawn without replacement.

    The same ``seed`` and ``image_ids`` always give the same selection.

    Raises
    ------
    ArgumentError
        If ``pruning_rate`` is outside of ``[0, 1)``.
    """
    pruning_rate = check_pruning_rate(pruning_rate)
    image_ids = list(image_ids)
    k = kept_count(len(image_ids), pruning_rate)
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(image_ids), size=k, replace=False)
    logger.info('Randomly keeping %d of %d images (p=%g, seed=%d)', k,
                len(image_ids), pruning_rate, seed)
    return SelectionResult(
        kept_image_ids=tuple(image_ids[int(idx)] for idx in picked),
        pruning_rate=pruning_rate,
        method='random',
        num_images=len(image_ids),
    )


def prune(dataset: Dataset,
          selection: typing.Union[SelectionResult, Sequence[int]]
          ) -> Dataset:
    """
    The dataset restricted to the selected images and their annotations.

    Raises
    ------
    ArgumentError
        If the selection names an image that is not in ``dataset``.
    """
    if isinstance(selection, SelectionResult):
        selection = selection.kept_image_ids
    return dataset.subset(selection)
