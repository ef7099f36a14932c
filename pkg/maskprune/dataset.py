"""
In-memory instance segmentation datasets and COCO-style annotation files.

Records keep the mapping they were parsed from (``source``), so emitting a
dataset reproduces every field of the input, including ``area`` and ``bbox``
values that are never used for scoring.
"""
import dataclasses
import functools
import logging
import math
import numbers
import typing
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import orjson

from . import rle
from .util import (AnnotationParseError, ArgumentError, GeometryError,
                   IntegrityError)

logger = logging.getLogger(__name__)

__all__ = [
    'CategoryInfo',
    'ImageRecord',
    'PolygonSet',
    'RasterRle',
    'InstanceRecord',
    'Dataset',
    'Diagnostic',
    'parse_coco',
    'emit_coco',
    'load_coco',
    'validate',
]

_ARRAY_KEYS = ('images', 'annotations', 'categories')


@dataclasses.dataclass(frozen=True)
class CategoryInfo:
    id: int
    name: str
    source: Optional[Mapping] = dataclasses.field(
        default=None, compare=False, repr=False)

    def to_coco(self) -> dict:
        if self.source is not None:
            return dict(self.source)
        return {'id': self.id, 'name': self.name}


@dataclasses.dataclass(frozen=True)
class ImageRecord:
    id: int
    file_name: str
    width: int
    height: int
    source: Optional[Mapping] = dataclasses.field(
        default=None, compare=False, repr=False)

    def to_coco(self) -> dict:
        if self.source is not None:
            return dict(self.source)
        return {
            'id': self.id,
            'file_name': self.file_name,
            'width': self.width,
            'height': self.height,
        }


@dataclasses.dataclass(frozen=True)
class PolygonSet:
    """
    One or more polygon rings, each stored as flat ``(x0, y0, x1, y1, ...)``
    pixel coordinates exactly as COCO writes them.

    Rings are disjoint parts of the instance, not holes.
    """
    rings: Tuple[Tuple[float, ...], ...]

    @classmethod
    def from_vertices(cls, rings: typing.Iterable) -> 'PolygonSet':
        """Build from an iterable of ``(N, 2)`` vertex arrays."""
        return cls(rings=tuple(
            tuple(np.asarray(ring, dtype=float).reshape(-1).tolist())
            for ring in rings
        ))

    @property
    def vertices(self) -> List[np.ndarray]:
        """Rings as ``(N, 2)`` float arrays."""
        return [np.asarray(ring, dtype=float).reshape(-1, 2)
                for ring in self.rings]

    def to_coco(self) -> list:
        return [list(ring) for ring in self.rings]


@dataclasses.dataclass(frozen=True)
class RasterRle:
    """
    A run-length encoded mask.

    ``compressed`` records whether the source used the compressed ``counts``
    string, so that emission keeps the same value shape.
    """
    height: int
    width: int
    runs: Tuple[int, ...]
    compressed: bool = dataclasses.field(default=False, compare=False)

    @classmethod
    def from_bitmask(cls, mask: rle.BitMask,
                     compressed: bool = False) -> 'RasterRle':
        return cls(height=mask.height, width=mask.width,
                   runs=tuple(rle.rle_encode(mask)), compressed=compressed)

    def to_bitmask(self) -> rle.BitMask:
        return rle.rle_decode(self.runs, self.height, self.width)

    def to_coco(self) -> dict:
        if self.compressed:
            counts = rle.coco_counts_encode(self.runs)
        else:
            counts = list(self.runs)
        return {'size': [self.height, self.width], 'counts': counts}


MaskGeometry = Union[PolygonSet, RasterRle]


@dataclasses.dataclass(frozen=True)
class InstanceRecord:
    id: int
    image_id: int
    category_id: int
    mask: MaskGeometry
    is_crowd: bool = False
    source: Optional[Mapping] = dataclasses.field(
        default=None, compare=False, repr=False)

    def to_coco(self) -> dict:
        if self.source is not None:
            return dict(self.source)
        return {
            'id': self.id,
            'image_id': self.image_id,
            'category_id': self.category_id,
            'segmentation': self.mask.to_coco(),
            'iscrowd': int(self.is_crowd),
        }


@dataclasses.dataclass(frozen=True)
class Dataset:
    """
    An instance segmentation dataset: images, their instances, categories.

    Immutable once built; safe to share between readers.
    """
    images: Tuple[ImageRecord, ...]
    instances: Tuple[InstanceRecord, ...]
    categories: Tuple[CategoryInfo, ...]
    passthrough: Mapping = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        for name in ('images', 'instances', 'categories'):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def __repr__(self):
        return (
            f'<Dataset images={len(self.images)} '
            f'instances={len(self.instances)} '
            f'categories={len(self.categories)}>'
        )

    @functools.cached_property
    def image_ids(self) -> Tuple[int, ...]:
        return tuple(image.id for image in self.images)

    @functools.cached_property
    def category_ids(self) -> Tuple[int, ...]:
        return tuple(category.id for category in self.categories)

    @functools.cached_property
    def instances_by_image(self) -> Dict[int, Tuple[InstanceRecord, ...]]:
        """Image id to its instances (in annotation order), for all images."""
        by_image: Dict[int, List[InstanceRecord]] = {
            image_id: [] for image_id in self.image_ids
        }
        for inst in self.instances:
            by_image.setdefault(inst.image_id, []).append(inst)
        return {key: tuple(value) for key, value in by_image.items()}

    def instance_count(self, image_id: int) -> int:
        """G_i: the number of instances annotated on ``image_id``."""
        return len(self.instances_by_image.get(image_id, ()))

    def subset(self, image_ids: typing.Iterable[int]) -> 'Dataset':
        """
        The dataset restricted to ``image_ids``, keeping all categories.

        Images keep their original relative order.

        Raises
        ------
        ArgumentError
            If an id is not an image of this dataset.
        """
        keep = set(image_ids)
        unknown = keep.difference(self.image_ids)
        if unknown:
            raise ArgumentError(
                f'Unknown image ids: {sorted(unknown)[:10]}'
            )
        return Dataset(
            images=tuple(img for img in self.images if img.id in keep),
            instances=tuple(inst for inst in self.instances
                            if inst.image_id in keep),
            categories=self.categories,
            passthrough=self.passthrough,
        )


@dataclasses.dataclass(frozen=True)
class Diagnostic:
    """A single invariant violation found by `validate`."""
    kind: str
    message: str
    instance_id: Optional[int] = None
    image_id: Optional[int] = None

    def __str__(self):
        return f'[{self.kind}] {self.message}'


def _require(record: Mapping, key: str, what: str):
    try:
        return record[key]
    except KeyError:
        raise AnnotationParseError(f'{what} is missing {key!r}') from None
    except TypeError:
        raise AnnotationParseError(f'{what} is not an object') from None


def _is_number(value) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _as_int(value, what: str) -> int:
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise AnnotationParseError(f'{what} is not an integer: {value!r}')
    return value


def _int_field(record: Mapping, key: str, what: str) -> int:
    return _as_int(_require(record, key, what), f'{what} {key!r}')


def _parse_segmentation(segmentation, annotation_id) -> MaskGeometry:
    what = f'Annotation {annotation_id} segmentation'
    if isinstance(segmentation, list):
        rings = []
        for ring in segmentation:
            if not isinstance(ring, list):
                raise AnnotationParseError(
                    f'Annotation {annotation_id}: polygon ring is not a list'
                )
            if not all(_is_number(coord) for coord in ring):
                raise AnnotationParseError(
                    f'Annotation {annotation_id}: polygon ring has '
                    f'non-numeric coordinates'
                )
            if len(ring) % 2:
                raise GeometryError(
                    f'Annotation {annotation_id}: polygon ring has an odd '
                    f'number of coordinates ({len(ring)})'
                )
            rings.append(tuple(ring))
        return PolygonSet(rings=tuple(rings))

    if isinstance(segmentation, dict):
        size = _require(segmentation, 'size', what)
        if not isinstance(size, list) or len(size) != 2:
            raise AnnotationParseError(
                f'{what} size must be [height, width], got {size!r}'
            )
        height, width = (_as_int(dim, f'{what} size') for dim in size)
        counts = _require(segmentation, 'counts', what)
        compressed = isinstance(counts, (str, bytes))
        if compressed:
            runs = rle.coco_counts_decode(counts)
        elif isinstance(counts, list):
            runs = [_as_int(run, f'{what} run') for run in counts]
        else:
            raise AnnotationParseError(
                f'{what} counts must be a string or a list'
            )
        if any(run < 0 for run in runs):
            raise GeometryError(
                f'Annotation {annotation_id}: RLE has negative runs'
            )
        total = sum(runs)
        if total != height * width:
            raise GeometryError(
                f'Annotation {annotation_id}: RLE runs sum to {total}, '
                f'expected {height}x{width}={height * width}'
            )
        return RasterRle(height=height, width=width, runs=tuple(runs),
                         compressed=compressed)

    raise AnnotationParseError(
        f'Annotation {annotation_id}: unsupported segmentation '
        f'{type(segmentation).__name__}'
    )


def parse_coco(document: Union[bytes, str]) -> Dataset:
    """
    Parse a COCO-style instance segmentation annotation file.

    Parameters
    ----------
    document : bytes or str
        The JSON document, with ``images``, ``annotations`` and
        ``categories`` arrays.

    Returns
    -------
    Dataset
        Records in document order.  Top-level fields other than the three
        arrays are retained in ``passthrough``.

    Raises
    ------
    AnnotationParseError
        Malformed JSON (with the offset of the failure), missing fields, or
        fields of the wrong type.

    IntegrityError
        An annotation refers to an image or category that does not exist, or
        ids are duplicated.

    GeometryError
        An RLE mask with negative runs or runs that do not cover its
        declared size.
    """
    try:
        doc = orjson.loads(document)
    except orjson.JSONDecodeError as ex:
        raise AnnotationParseError(
            f'Malformed annotation document: {ex.msg}', offset=ex.pos
        ) from None

    if not isinstance(doc, dict):
        raise AnnotationParseError('Annotation document is not an object')

    for key in _ARRAY_KEYS:
        if not isinstance(doc.get(key), list):
            raise AnnotationParseError(
                f'Annotation document has no {key!r} array'
            )

    categories = []
    for idx, cat in enumerate(doc['categories']):
        what = f'Category #{idx}'
        categories.append(
            CategoryInfo(id=_int_field(cat, 'id', what),
                         name=str(_require(cat, 'name', what)),
                         source=cat)
        )

    images = []
    for idx, img in enumerate(doc['images']):
        what = f'Image #{idx}'
        images.append(
            ImageRecord(id=_int_field(img, 'id', what),
                        file_name=str(_require(img, 'file_name', what)),
                        width=_int_field(img, 'width', what),
                        height=_int_field(img, 'height', what),
                        source=img)
        )

    _check_unique('image', [img.id for img in images])
    _check_unique('category', [cat.id for cat in categories])
    image_ids = {img.id for img in images}
    category_ids = {cat.id for cat in categories}

    instances = []
    for idx, ann in enumerate(doc['annotations']):
        what = f'Annotation #{idx}'
        ann_id = _int_field(ann, 'id', what)
        image_id = _int_field(ann, 'image_id', what)
        category_id = _int_field(ann, 'category_id', what)
        if image_id not in image_ids:
            raise IntegrityError(
                f'Annotation {ann_id} refers to missing image {image_id}',
                annotation_id=ann_id,
            )
        if category_id not in category_ids:
            raise IntegrityError(
                f'Annotation {ann_id} refers to missing category '
                f'{category_id}',
                annotation_id=ann_id,
            )
        instances.append(
            InstanceRecord(
                id=ann_id,
                image_id=image_id,
                category_id=category_id,
                mask=_parse_segmentation(
                    _require(ann, 'segmentation', what), ann_id),
                is_crowd=bool(ann.get('iscrowd', 0)),
                source=ann,
            )
        )

    _check_unique('annotation', [inst.id for inst in instances])
    passthrough = {key: value for key, value in doc.items()
                   if key not in _ARRAY_KEYS}
    return Dataset(images=tuple(images), instances=tuple(instances),
                   categories=tuple(categories), passthrough=passthrough)


def _check_unique(kind: str, ids: Sequence[int]):
    seen = set()
    for id_ in ids:
        if id_ in seen:
            raise IntegrityError(
                f'Duplicate {kind} id {id_}',
                annotation_id=id_ if kind == 'annotation' else None,
            )
        seen.add(id_)


def load_coco(path) -> Dataset:
    """Read and parse the annotation file at ``path``."""
    with open(path, 'rb') as f:
        document = f.read()
    dataset = parse_coco(document)
    logger.info('Loaded %s: %d images, %d instances, %d categories',
                path, len(dataset.images), len(dataset.instances),
                len(dataset.categories))
    return dataset


def emit_coco(dataset: Dataset,
              kept_image_ids: Optional[typing.Iterable[int]] = None
              ) -> bytes:
    """
    Serialize ``dataset`` (or only ``kept_image_ids`` of it) to COCO JSON.

    Parameters
    ----------
    dataset : Dataset
        The dataset to write.

    kept_image_ids : iterable of int, optional
        Images to keep.  Defaults to all images.  All categories and
        passthrough fields are always written.

    Returns
    -------
    bytes
        Indented JSON, field names and value shapes as in the source.

    Raises
    ------
    ArgumentError
        If ``kept_image_ids`` contains an id that is not in the dataset.
    """
    if kept_image_ids is not None:
        dataset = dataset.subset(kept_image_ids)

    doc = dict(dataset.passthrough)
    doc['images'] = [img.to_coco() for img in dataset.images]
    doc['annotations'] = [inst.to_coco() for inst in dataset.instances]
    doc['categories'] = [cat.to_coco() for cat in dataset.categories]
    return orjson.dumps(doc, option=orjson.OPT_INDENT_2) + b'\n'


def _ring_diagnostics(inst: InstanceRecord) -> List[Diagnostic]:
    found = []
    mask = inst.mask
    if isinstance(mask, PolygonSet):
        if not mask.rings:
            found.append(Diagnostic(
                'geometry', f'Instance {inst.id} has no polygon rings',
                instance_id=inst.id, image_id=inst.image_id))
        for idx, ring in enumerate(mask.rings):
            if len(ring) % 2:
                found.append(Diagnostic(
                    'geometry',
                    f'Instance {inst.id} ring {idx} has an odd number of '
                    f'coordinates',
                    instance_id=inst.id, image_id=inst.image_id))
            elif len(ring) < 6:
                found.append(Diagnostic(
                    'geometry',
                    f'Instance {inst.id} ring {idx} has {len(ring) // 2} '
                    f'vertices (at least 3 required)',
                    instance_id=inst.id, image_id=inst.image_id))
            if not all(_is_number(coord) for coord in ring):
                found.append(Diagnostic(
                    'geometry',
                    f'Instance {inst.id} ring {idx} has non-numeric '
                    f'coordinates',
                    instance_id=inst.id, image_id=inst.image_id))
            elif not all(math.isfinite(coord) for coord in ring):
                found.append(Diagnostic(
                    'geometry',
                    f'Instance {inst.id} ring {idx} has non-finite '
                    f'coordinates',
                    instance_id=inst.id, image_id=inst.image_id))
    elif isinstance(mask, RasterRle):
        runs = mask.runs
        if not all(isinstance(run, numbers.Integral)
                   and not isinstance(run, bool) for run in runs):
            found.append(Diagnostic(
                'geometry', f'Instance {inst.id} has non-integer RLE runs',
                instance_id=inst.id, image_id=inst.image_id))
            return found
        if any(run < 0 for run in runs):
            found.append(Diagnostic(
                'geometry', f'Instance {inst.id} has negative RLE runs',
                instance_id=inst.id, image_id=inst.image_id))
        total = sum(runs)
        if total != mask.height * mask.width:
            found.append(Diagnostic(
                'geometry',
                f'Instance {inst.id} RLE runs sum to {total}, expected '
                f'{mask.height * mask.width}',
                instance_id=inst.id, image_id=inst.image_id))
        if any(a == 0 and b == 0 for a, b in zip(runs, runs[1:])):
            found.append(Diagnostic(
                'geometry',
                f'Instance {inst.id} RLE has consecutive empty runs',
                instance_id=inst.id, image_id=inst.image_id))
    else:
        found.append(Diagnostic(
            'geometry',
            f'Instance {inst.id} has unknown mask type '
            f'{type(mask).__name__}',
            instance_id=inst.id, image_id=inst.image_id))
    return found


def validate(dataset: Dataset) -> List[Diagnostic]:
    """
    Collect every invariant violation in ``dataset`` without raising.

    Returns
    -------
    list of Diagnostic
        Empty if and only if the dataset is valid.
    """
    found: List[Diagnostic] = []

    for kind, ids in (
            ('image', [img.id for img in dataset.images]),
            ('category', [cat.id for cat in dataset.categories]),
            ('instance', [inst.id for inst in dataset.instances])):
        seen = set()
        for id_ in ids:
            if id_ in seen:
                found.append(Diagnostic('duplicate',
                                        f'Duplicate {kind} id {id_}'))
            seen.add(id_)

    for cat in dataset.categories:
        if not cat.name:
            found.append(Diagnostic('category',
                                    f'Category {cat.id} has an empty name'))

    for img in dataset.images:
        if img.width < 1 or img.height < 1:
            found.append(Diagnostic(
                'image',
                f'Image {img.id} has size {img.width}x{img.height}',
                image_id=img.id))

    image_ids = set(dataset.image_ids)
    category_ids = set(dataset.category_ids)
    for inst in dataset.instances:
        if inst.image_id not in image_ids:
            found.append(Diagnostic(
                'integrity',
                f'Instance {inst.id} refers to missing image '
                f'{inst.image_id}',
                instance_id=inst.id, image_id=inst.image_id))
        if inst.category_id not in category_ids:
            found.append(Diagnostic(
                'integrity',
                f'Instance {inst.id} refers to missing category '
                f'{inst.category_id}',
                instance_id=inst.id, image_id=inst.image_id))
        found.extend(_ring_diagnostics(inst))

    return found
