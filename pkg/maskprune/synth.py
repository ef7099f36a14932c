"""
Synthetic annotation corpora with analytically known perimeter and area.

Every shape is emitted as an exact polygon, so scoring properties can be
checked against closed-form oracles.
"""
import dataclasses
import enum
import logging
import math
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull

from . import geometry
from .dataset import (CategoryInfo, Dataset, ImageRecord, InstanceRecord,
                      PolygonSet)
from .rle import BitMask
from .util import ArgumentError, GeometryError

logger = logging.getLogger(__name__)

__all__ = [
    'ShapeKind',
    'SynthSpec',
    'gen_shape',
    'analytic_metrics',
    'build_dataset',
    'gen_corpus',
    'random_star_shaped_ring',
    'random_convex_ring',
    'rasterize_disk',
]

DEFAULT_CIRCLE_SIDES = 360
DEFAULT_IMAGE_SIZE = (640, 480)
DEFAULT_CLASS_MIX = {
    'common': 0.90,
    'uncommon': 0.09,
    'rare': 0.01,
}
DEFAULT_SHAPE_MIX = {
    'circle': 0.25,
    'square': 0.25,
    'rectangle': 0.25,
    'star': 0.25,
}


class ShapeKind(str, enum.Enum):
    circle = 'circle'
    square = 'square'
    rectangle = 'rectangle'
    star = 'star'


@dataclasses.dataclass(frozen=True)
class SynthSpec:
    """
    A single synthetic shape.

    Parameters
    ----------
    kind : ShapeKind
        The shape family.

    center : (float, float)
        Shape center ``(x, y)``. [px]

    radius : float
        Circumradius of a circle, outer radius of a star. [px]

    inner_radius : float
        Inner radius of a star. [px]

    sides : int
        Polygon sides of a circle; number of points of a star.

    width, height : float
        Rectangle (and square) extent before rotation. [px]

    rotation : float
        Counterclockwise rotation about the center. [rad]

    category_id : int
        Category of the generated instance.
    """
    kind: ShapeKind
    center: Tuple[float, float]
    radius: float = 0.0
    inner_radius: float = 0.0
    sides: int = 0
    width: float = 0.0
    height: float = 0.0
    rotation: float = 0.0
    category_id: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'kind', ShapeKind(self.kind))
        object.__setattr__(self, 'center', tuple(float(c)
                                                 for c in self.center))
        kind = self.kind
        if kind is ShapeKind.circle:
            if self.radius <= 0 or self.sides < 3:
                raise ArgumentError(
                    f'Circle needs radius > 0 and >= 3 sides: {self}'
                )
        elif kind in (ShapeKind.square, ShapeKind.rectangle):
            if self.width <= 0 or self.height <= 0:
                raise ArgumentError(f'Non-positive extent: {self}')
        elif kind is ShapeKind.star:
            if self.sides < 2 or not 0 < self.inner_radius < self.radius:
                raise ArgumentError(
                    f'Star needs >= 2 points and 0 < inner < outer: {self}'
                )

    @classmethod
    def circle(cls, radius: float, center=(0.0, 0.0),
               sides: int = DEFAULT_CIRCLE_SIDES, **kwargs) -> 'SynthSpec':
        return cls(ShapeKind.circle, center, radius=radius, sides=sides,
                   **kwargs)

    @classmethod
    def square(cls, side: float, center=(0.0, 0.0),
               **kwargs) -> 'SynthSpec':
        return cls(ShapeKind.square, center, width=side, height=side,
                   **kwargs)

    @classmethod
    def rectangle(cls, width: float, height: float, center=(0.0, 0.0),
                  **kwargs) -> 'SynthSpec':
        return cls(ShapeKind.rectangle, center, width=width, height=height,
                   **kwargs)

    @classmethod
    def star(cls, points: int, outer: float, inner: float,
             center=(0.0, 0.0), **kwargs) -> 'SynthSpec':
        return cls(ShapeKind.star, center, radius=outer, inner_radius=inner,
                   sides=points, **kwargs)

    @property
    def bounding_radius(self) -> float:
        """Largest distance of a vertex from the center. [px]"""
        if self.kind in (ShapeKind.square, ShapeKind.rectangle):
            return math.hypot(self.width, self.height) / 2.0
        return self.radius

    def scaled(self, factor: float) -> 'SynthSpec':
        """The same shape uniformly scaled about its center."""
        return dataclasses.replace(
            self,
            radius=self.radius * factor,
            inner_radius=self.inner_radius * factor,
            width=self.width * factor,
            height=self.height * factor,
        )

    def vertices(self) -> np.ndarray:
        """The exact ``(N, 2)`` polygon of this shape."""
        kind = self.kind
        if kind is ShapeKind.circle:
            angles = 2.0 * np.pi * np.arange(self.sides) / self.sides
            radii = np.full(self.sides, self.radius)
        elif kind is ShapeKind.star:
            count = 2 * self.sides
            angles = np.pi * np.arange(count) / self.sides
            radii = np.where(np.arange(count) % 2 == 0, self.radius,
                             self.inner_radius)
        else:
            half_w, half_h = self.width / 2.0, self.height / 2.0
            local = np.array([
                [-half_w, -half_h],
                [half_w, -half_h],
                [half_w, half_h],
                [-half_w, half_h],
            ])
            return _place(local, self.rotation, self.center)

        local = np.column_stack((radii * np.cos(angles),
                                 radii * np.sin(angles)))
        return _place(local, self.rotation, self.center)


def _place(local: np.ndarray, rotation: float,
           center: Tuple[float, float]) -> np.ndarray:
    if rotation:
        cos, sin = math.cos(rotation), math.sin(rotation)
        local = local @ np.array([[cos, sin], [-sin, cos]])
    return local + np.asarray(center)


def analytic_metrics(spec: SynthSpec) -> geometry.ShapeMetrics:
    """
    Closed-form perimeter and area of ``spec``.

    Circles are the inscribed regular ``n``-gon, ``P = 2 n r sin(pi / n)``
    and ``A = n r**2 sin(2 pi / n) / 2``.  A ``k``-pointed star is ``2k``
    triangles between the center and an outer/inner vertex pair.
    """
    kind = spec.kind
    if kind is ShapeKind.circle:
        n, r = spec.sides, spec.radius
        return geometry.ShapeMetrics(
            perimeter=2.0 * n * r * math.sin(math.pi / n),
            area=0.5 * n * r ** 2 * math.sin(2.0 * math.pi / n),
        )

    if kind is ShapeKind.star:
        k, outer, inner = spec.sides, spec.radius, spec.inner_radius
        half = math.pi / k
        edge = math.sqrt(outer ** 2 + inner ** 2 -
                         2.0 * outer * inner * math.cos(half))
        return geometry.ShapeMetrics(
            perimeter=2.0 * k * edge,
            area=k * outer * inner * math.sin(half),
        )

    return geometry.ShapeMetrics(
        perimeter=2.0 * (spec.width + spec.height),
        area=spec.width * spec.height,
    )


def gen_shape(spec: SynthSpec, instance_id: int,
              image: ImageRecord) -> InstanceRecord:
    """
    The polygon instance for ``spec`` placed on ``image``.

    Raises
    ------
    GeometryError
        If the shape does not fit within the image bounds.
    """
    vertices = spec.vertices()
    x_min, y_min = vertices.min(axis=0)
    x_max, y_max = vertices.max(axis=0)
    if x_min < 0 or y_min < 0 or x_max > image.width or y_max > image.height:
        raise GeometryError(
            f'{spec.kind.value} at {spec.center} spans '
            f'[{x_min:.1f}, {x_max:.1f}] x [{y_min:.1f}, {y_max:.1f}], '
            f'outside of image {image.id} ({image.width}x{image.height})'
        )

    mask = PolygonSet.from_vertices([vertices])
    source = {
        'id': instance_id,
        'image_id': image.id,
        'category_id': spec.category_id,
        'segmentation': mask.to_coco(),
        'area': geometry.polygon_area(vertices),
        'bbox': [float(x_min), float(y_min), float(x_max - x_min),
                 float(y_max - y_min)],
        'iscrowd': 0,
    }
    return InstanceRecord(id=instance_id, image_id=image.id,
                          category_id=spec.category_id, mask=mask,
                          source=source)


def _image(image_id: int, image_size: Tuple[int, int]) -> ImageRecord:
    width, height = image_size
    source = {
        'id': image_id,
        'file_name': f'synth_{image_id:06d}.png',
        'width': width,
        'height': height,
    }
    return ImageRecord(id=image_id, file_name=source['file_name'],
                       width=width, height=height, source=source)


def _categories(names: Sequence[str]) -> List[CategoryInfo]:
    return [
        CategoryInfo(id=idx, name=name,
                     source={'id': idx, 'name': name,
                             'supercategory': 'synthetic'})
        for idx, name in enumerate(names, 1)
    ]


def build_dataset(
        images: Sequence[Sequence[SynthSpec]],
        image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
        category_names: Optional[Sequence[str]] = None,
        passthrough: Optional[Mapping] = None,
        ) -> Dataset:
    """
    A dataset with one image per entry of ``images``, holding its shapes.

    Image ids and instance ids are assigned from 1 in order.  Categories
    default to ``class1 .. classN`` for the largest category id used.
    """
    if category_names is None:
        top = max((spec.category_id for specs in images for spec in specs),
                  default=1)
        category_names = [f'class{idx}' for idx in range(1, top + 1)]

    records = []
    instances = []
    for image_id, specs in enumerate(images, 1):
        image = _image(image_id, image_size)
        records.append(image)
        for spec in specs:
            instances.append(gen_shape(spec, len(instances) + 1, image))

    return Dataset(
        images=tuple(records),
        instances=tuple(instances),
        categories=tuple(_categories(category_names)),
        passthrough=dict(passthrough or {}),
    )


def _normalized(mix: Mapping[str, float], what: str) -> np.ndarray:
    weights = np.asarray(list(mix.values()), dtype=float)
    if not len(weights) or np.any(weights < 0) or weights.sum() <= 0:
        raise ArgumentError(f'Invalid {what}: {dict(mix)}')
    return weights / weights.sum()


def _random_spec(rng: np.random.Generator, kind: ShapeKind, scale: float,
                 image_size: Tuple[int, int], category_id: int,
                 circle_sides: int, rotate: bool) -> SynthSpec:
    rotation = float(rng.uniform(0.0, 2.0 * np.pi)) if rotate else 0.0
    if kind is ShapeKind.circle:
        spec = SynthSpec.circle(scale, sides=circle_sides)
    elif kind is ShapeKind.square:
        spec = SynthSpec.square(2.0 * scale)
    elif kind is ShapeKind.rectangle:
        aspect = math.exp(rng.uniform(math.log(0.1), 0.0))
        spec = SynthSpec.rectangle(2.0 * scale, 2.0 * scale * aspect)
    else:
        points = int(rng.integers(3, 9))
        # Heavy tail towards spiky stars.
        inner = scale * 0.9 * (1.0 - rng.random())
        spec = SynthSpec.star(points, scale, max(inner, scale * 1e-3))

    # Keep the shape within the image for any rotation.
    reach = spec.bounding_radius
    width, height = image_size
    center = (float(rng.uniform(reach, width - reach)),
              float(rng.uniform(reach, height - reach)))
    return dataclasses.replace(spec, center=center, rotation=rotation,
                               category_id=category_id)


def gen_corpus(
        count: int,
        class_mix: Mapping[str, float] = DEFAULT_CLASS_MIX,
        scale_range: Tuple[float, float] = (8.0, 128.0),
        seed: int = 0,
        instances_per_image: Tuple[int, int] = (1, 5),
        shape_mix: Mapping[str, float] = DEFAULT_SHAPE_MIX,
        circle_sides: int = DEFAULT_CIRCLE_SIDES,
        rotate: bool = True,
        image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
        ) -> Dataset:
    """
    Generate a seeded, long-tailed synthetic corpus.

    Parameters
    ----------
    count : int
        Number of images, at least 1.

    class_mix : mapping of str to float
        Category name to relative instance frequency.  Category ids follow
        the mapping order starting at 1.

    scale_range : (float, float)
        Shape radius (half side for squares) is drawn log-uniformly from
        this range. [px]

    seed : int
        Seed of the single random generator used throughout.

    instances_per_image : (int, int)
        Inclusive range of instances drawn uniformly per image.

    shape_mix : mapping of str to float
        Shape kind to relative frequency.

    circle_sides : int
        Sides of the polygon approximating each circle.

    rotate : bool
        Rotate each shape by a uniformly random angle.

    image_size : (int, int)
        Width and height of every image. [px]

    Returns
    -------
    Dataset
    """
    if count < 1:
        raise ArgumentError(f'Corpus needs at least one image, got {count}')

    low_scale, high_scale = scale_range
    width, height = image_size
    if not 0 < low_scale <= high_scale:
        raise ArgumentError(f'Invalid scale range: {scale_range}')
    if high_scale * math.sqrt(2) * 2 > min(width, height):
        raise ArgumentError(
            f'Scale {high_scale} does not fit images of {width}x{height}'
        )

    low_count, high_count = instances_per_image
    if not 0 <= low_count <= high_count:
        raise ArgumentError(
            f'Invalid instances per image: {instances_per_image}'
        )

    class_p = _normalized(class_mix, 'class mix')
    shape_p = _normalized(shape_mix, 'shape mix')
    kinds = [ShapeKind(kind) for kind in shape_mix]

    rng = np.random.default_rng(seed)
    images: List[List[SynthSpec]] = []
    for _ in range(count):
        specs = []
        for _ in range(int(rng.integers(low_count, high_count + 1))):
            category_id = int(rng.choice(len(class_p), p=class_p)) + 1
            kind = kinds[int(rng.choice(len(shape_p), p=shape_p))]
            scale = math.exp(rng.uniform(math.log(low_scale),
                                         math.log(high_scale)))
            specs.append(
                _random_spec(rng, kind, scale, image_size, category_id,
                             circle_sides, rotate)
            )
        images.append(specs)

    dataset = build_dataset(
        images,
        image_size=image_size,
        category_names=list(class_mix),
        passthrough={
            'info': {
                'description': 'maskprune synthetic corpus',
                'seed': seed,
            },
        },
    )
    logger.info('Generated %d images with %d instances (seed=%d)',
                len(dataset.images), len(dataset.instances), seed)
    return dataset


def random_star_shaped_ring(rng: np.random.Generator,
                            num_vertices: int = 12,
                            radius_range: Tuple[float, float] = (0.2, 1.0),
                            center=(0.0, 0.0)) -> np.ndarray:
    """
    A random simple polygon, star-shaped about ``center``.

    Vertices are sorted by angle with jittered spacing so no angular gap
    reaches half a turn.
    """
    if num_vertices < 3:
        raise ArgumentError('A ring needs at least 3 vertices')
    jitter = rng.uniform(0.0, 0.4, num_vertices)
    angles = 2.0 * np.pi * (np.arange(num_vertices) + jitter) / num_vertices
    radii = rng.uniform(*radius_range, num_vertices)
    return np.column_stack((radii * np.cos(angles),
                            radii * np.sin(angles))) + np.asarray(center)


def random_convex_ring(rng: np.random.Generator, num_points: int = 20,
                       extent: float = 1.0) -> np.ndarray:
    """The convex hull of random points, counterclockwise."""
    points = rng.uniform(-extent, extent, (max(num_points, 3), 2))
    hull = ConvexHull(points)
    return points[hull.vertices]


def rasterize_disk(radius: float, center: Optional[Tuple[float, float]] = None,
                   size: Optional[Tuple[int, int]] = None) -> BitMask:
    """
    A digital disk: pixels whose centers lie within ``radius`` of ``center``.

    Parameters
    ----------
    radius : float
        Disk radius. [px]

    center : (float, float), optional
        ``(x, y)``; defaults to the middle of the grid.

    size : (int, int), optional
        ``(height, width)``; defaults to a square just large enough.
    """
    if size is None:
        side = 2 * int(math.ceil(radius)) + 2
        size = (side, side)
    height, width = size
    if center is None:
        center = (width / 2.0, height / 2.0)

    rows, cols = np.mgrid[0:height, 0:width]
    dx = cols + 0.5 - center[0]
    dy = rows + 0.5 - center[1]
    return BitMask(height=height, width=width,
                   bits=dx ** 2 + dy ** 2 <= radius ** 2)

