"""
Perimeter and area of instance masks.

Polygons are measured with exact Euclidean geometry (shoelace area, summed
edge lengths).  Rasters are measured by pixel count and the number of
exposed 4-connected unit edges.
"""
import dataclasses
import typing

import numpy as np

from .dataset import MaskGeometry, PolygonSet, RasterRle
from .rle import BitMask
from .util import DegenerateGeometryError, GeometryError

__all__ = [
    'ShapeMetrics',
    'polygon_area',
    'polygon_perimeter',
    'polygon_set_metrics',
    'raster_metrics',
    'instance_metrics',
]


@dataclasses.dataclass(frozen=True)
class ShapeMetrics:
    """Perimeter [px] and area [px^2] of a single mask."""
    perimeter: float
    area: float

    def __add__(self, other):
        if not isinstance(other, ShapeMetrics):
            return NotImplemented
        return ShapeMetrics(perimeter=self.perimeter + other.perimeter,
                            area=self.area + other.area)


def _as_vertices(ring) -> np.ndarray:
    """Coerce a ring (``(N, 2)`` or flat ``x0, y0, ...``) to ``(N, 2)``."""
    vertices = np.asarray(ring, dtype=float)
    if vertices.ndim == 1:
        if vertices.size % 2:
            raise GeometryError(
                f'Flat ring has an odd number of coordinates '
                f'({vertices.size})'
            )
        vertices = vertices.reshape(-1, 2)

    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise GeometryError(
            f'Ring has shape {vertices.shape}; expected (N, 2)'
        )
    if len(vertices) < 3:
        raise DegenerateGeometryError(
            f'Ring has {len(vertices)} vertices; at least 3 are required'
        )
    if not np.all(np.isfinite(vertices)):
        raise GeometryError('Ring has non-finite coordinates')
    return vertices


def polygon_area(ring) -> float:
    """
    Shoelace area of a closed ring, independent of orientation.

    Parameters
    ----------
    ring : array-like
        ``(N, 2)`` vertices or flat ``(x0, y0, x1, y1, ...)`` coordinates.
        The closing edge is implied.

    Returns
    -------
    float
        Area. [px^2]

    Raises
    ------
    DegenerateGeometryError
        Fewer than three vertices.
    """
    vertices = _as_vertices(ring)
    # Shift to the first vertex; large offsets otherwise cost precision.
    vertices = vertices - vertices[0]
    x, y = vertices[:, 0], vertices[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    return abs(float(np.sum(cross))) / 2.0


def polygon_perimeter(ring) -> float:
    """
    Sum of the Euclidean edge lengths of a ring, closing edge included.

    Raises
    ------
    DegenerateGeometryError
        Fewer than three vertices.
    """
    vertices = _as_vertices(ring)
    deltas = np.roll(vertices, -1, axis=0) - vertices
    return float(np.sum(np.hypot(deltas[:, 0], deltas[:, 1])))


def polygon_set_metrics(mask: PolygonSet) -> ShapeMetrics:
    """
    Metrics of a multi-part polygon: rings are disjoint parts, summed.
    """
    if not mask.rings:
        raise DegenerateGeometryError('Polygon set has no rings')

    perimeter = 0.0
    area = 0.0
    for ring in mask.rings:
        perimeter += polygon_perimeter(ring)
        area += polygon_area(ring)
    return ShapeMetrics(perimeter=perimeter, area=area)


def raster_metrics(mask: BitMask) -> ShapeMetrics:
    """
    Pixel-count area and exposed-edge perimeter of a `BitMask`.

    The perimeter counts, for every set pixel, its 4-neighbors that are clear
    or outside of the grid.  This equals the number of set/clear transitions
    along rows and columns of the mask padded with a clear border.
    """
    bits = mask.bits
    area = int(np.count_nonzero(bits))
    if area == 0:
        return ShapeMetrics(perimeter=0.0, area=0.0)

    padded = np.pad(bits, 1, mode='constant', constant_values=False)
    vertical = np.count_nonzero(padded[1:, :] != padded[:-1, :])
    horizontal = np.count_nonzero(padded[:, 1:] != padded[:, :-1])
    return ShapeMetrics(perimeter=float(vertical + horizontal),
                        area=float(area))


def instance_metrics(mask: MaskGeometry,
                     instance_id: typing.Optional[int] = None
                     ) -> ShapeMetrics:
    """
    Measure any supported mask representation.

    Parameters
    ----------
    mask : PolygonSet or RasterRle
        The mask to measure.

    instance_id : int, optional
        Attached to raised errors for reporting.

    Raises
    ------
    DegenerateGeometryError
        The mask has zero area (e.g. collinear polygon vertices, an empty
        raster) or too few vertices.
    """
    try:
        if isinstance(mask, PolygonSet):
            metrics = polygon_set_metrics(mask)
        elif isinstance(mask, RasterRle):
            metrics = raster_metrics(mask.to_bitmask())
        else:
            raise GeometryError(
                f'Unsupported mask type: {type(mask).__name__}'
            )
    except DegenerateGeometryError as ex:
        raise DegenerateGeometryError(str(ex), instance_id=instance_id)

    if metrics.area <= 0.0:
        raise DegenerateGeometryError(
            f'Instance {instance_id} has zero area', instance_id=instance_id
        )
    return metrics
