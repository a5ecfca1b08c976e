"""
spatial_index.py

Bounding-box candidate lookup over parcel footprints, backed by shapely's
STR-packed R-tree. The index answers at box level only: callers refine the
candidates with exact geometry.

Key features:
- Deterministic build from a list of footprints; duplicate ids are rejected.
- query_point: ids whose boxes meet the square of half-side `radius` around a point.
- query_box: ids whose boxes meet a query box (closed intervals, touching counts).
- Immutable after build; safe for concurrent queries.

Dependencies:
- shapely (STRtree, box/point envelopes)
- numpy (vectorized bounds)
"""

from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.strtree import STRtree

from app.data.models import ParcelFootprint
from app.services.geometry import BoundingBox, Point
from app.config import setup_logger

logger = setup_logger("spatial_index_service", indent=6)


class DuplicateParcelError(ValueError):
    """Two footprints share one parcel id."""


def _envelope(min_x: float, min_y: float, max_x: float, max_y: float):
    """Geometry whose envelope is exactly the given box, including degenerate boxes."""
    if min_x == max_x and min_y == max_y:
        return shapely.Point(min_x, min_y)
    if min_x == max_x or min_y == max_y:
        return shapely.LineString([(min_x, min_y), (max_x, max_y)])
    return shapely.box(min_x, min_y, max_x, max_y)


class FootprintIndex:
    """
    STR-tree over parcel bounding boxes.

    Stored boxes are the exact exterior extents, so every box-level answer equals a
    brute-force scan over the same boxes.
    """

    def __init__(self, ids: Sequence[str], bounds: np.ndarray):
        self._ids = list(ids)
        self._bounds = bounds
        self._rows = {parcel_id: row for row, parcel_id in enumerate(self._ids)}
        self._tree = STRtree(shapely.box(bounds[:, 0], bounds[:, 1], bounds[:, 2], bounds[:, 3])) if len(self._ids) else None

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def box_of(self, parcel_id: str) -> BoundingBox:
        row = self._bounds[self._rows[parcel_id]]
        return BoundingBox(min_x=row[0], min_y=row[1], max_x=row[2], max_y=row[3])

    def _query(self, geometry) -> set[str]:
        if self._tree is None:
            return set()
        return {self._ids[i] for i in self._tree.query(geometry)}

    def query_point(self, p: Point, radius: float) -> set[str]:
        """Ids whose boxes intersect [p.x ± radius, p.y ± radius]."""
        if radius < 0:
            raise ValueError(f"radius must be >= 0, got {radius}")
        return self._query(_envelope(p.x - radius, p.y - radius, p.x + radius, p.y + radius))

    def query_box(self, b: BoundingBox) -> set[str]:
        """Ids whose boxes intersect b (closed-interval overlap)."""
        return self._query(_envelope(*b.as_tuple()))


def build(footprints: Iterable[ParcelFootprint]) -> FootprintIndex:
    """
    Build the index over all footprints in input order.

    Raises:
        DuplicateParcelError: a parcel id occurs twice; the message names it.
    """
    footprints = list(footprints)
    seen: set[str] = set()
    for footprint in footprints:
        if footprint.parcel_id in seen:
            raise DuplicateParcelError(f"Duplicate parcel id {footprint.parcel_id!r}")
        seen.add(footprint.parcel_id)

    if footprints:
        exteriors = [footprint.geometry.exterior for footprint in footprints]
        bounds = shapely.bounds(exteriors)
    else:
        bounds = np.empty((0, 4), dtype=float)

    logger.info(f"Built footprint index over {len(footprints)} parcels")
    return FootprintIndex([footprint.parcel_id for footprint in footprints], bounds)
