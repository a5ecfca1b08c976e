"""
geometry.py

Planar geometry kernel used by every assignment rule. Coordinates are projected
meters; projection happens at ingestion.

- make_point / make_ring / make_polygon: validated constructors.
- contains: boundary-inclusive point-in-polygon (holes excluded).
- distance: 0 inside, otherwise distance to the nearest boundary segment.
- intersects_interior: positive-area overlap test; edge or vertex contact is not enough.
- bounding_box: tight extent of the exterior ring.

Predicates are delegated to shapely (GEOS), which evaluates them with robust
orientation tests. All values are immutable.

Dependencies:
- shapely (geometry types and predicates)
- pydantic (BoundingBox model)
"""

import math
from typing import Iterable, Sequence

import shapely
from pydantic import BaseModel, ConfigDict, model_validator
from shapely.geometry import LinearRing, Point, Polygon

from app.config import setup_logger

logger = setup_logger("geometry_service", indent=6)

__all__ = [
    "Point", "Polygon", "BoundingBox",
    "make_point", "make_ring", "make_polygon", "square",
    "contains", "distance", "intersects_interior", "bounding_box",
]

Coordinate = tuple[float, float]

# DE-9IM: interiors share at least a 2-D piece
INTERIOR_OVERLAP = "T********"


class BoundingBox(BaseModel):
    model_config = ConfigDict(frozen=True)

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @model_validator(mode="after")
    def _ordered(self) -> "BoundingBox":
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise ValueError(f"bounding box min must not exceed max: {self}")
        return self

    @property
    def area(self) -> float:
        return (self.max_x - self.min_x) * (self.max_y - self.min_y)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.min_x, self.min_y, self.max_x, self.max_y)


def make_point(x: float, y: float) -> Point:
    """Point in projected meters. Raises ValueError on NaN or infinite coordinates."""
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"Point coordinates must be finite, got ({x}, {y})")
    return Point(x, y)


def _open_ring(vertices: Iterable[Coordinate]) -> list[Coordinate]:
    coords = [(float(x), float(y)) for x, y in vertices]
    if len(coords) > 1 and coords[0] == coords[-1]:
        coords = coords[:-1]
    return coords


def make_ring(vertices: Iterable[Coordinate]) -> LinearRing:
    """
    Build a ring from its vertices. A repeated closing vertex is accepted and dropped.

    Raises:
        ValueError: fewer than 3 distinct vertices or a non-finite coordinate.
    """
    coords = _open_ring(vertices)
    for x, y in coords:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"Ring coordinates must be finite, got ({x}, {y})")
    if len(set(coords)) < 3:
        raise ValueError(f"Ring needs at least 3 distinct vertices, got {len(set(coords))}")
    return LinearRing(coords)


def make_polygon(exterior: Iterable[Coordinate], holes: Sequence[Iterable[Coordinate]] = ()) -> Polygon:
    """
    Build a polygon from an exterior ring and optional holes.

    Self-intersection is not checked. Raises ValueError when the exterior has
    zero area or a hole reaches outside the exterior's bounding box.
    """
    shell = make_ring(exterior)
    rings = [make_ring(hole) for hole in holes]
    polygon = Polygon(shell, rings)

    if Polygon(shell).area <= 0.0:
        raise ValueError("Polygon exterior has zero area")
    min_x, min_y, max_x, max_y = shell.bounds
    for ring in rings:
        h_min_x, h_min_y, h_max_x, h_max_y = ring.bounds
        if h_min_x < min_x or h_min_y < min_y or h_max_x > max_x or h_max_y > max_y:
            raise ValueError("Polygon hole lies outside the exterior bounding box")

    # GEOS caches its prepared form on the object, speeding repeated predicates
    shapely.prepare(polygon)
    return polygon


def square(min_x: float, min_y: float, max_x: float, max_y: float) -> Polygon:
    """Axis-aligned rectangle, counter-clockwise."""
    return make_polygon([(min_x, min_y), (max_x, min_y), (max_x, max_y), (min_x, max_y)])


def contains(poly: Polygon, p: Point) -> bool:
    """True iff p is inside the exterior and outside every hole; boundary points count as inside."""
    return bool(poly.covers(p))


def distance(poly: Polygon, p: Point) -> float:
    """Euclidean distance from p to the polygon; 0 for covered points."""
    if contains(poly, p):
        return 0.0
    return float(poly.distance(p))


def intersects_interior(a: Polygon, b: Polygon) -> bool:
    """True iff the interiors overlap with positive area. Shared edges or touching vertices return False."""
    return bool(a.relate_pattern(b, INTERIOR_OVERLAP))


def bounding_box(poly: Polygon) -> BoundingBox:
    min_x, min_y, max_x, max_y = poly.exterior.bounds
    return BoundingBox(min_x=min_x, min_y=min_y, max_x=max_x, max_y=max_y)


if __name__ == "__main__":
    unit = square(0, 0, 1, 1)
    print("contains (0.5, 0.5):", contains(unit, make_point(0.5, 0.5)))
    print("distance (2, 2):", distance(unit, make_point(2.0, 2.0)))
    print("edge touch:", intersects_interior(unit, square(1, 0, 2, 1)))
    print("bbox:", bounding_box(make_polygon([(0, 0), (2, 0), (1, 3)])))
