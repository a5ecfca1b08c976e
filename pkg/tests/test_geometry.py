import math

import numpy as np
import pytest

from app.services.geometry import (
    bounding_box,
    contains,
    distance,
    intersects_interior,
    make_point,
    make_polygon,
    make_ring,
    square,
)

L_SHAPE = [(0, 0), (10, 0), (10, 4), (4, 4), (4, 10), (0, 10)]


def winding_number(ring, x, y) -> int:
    """Reference point-in-ring test by winding number."""
    wn = 0
    pts = list(ring) + [ring[0]]
    for (x1, y1), (x2, y2) in zip(pts, pts[1:]):
        cross = (x2 - x1) * (y - y1) - (x - x1) * (y2 - y1)
        if y1 <= y < y2 and cross > 0:
            wn += 1
        elif y2 <= y < y1 and cross < 0:
            wn -= 1
    return wn


def test_contains_interior_boundary_and_outside():
    unit = square(0, 0, 10, 10)
    assert contains(unit, make_point(5, 5))
    assert contains(unit, make_point(10, 5))
    assert contains(unit, make_point(0, 0))
    assert not contains(unit, make_point(10.001, 5))


def test_contains_excludes_holes():
    donut = make_polygon([(0, 0), (10, 0), (10, 10), (0, 10)], [[(4, 4), (6, 4), (6, 6), (4, 6)]])
    assert not contains(donut, make_point(5, 5))
    assert contains(donut, make_point(2, 2))
    assert contains(donut, make_point(4, 5))


def test_contains_matches_winding_number_on_concave_polygon():
    polygon = make_polygon(L_SHAPE)
    rng = np.random.default_rng(3)
    for x, y in rng.uniform(-2, 12, size=(2000, 2)):
        expected = winding_number(L_SHAPE, x, y) != 0
        assert contains(polygon, make_point(float(x), float(y))) == expected


def test_distance_is_zero_inside_and_euclidean_outside():
    unit = square(0, 0, 1, 1)
    assert distance(unit, make_point(0.5, 0.5)) == 0.0
    assert distance(unit, make_point(2, 0.5)) == pytest.approx(1.0)
    assert distance(unit, make_point(2, 2)) == pytest.approx(math.sqrt(2))


def test_distance_into_a_hole_measures_to_the_hole_edge():
    donut = make_polygon([(0, 0), (10, 0), (10, 10), (0, 10)], [[(4, 4), (6, 4), (6, 6), (4, 6)]])
    assert distance(donut, make_point(5, 5)) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "other, expected",
    [
        (square(5, 5, 15, 15), True),    # partial overlap
        (square(2, 2, 4, 4), True),      # strictly inside
        (square(10, 0, 20, 10), False),  # shared edge
        (square(10, 10, 20, 20), False), # shared vertex
        (square(30, 30, 40, 40), False), # disjoint
    ],
)
def test_intersects_interior(other, expected):
    a = square(0, 0, 10, 10)
    assert intersects_interior(a, other) is expected
    assert intersects_interior(other, a) is expected


def test_bounding_box_of_triangle():
    box = bounding_box(make_polygon([(0, 0), (2, 0), (1, 3)]))
    assert box.as_tuple() == (0.0, 0.0, 2.0, 3.0)
    assert box.area == 6.0


def test_make_ring_drops_closing_vertex():
    ring = make_ring([(0, 0), (1, 0), (1, 1), (0, 0)])
    assert len(ring.coords) == 4


def test_make_ring_needs_three_distinct_vertices():
    with pytest.raises(ValueError, match="3 distinct"):
        make_ring([(0, 0), (1, 1), (0, 0), (1, 1)])


def test_non_finite_coordinates_are_rejected():
    with pytest.raises(ValueError):
        make_point(float("nan"), 0)
    with pytest.raises(ValueError):
        make_ring([(0, 0), (1, 0), (float("inf"), 1)])


def test_zero_area_polygon_is_rejected():
    with pytest.raises(ValueError, match="zero area"):
        make_polygon([(0, 0), (1, 1), (2, 2)])


def test_hole_outside_exterior_box_is_rejected():
    with pytest.raises(ValueError, match="hole"):
        make_polygon([(0, 0), (4, 0), (4, 4), (0, 4)], [[(3, 3), (5, 3), (5, 5)]])


def convex_polygon(rng) -> list[tuple[float, float]]:
    """Vertices on a circle in angular order."""
    cx, cy = rng.uniform(-50, 50, size=2)
    r = rng.uniform(1, 20)
    angles = np.sort(rng.uniform(0, 2 * math.pi, size=int(rng.integers(3, 9))))
    return [(float(cx + r * math.cos(a)), float(cy + r * math.sin(a))) for a in angles]


def test_contains_matches_winding_number_on_convex_polygons():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        vertices = convex_polygon(rng)
        polygon = make_polygon(vertices)
        min_x, min_y, max_x, max_y = polygon.bounds
        x, y = float(rng.uniform(min_x - 2, max_x + 2)), float(rng.uniform(min_y - 2, max_y + 2))
        assert contains(polygon, make_point(x, y)) == (winding_number(vertices, x, y) != 0)


def test_every_vertex_is_contained():
    rng = np.random.default_rng(12)
    shapes = [L_SHAPE] + [convex_polygon(rng) for _ in range(200)]
    for vertices in shapes:
        polygon = make_polygon(vertices)
        assert all(contains(polygon, make_point(x, y)) for x, y in vertices)


def test_distance_is_translation_invariant():
    rng = np.random.default_rng(13)
    for _ in range(300):
        vertices = convex_polygon(rng)
        x, y = (float(v) for v in rng.uniform(-80, 80, size=2))
        dx, dy = (float(v) for v in rng.uniform(-1000, 1000, size=2))
        moved = make_polygon([(vx + dx, vy + dy) for vx, vy in vertices])
        assert abs(distance(moved, make_point(x + dx, y + dy)) - distance(make_polygon(vertices), make_point(x, y))) <= 1e-9


def test_intersects_interior_matches_clipped_area():
    rng = np.random.default_rng(14)
    for _ in range(500):
        # integer boxes on a small grid hit shared edges and corners often
        ax, ay, bx, by = (int(v) for v in rng.integers(0, 6, size=4))
        aw, ah, bw, bh = (int(v) for v in rng.integers(1, 4, size=4))
        a, b = square(ax, ay, ax + aw, ay + ah), square(bx, by, bx + bw, by + bh)
        assert intersects_interior(a, b) == (a.intersection(b).area > 0)
    for _ in range(500):
        a, b = make_polygon(convex_polygon(rng)), make_polygon(convex_polygon(rng))
        assert intersects_interior(a, b) == (a.intersection(b).area > 0)
