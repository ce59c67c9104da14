import math

import numpy as np
import pytest
import shapely
from conftest import star_polygons
from hypothesis import given
from hypothesis import strategies as st
from oracles import boundary_samples, brute_penetration_depth

from softjig.geometry import (
    AnnularArc,
    Polygon,
    Pose2,
    arc_to_polygon,
    clearance,
    disc,
    intersects,
    normalize_angle,
    rectangle,
    transform,
)

angles = st.floats(-50.0, 50.0)
coords = st.floats(-100.0, 100.0)
poses = st.builds(Pose2, coords, coords, angles)


def square_at(x, y, side=1.0):
    return Polygon([(x, y), (x + side, y), (x + side, y + side), (x, y + side)])


# -- Pose2 -----------------------------------------------------------------


@given(angles)
def test_normalize_angle_range(theta):
    t = normalize_angle(theta)
    assert -math.pi < t <= math.pi
    assert math.isclose(math.cos(t), math.cos(theta), abs_tol=1e-9)
    assert math.isclose(math.sin(t), math.sin(theta), abs_tol=1e-9)


def test_pose_theta_pi_kept_positive():
    assert Pose2(0, 0, -math.pi).theta == pytest.approx(math.pi)


@given(poses, coords, coords)
def test_identity_composition_leaves_points(p, px, py):
    ident = Pose2()
    for q in (ident.compose(p), p.compose(ident)):
        a, b = q.apply((px, py)), p.apply((px, py))
        assert math.dist(a, b) <= 1e-9


@given(poses, coords, coords)
def test_inverse_round_trip(p, px, py):
    back = p.inverse().apply(p.apply((px, py)))
    assert math.dist(back, (px, py)) <= 1e-9


def test_pose_rejects_nan():
    with pytest.raises(ValueError):
        Pose2(float("nan"), 0, 0)


# -- Polygon ---------------------------------------------------------------


def test_polygon_made_counter_clockwise():
    p = Polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert p.area == pytest.approx(1.0)
    x, y = p.xs, p.ys
    assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0


@pytest.mark.parametrize(
    "verts",
    [
        [(0, 0), (1, 0)],
        [(0, 0), (1, 0), (2, 0)],
        [(0, 0), (1, 1), (1, 0), (0, 1)],
        [(0, 0), (1, 0), (float("nan"), 1)],
    ],
    ids=["two-vertices", "collinear", "bow-tie", "nan"],
)
def test_polygon_rejects_invalid(verts):
    with pytest.raises(ValueError):
        Polygon(verts)


def test_polygon_vertices_read_only(unit_square):
    with pytest.raises(ValueError):
        unit_square.vertices[0, 0] = 5.0


@given(star_polygons())
def test_area_and_centroid_match_shapely(p):
    g = shapely.Polygon(p.vertices)
    assert p.area == pytest.approx(g.area, rel=1e-9)
    assert p.centroid == pytest.approx((g.centroid.x, g.centroid.y), abs=1e-6)


def test_convexity_flag():
    assert rectangle(3, 2).is_convex
    notch = Polygon([(0, 0), (4, 0), (4, 4), (2, 2), (0, 4)])
    assert not notch.is_convex


def test_contains_point_closed(unit_square):
    assert unit_square.contains_point(0.5, 0.5)
    assert unit_square.contains_point(1.0, 0.5)
    assert not unit_square.contains_point(1.0001, 0.5)


# -- transform -------------------------------------------------------------


def test_transform_identity(unit_square):
    assert np.array_equal(transform(unit_square, Pose2()).vertices, unit_square.vertices)


def test_transform_translation(unit_square):
    moved = transform(unit_square, Pose2(1.0, 0.0, 0.0))
    assert np.allclose(moved.vertices, unit_square.vertices + [1.0, 0.0])


def test_transform_quarter_turn_permutes_centred_square():
    sq = rectangle(1.0, 1.0)
    turned = transform(sq, Pose2(0.0, 0.0, math.pi / 2))
    # hand rotation of (x, y) by 90 degrees is (-y, x)
    expected = {(round(-y, 9), round(x, 9)) for x, y in sq.vertices}
    assert {(round(x, 9), round(y, 9)) for x, y in turned.vertices} == expected
    assert expected == {(round(x, 9), round(y, 9)) for x, y in sq.vertices}


@given(star_polygons(), poses)
def test_transform_round_trip(p, q):
    back = transform(transform(p, q), q.inverse())
    assert np.max(np.abs(back.vertices - p.vertices)) <= 1e-6


@given(star_polygons(), poses)
def test_transform_preserves_area(p, q):
    assert abs(transform(p, q).area - p.area) <= 1e-6 * p.area


# -- intersects ------------------------------------------------------------


def test_disjoint_squares():
    assert not intersects(square_at(0, 0), square_at(11, 0))


def test_identical_polygons_intersect(unit_square):
    assert intersects(unit_square, unit_square)


def test_shared_edge_counts_as_contact():
    assert intersects(square_at(0, 0), square_at(1, 0))


def test_shared_corner_counts_as_contact():
    assert intersects(square_at(0, 0), square_at(1, 1))


def test_containment_counts():
    assert intersects(rectangle(10, 10), rectangle(1, 1))
    assert intersects(rectangle(1, 1), rectangle(10, 10))


@given(star_polygons(), star_polygons())
def test_intersects_symmetric(a, b):
    assert intersects(a, b) == intersects(b, a)


@given(star_polygons(), star_polygons())
def test_intersects_matches_shapely(a, b):
    assert intersects(a, b) == shapely.intersects(shapely.Polygon(a.vertices), shapely.Polygon(b.vertices))


# -- clearance -------------------------------------------------------------


def test_clearance_gap():
    assert clearance(square_at(0, 0), square_at(4, 0)) == pytest.approx(3.0)


def test_clearance_touching_is_zero():
    assert clearance(square_at(0, 0), square_at(1, 0)) == 0.0


def test_clearance_identical_squares_oracle():
    a = square_at(0, 0)
    depth = brute_penetration_depth(a, a, directions=360)
    assert depth == pytest.approx(1.0, abs=2e-3)
    assert clearance(a, a) == pytest.approx(-depth, abs=1e-3)


def test_clearance_partial_overlap_oracle():
    a = rectangle(4.0, 2.0)
    b = rectangle(3.0, 3.0, center=(2.5, 0.3))
    assert clearance(a, b) == pytest.approx(-brute_penetration_depth(a, b, directions=360), abs=2e-3)


def test_clearance_concave_overlap_oracle():
    u = Polygon([(0, 0), (6, 0), (6, 5), (4, 5), (4, 2), (2, 2), (2, 5), (0, 5)])
    peg = rectangle(1.0, 2.0, center=(3.0, 2.6))
    assert clearance(u, peg) == pytest.approx(-brute_penetration_depth(u, peg, directions=360), abs=2e-3)


@given(star_polygons(), star_polygons())
def test_clearance_sign_matches_intersection(a, b):
    c = clearance(a, b)
    assert (c > 0) == (not intersects(a, b))


@given(star_polygons(spread=40.0), star_polygons(spread=40.0))
def test_positive_clearance_is_boundary_distance(a, b):
    if intersects(a, b):
        return
    ref = shapely.distance(shapely.Polygon(a.vertices), shapely.Polygon(b.vertices))
    assert clearance(a, b) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_positive_clearance_dense_samples():
    a, b = disc(3.0, sides=12), rectangle(2.0, 5.0, center=(7.0, 1.0))
    sa, sb = boundary_samples(a), boundary_samples(b)
    brute = np.min(np.linalg.norm(sa[:, None, :] - sb[None, :, :], axis=-1))
    assert clearance(a, b) == pytest.approx(brute, abs=1e-3)


# -- arcs ------------------------------------------------------------------


def test_arc_vertex_count():
    p = arc_to_polygon(AnnularArc((0, 0), 50.0, 60.0, 0.0, math.pi / 2), 64)
    assert len(p) == 2 * (64 + 1)


def test_arc_rejects_zero_span():
    with pytest.raises(ValueError):
        AnnularArc((0, 0), 50.0, 60.0, 0.0, 0.0)


def test_arc_rejects_few_segments():
    with pytest.raises(ValueError):
        arc_to_polygon(AnnularArc((0, 0), 50.0, 60.0, 0.0, 1.0), 4)


def test_quarter_annulus_area():
    p = arc_to_polygon(AnnularArc((0, 0), 50.0, 60.0, 0.0, math.pi / 2), 64)
    exact = math.pi / 4 * (60.0**2 - 50.0**2)
    assert abs(p.area - exact) / exact < 0.005


@given(
    st.floats(1.0, 50.0),
    st.floats(0.5, 20.0),
    st.floats(-math.pi, math.pi),
    st.floats(0.05, 2 * math.pi - 0.05),
    st.integers(8, 64),
)
def test_arc_chordal_error_bound(r_in, width, start, span, segments):
    r_out = r_in + width
    p = arc_to_polygon(AnnularArc((0, 0), r_in, r_out, start, span), segments)
    bound = r_out * (1 - math.cos(span / (2 * segments)))
    # sample the true outer arc and measure distance to the polygon boundary
    t = start + span * np.linspace(0, 1, 200)
    pts = shapely.points(r_out * np.cos(t), r_out * np.sin(t))
    d = shapely.distance(shapely.Polygon(p.vertices).exterior, pts)
    assert np.max(d) <= bound + 1e-9
