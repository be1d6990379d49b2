import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nightlight_gdp.errors import (AntimeridianCrossing, MalformedGeoJson, MissingIdProperty,
                                   UnclosedRing, UnsupportedGeometry)
from nightlight_gdp.geometry import LinearRing, parse_geojson, point_in_region, rasterize_mask
from nightlight_gdp.raster import GeoTransform
from oracles import distance_to_ring, region, star_polygon, unit_square, winding_number

SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]


def feature(geom, props=None):
    return {"type": "Feature", "properties": {"ISO_A3": "TST"} if props is None else props,
            "geometry": geom}


def test_parse_unit_square():
    [g] = parse_geojson(json.dumps(feature({"type": "Polygon", "coordinates": [SQUARE]})))
    assert g.region_id == "TST"
    assert len(g.polygons) == 1 and g.polygons[0].holes == ()


def test_parse_multipolygon():
    other = [[x + 5, y] for x, y in SQUARE]
    doc = {"type": "FeatureCollection", "features": [
        feature({"type": "MultiPolygon", "coordinates": [[SQUARE], [other]]})]}
    [g] = parse_geojson(json.dumps(doc))
    assert len(g.polygons) == 2


def test_parse_linestring_rejected():
    with pytest.raises(UnsupportedGeometry):
        parse_geojson(json.dumps(feature({"type": "LineString", "coordinates": SQUARE})))


@pytest.mark.parametrize("kind", ["Point", "GeometryCollection"])
def test_other_geometry_kinds_rejected(kind):
    with pytest.raises(UnsupportedGeometry):
        parse_geojson(json.dumps(feature({"type": kind, "coordinates": [0, 0]})))


def test_custom_id_property():
    doc = feature({"type": "Polygon", "coordinates": [SQUARE]}, {"iso": "XYZ", "NAME": "Ex"})
    [g] = parse_geojson(json.dumps(doc), id_property="iso")
    assert (g.region_id, g.name) == ("XYZ", "Ex")


def test_missing_id_property():
    with pytest.raises(MissingIdProperty):
        parse_geojson(json.dumps(feature({"type": "Polygon", "coordinates": [SQUARE]}, {})))


@pytest.mark.parametrize("text", ["{", "[]", '{"type": "Nope"}',
                                  '{"type": "FeatureCollection"}'])
def test_malformed(text):
    with pytest.raises(MalformedGeoJson):
        parse_geojson(text)


def test_too_few_positions():
    with pytest.raises(MalformedGeoJson):
        parse_geojson(json.dumps(feature({"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [0, 0]]]})))


def test_unclosed_ring_closed_with_warning():
    doc = feature({"type": "Polygon", "coordinates": [SQUARE[:-1]]})
    with pytest.warns(UnclosedRing):
        [g] = parse_geojson(json.dumps(doc))
    assert g.polygons[0].exterior.vertices[-1] == (0.0, 0.0)


def test_antimeridian_rejected():
    ring = [[170, 0], [-170, 0], [-170, 5], [170, 5], [170, 0]]
    with pytest.raises(AntimeridianCrossing):
        parse_geojson(json.dumps(feature({"type": "Polygon", "coordinates": [ring]})))


def test_ring_must_be_closed():
    with pytest.raises(ValueError):
        LinearRing([(0, 0), (1, 0), (1, 1), (0, 1)])


def test_point_in_unit_square():
    g = unit_square()
    assert point_in_region(g, 0.5, 0.5)
    assert not point_in_region(g, 2, 2)


def test_hole_excluded():
    hole = [(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75), (0.25, 0.25)]
    g = unit_square(holes=[hole])
    assert not point_in_region(g, 0.5, 0.5)
    assert point_in_region(g, 0.1, 0.5)


def test_orientation_irrelevant():
    cw = region("CW", [(0, 0), (0, 1), (1, 1), (1, 0), (0, 0)])
    assert point_in_region(cw, 0.5, 0.5)


def test_shared_edges_partition_points():
    # four unit squares tiling [0,2]^2: every point on an interior edge belongs to exactly one
    tiles = [region(f"T{i}{j}", [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1), (i, j)])
             for i in range(2) for j in range(2)]
    rng = np.random.default_rng(0)
    pts = [(1.0, y) for y in rng.uniform(0.01, 1.99, 50)] + \
          [(x, 1.0) for x in rng.uniform(0.01, 1.99, 50)] + [(1.0, 1.0)]
    for x, y in pts:
        assert sum(point_in_region(t, x, y) for t in tiles) == 1


def test_winding_oracle_agreement():
    rng = np.random.default_rng(11)
    for _ in range(10):
        ring = star_polygon(rng)
        g = region("R", ring)
        for x, y in rng.uniform(-1.2, 1.2, (200, 2)):
            if distance_to_ring(x, y, ring) < 1e-9:
                continue
            assert point_in_region(g, x, y) == winding_number(x, y, ring)


def test_mask_unit_square_example():
    m = rasterize_mask(unit_square(), GeoTransform(0, 1, 0.5, -0.5), 2, 2)
    assert m.bits.tolist() == [[True, True], [True, True]]
    assert tuple(m.window) == (0, 0, 2, 2)


def test_mask_fully_west_is_empty():
    g = region("W", [(-10, 0), (-9, 0), (-9, 1), (-10, 1), (-10, 0)])
    m = rasterize_mask(g, GeoTransform(0, 1, 0.5, -0.5), 2, 2)
    assert m.is_empty
    assert m.window.size == 0
    assert not m.full(2, 2).any()


def test_mask_window_is_clipped_bbox():
    g = region("B", [(1.2, -0.3), (3.7, -0.3), (3.7, 2.2), (1.2, 2.2), (1.2, -0.3)])
    m = rasterize_mask(g, GeoTransform(0, 4, 1, -1), 8, 4)
    # bbox cols floor(1.2)..floor(3.7) -> 1..3, rows (4-2.2)=1.8 .. 4.3 -> 1..3 clipped
    assert tuple(m.window) == (1, 1, 3, 3)


def test_mask_matches_exhaustive_point_test():
    rng = np.random.default_rng(5)
    for k in range(20):
        ring = star_polygon(rng, cx=rng.uniform(-2, 2), cy=rng.uniform(-2, 2), r_max=2.5)
        g = region("R", ring)
        t = GeoTransform(float(rng.uniform(-4, -2)), float(rng.uniform(2, 4)),
                         float(rng.uniform(0.05, 0.3)), -float(rng.uniform(0.05, 0.3)))
        w, h = int(rng.integers(5, 40)), int(rng.integers(5, 40))
        full = rasterize_mask(g, t, w, h).full(w, h)
        for r in range(h):
            for c in range(w):
                x, y = t.pixel_center(c, r)
                assert full[r, c] == point_in_region(g, x, y)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-64, 64), st.integers(-64, 64))
def test_mask_translation_invariant(seed, kx, ky):
    rng = np.random.default_rng(seed)
    ring = star_polygon(rng, r_max=2.0)
    g = region("R", ring)
    t = GeoTransform(-2.5, 2.5, 0.125, -0.125)
    # dyadic shifts keep every coordinate exactly representable
    dx, dy = kx * 0.25, ky * 0.25
    a = rasterize_mask(g, t, 40, 40)
    b = rasterize_mask(g.translated(dx, dy), GeoTransform(-2.5 + dx, 2.5 + dy, 0.125, -0.125), 40, 40)
    assert tuple(a.window) == tuple(b.window)
    assert np.array_equal(a.bits, b.bits)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_polygon_and_hole_complement_partition(seed):
    rng = np.random.default_rng(seed)
    outer = [(-3, -3), (3, -3), (3, 3), (-3, 3), (-3, -3)]
    hole = star_polygon(rng, r_max=2.5)
    with_hole = region("A", outer, [hole])
    hole_only = region("B", hole)
    t = GeoTransform(-3, 3, 0.2, -0.2)
    a = rasterize_mask(with_hole, t, 30, 30).full(30, 30)
    b = rasterize_mask(hole_only, t, 30, 30).full(30, 30)
    assert not (a & b).any()
    assert (a | b).all()


def test_bbox_and_translation():
    g = unit_square().translated(2.0, -1.0)
    assert g.bbox == (2.0, -1.0, 3.0, 0.0)
    assert point_in_region(g, 2.5, -0.5)


def test_no_warning_for_closed_rings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        parse_geojson(json.dumps(feature({"type": "Polygon", "coordinates": [SQUARE]})))
