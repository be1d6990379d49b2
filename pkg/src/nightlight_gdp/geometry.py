"""Country boundaries: GeoJSON parsing, point-in-polygon and pixel-center masks.

Inside/outside follows the even-odd rule with half-open edge ownership: an
edge from lower endpoint (x0, y0) to upper endpoint (x1, y1) crosses the
horizontal line through a point iff ``y0 <= y < y1``, and the crossing counts
when it lies strictly to the right of the point. Horizontal edges never count.
Both :func:`point_in_region` and :func:`rasterize_mask` go through
:func:`_crossings`, so the mask agrees bit-for-bit with per-pixel tests.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    AntimeridianCrossing,
    MalformedGeoJson,
    MissingIdProperty,
    UnclosedRing,
    UnsupportedGeometry,
)
from .raster import GeoTransform, Window, geo_to_pixel

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LinearRing:
    vertices: tuple

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 4:
            raise ValueError(f"ring needs at least 4 vertices, got {len(verts)}")
        if verts[0] != verts[-1]:
            raise ValueError("ring is not closed")
        object.__setattr__(self, "vertices", verts)

    def edges(self) -> np.ndarray:
        """Non-horizontal edges as rows (x_low, y_low, x_high, y_high)."""
        v = np.asarray(self.vertices)
        a, b = v[:-1], v[1:]
        keep = a[:, 1] != b[:, 1]
        a, b = a[keep], b[keep]
        swap = a[:, 1] > b[:, 1]
        lo = np.where(swap[:, None], b, a)
        hi = np.where(swap[:, None], a, b)
        return np.hstack([lo, hi])

    def __eq__(self, other):
        if not isinstance(other, LinearRing):
            return NotImplemented
        return self.vertices == other.vertices

    __hash__ = None


@dataclass(frozen=True)
class Polygon:
    exterior: LinearRing
    holes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))

    @property
    def rings(self) -> tuple:
        return (self.exterior, *self.holes)

    def edges(self) -> np.ndarray:
        return np.vstack([r.edges() for r in self.rings])


@dataclass(frozen=True)
class RegionGeometry:
    region_id: str
    name: str
    polygons: tuple
    _edges: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        polys = tuple(self.polygons)
        if not polys:
            raise ValueError(f"{self.region_id}: geometry has no polygons")
        for poly in polys:
            for ring in poly.rings:
                xs = [x for x, _ in ring.vertices]
                ys = [y for _, y in ring.vertices]
                if max(abs(x) for x in xs) > 180 or max(abs(y) for y in ys) > 90:
                    raise ValueError(f"{self.region_id}: coordinate outside lon/lat range")
                if max(xs) - min(xs) > 180:
                    raise AntimeridianCrossing(
                        f"{self.region_id}: ring spans more than 180 degrees of longitude; "
                        "split it at the antimeridian")
        object.__setattr__(self, "polygons", polys)
        object.__setattr__(self, "_edges", tuple(p.edges() for p in polys))

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        v = np.vstack([np.asarray(p.exterior.vertices) for p in self.polygons])
        return (float(v[:, 0].min()), float(v[:, 1].min()),
                float(v[:, 0].max()), float(v[:, 1].max()))

    def translated(self, dx: float, dy: float) -> "RegionGeometry":
        def move(ring):
            return LinearRing([(x + dx, y + dy) for x, y in ring.vertices])
        polys = [Polygon(move(p.exterior), [move(h) for h in p.holes]) for p in self.polygons]
        return RegionGeometry(self.region_id, self.name, polys)


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Pixels of a raster whose centers fall inside a region, over a sub-window."""

    region_id: str
    window: Window
    bits: np.ndarray  # bool, shape (window.height, window.width)

    @property
    def is_empty(self) -> bool:
        return self.window.size == 0 or not self.bits.any()

    def full(self, width: int, height: int) -> np.ndarray:
        """Expand to a whole-raster boolean array (for tests and small rasters)."""
        out = np.zeros((height, width), dtype=bool)
        w = self.window
        out[w.row_off:w.row_off + w.height, w.col_off:w.col_off + w.width] = self.bits
        return out


# --------------------------------------------------------------------------
# GeoJSON


def _ring(coords, region_id) -> LinearRing:
    if not isinstance(coords, list) or not coords:
        raise MalformedGeoJson(f"{region_id}: ring must be a non-empty array of positions")
    verts = []
    for pos in coords:
        if (not isinstance(pos, list) or len(pos) < 2
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in pos[:2])):
            raise MalformedGeoJson(f"{region_id}: bad position {pos!r}")
        x, y = float(pos[0]), float(pos[1])
        if not (math.isfinite(x) and math.isfinite(y)) or abs(x) > 180 or abs(y) > 90:
            raise MalformedGeoJson(f"{region_id}: position {pos!r} outside lon/lat range")
        verts.append((x, y))
    if verts[0] != verts[-1]:
        warnings.warn(f"{region_id}: closing unclosed ring", UnclosedRing, stacklevel=4)
        verts.append(verts[0])
    if len(verts) < 4:
        raise MalformedGeoJson(f"{region_id}: ring has fewer than 4 positions")
    return LinearRing(verts)


def _polygon(rings, region_id) -> Polygon:
    if not isinstance(rings, list) or not rings:
        raise MalformedGeoJson(f"{region_id}: polygon must have at least one ring")
    parsed = [_ring(r, region_id) for r in rings]
    return Polygon(parsed[0], parsed[1:])


def _feature(feat, id_property: str, name_property: str) -> RegionGeometry:
    if not isinstance(feat, dict) or feat.get("type") != "Feature":
        raise MalformedGeoJson("expected a Feature object")
    props = feat.get("properties") or {}
    if not isinstance(props, dict):
        raise MalformedGeoJson("Feature properties must be an object")
    if props.get(id_property) in (None, ""):
        raise MissingIdProperty(f"feature lacks id property {id_property!r}")
    region_id = str(props[id_property])
    name = str(props.get(name_property) or region_id)
    geom = feat.get("geometry")
    if not isinstance(geom, dict) or "type" not in geom:
        raise MalformedGeoJson(f"{region_id}: feature has no geometry")
    kind, coords = geom["type"], geom.get("coordinates")
    if kind == "Polygon":
        polys = [_polygon(coords, region_id)]
    elif kind == "MultiPolygon":
        if not isinstance(coords, list) or not coords:
            raise MalformedGeoJson(f"{region_id}: empty MultiPolygon")
        polys = [_polygon(p, region_id) for p in coords]
    else:
        raise UnsupportedGeometry(f"{region_id}: {kind} geometry (Polygon/MultiPolygon only)")
    try:
        return RegionGeometry(region_id, name, polys)
    except AntimeridianCrossing:
        raise
    except ValueError as exc:
        raise MalformedGeoJson(str(exc)) from None


def parse_geojson(text: str, id_property: str = "ISO_A3",
                  name_property: str = "NAME") -> list[RegionGeometry]:
    """Parse a FeatureCollection or single Feature into one geometry per feature."""
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedGeoJson(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedGeoJson("top-level value must be an object")
    kind = doc.get("type")
    if kind == "FeatureCollection":
        feats = doc.get("features")
        if not isinstance(feats, list):
            raise MalformedGeoJson("FeatureCollection without a features array")
    elif kind == "Feature":
        feats = [doc]
    elif kind in ("Point", "MultiPoint", "LineString", "MultiLineString",
                  "GeometryCollection", "Polygon", "MultiPolygon"):
        raise UnsupportedGeometry(f"bare {kind}; wrap geometries in a Feature with an id property")
    else:
        raise MalformedGeoJson(f"unknown GeoJSON type {kind!r}")
    return [_feature(f, id_property, name_property) for f in feats]


# --------------------------------------------------------------------------
# point in polygon


def _crossings(edges: np.ndarray, y) -> np.ndarray:
    """x of every edge crossing the horizontal line at ``y`` (half-open in y)."""
    x0, y0, x1, y1 = edges[:, 0], edges[:, 1], edges[:, 2], edges[:, 3]
    hit = (y0 <= y) & (y < y1)
    x0, y0, x1, y1 = x0[hit], y0[hit], x1[hit], y1[hit]
    return x0 + (y - y0) * (x1 - x0) / (y1 - y0)


def point_in_region(g: RegionGeometry, lon: float, lat: float) -> bool:
    """Even-odd test per polygon (holes excluded); true if any polygon contains the point."""
    for edges in g._edges:
        xs = _crossings(edges, lat)
        if np.count_nonzero(xs > lon) % 2:
            return True
    return False


def rasterize_mask(g: RegionGeometry, t: GeoTransform, width: int, height: int) -> RegionMask:
    """Mask of pixels (of a width x height raster) whose centers lie inside ``g``.

    The mask covers only the pixel window of the geometry's bounding box
    clipped to the raster. A geometry that misses the raster gets an empty
    window rather than an error.
    """
    minx, miny, maxx, maxy = g.bbox
    ca, ra = geo_to_pixel(t, minx, miny)
    cb, rb = geo_to_pixel(t, maxx, maxy)
    c0 = max(0, math.floor(min(ca, cb)))
    c1 = min(width, math.floor(max(ca, cb)) + 1)
    r0 = max(0, math.floor(min(ra, rb)))
    r1 = min(height, math.floor(max(ra, rb)) + 1)
    if c1 <= c0 or r1 <= r0:
        log.debug("%s does not intersect the raster", g.region_id)
        return RegionMask(g.region_id, Window(min(c0, width), min(r0, height), 0, 0),
                          np.zeros((0, 0), dtype=bool))
    cols = np.arange(c0, c1)
    xs, _ = t.pixel_center(cols.astype(np.float64), 0.0)
    bits = np.zeros((r1 - r0, c1 - c0), dtype=bool)
    for i, row in enumerate(range(r0, r1)):
        _, y = t.pixel_center(0.0, float(row))
        for edges in g._edges:
            cross = np.sort(_crossings(edges, y))
            if cross.size == 0:
                continue
            # number of crossings strictly right of each center
            right = cross.size - np.searchsorted(cross, xs, side="right")
            bits[i] |= (right % 2).astype(bool)
    return RegionMask(g.region_id, Window(c0, r0, c1 - c0, r1 - r0), bits)
