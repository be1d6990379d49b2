"""Synthetic mini-world: rasters, boundaries, indicator tables and a pipeline config.

The world spans lon [0, 30), lat [-10, 10). DMSP composites are one 60x40
grid per month at 0.5 degrees; VIIRS composites are six 40x40 tiles per month
at 0.25 degrees (3 across, cut at the equator). Countries are axis-aligned
rectangles with integer-degree edges, so no pixel center ever lies on a
boundary and membership can be computed without the geometry module.

Expected luminosity is computed here independently of the pipeline; the
indicator tables are then built from it, so a run of the pipeline must
recover the planted relationships.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import IndicatorTable, Target, to_worldbank_csv
from .raster import GeoTransform, RasterGrid, SampleFormat, SensorUnits, encode_geotiff

YEARS = range(1992, 2019)
DMSP_YEARS = range(1992, 2014)
VIIRS_YEARS = range(2012, 2019)
MONTHS = (9, 10, 11)
VIIRS_NODATA = -999.0

# region id -> list of (lon0, lon1, lat0, lat1) rectangles; a second list gives holes
COUNTRIES = {
    "AAA": ([(1, 9, -5, 5)], [(3, 5, -1, 1)]),
    "BBB": ([(11, 24, 2, 8)], [(15, 18, 4, 6)]),
    "CCC": ([(12, 19, -8, -1), (21, 28, -7, -2)], []),
}
NAMES = {"AAA": "Alphaland", "BBB": "Betaland", "CCC": "Gammaland"}

# planted degree-2 coefficients (intercept, u, v, u*v, u^2, v^2) per target
PLANTED = {
    Target.REAL_GDP: (1.0, 0.8, 0.5, 0.6, -0.3, 0.2),
    Target.NOMINAL_GDP: (1.2, 0.6, 0.7, 0.9, -0.2, -0.1),
    Target.PPP: (2.0, 1.1, 0.4, 0.3, 0.1, 0.3),
    Target.GDP_GROWTH: (0.5, -0.4, 0.3, 0.2, 0.3, -0.2),
    Target.PER_CAPITA_GDP_GROWTH: (0.3, 0.2, -0.5, 0.4, -0.1, 0.2),
}


def _rects_mask(lon: np.ndarray, lat: np.ndarray, rects) -> np.ndarray:
    out = np.zeros(np.broadcast(lon, lat).shape, dtype=bool)
    for x0, x1, y0, y1 in rects:
        out |= (lon >= x0) & (lon < x1) & (lat >= y0) & (lat < y1)
    return out


def country_mask(rid: str, t: GeoTransform, width: int, height: int) -> np.ndarray:
    cols, rows = np.meshgrid(np.arange(width), np.arange(height))
    lon, lat = t.pixel_center(cols, rows)
    outer, holes = COUNTRIES[rid]
    return _rects_mask(lon, lat, outer) & ~_rects_mask(lon, lat, holes)


def boundaries_geojson() -> str:
    feats = []
    for rid, (outer, holes) in COUNTRIES.items():
        def ring(r):
            x0, x1, y0, y1 = r
            return [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]
        polys = []
        for k, r in enumerate(outer):
            # holes belong to the first polygon; they are all inside it
            polys.append([ring(r)] + ([ring(h) for h in holes] if k == 0 else []))
        geom = ({"type": "Polygon", "coordinates": polys[0]} if len(polys) == 1
                else {"type": "MultiPolygon", "coordinates": polys})
        feats.append({"type": "Feature", "properties": {"ISO_A3": rid, "NAME": NAMES[rid]},
                      "geometry": geom})
    return json.dumps({"type": "FeatureCollection", "features": feats}, indent=1)


DMSP_T = GeoTransform(0.0, 10.0, 0.5, -0.5)
DMSP_SHAPE = (60, 40)  # width, height
VIIRS_TILE = 40


def viirs_tiles():
    """(tile number, transform) for the six VIIRS tiles, in tile order."""
    out = []
    for k, (j, i) in enumerate([(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)], start=1):
        out.append((k, GeoTransform(10.0 * i, 10.0 - 10.0 * j, 0.25, -0.25)))
    return out


@dataclass
class MiniWorld:
    root: Path
    config_path: Path
    countries: list
    luminosity: dict = field(default_factory=dict)  # rid -> {year: harmonized value}
    population: IndicatorTable = None
    targets: dict = field(default_factory=dict)      # Target -> IndicatorTable


def _level(rid_index: int, year: int, month: int) -> float:
    # smooth growth per country, mild month effect
    return 8.0 + 4.0 * rid_index + 0.9 * (year - 1992) * (1 + 0.3 * rid_index) + 0.5 * (month - 10)


def generate(root, seed: int = 0, noise_r2: float | None = None) -> MiniWorld:
    """Write a mini-world under ``root``.

    With ``noise_r2=None`` every target is an exact degree-2 polynomial of
    scaled luminosity and population. With ``noise_r2`` set, level targets get
    Gaussian noise sized for that pooled R^2 and the two growth targets become
    year-over-year percentage changes of the noisy levels.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    rids = sorted(COUNTRIES)
    dmsp_sums: dict = {}
    viirs_sums: dict = {}

    w, h = DMSP_SHAPE
    dmsp_masks = {rid: country_mask(rid, DMSP_T, w, h) for rid in rids}
    for year in DMSP_YEARS:
        for month in MONTHS:
            vals = rng.integers(0, 4, size=(h, w)).astype(np.float64)  # background
            for k, rid in enumerate(rids):
                level = _level(k, year, month)
                m = dmsp_masks[rid]
                vals[m] = np.clip(np.round(level + rng.normal(0, 3, m.sum())), 0, 63)
            grid = RasterGrid(w, h, vals, DMSP_T, sensor_units=SensorUnits.DIGITAL_NUMBER)
            path = root / "rasters" / "dmsp" / str(year) / f"dmsp_{year}{month:02d}.tif"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(encode_geotiff(grid, SampleFormat.UINT8))
            for rid in rids:
                dmsp_sums[(rid, year, month)] = math.fsum(vals[dmsp_masks[rid]].tolist())

    tiles = viirs_tiles()
    viirs_masks = {(rid, k): country_mask(rid, t, VIIRS_TILE, VIIRS_TILE)
                   for rid in rids for k, t in tiles}
    for year in VIIRS_YEARS:
        for month in MONTHS:
            per_tile = {rid: [] for rid in rids}
            for k, t in tiles:
                vals = rng.normal(0.0, 0.3, size=(VIIRS_TILE, VIIRS_TILE))  # noisy background
                for ci, rid in enumerate(rids):
                    m = viirs_masks[(rid, k)]
                    level = _level(ci, year, month) / 4.0 + 1.5
                    vals[m] = level + rng.normal(0, 0.8, m.sum())
                vals = vals.astype(np.float32).astype(np.float64)
                holes = rng.random(vals.shape) < 0.01
                vals[holes] = VIIRS_NODATA
                grid = RasterGrid(VIIRS_TILE, VIIRS_TILE, vals, t, nodata=VIIRS_NODATA)
                path = root / "rasters" / "viirs" / str(year) / f"{month:02d}" / f"tile{k}.tif"
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(encode_geotiff(grid, SampleFormat.FLOAT32, tile_size=16,
                                                compress=True))
                for rid in rids:
                    m = viirs_masks[(rid, k)] & (vals != VIIRS_NODATA)
                    if viirs_masks[(rid, k)].any():
                        per_tile[rid].append(math.fsum(np.maximum(vals[m], 0.0).tolist()))
            for rid in rids:
                viirs_sums[(rid, year, month)] = math.fsum(per_tile[rid])

    lum = {}
    for rid in rids:
        d = {y: math.fsum(dmsp_sums[(rid, y, m)] for m in MONTHS) / len(MONTHS) for y in DMSP_YEARS}
        v = {y: math.fsum(viirs_sums[(rid, y, m)] for m in MONTHS) / len(MONTHS) for y in VIIRS_YEARS}
        offset = math.fsum([v[2012] - d[2012], v[2013] - d[2013]]) / 2
        lum[rid] = {y: (d[y] if y <= 2012 else v[y] - offset) for y in YEARS}

    population = IndicatorTable("SP.POP.TOTL", {})
    poly_in = {}
    for k, rid in enumerate(rids):
        for y in YEARS:
            L = lum[rid][y]
            # exact mode keeps population affine in (luminosity, year) with shared
            # coefficients, so the year table is an exact degree-2 model too
            base = 2.0e7 if noise_r2 is None else 2.0e7 + 3.0e6 * k
            pop = base + 4.0e5 * (y - 1992) + 500.0 * L
            population.rows[(rid, y)] = pop
            poly_in[(rid, y)] = (L / 1.0e4, (pop - 2.0e7) / 1.0e7)

    def planted(target, u, v):
        c = PLANTED[target]
        return c[0] + c[1] * u + c[2] * v + c[3] * u * v + c[4] * u * u + c[5] * v * v

    targets = {}
    if noise_r2 is None:
        for target in Target:
            scale = 1e11 if target in (Target.REAL_GDP, Target.NOMINAL_GDP, Target.PPP) else 1.0
            targets[target] = IndicatorTable(
                target.value, {k: scale * planted(target, *uv) for k, uv in poly_in.items()})
    else:
        levels = {}
        for target in (Target.REAL_GDP, Target.NOMINAL_GDP, Target.PPP):
            signal = {k: 3.0 + planted(target, *uv) for k, uv in poly_in.items()}
            var = float(np.var(list(signal.values())))
            sigma = math.sqrt(var * (1.0 - noise_r2) / noise_r2)
            levels[target] = {k: s + rng.normal(0.0, sigma) for k, s in sorted(signal.items())}
            targets[target] = IndicatorTable(target.value,
                                             {k: 1e11 * s for k, s in levels[target].items()})
        real = levels[Target.REAL_GDP]
        growth, pc_growth = {}, {}
        for rid in rids:
            for y in YEARS[1:]:
                prev, cur = real[(rid, y - 1)], real[(rid, y)]
                growth[(rid, y)] = 100.0 * (cur - prev) / prev
                pc_prev = prev / population.rows[(rid, y - 1)]
                pc_cur = cur / population.rows[(rid, y)]
                pc_growth[(rid, y)] = 100.0 * (pc_cur - pc_prev) / pc_prev
        targets[Target.GDP_GROWTH] = IndicatorTable(Target.GDP_GROWTH.value, growth)
        targets[Target.PER_CAPITA_GDP_GROWTH] = IndicatorTable(
            Target.PER_CAPITA_GDP_GROWTH.value, pc_growth)

    ind_dir = root / "indicators"
    ind_dir.mkdir(parents=True, exist_ok=True)
    wb_years = range(1990, 2021)
    (ind_dir / "population.csv").write_text(
        to_worldbank_csv(population, wb_years, NAMES, "Population, total"))
    for target, table in targets.items():
        (ind_dir / f"{target.value}.csv").write_text(
            to_worldbank_csv(table, wb_years, NAMES, target.label))
    (root / "boundaries.geojson").write_text(boundaries_geojson())

    config = {
        "raster_dir": "rasters",
        "rasters": {"DMSP": "dmsp/{year}/dmsp_{year}{month:02d}.tif",
                    "VIIRS": "viirs/{year}/{month:02d}/tile{tile}.tif"},
        "boundaries": "boundaries.geojson",
        "indicators": {"population": "indicators/population.csv",
                       **{t.value: f"indicators/{t.value}.csv" for t in Target}},
        "countries": rids,
        "out_dir": "out",
    }
    config_path = root / "pipeline.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n")
    return MiniWorld(root, config_path, rids, lum, population, targets)
