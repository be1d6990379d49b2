import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nightlight_gdp.errors import MixedRegion
from nightlight_gdp.geometry import RegionMask, rasterize_mask
from nightlight_gdp.raster import GeoTransform, RasterGrid, SampleFormat, Window, encode_geotiff
from nightlight_gdp.zonal import (CompensatedSum, LuminosityObservation, Sensor, ZonalStats,
                                  combine_tiles, zonal_sum)
from oracles import exact_sum, region

T = GeoTransform(0.0, 0.0, 1.0, -1.0)


def encode(values, nodata=None, fmt=SampleFormat.FLOAT64, **kw):
    values = np.asarray(values, dtype=float)
    h, w = values.shape
    return encode_geotiff(RasterGrid(w, h, values, T, nodata=nodata), fmt, **kw)


def full_mask(w, h, rid="R"):
    return RegionMask(rid, Window(0, 0, w, h), np.ones((h, w), dtype=bool))


def naive(values, bits, nodata, clamp):
    picked = []
    for r in range(values.shape[0]):
        for c in range(values.shape[1]):
            v = values[r, c]
            if not bits[r, c] or math.isnan(v) or v == nodata:
                continue
            picked.append(max(v, 0.0) if clamp else v)
    return exact_sum(picked), len(picked)


def test_two_by_two_full_mask():
    s = zonal_sum(encode([[1, 2], [3, 4]]), full_mask(2, 2), Sensor.DMSP)
    assert (s.sum, s.pixel_count, s.negative_clamped) == (10.0, 4, 0)


def test_all_false_mask():
    m = RegionMask("R", Window(0, 0, 2, 2), np.zeros((2, 2), dtype=bool))
    s = zonal_sum(encode([[1, 2], [3, 4]]), m, Sensor.VIIRS)
    assert (s.sum, s.pixel_count) == (0.0, 0)
    assert math.isnan(s.mean)


def test_empty_window_mask():
    m = RegionMask("R", Window(2, 2, 0, 0), np.zeros((0, 0), dtype=bool))
    assert zonal_sum(encode([[1, 2], [3, 4]]), m, Sensor.DMSP).pixel_count == 0


def test_viirs_negative_clamped():
    s = zonal_sum(encode([[-1.5, 2.0], [-0.25, 4.0]]), full_mask(2, 2), Sensor.VIIRS)
    assert (s.sum, s.pixel_count, s.negative_clamped) == (6.0, 4, 2)
    assert s.mean == 1.5


def test_nodata_and_nan_excluded():
    data = encode([[-999.0, 2.0], [math.nan, 4.0]], nodata=-999.0)
    s = zonal_sum(data, full_mask(2, 2), Sensor.VIIRS)
    assert (s.sum, s.pixel_count, s.negative_clamped) == (6.0, 2, 0)


def test_sub_window_mask():
    vals = np.arange(20, dtype=float).reshape(4, 5)
    m = RegionMask("R", Window(1, 2, 3, 2), np.array([[1, 0, 1], [0, 1, 1]], dtype=bool))
    s = zonal_sum(encode(vals), m, Sensor.DMSP)
    assert s.sum == 11 + 13 + 17 + 18
    assert s.pixel_count == 4


def test_random_instances_match_exact_oracle():
    rng = np.random.default_rng(42)
    for k in range(40):
        w, h = (int(v) for v in rng.integers(1, 65, 2))
        vals = rng.uniform(-1e6, 1e6, (h, w)) * 10.0 ** rng.integers(-6, 0)
        vals[rng.random((h, w)) < 0.05] = -999.0
        bits = rng.random((h, w)) < 0.6
        data = encode(vals, nodata=-999.0, tile_size=16 if k % 2 else None)
        for sensor in Sensor:
            expect, n = naive(vals, bits, -999.0, sensor is Sensor.VIIRS)
            got = zonal_sum(data, RegionMask("R", Window(0, 0, w, h), bits), sensor, band_pixels=64)
            assert got.sum == expect
            assert got.pixel_count == n


def test_band_size_does_not_change_result():
    rng = np.random.default_rng(1)
    vals = rng.standard_normal((50, 37)) * 1e3
    data = encode(vals, rows_per_strip=3)
    sums = {zonal_sum(data, full_mask(37, 50), Sensor.VIIRS, band_pixels=b).sum
            for b in (1, 100, 1000, 1 << 20)}
    assert len(sums) == 1


def test_integer_valued_sum_is_exact():
    acc = CompensatedSum()
    vals = np.arange(0, 64, dtype=float).repeat(1000)
    acc.add_array(vals)
    assert acc.value == exact_sum(vals.tolist())


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=60),
       st.integers(1, 60))
def test_accumulator_matches_rational_oracle(values, split):
    try:
        expect = exact_sum(values)
    except OverflowError:
        return
    acc = CompensatedSum()
    acc.add_array(np.array(values[:split]))
    acc.add_array(np.array(values[split:]))
    assert acc.value == expect


def test_accumulator_chunking_invariant():
    rng = np.random.default_rng(2)
    vals = rng.standard_normal(3000) * 10.0 ** rng.integers(-200, 200, 3000)
    whole = CompensatedSum()
    whole.add_array(vals)
    pieces = CompensatedSum()
    pieces.CHUNK = 7
    for part in np.array_split(vals, 13):
        pieces.add_array(part)
    assert whole.value == pieces.value == exact_sum(vals.tolist())


def test_accumulator_non_finite():
    acc = CompensatedSum()
    acc.add_array(np.array([1.0, math.inf]))
    assert acc.value == math.inf
    acc = CompensatedSum()
    acc.add_array(np.array([1e308, 1e308]))
    assert acc.value == math.inf


def test_compensated_sum_keeps_small_terms():
    acc = CompensatedSum()
    acc.add_array(np.array([1e16, 1.0, -1e16, 1.0]))
    assert acc.value == 2.0


def test_combine_tiles_sums():
    parts = [ZonalStats("R", 3.0, 1, 0), ZonalStats("R", 4.0, 2, 1)]
    assert combine_tiles(parts) == ZonalStats("R", 7.0, 3, 1)


def test_combine_single_identity():
    p = ZonalStats("R", 3.5, 2, 0)
    assert combine_tiles([p]) == p


def test_combine_mixed_regions():
    with pytest.raises(MixedRegion):
        combine_tiles([ZonalStats("A", 1.0, 1), ZonalStats("B", 1.0, 1)])


def test_six_tile_split_matches_unsplit():
    rng = np.random.default_rng(9)
    vals = rng.uniform(0, 50, (30, 60))
    ring = [(3.3, -2.1), (55.2, -4.4), (50.7, -27.9), (8.8, -25.1), (3.3, -2.1)]
    g = region("R", ring)
    whole = zonal_sum(encode(vals), rasterize_mask(g, T, 60, 30), Sensor.VIIRS)
    parts = []
    for k in range(6):
        tile = vals[:, 10 * k:10 * (k + 1)]
        tt = T.shifted(10 * k, 0)
        parts.append(zonal_sum(encode(tile), rasterize_mask(g, tt, 10, 30), Sensor.VIIRS))
    merged = combine_tiles(parts)
    assert merged.pixel_count == whole.pixel_count
    assert abs(merged.sum - whole.sum) <= 1e-9 * whole.sum


def test_parallel_runs_bit_identical():
    rng = np.random.default_rng(2)
    vals = rng.standard_normal((40, 40)) * 7
    data = encode(vals, tile_size=16)
    masks = [RegionMask(str(k), Window(0, 0, 40, 40), rng.random((40, 40)) < 0.5) for k in range(8)]
    serial = [zonal_sum(data, m, Sensor.VIIRS) for m in masks]
    with ThreadPoolExecutor(4) as ex:
        parallel = list(ex.map(lambda m: zonal_sum(data, m, Sensor.VIIRS), masks))
    assert serial == parallel


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_enlarging_mask_never_decreases_sum(seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((20, 20)) * 10
    data = encode(vals)
    small = rng.random((20, 20)) < 0.3
    big = small | (rng.random((20, 20)) < 0.3)
    a = zonal_sum(data, RegionMask("R", Window(0, 0, 20, 20), small), Sensor.VIIRS)
    b = zonal_sum(data, RegionMask("R", Window(0, 0, 20, 20), big), Sensor.VIIRS)
    assert b.sum >= a.sum
    assert b.negative_clamped <= b.pixel_count


def test_observation_year_ranges():
    LuminosityObservation("R", 2013, 9, Sensor.DMSP, 1.0)
    LuminosityObservation("R", 2012, 9, "VIIRS", 1.0)
    with pytest.raises(ValueError):
        LuminosityObservation("R", 2014, 9, Sensor.DMSP, 1.0)
    with pytest.raises(ValueError):
        LuminosityObservation("R", 2011, 9, Sensor.VIIRS, 1.0)
    with pytest.raises(ValueError):
        LuminosityObservation("R", 2015, 13, Sensor.VIIRS, 1.0)
