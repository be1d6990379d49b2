import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nightlight_gdp.errors import (InvalidRaster, LossyEncoding, MalformedTiff,
                                   MissingGeoreference, UnsupportedFeature, WindowOutOfBounds)
from nightlight_gdp.raster import (GeoTiffReader, GeoTransform, RasterGrid, SampleFormat,
                                   SensorUnits, Window, encode_geotiff, geo_to_pixel,
                                   parse_geotiff, read_window)
from oracles import build_tiff, minimal_entries, patch_tag


def test_smallest_legal_tiff():
    data = build_tiff(minimal_entries(), b"\x00")
    g = parse_geotiff(data)
    assert (g.width, g.height) == (1, 1)
    assert g.values.tolist() == [[0.0]]
    t = g.transform
    assert (t.x_origin, t.y_origin, t.x_size, t.y_size) == (0.0, 0.0, 1.0, -1.0)
    assert g.nodata is None


def test_tiepoint_not_at_origin():
    # tiepoint anchors pixel (2, 3) at (10, 20)
    e = minimal_entries(extra={33550: (12, [0.5, 0.25, 0.0]),
                               33922: (12, [2.0, 3.0, 0.0, 10.0, 20.0, 0.0])})
    t = parse_geotiff(build_tiff(e, b"\x07")).transform
    assert (t.x_origin, t.y_origin, t.x_size, t.y_size) == (9.0, 20.75, 0.5, -0.25)


def test_big_endian_hand_built_int16():
    vals = [-3, 7, 300, -32768]
    pixels = struct.pack(">4h", *vals)
    data = build_tiff(minimal_entries(2, 2, bits=16, fmt=2), pixels, bo=">")
    assert parse_geotiff(data).values.ravel().tolist() == vals


def test_gdal_nodata_parsed():
    e = minimal_entries(extra={42113: (2, "-999")})
    assert parse_geotiff(build_tiff(e, b"\x01")).nodata == -999.0


def test_deflate_strip_hand_built():
    raw = np.arange(6, dtype="<f4").tobytes()
    e = minimal_entries(3, 2, bits=32, fmt=3, compression=8)
    g = parse_geotiff(build_tiff(e, zlib.compress(raw)))
    assert g.values.ravel().tolist() == [0, 1, 2, 3, 4, 5]


def test_round_trip_4x3_float32(grid_4x3):
    back = parse_geotiff(encode_geotiff(grid_4x3, SampleFormat.FLOAT32))
    assert back == grid_4x3
    assert back.values.ravel().tolist() == list(range(12))


def test_round_trip_1x1():
    g = RasterGrid(1, 1, [0.0], GeoTransform(0, 0, 1, -1))
    assert parse_geotiff(encode_geotiff(g, SampleFormat.UINT8)) == g


def test_lzw_rejected(grid_4x3):
    data = patch_tag(encode_geotiff(grid_4x3), 259, 5)
    with pytest.raises(UnsupportedFeature):
        parse_geotiff(data)


def test_packbits_rejected(grid_4x3):
    with pytest.raises(UnsupportedFeature):
        parse_geotiff(patch_tag(encode_geotiff(grid_4x3), 259, 32773))


def test_multiple_samples_rejected(grid_4x3):
    with pytest.raises(UnsupportedFeature):
        parse_geotiff(patch_tag(encode_geotiff(grid_4x3), 277, 3))


def test_planar_config_rejected():
    e = minimal_entries(extra={284: (3, [2])})
    with pytest.raises(UnsupportedFeature):
        parse_geotiff(build_tiff(e, b"\x00"))


def test_model_transformation_rejected():
    e = minimal_entries(extra={34264: (12, [1.0] * 16)})
    with pytest.raises(UnsupportedFeature):
        parse_geotiff(build_tiff(e, b"\x00"))


def test_projected_geokeys_rejected():
    # GTModelTypeGeoKey (1024) = 1 means projected
    keys = [1, 1, 0, 1, 1024, 0, 1, 1]
    e = minimal_entries(extra={34735: (3, keys)})
    with pytest.raises(UnsupportedFeature):
        parse_geotiff(build_tiff(e, b"\x00"))


def test_geographic_geokeys_accepted():
    keys = [1, 1, 0, 2, 1024, 0, 1, 2, 2048, 0, 1, 4326]
    e = minimal_entries(extra={34735: (3, keys)})
    assert parse_geotiff(build_tiff(e, b"\x05")).values[0, 0] == 5.0


def test_missing_georeference():
    with pytest.raises(MissingGeoreference):
        parse_geotiff(build_tiff(minimal_entries(geo=False), b"\x00"))


@pytest.mark.parametrize("data", [b"", b"XX*\0\x08\0\0\0", b"MM*\0\0\0\0\x08", b"II*\0\xff\0\0\0"])
def test_malformed_headers(data):
    with pytest.raises(MalformedTiff):
        parse_geotiff(data)


def test_truncated_pixel_data(grid_4x3):
    data = encode_geotiff(grid_4x3)
    with pytest.raises(MalformedTiff):
        parse_geotiff(data[:-10])


def test_strip_offset_out_of_range():
    data = build_tiff(minimal_entries(), b"\x00")
    bad = bytearray(data)
    (ifd,) = struct.unpack_from("<I", bad, 4)
    (n,) = struct.unpack_from("<H", bad, ifd)
    for k in range(n):
        at = ifd + 2 + 12 * k
        if struct.unpack_from("<H", bad, at)[0] == 273:
            struct.pack_into("<I", bad, at + 8, 10**6)
    with pytest.raises(MalformedTiff):
        parse_geotiff(bytes(bad))


def test_lossy_encoding_fraction_dn():
    g = RasterGrid(2, 1, [1.0, 63.5], GeoTransform(0, 0, 1, -1),
                   sensor_units=SensorUnits.DIGITAL_NUMBER)
    with pytest.raises(LossyEncoding):
        encode_geotiff(g, SampleFormat.UINT8)


@pytest.mark.parametrize("fmt,value", [
    (SampleFormat.UINT8, 256.0), (SampleFormat.UINT8, -1.0), (SampleFormat.INT16, 0.5),
    (SampleFormat.FLOAT32, 0.1), (SampleFormat.UINT32, float("nan")),
])
def test_lossy_encoding(fmt, value):
    g = RasterGrid(1, 1, [value], GeoTransform(0, 0, 1, -1))
    with pytest.raises(LossyEncoding):
        encode_geotiff(g, fmt)


def test_nan_survives_float_formats():
    g = RasterGrid(2, 1, [np.nan, 1.5], GeoTransform(0, 0, 1, -1))
    for fmt in (SampleFormat.FLOAT32, SampleFormat.FLOAT64):
        assert parse_geotiff(encode_geotiff(g, fmt)) == g


def test_dn_check_after_parse():
    g = RasterGrid(1, 1, [70.0], GeoTransform(0, 0, 1, -1))
    data = encode_geotiff(g, SampleFormat.UINT8)
    with pytest.raises(InvalidRaster):
        parse_geotiff(data, SensorUnits.DIGITAL_NUMBER)


def test_dn_nodata_ignored_by_check():
    g = RasterGrid(2, 1, [255.0, 12.0], GeoTransform(0, 0, 1, -1), nodata=255.0)
    back = parse_geotiff(encode_geotiff(g, SampleFormat.UINT8), SensorUnits.DIGITAL_NUMBER)
    assert back.sensor_units is SensorUnits.DIGITAL_NUMBER


def test_grid_length_checked():
    with pytest.raises(ValueError):
        RasterGrid(3, 2, [0.0] * 5, GeoTransform(0, 0, 1, -1))


def test_grid_values_immutable(grid_4x3):
    with pytest.raises(ValueError):
        grid_4x3.values[0, 0] = 99.0


def test_transform_rejects_zero_size():
    with pytest.raises(ValueError):
        GeoTransform(0, 0, 0.0, -1)


def test_full_window_equals_parse(grid_4x3):
    data = encode_geotiff(grid_4x3)
    w = read_window(data, Window(0, 0, 4, 3))
    assert np.array_equal(w.values, parse_geotiff(data).values)


def test_window_example(grid_4x3):
    w = read_window(encode_geotiff(grid_4x3), Window(1, 1, 2, 2))
    assert w.values.ravel().tolist() == [5, 6, 9, 10]


@pytest.mark.parametrize("window", [Window(3, 0, 2, 1), Window(0, 2, 1, 2), Window(-1, 0, 1, 1)])
def test_window_out_of_bounds(grid_4x3, window):
    with pytest.raises(WindowOutOfBounds):
        read_window(encode_geotiff(grid_4x3), window)


def test_window_decodes_only_needed_blocks(monkeypatch):
    big = RasterGrid(64, 64, np.arange(64 * 64, dtype=float), GeoTransform(0, 0, 1, -1))
    reader = GeoTiffReader(encode_geotiff(big, SampleFormat.UINT16, tile_size=16))
    seen = []
    orig = reader._block
    monkeypatch.setattr(reader, "_block", lambda bx, by: seen.append((bx, by)) or orig(bx, by))
    reader.read_window(Window(20, 40, 5, 3))
    assert seen == [(1, 2)]


def test_geo_to_pixel_unit():
    assert geo_to_pixel(GeoTransform(0, 0, 1, -1), 0.5, -0.5) == (0.5, 0.5)


def test_geo_to_pixel_viirs_tile():
    t = GeoTransform(-180.0, 75.0, 1 / 240, -1 / 240)
    assert geo_to_pixel(t, -180.0, 75.0) == (0.0, 0.0)


def test_pixel_geo_round_trip_1000():
    rng = np.random.default_rng(3)
    t = GeoTransform(-180.0, 75.0, 1 / 240, -1 / 240)
    cols = rng.integers(0, 28800, 1000)
    rows = rng.integers(0, 18000, 1000)
    lon, lat = t.pixel_center(cols, rows)
    c, r = geo_to_pixel(t, lon, lat)
    assert np.max(np.abs(c - (cols + 0.5))) < 1e-9
    assert np.max(np.abs(r - (rows + 0.5))) < 1e-9


# ---------------------------------------------------------------- properties

grids = st.builds(
    lambda w, h, seed, fmt: _random_grid(np.random.default_rng(seed), w, h, fmt),
    st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1), st.sampled_from(SampleFormat))


def _random_grid(rng, w, h, fmt):
    dt = fmt.dtype
    if dt.kind == "f":
        raw = rng.standard_normal(w * h).astype(dt)
    else:
        info = np.iinfo(dt)
        raw = rng.integers(info.min, int(info.max) + 1, w * h, dtype=np.int64 if info.max < 2**63 else np.uint64).astype(dt)
    t = GeoTransform(float(rng.uniform(-170, 170)), float(rng.uniform(-80, 80)),
                     float(rng.uniform(1e-3, 1)), -float(rng.uniform(1e-3, 1)))
    return RasterGrid(w, h, raw.astype(np.float64), t), fmt


@settings(max_examples=60, deadline=None)
@given(grids, st.sampled_from(["<", ">"]), st.sampled_from([None, 16, 32]), st.booleans())
def test_parse_encode_identity(gf, bo, tile, compress):
    g, fmt = gf
    data = encode_geotiff(g, fmt, byteorder=bo, tile_size=tile, compress=compress)
    assert parse_geotiff(data) == g


@settings(max_examples=40, deadline=None)
@given(grids, st.sampled_from([None, 16]))
def test_byte_order_independent(gf, tile):
    g, fmt = gf
    le = parse_geotiff(encode_geotiff(g, fmt, byteorder="<", tile_size=tile))
    be = parse_geotiff(encode_geotiff(g, fmt, byteorder=">", tile_size=tile))
    assert le == be


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_window_equals_slice(data):
    w = data.draw(st.integers(1, 40))
    h = data.draw(st.integers(1, 40))
    g = RasterGrid(w, h, np.arange(w * h, dtype=float), GeoTransform(0, 0, 1, -1))
    col = data.draw(st.integers(0, w - 1))
    row = data.draw(st.integers(0, h - 1))
    ww = data.draw(st.integers(1, w - col))
    hh = data.draw(st.integers(1, h - row))
    tile = data.draw(st.sampled_from([None, 16]))
    blob = encode_geotiff(g, SampleFormat.UINT16, tile_size=tile, rows_per_strip=3)
    got = read_window(blob, Window(col, row, ww, hh)).values
    assert np.array_equal(got, g.values[row:row + hh, col:col + ww])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_dmsp_fixture_values_are_digital_numbers(w, h, seed):
    rng = np.random.default_rng(seed)
    g = RasterGrid(w, h, rng.integers(0, 64, w * h).astype(float), GeoTransform(0, 0, 1, -1),
                   sensor_units=SensorUnits.DIGITAL_NUMBER)
    back = parse_geotiff(encode_geotiff(g, SampleFormat.UINT8), SensorUnits.DIGITAL_NUMBER)
    v = back.values
    assert np.all((v >= 0) & (v <= 63) & (v == np.floor(v)))
