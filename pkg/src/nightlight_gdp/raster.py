"""GeoTIFF decoding and encoding with windowed, bounded-memory reads.

Only the subset of TIFF 6.0 / GeoTIFF 1.1 used by the published nighttime
lights composites is supported: a single image with one sample per pixel,
8/16/32/64-bit integer or IEEE float samples, strips or tiles, and either no
compression or Deflate. Georeferencing comes from ModelTiepoint plus
ModelPixelScale; the CRS is assumed to be WGS84 geographic.
"""

from __future__ import annotations

import enum
import math
import struct
import zlib
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Optional

import numpy as np

from .errors import (
    InvalidRaster,
    LossyEncoding,
    MalformedTiff,
    MissingGeoreference,
    UnsupportedFeature,
    WindowOutOfBounds,
)

# TIFF tags
IMAGE_WIDTH = 256
IMAGE_LENGTH = 257
BITS_PER_SAMPLE = 258
COMPRESSION = 259
PHOTOMETRIC = 262
STRIP_OFFSETS = 273
SAMPLES_PER_PIXEL = 277
ROWS_PER_STRIP = 278
STRIP_BYTE_COUNTS = 279
PLANAR_CONFIG = 284
PREDICTOR = 317
TILE_WIDTH = 322
TILE_LENGTH = 323
TILE_OFFSETS = 324
TILE_BYTE_COUNTS = 325
SAMPLE_FORMAT = 339
MODEL_PIXEL_SCALE = 33550
MODEL_TIEPOINT = 33922
MODEL_TRANSFORMATION = 34264
GEO_KEY_DIRECTORY = 34735
GDAL_NODATA = 42113

COMPRESSION_NONE = 1
COMPRESSION_DEFLATE = (8, 32946)

# field type -> (struct code, byte size)
_FIELD_TYPES = {
    1: ("B", 1), 2: ("s", 1), 3: ("H", 2), 4: ("I", 4), 5: ("II", 8),
    6: ("b", 1), 7: ("B", 1), 8: ("h", 2), 9: ("i", 4), 10: ("ii", 8),
    11: ("f", 4), 12: ("d", 8),
}
_SHORT, _LONG, _DOUBLE, _ASCII = 3, 4, 12, 2

# GeoKey ids
_GT_MODEL_TYPE = 1024
_MODEL_TYPE_PROJECTED = 1


class SensorUnits(enum.Enum):
    DIGITAL_NUMBER = "DigitalNumber"
    RADIANCE = "RadianceNanoWattsPerCm2Sr"


class SampleFormat(enum.Enum):
    """On-disk sample encodings accepted by :func:`encode_geotiff`."""

    UINT8 = "uint8"
    INT8 = "int8"
    UINT16 = "uint16"
    INT16 = "int16"
    UINT32 = "uint32"
    INT32 = "int32"
    UINT64 = "uint64"
    INT64 = "int64"
    FLOAT32 = "float32"
    FLOAT64 = "float64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.value)

    @property
    def tiff_code(self) -> int:
        kind = self.dtype.kind
        return {"u": 1, "i": 2, "f": 3}[kind]


def _numpy_dtype(bits: int, fmt: int) -> np.dtype:
    kind = {1: "u", 2: "i", 3: "f"}.get(fmt)
    if kind is None:
        raise UnsupportedFeature(f"SampleFormat {fmt}")
    if bits not in (8, 16, 32, 64) or (kind == "f" and bits < 32):
        raise UnsupportedFeature(f"{bits}-bit samples with SampleFormat {fmt}")
    return np.dtype(f"{kind}{bits // 8}")


@dataclass(frozen=True)
class GeoTransform:
    """North-up affine georeference: outer corner of pixel (0, 0) plus pixel size."""

    x_origin: float
    y_origin: float
    x_size: float
    y_size: float

    def __post_init__(self):
        vals = (self.x_origin, self.y_origin, self.x_size, self.y_size)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite geotransform {vals}")
        if self.x_size == 0 or self.y_size == 0:
            raise ValueError("pixel size must be non-zero")

    def pixel_center(self, col, row):
        """Lon/lat of the center of pixel (col, row); accepts arrays."""
        return (self.x_origin + (col + 0.5) * self.x_size,
                self.y_origin + (row + 0.5) * self.y_size)

    def pixel_to_geo(self, col, row):
        return (self.x_origin + col * self.x_size,
                self.y_origin + row * self.y_size)

    def shifted(self, cols: int, rows: int) -> "GeoTransform":
        """Transform of a sub-grid whose pixel (0, 0) is pixel (cols, rows) here."""
        x, y = self.pixel_to_geo(cols, rows)
        return GeoTransform(x, y, self.x_size, self.y_size)


def geo_to_pixel(t: GeoTransform, lon: float, lat: float) -> tuple[float, float]:
    """Continuous pixel coordinates of a point; ``floor`` gives the containing pixel."""
    return (lon - t.x_origin) / t.x_size, (lat - t.y_origin) / t.y_size


class Window(NamedTuple):
    col_off: int
    row_off: int
    width: int
    height: int

    @property
    def size(self) -> int:
        return self.width * self.height


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _values_equal(a: np.ndarray, b: np.ndarray) -> bool:
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def _nodata_equal(a: Optional[float], b: Optional[float]) -> bool:
    if a is None or b is None:
        return a is b
    return a == b or (math.isnan(a) and math.isnan(b))


@dataclass(frozen=True, eq=False)
class RasterGrid:
    """A decoded single-band raster. ``values`` has shape (height, width)."""

    width: int
    height: int
    values: np.ndarray
    transform: GeoTransform
    nodata: Optional[float] = None
    sensor_units: SensorUnits = SensorUnits.RADIANCE

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.size != self.width * self.height:
            raise ValueError(
                f"{values.size} values for a {self.width}x{self.height} grid")
        values = np.array(values.reshape(self.height, self.width), copy=True)
        object.__setattr__(self, "values", _freeze(values))

    def valid_mask(self) -> np.ndarray:
        return valid_pixels(self.values, self.nodata)

    def check_units(self) -> None:
        """Raise :class:`InvalidRaster` if DigitalNumber values leave [0, 63] or are fractional."""
        if self.sensor_units is not SensorUnits.DIGITAL_NUMBER:
            return
        v = self.values[self.valid_mask()]
        if v.size and (v.min() < 0 or v.max() > 63 or np.any(v != np.round(v))):
            raise InvalidRaster("DigitalNumber grid has values outside integer range 0..63")

    def __eq__(self, other):
        if not isinstance(other, RasterGrid):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and self.transform == other.transform
                and self.sensor_units == other.sensor_units
                and _nodata_equal(self.nodata, other.nodata)
                and _values_equal(self.values, other.values))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RasterWindow:
    col_offset: int
    row_offset: int
    width: int
    height: int
    values: np.ndarray

    @property
    def window(self) -> Window:
        return Window(self.col_offset, self.row_offset, self.width, self.height)


def valid_pixels(values: np.ndarray, nodata: Optional[float]) -> np.ndarray:
    """Boolean array of pixels that are neither NaN nor the nodata sentinel."""
    ok = ~np.isnan(values)
    if nodata is not None and not math.isnan(nodata):
        ok &= values != nodata
    return ok


# --------------------------------------------------------------------------
# decoding


class GeoTiffReader:
    """Parsed TIFF header over a bytes-like buffer; pixel blocks decode lazily.

    The buffer may be ``bytes``, ``bytearray``, ``memoryview`` or an ``mmap``;
    it is never copied as a whole.
    """

    def __init__(self, data):
        self._buf = data
        self._size = len(data)
        if self._size < 8:
            raise MalformedTiff("file shorter than TIFF header")
        magic = bytes(data[:4])
        if magic == b"II*\x00":
            self.byteorder = "<"
        elif magic == b"MM\x00*":
            self.byteorder = ">"
        elif magic[:2] in (b"II", b"MM") and magic[2:] in (b"+\x00", b"\x00+"):
            raise UnsupportedFeature("BigTIFF")
        else:
            raise MalformedTiff(f"bad TIFF magic {magic!r}")
        (ifd_offset,) = self._unpack("I", 4)
        self._tags = self._read_ifd(ifd_offset)
        self._setup()

    def _unpack(self, fmt: str, offset: int):
        fmt = self.byteorder + fmt
        end = offset + struct.calcsize(fmt)
        if offset < 0 or end > self._size:
            raise MalformedTiff(f"read at {offset} past end of file ({self._size} bytes)")
        return struct.unpack_from(fmt, self._buf, offset)

    def _read_ifd(self, offset: int) -> dict:
        (count,) = self._unpack("H", offset)
        tags = {}
        for k in range(count):
            entry = offset + 2 + 12 * k
            tag, ftype, n = self._unpack("HHI", entry)
            if ftype not in _FIELD_TYPES:
                continue  # unknown field types are skippable per TIFF 6.0
            code, size = _FIELD_TYPES[ftype]
            nbytes = size * n
            if nbytes <= 4:
                where = entry + 8
            else:
                (where,) = self._unpack("I", entry + 8)
            if where + nbytes > self._size:
                raise MalformedTiff(f"tag {tag} data out of range")
            if ftype == _ASCII:
                raw = bytes(self._buf[where:where + n])
                tags[tag] = raw.split(b"\x00", 1)[0].decode("latin-1")
            elif ftype in (5, 10):
                ints = self._unpack(code[0] * (2 * n), where)
                tags[tag] = tuple(ints[i] / ints[i + 1] for i in range(0, 2 * n, 2))
            else:
                tags[tag] = self._unpack(code * n, where)
        return tags

    def _scalar(self, tag: int, default=None):
        v = self._tags.get(tag)
        if v is None:
            if default is None:
                raise MalformedTiff(f"required tag {tag} missing")
            return default
        return v[0]

    def _setup(self):
        tags = self._tags
        self.width = int(self._scalar(IMAGE_WIDTH))
        self.height = int(self._scalar(IMAGE_LENGTH))
        if self.width <= 0 or self.height <= 0:
            raise MalformedTiff("empty image")
        if self._scalar(SAMPLES_PER_PIXEL, 1) != 1:
            raise UnsupportedFeature("multiple samples per pixel")
        if self._scalar(PLANAR_CONFIG, 1) != 1:
            raise UnsupportedFeature("planar configuration other than chunky")
        if self._scalar(PREDICTOR, 1) != 1:
            raise UnsupportedFeature("predictor")
        self.compression = int(self._scalar(COMPRESSION, 1))
        if self.compression != COMPRESSION_NONE and self.compression not in COMPRESSION_DEFLATE:
            raise UnsupportedFeature(f"compression {self.compression}")
        bits = int(self._scalar(BITS_PER_SAMPLE, 1))
        fmt = int(self._scalar(SAMPLE_FORMAT, 1))
        self.dtype = _numpy_dtype(bits, fmt).newbyteorder(self.byteorder)

        if TILE_WIDTH in tags:
            self.tiled = True
            self.block_width = int(self._scalar(TILE_WIDTH))
            self.block_height = int(self._scalar(TILE_LENGTH))
            offsets, counts = tags.get(TILE_OFFSETS), tags.get(TILE_BYTE_COUNTS)
            self.blocks_across = -(-self.width // self.block_width)
        else:
            self.tiled = False
            self.block_width = self.width
            self.block_height = min(int(self._scalar(ROWS_PER_STRIP, 2**32 - 1)), self.height)
            offsets, counts = tags.get(STRIP_OFFSETS), tags.get(STRIP_BYTE_COUNTS)
            self.blocks_across = 1
        if self.block_width <= 0 or self.block_height <= 0:
            raise MalformedTiff("zero-sized strips or tiles")
        self.blocks_down = -(-self.height // self.block_height)
        nblocks = self.blocks_across * self.blocks_down
        if offsets is None or counts is None:
            raise MalformedTiff("missing block offsets or byte counts")
        if len(offsets) < nblocks or len(counts) < nblocks:
            raise MalformedTiff(f"expected {nblocks} blocks, found {len(offsets)}")
        for off, n in zip(offsets[:nblocks], counts[:nblocks]):
            if off + n > self._size:
                raise MalformedTiff(f"block at {off}+{n} beyond end of file")
        self._offsets = offsets
        self._counts = counts

        if MODEL_TRANSFORMATION in tags:
            raise UnsupportedFeature("ModelTransformation georeference")
        scale, tie = tags.get(MODEL_PIXEL_SCALE), tags.get(MODEL_TIEPOINT)
        if scale is None or tie is None:
            raise MissingGeoreference("ModelPixelScale and ModelTiepoint are required")
        if len(scale) < 2 or len(tie) < 6:
            raise MalformedTiff("short georeference tag")
        if len(tie) > 6:
            raise UnsupportedFeature("multiple tiepoints")
        i, j, _, x, y, _ = tie[:6]
        sx, sy = scale[0], scale[1]
        try:
            self.transform = GeoTransform(x - i * sx, y + j * sy, sx, -sy)
        except ValueError as exc:
            raise MalformedTiff(f"degenerate georeference: {exc}") from None
        self._check_geokeys(tags.get(GEO_KEY_DIRECTORY))

        self.nodata = None
        if GDAL_NODATA in tags:
            text = str(tags[GDAL_NODATA]).strip()
            try:
                self.nodata = float(text)
            except ValueError:
                raise MalformedTiff(f"unparseable GDAL_NODATA {text!r}") from None

    @staticmethod
    def _check_geokeys(keys):
        if keys is None:
            return
        if len(keys) < 4:
            raise MalformedTiff("short GeoKeyDirectory")
        nkeys = keys[3]
        if len(keys) < 4 + 4 * nkeys:
            raise MalformedTiff("truncated GeoKeyDirectory")
        for k in range(nkeys):
            key, loc, _, value = keys[4 + 4 * k: 8 + 4 * k]
            if key == _GT_MODEL_TYPE and loc == 0 and value == _MODEL_TYPE_PROJECTED:
                raise UnsupportedFeature("projected coordinate system")

    # -- block access

    def _block(self, bx: int, by: int) -> np.ndarray:
        """Decode one strip or tile to shape (rows, cols) in the file dtype."""
        index = by * self.blocks_across + bx
        off, nbytes = self._offsets[index], self._counts[index]
        if self.tiled:
            rows = self.block_height
        else:
            rows = min(self.block_height, self.height - by * self.block_height)
        cols = self.block_width
        need = rows * cols * self.dtype.itemsize
        if self.compression == COMPRESSION_NONE:
            if nbytes < need:
                raise MalformedTiff(f"block {index} holds {nbytes} bytes, needs {need}")
            arr = np.frombuffer(self._buf, dtype=self.dtype, count=rows * cols, offset=off)
        else:
            try:
                raw = zlib.decompress(memoryview(self._buf)[off:off + nbytes])
            except zlib.error as exc:
                raise MalformedTiff(f"corrupt Deflate block {index}: {exc}") from None
            if len(raw) < need:
                raise MalformedTiff(f"block {index} inflates to {len(raw)} bytes, needs {need}")
            arr = np.frombuffer(raw, dtype=self.dtype, count=rows * cols)
        return arr.reshape(rows, cols)

    def _check_window(self, w: Window) -> Window:
        w = Window(*(int(v) for v in w))
        if (w.col_off < 0 or w.row_off < 0 or w.width < 0 or w.height < 0
                or w.col_off + w.width > self.width or w.row_off + w.height > self.height):
            raise WindowOutOfBounds(f"{w} outside {self.width}x{self.height} image")
        return w

    def iter_bands(self, window: Window, band_pixels: int = 1 << 20) -> Iterator[tuple[int, np.ndarray]]:
        """Yield ``(row, values)`` horizontal bands of ``window`` as float64, top to bottom.

        Strip/tile rows are decoded one at a time in the file dtype. Small ones
        are merged and large ones split so that each float64 band holds at
        most ``band_pixels`` values (but always at least one image row).
        """
        w = self._check_window(window)
        if w.size == 0:
            return
        step = max(1, band_pixels // w.width)  # image rows per yielded band
        pending, pending_row, pending_rows = [], w.row_off, 0
        for top, native in self._block_rows(w):
            for i in range(0, native.shape[0], step):
                part = native[i:i + step]
                if pending and pending_rows + part.shape[0] > step:
                    yield pending_row, _as_float(pending)
                    pending, pending_row, pending_rows = [], top + i, 0
                pending.append(part)
                pending_rows += part.shape[0]
        if pending:
            yield pending_row, _as_float(pending)

    def _block_rows(self, w: Window) -> Iterator[tuple[int, np.ndarray]]:
        """``(first image row, array)`` per strip/tile row, clipped to ``w``, in the file dtype."""
        c0, c1 = w.col_off, w.col_off + w.width
        r0, r1 = w.row_off, w.row_off + w.height
        bh = self.block_height
        for by in range(r0 // bh, (r1 - 1) // bh + 1):
            top = by * bh
            lo, hi = max(r0, top) - top, min(r1, top + bh) - top
            if self.tiled:
                bw = self.block_width
                pieces = []
                for bx in range(c0 // bw, (c1 - 1) // bw + 1):
                    left = bx * bw
                    block = self._block(bx, by)
                    pieces.append(block[lo:hi, max(c0, left) - left:min(c1, left + bw) - left])
                yield top + lo, pieces[0] if len(pieces) == 1 else np.hstack(pieces)
            else:
                yield top + lo, self._block(0, by)[lo:hi, c0:c1]

    def read_window(self, window: Window) -> RasterWindow:
        w = self._check_window(window)
        out = np.empty((w.height, w.width), dtype=np.float64)
        for row, band in self.iter_bands(w):
            out[row - w.row_off: row - w.row_off + band.shape[0]] = band
        return RasterWindow(w.col_off, w.row_off, w.width, w.height, _freeze(out))

    def read_all(self, sensor_units: SensorUnits = SensorUnits.RADIANCE) -> RasterGrid:
        win = self.read_window(Window(0, 0, self.width, self.height))
        grid = RasterGrid(self.width, self.height, win.values, self.transform,
                          self.nodata, sensor_units)
        grid.check_units()
        return grid


def _as_float(parts: list) -> np.ndarray:
    arr = parts[0] if len(parts) == 1 else np.vstack(parts)
    return arr.astype(np.float64)


def parse_geotiff(data, sensor_units: SensorUnits = SensorUnits.RADIANCE) -> RasterGrid:
    """Decode a whole GeoTIFF into a :class:`RasterGrid` of float64 values."""
    return GeoTiffReader(data).read_all(sensor_units)


def read_window(data, window) -> RasterWindow:
    """Decode only the pixels of ``window`` = (col_off, row_off, width, height)."""
    reader = data if isinstance(data, GeoTiffReader) else GeoTiffReader(data)
    return reader.read_window(Window(*window))


# --------------------------------------------------------------------------
# encoding


def _to_sample_format(values: np.ndarray, fmt: SampleFormat) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    dtype = fmt.dtype
    if dtype.kind in "iu":
        info = np.iinfo(dtype)
        if not np.all(np.isfinite(values)):
            raise LossyEncoding(f"non-finite value cannot be stored as {fmt.value}")
        if values.size and (values.min() < info.min or values.max() > info.max):
            raise LossyEncoding(f"value outside {fmt.value} range")
        if np.any(values != np.trunc(values)):
            raise LossyEncoding(f"fractional value cannot be stored as {fmt.value}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = values.astype(dtype)
    back = out.astype(np.float64)
    if dtype.kind in "iu":
        # -0.0 is stored as 0; every other value must survive exactly
        lossy = np.any(back != values)
    else:
        lossy = back.tobytes() != np.ascontiguousarray(values).tobytes()
    if lossy:
        raise LossyEncoding(f"values do not round-trip through {fmt.value}")
    return out


def _geokeys() -> list[int]:
    # GTModelType=geographic, RasterType=PixelIsArea, GeographicType=WGS84
    return [1, 1, 0, 3, 1024, 0, 1, 2, 1025, 0, 1, 1, 2048, 0, 1, 4326]


def _pack_value(bo: str, ftype: int, values) -> bytes:
    if ftype == _ASCII:
        raw = values.encode("ascii") + b"\x00"
        return raw
    code, _ = _FIELD_TYPES[ftype]
    return struct.pack(bo + code * len(values), *values)


def _assemble(bo: str, tags: dict[int, tuple[int, object]], blocks: list[bytes],
              offsets_tag: int) -> bytes:
    """Lay out header, IFD, out-of-line tag data and pixel blocks into one file."""
    ordered = sorted(tags)
    ifd_size = 2 + 12 * len(ordered) + 4
    # tag payloads, with a placeholder for block offsets (fixed size)
    payloads = {}
    for tag in ordered:
        ftype, vals = tags[tag]
        if tag == offsets_tag:
            vals = [0] * len(blocks)
        payloads[tag] = _pack_value(bo, ftype, vals)
    extra_pos = 8 + ifd_size
    positions = {}
    pos = extra_pos
    for tag in ordered:
        if len(payloads[tag]) > 4:
            positions[tag] = pos
            pos += len(payloads[tag]) + (len(payloads[tag]) & 1)
    block_offsets = []
    for b in blocks:
        block_offsets.append(pos)
        pos += len(b)
    payloads[offsets_tag] = _pack_value(bo, _LONG, block_offsets)
    if pos > 2**32 - 1:
        raise UnsupportedFeature("file would exceed 4 GiB (BigTIFF)")

    out = bytearray()
    out += (b"II*\x00" if bo == "<" else b"MM\x00*") + struct.pack(bo + "I", 8)
    out += struct.pack(bo + "H", len(ordered))
    for tag in ordered:
        ftype, vals = tags[tag]
        n = len(vals) + 1 if ftype == _ASCII else len(vals)
        if tag == offsets_tag:
            n = len(blocks)
        data = payloads[tag]
        if len(data) > 4:
            field = struct.pack(bo + "I", positions[tag])
        else:
            field = data.ljust(4, b"\x00")
        out += struct.pack(bo + "HHI", tag, ftype, n) + field
    out += struct.pack(bo + "I", 0)
    for tag in ordered:
        data = payloads[tag]
        if len(data) > 4:
            out += data + (b"\x00" if len(data) & 1 else b"")
    for b in blocks:
        out += b
    return bytes(out)


def encode_geotiff_streamed(width: int, height: int, transform: GeoTransform,
                            rows: Callable[[int, int], np.ndarray],
                            sample_format: SampleFormat = SampleFormat.FLOAT64, *,
                            nodata: Optional[float] = None, byteorder: str = "<",
                            rows_per_strip: int = 8, tile_size: Optional[int] = None,
                            compress: bool = False) -> bytes:
    """Encode a raster whose rows are produced on demand by ``rows(r0, r1)``.

    Only one strip or tile row of pixel values is materialized at a time,
    which lets tests and scripts build very large fixtures cheaply.
    """
    fmt = SampleFormat(sample_format)
    if byteorder not in "<>":
        raise ValueError("byteorder must be '<' or '>'")
    dtype = fmt.dtype.newbyteorder(byteorder)

    def encode_block(arr):
        raw = _to_sample_format(arr, fmt).astype(dtype, copy=False).tobytes()
        return zlib.compress(raw, 6) if compress else raw

    blocks = []
    if tile_size is None:
        if rows_per_strip < 1:
            raise ValueError("rows_per_strip must be positive")
        for r0 in range(0, height, rows_per_strip):
            r1 = min(height, r0 + rows_per_strip)
            blocks.append(encode_block(np.asarray(rows(r0, r1)).reshape(r1 - r0, width)))
    else:
        if tile_size <= 0 or tile_size % 16:
            raise ValueError("tile size must be a positive multiple of 16")
        across = -(-width // tile_size)
        for r0 in range(0, height, tile_size):
            r1 = min(height, r0 + tile_size)
            band = np.zeros((tile_size, across * tile_size))
            band[:r1 - r0, :width] = np.asarray(rows(r0, r1)).reshape(r1 - r0, width)
            for bx in range(across):
                blocks.append(encode_block(band[:, bx * tile_size:(bx + 1) * tile_size]))

    bits = fmt.dtype.itemsize * 8
    tags = {
        IMAGE_WIDTH: (_LONG, [width]),
        IMAGE_LENGTH: (_LONG, [height]),
        BITS_PER_SAMPLE: (_SHORT, [bits]),
        COMPRESSION: (_SHORT, [COMPRESSION_DEFLATE[0] if compress else COMPRESSION_NONE]),
        PHOTOMETRIC: (_SHORT, [1]),
        SAMPLES_PER_PIXEL: (_SHORT, [1]),
        PLANAR_CONFIG: (_SHORT, [1]),
        SAMPLE_FORMAT: (_SHORT, [fmt.tiff_code]),
        MODEL_PIXEL_SCALE: (_DOUBLE, [transform.x_size, -transform.y_size, 0.0]),
        MODEL_TIEPOINT: (_DOUBLE, [0.0, 0.0, 0.0, transform.x_origin, transform.y_origin, 0.0]),
        GEO_KEY_DIRECTORY: (_SHORT, _geokeys()),
    }
    counts = [len(b) for b in blocks]
    if tile_size is None:
        tags[ROWS_PER_STRIP] = (_LONG, [rows_per_strip])
        tags[STRIP_OFFSETS] = (_LONG, counts)
        tags[STRIP_BYTE_COUNTS] = (_LONG, counts)
        offsets_tag = STRIP_OFFSETS
    else:
        tags[TILE_WIDTH] = (_LONG, [tile_size])
        tags[TILE_LENGTH] = (_LONG, [tile_size])
        tags[TILE_OFFSETS] = (_LONG, counts)
        tags[TILE_BYTE_COUNTS] = (_LONG, counts)
        offsets_tag = TILE_OFFSETS
    if nodata is not None:
        tags[GDAL_NODATA] = (_ASCII, repr(float(nodata)))
    return _assemble(byteorder, tags, blocks, offsets_tag)


def encode_geotiff(grid: RasterGrid, sample_format: SampleFormat = SampleFormat.FLOAT64,
                   **options) -> bytes:
    """Encode ``grid`` as a GeoTIFF that :func:`parse_geotiff` reads back bit-exactly.

    The default layout is uncompressed, little-endian, 8 rows per strip.
    ``options`` (``byteorder``, ``rows_per_strip``, ``tile_size``, ``compress``)
    select other layouts. Raises :class:`LossyEncoding` when a value cannot be
    represented in ``sample_format``.
    """
    fmt = SampleFormat(sample_format)
    if grid.sensor_units is SensorUnits.DIGITAL_NUMBER:
        v = grid.values[grid.valid_mask()]
        if v.size and (np.any(v != np.round(v)) or v.min() < 0 or v.max() > 63):
            raise LossyEncoding("DigitalNumber grid holds values outside integer range 0..63")
    # fail early on the whole grid rather than on an arbitrary strip
    _to_sample_format(grid.values, fmt)
    values = grid.values
    return encode_geotiff_streamed(grid.width, grid.height, grid.transform,
                                   lambda r0, r1: values[r0:r1], fmt,
                                   nodata=grid.nodata, **options)
