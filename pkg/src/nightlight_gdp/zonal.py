"""Sum of lights per region, streamed band by band from the raster."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MixedRegion
from .geometry import RegionMask
from .raster import GeoTiffReader, valid_pixels

DMSP_YEARS = (1992, 2013)
VIIRS_FIRST_YEAR = 2012


class Sensor(enum.Enum):
    DMSP = "DMSP"
    VIIRS = "VIIRS"


@dataclass(frozen=True)
class ZonalStats:
    region_id: str
    sum: float
    pixel_count: int
    negative_clamped: int = 0

    @property
    def mean(self) -> float:
        return self.sum / self.pixel_count if self.pixel_count else math.nan


@dataclass(frozen=True)
class LuminosityObservation:
    region_id: str
    year: int
    month: int
    sensor: Sensor
    sum_of_lights: float

    def __post_init__(self):
        object.__setattr__(self, "sensor", Sensor(self.sensor))
        if not 1 <= self.month <= 12:
            raise ValueError(f"month {self.month} out of range")
        if self.sensor is Sensor.DMSP and not DMSP_YEARS[0] <= self.year <= DMSP_YEARS[1]:
            raise ValueError(f"DMSP observation for {self.year} outside {DMSP_YEARS}")
        if self.sensor is Sensor.VIIRS and self.year < VIIRS_FIRST_YEAR:
            raise ValueError(f"VIIRS observation for {self.year} before {VIIRS_FIRST_YEAR}")


class CompensatedSum:
    """Exact accumulator of float64 values, rounded once on read.

    Each finite value is split by ``frexp`` into a 53-bit integer mantissa and
    an exponent. Mantissa halves are summed per exponent with ``bincount``
    (exact, since every partial stays below 2**53) and folded into one Python
    integer in units of the smallest subnormal's last bit. The result is the
    correctly rounded true sum, whatever the order or chunking of the input.
    """

    CHUNK = 1 << 18  # bounds temporaries; half sums stay far below 2**53
    _SHIFT = 1126    # 2**-1126 is the unit of the integer accumulator
    _HALF = 26

    def __init__(self):
        self._total = 0
        self._special: list[float] = []  # inf and NaN, summed by fsum

    def add_array(self, values: np.ndarray) -> None:
        values = np.ravel(np.asarray(values, dtype=np.float64))
        if values.size == 0:
            return
        finite = np.isfinite(values)
        if not finite.all():
            self._special.extend(values[~finite].tolist())
            values = values[finite]
        for i in range(0, values.size, self.CHUNK):
            self._add_finite(values[i:i + self.CHUNK])

    def _add_finite(self, values: np.ndarray) -> None:
        mant, exp = np.frexp(values)
        m = np.ldexp(mant, 53).astype(np.int64)
        hi = (m >> self._HALF).astype(np.float64)
        lo = (m & ((1 << self._HALF) - 1)).astype(np.float64)
        idx = exp.astype(np.int64) - 53 + self._SHIFT  # >= 0 for every double
        hi_sum = np.bincount(idx, weights=hi)
        lo_sum = np.bincount(idx, weights=lo)
        total = 0
        for k in np.flatnonzero((hi_sum != 0) | (lo_sum != 0)).tolist():
            total += ((int(hi_sum[k]) << self._HALF) + int(lo_sum[k])) << k
        self._total += total

    @property
    def value(self) -> float:
        if self._special:
            return math.fsum(self._special)
        try:
            return self._total / (1 << self._SHIFT)
        except OverflowError:
            return math.inf if self._total > 0 else -math.inf


def zonal_sum(raster_source, mask: RegionMask, sensor: Sensor,
              band_pixels: int = 1 << 16) -> ZonalStats:
    """Sum of pixel values under ``mask``, ignoring nodata and NaN.

    VIIRS radiances below zero are clamped to zero and counted in
    ``negative_clamped``. Pixels are read in horizontal bands of at most
    ``band_pixels`` values (one strip or tile row at minimum), so the full
    grid is never resident.
    """
    sensor = Sensor(sensor)
    reader = raster_source if isinstance(raster_source, GeoTiffReader) else GeoTiffReader(raster_source)
    if mask.is_empty:
        return ZonalStats(mask.region_id, 0.0, 0, 0)
    acc = CompensatedSum()
    count = clamped = 0
    w = mask.window
    for row, band in reader.iter_bands(w, band_pixels):
        sel = mask.bits[row - w.row_off: row - w.row_off + band.shape[0]]
        sel = sel & valid_pixels(band, reader.nodata)
        vals = band[sel]
        if sensor is Sensor.VIIRS:
            neg = vals < 0
            n_neg = int(np.count_nonzero(neg))
            if n_neg:
                vals = np.where(neg, 0.0, vals)
                clamped += n_neg
        count += vals.size
        acc.add_array(vals)
    return ZonalStats(mask.region_id, acc.value, count, clamped)


def combine_tiles(parts: Sequence[ZonalStats]) -> ZonalStats:
    """Field-wise sum of per-tile stats, taken in the given (tile index) order."""
    parts = list(parts)
    if not parts:
        raise ValueError("no tile stats to combine")
    ids = {p.region_id for p in parts}
    if len(ids) > 1:
        raise MixedRegion(f"cannot combine stats of regions {sorted(ids)}")
    return ZonalStats(parts[0].region_id,
                      math.fsum(p.sum for p in parts),
                      sum(p.pixel_count for p in parts),
                      sum(p.negative_clamped for p in parts))

