"""Seasonal annual composites and the DMSP/VIIRS splice.

DMSP is the reference scale. VIIRS years after the splice are shifted down by
the mean VIIRS-minus-DMSP difference over the overlap years; overlap-year
composites feed the offset only and are not emitted as series points.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import MissingOverlap, NoSeasonalData, PartialSeasonalData
from .zonal import LuminosityObservation, Sensor

SEASON_MONTHS = (9, 10, 11)
OVERLAP_YEARS = (2012, 2013)
LAST_DMSP_YEAR = 2012
FIRST_VIIRS_YEAR = 2013


class Source(enum.Enum):
    DMSP = "DMSP"
    VIIRS_ADJUSTED = "VIIRS-adjusted"


@dataclass(frozen=True)
class AnnualComposite:
    region_id: str
    year: int
    sensor: Sensor
    value: float
    months_used: frozenset

    def __post_init__(self):
        object.__setattr__(self, "months_used", frozenset(self.months_used))
        if not self.months_used:
            raise ValueError("composite built from no months")


@dataclass(frozen=True)
class HarmonizedSeries:
    region_id: str
    offset: float
    points: Mapping[int, float] = field(default_factory=dict)
    source: Mapping[int, Source] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.offset):
            raise ValueError("calibration offset must be finite")

    @property
    def years(self) -> list[int]:
        return sorted(self.points)


def seasonal_composite(obs: Iterable[LuminosityObservation],
                       months: Iterable[int] = SEASON_MONTHS) -> AnnualComposite:
    """Mean sum of lights over whichever of ``months`` are present.

    Observations for other months are ignored. Falls back to the available
    subset with a :class:`PartialSeasonalData` warning.
    """
    months = tuple(months)
    obs = list(obs)
    keys = {(o.region_id, o.year, o.sensor) for o in obs}
    if len(keys) > 1:
        raise ValueError(f"observations span several region/year/sensor keys: {sorted(map(str, keys))}")
    picked = {}
    for o in obs:
        if o.month in months:
            if o.month in picked:
                raise ValueError(f"duplicate observation for month {o.month}")
            picked[o.month] = o.sum_of_lights
    if not picked:
        where = next(iter(keys)) if keys else "(no observations)"
        raise NoSeasonalData(f"no observations for months {months}: {where}")
    region_id, year, sensor = next(iter(keys))
    if len(picked) < len(months):
        missing = sorted(set(months) - set(picked))
        warnings.warn(f"{region_id} {year} {sensor.value}: months {missing} missing, "
                      f"averaging {sorted(picked)}", PartialSeasonalData, stacklevel=2)
    value = math.fsum(picked[m] for m in sorted(picked)) / len(picked)
    return AnnualComposite(region_id, year, sensor, value, frozenset(picked))


def calibration_offset(dmsp: Mapping[int, AnnualComposite], viirs: Mapping[int, AnnualComposite],
                       overlap_years: Iterable[int] = OVERLAP_YEARS) -> float:
    """Mean VIIRS-minus-DMSP difference over the overlap years."""
    years = sorted(set(overlap_years))
    if not years:
        raise ValueError("overlap_years is empty")
    diffs = []
    for y in years:
        if y not in dmsp:
            raise MissingOverlap(Sensor.DMSP.value, y)
        if y not in viirs:
            raise MissingOverlap(Sensor.VIIRS.value, y)
        diffs.append(_value(viirs[y]) - _value(dmsp[y]))
    return math.fsum(diffs) / len(diffs)


def _value(c) -> float:
    return c.value if isinstance(c, AnnualComposite) else float(c)


def harmonize_series(dmsp: Mapping[int, AnnualComposite], viirs: Mapping[int, AnnualComposite],
                     offset: float, region_id: str | None = None,
                     last_dmsp_year: int = LAST_DMSP_YEAR,
                     first_viirs_year: int = FIRST_VIIRS_YEAR) -> HarmonizedSeries:
    """Splice DMSP years ``<= last_dmsp_year`` with offset-adjusted VIIRS years."""
    if region_id is None:
        ids = {c.region_id for c in (*dmsp.values(), *viirs.values())
               if isinstance(c, AnnualComposite)}
        if len(ids) != 1:
            raise ValueError(f"cannot infer region id from {sorted(ids)}")
        region_id = ids.pop()
    points, source = {}, {}
    for y in sorted(dmsp):
        if y <= last_dmsp_year:
            points[y] = _value(dmsp[y])
            source[y] = Source.DMSP
    for y in sorted(viirs):
        if y >= first_viirs_year:
            points[y] = _value(viirs[y]) - offset
            source[y] = Source.VIIRS_ADJUSTED
    return HarmonizedSeries(region_id, offset, dict(sorted(points.items())),
                            dict(sorted(source.items())))


def harmonize_region(observations: Iterable[LuminosityObservation],
                     months: Iterable[int] = SEASON_MONTHS,
                     overlap_years: Iterable[int] = OVERLAP_YEARS) -> HarmonizedSeries:
    """Composites, offset and splice for one region's monthly observations."""
    months = tuple(months)
    groups: dict = {}
    ids = set()
    for o in observations:
        ids.add(o.region_id)
        if o.month in months:
            groups.setdefault((o.sensor, o.year), []).append(o)
    dmsp, viirs = {}, {}
    for (sensor, year), obs in sorted(groups.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        (dmsp if sensor is Sensor.DMSP else viirs)[year] = seasonal_composite(obs, months)
    if len(ids) != 1:
        raise ValueError(f"expected observations for one region, got {sorted(ids)}")
    offset = calibration_offset(dmsp, viirs, overlap_years)
    return harmonize_series(dmsp, viirs, offset, region_id=ids.pop())
