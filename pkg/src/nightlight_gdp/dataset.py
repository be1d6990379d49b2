"""World Bank indicator ingestion and model-ready datasets."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional

import numpy as np

from .errors import DegenerateColumn, EmptyDataset, HeaderMismatch, MalformedCsv
from .harmonize import HarmonizedSeries

YEAR_RANGE = (1960, 2030)
TIDY_HEADER = ["region_id", "year", "value"]


class Target(enum.Enum):
    REAL_GDP = "RealGDP"
    NOMINAL_GDP = "NominalGDP"
    PPP = "PPP"
    GDP_GROWTH = "GDPGrowth"
    PER_CAPITA_GDP_GROWTH = "PerCapitaGDPGrowth"

    @property
    def label(self) -> str:
        return _TARGET_LABELS[self]


# row order and wording of the published result tables
_TARGET_LABELS = {
    Target.REAL_GDP: "Real GDP",
    Target.NOMINAL_GDP: "Nominal GDP",
    Target.PPP: "PPP GDP",
    Target.GDP_GROWTH: "GDP Growth",
    Target.PER_CAPITA_GDP_GROWTH: "Per capita GDP growth",
}


class FeaturePair(enum.Enum):
    LUMINOSITY_POPULATION = "LuminosityPopulation"
    LUMINOSITY_YEAR = "LuminosityYear"


@dataclass
class IndicatorTable:
    indicator_id: str
    rows: dict = field(default_factory=dict)  # (region_id, year) -> float

    def __post_init__(self):
        for (rid, year), v in self.rows.items():
            if not YEAR_RANGE[0] <= year <= YEAR_RANGE[1]:
                raise ValueError(f"{rid}: year {year} outside {YEAR_RANGE}")
            if not math.isfinite(v):
                raise ValueError(f"{rid} {year}: non-finite value")

    def get(self, region_id: str, year: int) -> Optional[float]:
        return self.rows.get((region_id, year))

    @property
    def regions(self) -> list[str]:
        return sorted({rid for rid, _ in self.rows})


def _is_year(cell: str) -> bool:
    cell = cell.strip()
    return cell.isdigit() and len(cell) == 4 and YEAR_RANGE[0] <= int(cell) <= YEAR_RANGE[1]


def _number(cell: str, where: str) -> Optional[float]:
    cell = cell.strip()
    if not cell:
        return None
    try:
        v = float(cell)
    except ValueError:
        raise MalformedCsv(f"{where}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise MalformedCsv(f"{where}: non-finite value {cell!r}")
    return v


def _parse_tidy(records, indicator_id) -> IndicatorTable:
    rows = {}
    for lineno, rec in records:
        if not any(c.strip() for c in rec):
            continue
        if len(rec) < 3:
            raise MalformedCsv(f"line {lineno}: expected region_id,year,value")
        rid, year, value = rec[0].strip(), rec[1].strip(), rec[2]
        if not _is_year(year):
            raise MalformedCsv(f"line {lineno}: bad year {year!r}")
        v = _number(value, f"line {lineno}")
        if v is None:
            continue
        key = (rid, int(year))
        if key in rows:
            raise MalformedCsv(f"line {lineno}: duplicate entry for {key}")
        rows[key] = v
    return IndicatorTable(indicator_id or "value", rows)


def parse_worldbank_csv(text: str, indicator_id: Optional[str] = None) -> IndicatorTable:
    """Parse a World Bank wide-format indicator CSV (or a tidy region_id,year,value CSV).

    Leading metadata lines before the ``Country Name,Country Code,...`` header
    are skipped. Empty cells are missing values and produce no entry.
    """
    text = text.lstrip("﻿")
    try:
        records = list(enumerate(csv.reader(io.StringIO(text), strict=True), start=1))
    except csv.Error as exc:
        raise MalformedCsv(str(exc)) from None
    body = [(n, r) for n, r in records if any(c.strip() for c in r)]
    if not body:
        raise MalformedCsv("empty file")
    first = [c.strip() for c in body[0][1]]
    if first[:3] == TIDY_HEADER:
        return _parse_tidy(body[1:], indicator_id)

    header_at = None
    for idx, (_, rec) in enumerate(records):
        if [c.strip() for c in rec[:2]] == ["Country Name", "Country Code"]:
            header_at = idx
            break
    if header_at is None:
        raise MalformedCsv("no 'Country Name,Country Code' header row")
    header = [c.strip() for c in records[header_at][1]]
    year_cols = [(i, int(c)) for i, c in enumerate(header) if _is_year(c)]
    if not year_cols:
        raise HeaderMismatch("header has no year columns")
    code_col = header.index("Indicator Code") if "Indicator Code" in header else None

    rows = {}
    for lineno, rec in records[header_at + 1:]:
        if not any(c.strip() for c in rec):
            continue
        # trailing empty cells may be cut off, but the country code must be there
        if len(rec) < 2:
            raise MalformedCsv(f"line {lineno}: too few fields")
        rid = rec[1].strip()
        if not rid:
            raise MalformedCsv(f"line {lineno}: empty country code")
        if indicator_id is None and code_col is not None and len(rec) > code_col:
            indicator_id = rec[code_col].strip() or None
        for col, year in year_cols:
            if col >= len(rec):
                continue
            v = _number(rec[col], f"line {lineno}, {year}")
            if v is None:
                continue
            if (rid, year) in rows:
                raise MalformedCsv(f"line {lineno}: duplicate row for {rid}")
            rows[(rid, year)] = v
    return IndicatorTable(indicator_id or "indicator", rows)


def to_worldbank_csv(table: IndicatorTable, years: Optional[Iterable[int]] = None,
                     names: Optional[Mapping[str, str]] = None,
                     indicator_name: str = "") -> str:
    """Render ``table`` in the World Bank wide layout (4 metadata lines, quoted cells)."""
    years = sorted(years) if years is not None else list(range(YEAR_RANGE[0], 2021))
    names = names or {}
    out = io.StringIO()
    w = csv.writer(out, quoting=csv.QUOTE_ALL, lineterminator="\n")
    w.writerow(["Data Source", "World Development Indicators"])
    out.write("\n")
    w.writerow(["Last Updated Date", "2020-01-01"])
    out.write("\n")
    w.writerow(["Country Name", "Country Code", "Indicator Name", "Indicator Code",
                *map(str, years)])
    for rid in table.regions:
        cells = []
        for y in years:
            v = table.rows.get((rid, y))
            cells.append("" if v is None else repr(v))
        w.writerow([names.get(rid, rid), rid, indicator_name, table.indicator_id, *cells])
    return out.getvalue()


# --------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class ScalingParams:
    min: float
    max: float

    @property
    def degenerate(self) -> bool:
        return not self.max > self.min

    def apply(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self.degenerate:
            return np.zeros_like(values)
        return (values - self.min) / (self.max - self.min)

    def unscale(self, scaled) -> np.ndarray:
        scaled = np.asarray(scaled, dtype=np.float64)
        return self.min + scaled * (self.max - self.min)

    def to_dict(self) -> dict:
        return {"min": self.min, "max": self.max}


def min_max_scale(column, name: str = "column") -> tuple[np.ndarray, ScalingParams]:
    """Map values affinely onto [0, 1]; a constant column maps to zeros with a warning."""
    column = np.asarray(column, dtype=np.float64)
    if column.size == 0:
        raise ValueError("cannot scale an empty column")
    params = ScalingParams(float(column.min()), float(column.max()))
    if params.degenerate:
        warnings.warn(f"{name} is constant ({params.min}); scaled to zeros",
                      DegenerateColumn, stacklevel=2)
    return params.apply(column), params


# --------------------------------------------------------------------------
# joined datasets


class ModelRow(NamedTuple):
    region_id: str
    year: int
    x1: float  # luminosity
    x2: float  # population
    x3: float  # year as a number
    y: float


COLUMNS = ("x1", "x2", "x3", "y")


@dataclass(frozen=True)
class ModelDataset:
    target_name: Target
    feature_pair: FeaturePair
    rows: tuple          # scaled ModelRows, ordered by region_id then year
    raw_rows: tuple      # the same rows before scaling
    scaling: Mapping[str, ScalingParams]
    dropped: int = 0

    def column(self, name: str, scaled: bool = True) -> np.ndarray:
        rows = self.rows if scaled else self.raw_rows
        return np.array([getattr(r, name) for r in rows], dtype=np.float64)

    def features(self) -> tuple[np.ndarray, np.ndarray]:
        """(luminosity, second regressor) for this dataset's feature pair, scaled."""
        second = "x2" if self.feature_pair is FeaturePair.LUMINOSITY_POPULATION else "x3"
        return self.column("x1"), self.column(second)

    @property
    def target(self) -> np.ndarray:
        return self.column("y")

    def subset(self, region_id: str) -> "ModelDataset":
        keep = [i for i, r in enumerate(self.rows) if r.region_id == region_id]
        return ModelDataset(self.target_name, self.feature_pair,
                            tuple(self.rows[i] for i in keep),
                            tuple(self.raw_rows[i] for i in keep), self.scaling, 0)


def build_model_dataset(lum: Iterable[HarmonizedSeries], population: IndicatorTable,
                        target: IndicatorTable, target_name, feature_pair,
                        regions: Optional[Iterable[str]] = None) -> ModelDataset:
    """Inner-join luminosity, population and target on (region, year), then min-max scale.

    Candidate rows are the (region, year) points of the luminosity series;
    candidates missing population or target are dropped and counted.
    """
    target_name, feature_pair = Target(target_name), FeaturePair(feature_pair)
    series = sorted(lum.values() if isinstance(lum, Mapping) else lum, key=lambda s: s.region_id)
    wanted = None if regions is None else set(regions)
    raw, dropped = [], 0
    for s in series:
        if wanted is not None and s.region_id not in wanted:
            continue
        for year in sorted(s.points):
            pop = population.get(s.region_id, year)
            y = target.get(s.region_id, year)
            if pop is None or y is None:
                dropped += 1
                continue
            raw.append(ModelRow(s.region_id, year, float(s.points[year]), pop, float(year), y))
    if not raw:
        raise EmptyDataset(f"{target_name.value}/{feature_pair.value}: join produced no rows "
                           f"({dropped} candidates dropped)")
    scaled_cols, scaling = {}, {}
    for name in COLUMNS:
        scaled_cols[name], scaling[name] = min_max_scale(
            [getattr(r, name) for r in raw], name=f"{target_name.value}.{name}")
    rows = tuple(
        ModelRow(r.region_id, r.year, *(float(scaled_cols[c][i]) for c in COLUMNS))
        for i, r in enumerate(raw))
    return ModelDataset(target_name, feature_pair, rows, tuple(raw), scaling, dropped)


def model_dataset_csv(ds: ModelDataset) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["region_id", "year", *COLUMNS])
    for r in ds.rows:
        w.writerow([r.region_id, r.year, *(repr(getattr(r, c)) for c in COLUMNS)])
    return out.getvalue()


def scaling_json(ds: ModelDataset) -> str:
    return json.dumps({c: ds.scaling[c].to_dict() for c in COLUMNS}, indent=2) + "\n"


def suggest_countries(nominal_gdp: IndicatorTable, reference: str = "IND",
                      year: int = 2018, band: float = 4.0) -> list[str]:
    """Countries whose ``year`` GDP lies within a multiplicative ``band`` of the reference's."""
    if band < 1:
        raise ValueError("band must be >= 1")
    ref = nominal_gdp.get(reference, year)
    if ref is None:
        raise KeyError(f"no {year} value for reference country {reference}")
    lo, hi = ref / band, ref * band
    return sorted(rid for (rid, y), v in nominal_gdp.rows.items()
                  if y == year and lo <= v <= hi)
