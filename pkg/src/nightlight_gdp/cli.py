"""Command-line pipeline: rasters + boundaries -> luminosity -> harmonized series -> fits.

Usage::

    nightlight-gdp all --config pipeline.json [--workers N] [--out DIR]
                       [--months 9,10,11] [--per-country]

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 partial failure (outputs written, some inputs or fits failed).
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import logging
import mmap
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import dataset as ds_mod
from .dataset import FeaturePair, Target, build_model_dataset, parse_worldbank_csv
from .errors import MalformedCsv, PipelineError
from .geometry import parse_geojson, rasterize_mask
from .harmonize import HarmonizedSeries, Source, harmonize_region
from .raster import GeoTiffReader
from .regress import FitFailure, run_analysis, run_per_country
from .report import report_csv, report_markdown, scatter_svg
from .zonal import DMSP_YEARS, VIIRS_FIRST_YEAR, LuminosityObservation, Sensor, combine_tiles, zonal_sum

log = logging.getLogger("nightlight_gdp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3
OBS_HEADER = ["region_id", "year", "month", "sensor", "sum_of_lights", "pixel_count",
              "negative_clamped"]
HARMONIZED_HEADER = ["region_id", "year", "value", "source", "offset"]


class UsageError(Exception):
    pass


@dataclass
class PipelineConfig:
    """Runnable recipe for the whole pipeline. Relative paths resolve against the config file."""

    raster_dir: Path
    rasters: dict  # sensor name -> path template with {year}, {month}, optional {tile}
    boundaries: Path
    indicators: dict  # "population" and Target values -> CSV path
    out_dir: Path
    id_property: str = "ISO_A3"
    countries: Optional[list] = None
    auto_select: dict = field(default_factory=lambda: {"reference": "IND", "year": 2018, "band": 4.0})
    months: tuple = (9, 10, 11)
    overlap_years: tuple = (2012, 2013)
    years: tuple = (1992, 2018)
    stream_threshold: int = 1 << 16
    workers: int = 1
    per_country: bool = False

    def __post_init__(self):
        self.months = tuple(sorted(set(int(m) for m in self.months)))
        self.overlap_years = tuple(sorted(set(int(y) for y in self.overlap_years)))
        self.years = tuple(int(y) for y in self.years)
        if not self.months or not set(self.months) <= set(range(1, 13)):
            raise UsageError(f"months must be a non-empty subset of 1..12, got {self.months}")
        if not self.overlap_years:
            raise UsageError("overlap_years must be non-empty")
        if len(self.years) != 2 or self.years[0] > self.years[1]:
            raise UsageError(f"years must be [first, last], got {self.years}")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        unknown = set(self.rasters) - {s.value for s in Sensor}
        if unknown:
            raise UsageError(f"unknown sensors in rasters: {sorted(unknown)}")

    @classmethod
    def load(cls, path, **overrides) -> "PipelineConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        base = path.parent
        for key in ("raster_dir", "rasters", "boundaries", "indicators"):
            if key not in doc:
                raise UsageError(f"config is missing {key!r}")
        doc.setdefault("out_dir", "out")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise UsageError(f"unknown config keys: {sorted(extra)}")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        for key in ("raster_dir", "boundaries", "out_dir"):
            doc[key] = base / doc[key]
        doc["indicators"] = {k: base / v for k, v in doc["indicators"].items()}
        try:
            return cls(**doc)
        except TypeError as exc:
            raise UsageError(str(exc)) from None

    def dmsp_years(self) -> range:
        first = max(self.years[0], DMSP_YEARS[0])
        last = min(max(self.years[1], max(self.overlap_years)), DMSP_YEARS[1])
        return range(first, last + 1)

    def viirs_years(self) -> range:
        first = max(min(min(self.overlap_years), self.years[1]), VIIRS_FIRST_YEAR)
        return range(first, self.years[1] + 1)

    def require(self, *paths) -> None:
        missing = [str(p) for p in paths if not Path(p).exists()]
        if missing:
            raise UsageError(f"missing input paths: {', '.join(missing)}")


# --------------------------------------------------------------------------
# file helpers


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)


def _csv_text(header, rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


def _read_csv(path: Path, header) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or list(reader.fieldnames)[:len(header)] != header:
            raise MalformedCsv(f"{path}: expected header {','.join(header)}")
        return list(reader)


def raster_files(cfg: PipelineConfig, sensor: Sensor, year: int, month: int) -> list[Path]:
    """Existing files for one (sensor, year, month), ordered by tile index."""
    template = cfg.rasters.get(sensor.value)
    if template is None:
        return []
    pattern = str(cfg.raster_dir / template.format(year=year, month=month, tile="*"))
    return [Path(p) for p in sorted(glob.glob(pattern))]


def load_regions(cfg: PipelineConfig, countries: Optional[list]) -> list:
    regions = parse_geojson(cfg.boundaries.read_text(), cfg.id_property)
    if countries is not None:
        wanted = set(countries)
        absent = wanted - {r.region_id for r in regions}
        if absent:
            raise PipelineError(f"countries not in boundary file: {sorted(absent)}")
        regions = [r for r in regions if r.region_id in wanted]
    return sorted(regions, key=lambda r: r.region_id)


def resolve_countries(cfg: PipelineConfig) -> Optional[list]:
    if cfg.countries is not None:
        return sorted(cfg.countries)
    sel = cfg.auto_select or {}
    path = cfg.indicators.get(Target.NOMINAL_GDP.value)
    if not sel or path is None or not Path(path).exists():
        return None
    table = parse_worldbank_csv(Path(path).read_text())
    suggested = ds_mod.suggest_countries(table, sel.get("reference", "IND"),
                                         int(sel.get("year", 2018)), float(sel.get("band", 4.0)))
    log.info("auto-selected %d countries: %s", len(suggested), " ".join(suggested))
    _write(cfg.out_dir / "suggested_countries.txt", "\n".join(suggested) + "\n")
    return suggested


# --------------------------------------------------------------------------
# luminosity


def _zonal_file(path: Path, sensor: Sensor, regions: list, band_pixels: int):
    """Per-region stats for one raster file; regions the raster misses are omitted."""
    with open(path, "rb") as f:
        try:
            buf = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
        except ValueError:  # empty file
            buf = f.read()
    try:
        reader = GeoTiffReader(buf)
        out = {}
        for g in regions:
            mask = rasterize_mask(g, reader.transform, reader.width, reader.height)
            if mask.is_empty:
                continue
            out[g.region_id] = zonal_sum(reader, mask, sensor, band_pixels)
        del reader
        return out
    finally:
        if isinstance(buf, mmap.mmap):
            try:
                buf.close()
            except BufferError:
                pass


def compute_luminosity(cfg: PipelineConfig, regions: list) -> tuple[list, list, bool]:
    """Monthly observations for every region; returns (rows, observations, had_failures)."""
    groups = []
    for sensor, years in ((Sensor.DMSP, cfg.dmsp_years()), (Sensor.VIIRS, cfg.viirs_years())):
        for year in years:
            for month in cfg.months:
                files = raster_files(cfg, sensor, year, month)
                if files:
                    groups.append((sensor, year, month, files))
    tasks = [(g, path) for g in groups for path in g[3]]

    def run(task):
        (sensor, _, _, _), path = task
        try:
            return _zonal_file(path, sensor, regions, cfg.stream_threshold)
        except (PipelineError, OSError) as exc:
            log.error("skipping %s: %s", path, exc)
            return exc

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    failed = False
    rows, observations = [], []
    pos = 0
    for sensor, year, month, files in groups:
        parts = results[pos:pos + len(files)]
        pos += len(files)
        if any(isinstance(p, Exception) for p in parts):
            failed = True
            log.error("dropping %s %d-%02d: a tile failed to decode", sensor.value, year, month)
            continue
        for g in regions:
            tiles = [p[g.region_id] for p in parts if g.region_id in p]
            if not tiles:
                continue
            st = combine_tiles(tiles)
            observations.append(LuminosityObservation(g.region_id, year, month, sensor, st.sum))
            rows.append((g.region_id, year, month, sensor.value, st.sum, st.pixel_count,
                         st.negative_clamped))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    return rows, observations, failed


def cmd_luminosity(cfg: PipelineConfig) -> int:
    cfg.require(cfg.raster_dir, cfg.boundaries)
    regions = load_regions(cfg, resolve_countries(cfg))
    rows, _, failed = compute_luminosity(cfg, regions)
    _write(cfg.out_dir / "observations.csv",
           _csv_text(OBS_HEADER, [(*r[:4], repr(r[4]), r[5], r[6]) for r in rows]))
    seen = {r[0] for r in rows}
    empty = [g.region_id for g in regions if g.region_id not in seen]
    log.info("wrote %d observations for %d regions", len(rows), len(seen))
    if empty:
        log.error("regions without any observation: %s", " ".join(empty))
        return EXIT_DATA
    return EXIT_PARTIAL if failed else EXIT_OK


# --------------------------------------------------------------------------
# harmonize


def read_observations(path: Path) -> list[LuminosityObservation]:
    obs = []
    for i, rec in enumerate(_read_csv(path, OBS_HEADER), start=2):
        try:
            obs.append(LuminosityObservation(rec["region_id"], int(rec["year"]), int(rec["month"]),
                                             Sensor(rec["sensor"]), float(rec["sum_of_lights"])))
        except (ValueError, TypeError) as exc:
            raise MalformedCsv(f"{path}:{i}: {exc}") from None
    return obs


def harmonize_observations(obs: list, cfg: PipelineConfig) -> tuple[list, list]:
    """Harmonized series per region plus the ids of regions that could not be spliced."""
    by_region: dict = {}
    for o in obs:
        by_region.setdefault(o.region_id, []).append(o)
    series, failed = [], []
    for rid in sorted(by_region):
        try:
            series.append(harmonize_region(by_region[rid], cfg.months, cfg.overlap_years))
        except PipelineError as exc:
            log.error("%s: %s", rid, exc)
            failed.append(rid)
    return series, failed


def harmonized_rows(series: list, years: tuple) -> list:
    rows = []
    for s in series:
        for y in s.years:
            if years[0] <= y <= years[1]:
                rows.append((s.region_id, y, repr(s.points[y]), s.source[y].value, repr(s.offset)))
    return rows


def cmd_harmonize(cfg: PipelineConfig, observations: Optional[Path] = None) -> int:
    path = observations or cfg.out_dir / "observations.csv"
    cfg.require(path)
    series, failed = harmonize_observations(read_observations(path), cfg)
    _write(cfg.out_dir / "harmonized.csv", _csv_text(HARMONIZED_HEADER, harmonized_rows(series, cfg.years)))
    meta = {
        "reference_sensor": "DMSP",
        "adjusted_sensor": "VIIRS",
        "adjustment": "VIIRS years after the overlap minus mean(VIIRS - DMSP) over overlap years",
        "months": list(cfg.months),
        "overlap_years": list(cfg.overlap_years),
        "offsets": {s.region_id: s.offset for s in series},
        "failed_regions": failed,
    }
    _write(cfg.out_dir / "harmonized.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if not series:
        return EXIT_DATA
    return EXIT_PARTIAL if failed else EXIT_OK


# --------------------------------------------------------------------------
# fit


def read_harmonized(path: Path) -> list[HarmonizedSeries]:
    points: dict = {}
    for i, rec in enumerate(_read_csv(path, HARMONIZED_HEADER), start=2):
        try:
            rid, year = rec["region_id"], int(rec["year"])
            entry = points.setdefault(rid, [float(rec["offset"]), {}, {}])
            entry[1][year] = float(rec["value"])
            entry[2][year] = Source(rec["source"])
        except (ValueError, TypeError) as exc:
            raise MalformedCsv(f"{path}:{i}: {exc}") from None
    return [HarmonizedSeries(rid, off, pts, src) for rid, (off, pts, src) in sorted(points.items())]


def _slug(target: Target, pair: FeaturePair) -> str:
    return f"{target.value}_{pair.value}"


def build_datasets(series: list, indicators: dict, regions: Optional[list]) -> tuple[list, dict]:
    datasets, failures = [], {}
    pop = indicators["population"]
    for pair in FeaturePair:
        for target in Target:
            try:
                datasets.append(build_model_dataset(series, pop, indicators[target.value],
                                                    target, pair, regions))
            except PipelineError as exc:
                log.error("%s: %s", _slug(target, pair), exc)
                failures[(target, pair)] = exc
    return datasets, failures


def load_indicators(cfg: PipelineConfig) -> dict:
    needed = ["population", *(t.value for t in Target)]
    missing = [k for k in needed if k not in cfg.indicators]
    if missing:
        raise UsageError(f"config indicators missing: {', '.join(missing)}")
    cfg.require(*(cfg.indicators[k] for k in needed))
    return {k: parse_worldbank_csv(Path(cfg.indicators[k]).read_text(), k) for k in needed}


def write_report(report, out: Path) -> None:
    _write(out / "report.csv", report_csv(report))
    _write(out / "report.md", report_markdown(report))


def cmd_fit(cfg: PipelineConfig, harmonized: Optional[Path] = None) -> int:
    path = harmonized or cfg.out_dir / "harmonized.csv"
    cfg.require(path)
    indicators = load_indicators(cfg)
    series = read_harmonized(path)
    datasets, failures = build_datasets(series, indicators, cfg.countries)
    for d in datasets:
        stem = cfg.out_dir / "datasets" / _slug(d.target_name, d.feature_pair)
        _write(stem.with_suffix(".csv"), ds_mod.model_dataset_csv(d))
        _write(stem.with_suffix(".scaling.json"), ds_mod.scaling_json(d))
    report = run_analysis(datasets, failures)
    write_report(report, cfg.out_dir)
    by_key = {(d.target_name, d.feature_pair): d for d in datasets}
    for cell in report.ordered():
        if not isinstance(cell, FitFailure):
            key = (cell.target_name, cell.feature_pair)
            _write(cfg.out_dir / "plots" / f"{_slug(*key)}.svg", scatter_svg(by_key[key], cell))
    if cfg.per_country:
        for rid, sub in run_per_country(datasets).items():
            write_report(sub, cfg.out_dir / "per_country" / rid)
    log.info("fitted %d of %d models", len(report.cells) - len(report.failures), len(report.cells))
    return EXIT_PARTIAL if report.failures else EXIT_OK


def cmd_all(cfg: PipelineConfig) -> int:
    worst = EXIT_OK
    for step in (cmd_luminosity, cmd_harmonize, cmd_fit):
        code = step(cfg)
        if code == EXIT_DATA:
            return code
        worst = max(worst, code)
    return worst


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _months(text: str) -> list[int]:
    try:
        return [int(m) for m in text.split(",") if m.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad month list {text!r}") from None


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="pipeline JSON config")
    common.add_argument("--workers", type=int, help="parallel raster workers")
    common.add_argument("--out", type=Path, help="output directory (overrides config out_dir)")
    common.add_argument("--months", type=_months, help="comma-separated months, e.g. 9,10,11")
    common.add_argument("--per-country", action="store_true", default=None,
                        help="also fit each country separately")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="nightlight-gdp", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("luminosity", parents=[common], help="monthly sum of lights per region")
    h = sub.add_parser("harmonize", parents=[common], help="seasonal composites and DMSP/VIIRS splice")
    h.add_argument("--observations", type=Path, help="observations CSV (default OUT/observations.csv)")
    f = sub.add_parser("fit", parents=[common], help="degree-2 regressions and reports")
    f.add_argument("--harmonized", type=Path, help="harmonized CSV (default OUT/harmonized.csv)")
    sub.add_parser("all", parents=[common], help="run luminosity, harmonize and fit")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        cfg = PipelineConfig.load(args.config, workers=args.workers, months=args.months,
                                  per_country=args.per_country)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        if args.command == "luminosity":
            return cmd_luminosity(cfg)
        if args.command == "harmonize":
            return cmd_harmonize(cfg, args.observations)
        if args.command == "fit":
            return cmd_fit(cfg, args.harmonized)
        return cmd_all(cfg)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except PipelineError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
