"""Nighttime-lights luminosity series and their degree-2 regressions on GDP measures."""

from .dataset import FeaturePair, IndicatorTable, ModelDataset, Target, build_model_dataset, min_max_scale, parse_worldbank_csv
from .geometry import RegionGeometry, RegionMask, parse_geojson, point_in_region, rasterize_mask
from .harmonize import AnnualComposite, HarmonizedSeries, calibration_offset, harmonize_series, seasonal_composite
from .raster import GeoTransform, RasterGrid, RasterWindow, SampleFormat, SensorUnits, encode_geotiff, geo_to_pixel, parse_geotiff, read_window
from .regress import AnalysisReport, RegressionFit, expand_features, fit_least_squares, r_squared, run_analysis
from .zonal import LuminosityObservation, Sensor, ZonalStats, combine_tiles, zonal_sum

__version__ = "0.1.0"
