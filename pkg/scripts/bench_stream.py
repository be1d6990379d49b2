"""Time and memory of a streamed zonal sum over one large synthetic raster.

    python scripts/bench_stream.py --size 8192 --tile 256
"""

import argparse
import sys
import time
import tracemalloc
from dataclasses import dataclass

import numpy as np

from nightlight_gdp.geometry import LinearRing, Polygon, RegionGeometry, rasterize_mask
from nightlight_gdp.raster import GeoTransform, SampleFormat, encode_geotiff_streamed
from nightlight_gdp.zonal import Sensor, zonal_sum


@dataclass
class BenchConfig:
    size: int = 8192
    tile: int = 0           # 0 = strips of 8 rows
    band_pixels: int = 1 << 16
    radiance: bool = False  # float32 radiance instead of 8-bit digital numbers


def run(cfg: BenchConfig) -> dict:
    n = cfg.size
    t = GeoTransform(0.0, n / 100, 0.01, -0.01)
    if cfg.radiance:
        fmt = SampleFormat.FLOAT32
        rows = lambda r0, r1: (np.sin(np.arange(r0 * n, r1 * n) * 1e-3) * 20).astype(np.float32).reshape(r1 - r0, n)
    else:
        fmt = SampleFormat.UINT8
        rows = lambda r0, r1: (np.arange(r0 * n, r1 * n) % 64).reshape(r1 - r0, n)
    t0 = time.perf_counter()
    data = encode_geotiff_streamed(n, n, t, rows, fmt, tile_size=cfg.tile or None)
    t1 = time.perf_counter()
    extent = n / 100
    ring = LinearRing([(0.01 * extent, 0.01 * extent), (0.98 * extent, 0.02 * extent),
                       (0.9 * extent, 0.97 * extent), (0.03 * extent, 0.85 * extent),
                       (0.01 * extent, 0.01 * extent)])
    mask = rasterize_mask(RegionGeometry("BIG", "BIG", [Polygon(ring)]), t, n, n)
    t2 = time.perf_counter()
    sensor = Sensor.VIIRS if cfg.radiance else Sensor.DMSP
    tracemalloc.start()
    stats = zonal_sum(data, mask, sensor, band_pixels=cfg.band_pixels)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    t3 = time.perf_counter()
    return {"file_mib": len(data) / 2**20, "encode_s": t1 - t0, "mask_s": t2 - t1,
            "sum_s": t3 - t2, "peak_mib": peak / 2**20, "bound_mib": n * n * 8 / 16 / 2**20,
            "pixels": stats.pixel_count, "sum": stats.sum}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--size", type=int, default=BenchConfig.size)
    p.add_argument("--tile", type=int, default=BenchConfig.tile)
    p.add_argument("--band-pixels", type=int, default=BenchConfig.band_pixels)
    p.add_argument("--radiance", action="store_true")
    a = p.parse_args(argv)
    res = run(BenchConfig(a.size, a.tile, a.band_pixels, a.radiance))
    for k, v in res.items():
        print(f"{k:10s} {v:.3f}" if isinstance(v, float) else f"{k:10s} {v}")
    return 0 if res["peak_mib"] < res["bound_mib"] else 1


if __name__ == "__main__":
    sys.exit(main())
