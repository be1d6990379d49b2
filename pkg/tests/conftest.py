import numpy as np
import pytest

from nightlight_gdp.raster import GeoTransform, RasterGrid
from oracles import ACCEPTANCE_RESULTS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")


@pytest.fixture
def grid_4x3():
    """4 wide x 3 high float grid holding 0..11 row-major."""
    return RasterGrid(4, 3, np.arange(12, dtype=np.float64), GeoTransform(0.0, 3.0, 1.0, -1.0))
