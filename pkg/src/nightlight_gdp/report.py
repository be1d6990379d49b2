"""Serialization of analysis reports: CSV, markdown tables and SVG scatter plots."""

from __future__ import annotations

import csv
import io
from xml.sax.saxutils import escape

import numpy as np

from .dataset import FeaturePair, ModelDataset
from .regress import TABLE_COLUMNS, AnalysisReport, FitFailure, RegressionFit

CSV_HEADER = ["target", "feature_pair", *(label for label, _ in TABLE_COLUMNS),
              "intercept", "r2", "n"]

TABLE_TITLES = {
    FeaturePair.LUMINOSITY_POPULATION: "Result of polynomial regression with Luminosity and Population",
    FeaturePair.LUMINOSITY_YEAR: "Result of polynomial regression with Luminosity and Year",
}
# second regressor symbol per table
_SECOND = {FeaturePair.LUMINOSITY_POPULATION: "x2", FeaturePair.LUMINOSITY_YEAR: "x3"}


def report_csv(report: AnalysisReport) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for cell in report.ordered():
        head = [cell.target_name.value, cell.feature_pair.value]
        if isinstance(cell, FitFailure):
            w.writerow(head + [""] * len(TABLE_COLUMNS) + ["", f"error: {cell.error}", ""])
        else:
            coefs = cell.table_coefficients()
            w.writerow(head + [repr(coefs[label]) for label, _ in TABLE_COLUMNS]
                       + [repr(cell.intercept), repr(cell.r_squared), cell.n_rows])
    return out.getvalue()


def _md_row(cells) -> str:
    return "| " + " | ".join(cells) + " |"


def report_markdown(report: AnalysisReport, digits: int = 3) -> str:
    """Two tables (population, year) laid out like the published result tables."""
    fmt = f"{{:.{digits}f}}"
    lines = []
    for pair in FeaturePair:
        s = _SECOND[pair]
        lines.append(f"## {TABLE_TITLES[pair]}")
        lines.append("")
        lines.append(_md_row(["Y", "x1", s, "x1^2", f"x1{s}", f"{s}^2", "Intercept", "R^2"]))
        lines.append(_md_row(["---"] * 8))
        for cell in report.table(pair):
            label = cell.target_name.label
            if isinstance(cell, FitFailure):
                lines.append(_md_row([label] + ["error"] * 6 + [escape(cell.error)]))
                continue
            coefs = cell.table_coefficients()
            lines.append(_md_row([label] + [fmt.format(coefs[k]) for k, _ in TABLE_COLUMNS]
                                 + [fmt.format(cell.intercept), fmt.format(cell.r_squared)]))
        lines.append("")
    lines.append("Variables are min-max scaled to [0, 1]; x1 is luminosity (sum of lights), "
                 "x2 population, x3 year. The fitted model includes an intercept.")
    return "\n".join(lines) + "\n"


def scatter_svg(ds: ModelDataset, fit: RegressionFit, width: int = 480, height: int = 360,
                samples: int = 50) -> str:
    """Scaled luminosity vs scaled target, with the fit sliced at the median second regressor."""
    x1, x2 = ds.features()
    y = ds.target
    grid = np.linspace(0.0, 1.0, samples)
    curve = fit.predict(grid, np.full(samples, float(np.median(x2))))
    lo = min(0.0, float(curve.min()), float(y.min()))
    hi = max(1.0, float(curve.max()), float(y.max()))
    m = 40

    def px(v):
        return m + v * (width - 2 * m)

    def py(v):
        return height - m - (v - lo) / (hi - lo) * (height - 2 * m)

    title = f"{ds.target_name.label} vs luminosity ({ds.feature_pair.value}), R^2={fit.r_squared:.3f}"
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="{m}" y="20" font-size="12">{escape(title)}</text>',
        f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" '
        'fill="none" stroke="#888"/>',
        f'<text x="{width // 2}" y="{height - 8}" font-size="11">luminosity (scaled)</text>',
    ]
    for a, b in zip(x1, y):
        parts.append(f'<circle cx="{px(a):.3f}" cy="{py(b):.3f}" r="2.5" fill="#1f77b4"/>')
    pts = " ".join(f"{px(a):.3f},{py(b):.3f}" for a, b in zip(grid, curve))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
