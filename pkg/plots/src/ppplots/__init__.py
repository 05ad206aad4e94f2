"""Scaling figures and fit summaries for experiment CSVs."""

from .plots import (
    PlotError,
    PlotSpec,
    Series,
    fit_summary,
    least_squares,
    plot_scaling,
    read_series,
    render,
)

__all__ = [
    "PlotError",
    "PlotSpec",
    "Series",
    "fit_summary",
    "least_squares",
    "plot_scaling",
    "read_series",
    "render",
]
