"""Deterministic SVG figures from kmdflow experiment CSV files."""

__version__ = "0.1.0"

from .render import PlotSpec, SchemaError, render
