"""Figure rendering for privacy-accounting CSV artifacts."""

from .render import PlotSpec, PlotSpecError, render

__version__ = "0.1.0"
