"""Figures rendered from evaluation-panel CSV artifacts."""

from .figures import FIGURE_KINDS, PlotRequest, render

__all__ = ["FIGURE_KINDS", "PlotRequest", "render"]

__version__ = "0.1.0"
