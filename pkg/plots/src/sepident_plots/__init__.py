"""Figure rendering for sepident benchmark CSV outputs."""

from .render import PlotInputError, PlotJob, build_figure, render

__all__ = ["PlotInputError", "PlotJob", "build_figure", "render"]
