"""Figure rendering for effconc CSV sweeps."""

from figures.render import FigureError, FigureSpec, build_figure, main, render

__all__ = ["FigureError", "FigureSpec", "build_figure", "main", "render"]

__version__ = "0.1.0"
