"""Static figure suite for report-data bundles."""

from .figures import FIGURE_SUITE, FigureSpec
from .render import render_all, render_figure

__version__ = "0.1.0"
