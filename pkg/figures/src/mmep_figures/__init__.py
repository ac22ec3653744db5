"""Figure rendering for mmep sweep CSV output."""

from .plot import (DISPLAY_NAMES, FigureSpec, FigureSpecError, build_figure,
                   extract_series, load_rows, render)

__version__ = "0.1.0"
