"""Figure rendering for experiment CSV tables.

Reads the tables and fit footers written by the simulator's experiment
harness and turns them into publication-style figures.  The only
coupling to the simulator is the CSV schema itself.
"""

from .figures import KINDS, FigureSpec, RenderResult, render
from .tables import FitLine, PlotError, Table, read_table

__version__ = "0.1.0"

__all__ = [
    "FigureSpec",
    "FitLine",
    "KINDS",
    "PlotError",
    "RenderResult",
    "Table",
    "read_table",
    "render",
]
