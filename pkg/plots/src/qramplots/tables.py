"""Experiment CSV tables and their stored-fit footers.

The runners write one header row, float data rows, and zero or more
commented footer lines of the form ``# fit slope=<v> stderr=<v>
rows=[i,j,...]`` naming the data rows the fit covered.  Everything here
is read-only parsing; the figure code decides what the columns mean.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


class PlotError(ValueError):
    """Raised for unreadable tables or figure requests they cannot satisfy."""


_FIT_LINE = re.compile(
    r"#\s*fit\s+slope=(?P<slope>\S+)\s+stderr=(?P<stderr>\S+)\s+rows=\[(?P<rows>[^\]]*)\]\s*$"
)


@dataclass(frozen=True)
class FitLine:
    """One stored fit: slope, its standard error, and member row indices."""

    slope: float
    stderr: float
    rows: tuple[int, ...]


@dataclass(frozen=True)
class Table:
    path: str
    names: tuple[str, ...]
    columns: dict
    fits: tuple[FitLine, ...]

    def __len__(self) -> int:
        return len(self.columns[self.names[0]])

    def require(self, *wanted):
        """Return the named column arrays, or fail naming the first absentee."""
        for name in wanted:
            if name not in self.columns:
                raise PlotError(f"{self.path}: column {name} missing")
        return [self.columns[name] for name in wanted]


def read_table(path) -> Table:
    path = str(path)
    try:
        with open(path, newline="") as handle:
            lines = [line.rstrip("\n") for line in handle]
    except OSError as err:
        raise PlotError(f"{path}: {err.strerror or err}") from None
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise PlotError(f"{path}: empty file")
    names = tuple(lines[0].split(","))
    if len(names) < 2 or any(not n for n in names):
        raise PlotError(f"{path}: first line is not a header row")
    data: list[list[float]] = []
    fits: list[FitLine] = []
    for number, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            match = _FIT_LINE.match(line)
            if match:
                rows = tuple(
                    int(r) for r in match.group("rows").split(",") if r.strip()
                )
                fits.append(
                    FitLine(
                        slope=float(match.group("slope")),
                        stderr=float(match.group("stderr")),
                        rows=rows,
                    )
                )
            continue
        cells = line.split(",")
        if len(cells) != len(names):
            raise PlotError(
                f"{path}:{number}: row has {len(cells)} cells, header has {len(names)}"
            )
        try:
            data.append([float(c) for c in cells])
        except ValueError:
            raise PlotError(f"{path}:{number}: non-numeric cell") from None
    if not data:
        raise PlotError(f"{path}: no data rows")
    block = np.asarray(data, dtype=np.float64)
    columns = {name: block[:, j] for j, name in enumerate(names)}
    for fit in fits:
        if any(not 0 <= r < len(data) for r in fit.rows):
            raise PlotError(f"{path}: fit references row outside the table")
    return Table(path=path, names=names, columns=columns, fits=tuple(fits))
