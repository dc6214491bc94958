"""Paper-style figures over experiment tables.

Each figure kind plots the measured points and overlays the fits stored
in the CSV footer.  Overlays never refit: the slope comes from the
footer, and the line is anchored through the least-squares centroid of
the fit's member rows, reproducing the writers' weighting rule (inverse
variance once the CI half-widths spread by more than a factor of three).
Annotations quote the footer slope and stderr verbatim at six digits.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .tables import FitLine, PlotError, Table, read_table

KINDS = (
    "scaling",
    "mitigation",
    "injection",
    "contour",
    "entropy",
    "valid-fraction",
)

# (log_x, log_y) used when the spec leaves the flags unset
_DEFAULT_SCALES = {
    "scaling": (True, True),
    "mitigation": (False, True),
    "injection": (False, False),
    "contour": (True, False),
    "entropy": (False, False),
    "valid-fraction": (False, False),
}

_PAIRED_KINDS = ("mitigation", "valid-fraction")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    path: str
    out: str
    second_path: str | None = None
    log_x: bool | None = None
    log_y: bool | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise PlotError(
                f"unknown figure kind {self.kind}; choose from {', '.join(KINDS)}"
            )


@dataclass(frozen=True)
class RenderResult:
    out: str
    annotations: tuple[str, ...]
    fits: tuple[FitLine, ...]


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _slope_text(fit: FitLine) -> str:
    return f"slope {fit.slope:.6g} +- {fit.stderr:.6g}"


def _anchor(fit: FitLine, x, y, ci=None):
    """Centroid of the fit's member rows in the fit's own coordinates."""
    idx = np.asarray(fit.rows, dtype=int)
    xs, ys = x[idx], y[idx]
    w = np.ones(len(idx))
    if ci is not None:
        cs = ci[idx]
        if len(cs) and np.all(cs > 0) and cs.max() / cs.min() > 3.0:
            w = 1.0 / cs**2
    total = w.sum()
    return float(w @ xs) / total, float(w @ ys) / total, xs


def _loglog_overlay(ax, fit: FitLine, x, y, rel_ci):
    """Draw y = exp(b) * x**slope through the member centroid in ln-ln space."""
    # non-member rows may sit at zero; their logs are never read
    with np.errstate(divide="ignore"):
        x_bar, y_bar, members = _anchor(fit, np.log(x), np.log(y), rel_ci)
    grid = np.geomspace(np.exp(members.min()), np.exp(members.max()), 64)
    ax.plot(
        grid,
        np.exp(y_bar + fit.slope * (np.log(grid) - x_bar)),
        linestyle="--",
        linewidth=1.0,
        color="0.35",
        zorder=1,
    )


def _linear_overlay(ax, fit: FitLine, x, y, color):
    x_bar, y_bar, members = _anchor(fit, x, y)
    grid = np.linspace(members.min(), members.max(), 64)
    ax.plot(
        grid,
        y_bar + fit.slope * (grid - x_bar),
        linestyle="--",
        linewidth=1.0,
        color=color,
        zorder=1,
    )


def _scaling(ax, table: Table, second):
    layers, infid, ci = table.require("param.layers", "infidelity", "fidelity_ci")
    ax.errorbar(layers, infid, yerr=ci, fmt="o", capsize=3, zorder=2)
    annotations = []
    for fit in table.fits:
        if fit.rows:
            _loglog_overlay(ax, fit, layers, infid, ci / np.where(infid > 0, infid, 1.0))
        annotations.append(_slope_text(fit))
    ax.set_xlabel("tree depth (layers)")
    ax.set_ylabel("infidelity")
    return annotations, table.fits, [layers], [infid]


def _mitigation_series(ax, table: Table, label):
    k, infid, ci = table.require("param.k_layers", "infidelity", "fidelity_ci")
    ax.errorbar(k, infid, yerr=ci, fmt="o-", capsize=3, label=label, zorder=2)
    annotations = []
    for fit in table.fits:
        if fit.rows:
            _loglog_overlay(ax, fit, k, infid, ci / np.where(infid > 0, infid, 1.0))
        text = _slope_text(fit)
        annotations.append(f"{label}: {text}" if label else text)
    return annotations, k, infid


def _mitigation(ax, table: Table, second):
    labels = (
        (_stem(table.path), _stem(second.path)) if second else (None, None)
    )
    annotations, k, infid = _mitigation_series(ax, table, labels[0])
    xs, ys = [k], [infid]
    fits = table.fits
    if second is not None:
        more, k2, infid2 = _mitigation_series(ax, second, labels[1])
        annotations += more
        fits = fits + second.fits
        xs.append(k2)
        ys.append(infid2)
        ax.legend(fontsize=8)
    ax.set_xlabel("scope depth")
    ax.set_ylabel("postselected infidelity")
    return annotations, fits, xs, ys


def _grouped(ax, table: Table, group_col, x_col, prefix):
    """One series per group value; fits attach to groups via member rows."""
    group, x, y, ci = table.require(group_col, x_col, "fidelity", "fidelity_ci")
    for value in np.unique(group):
        sel = group == value
        ax.errorbar(
            x[sel],
            y[sel],
            yerr=ci[sel],
            fmt="o-",
            capsize=3,
            label=f"{prefix} {value:g}",
            zorder=2,
        )
    annotations = []
    for fit in table.fits:
        if fit.rows:
            value = group[fit.rows[0]]
            _linear_overlay(ax, fit, x, y, "0.35")
            annotations.append(f"{prefix} {value:g}: {_slope_text(fit)}")
        else:
            annotations.append(f"threshold power law: {_slope_text(fit)}")
    ax.legend(fontsize=8)
    return annotations, table.fits, [x], [y]


def _injection(ax, table: Table, second):
    annotations, fits, xs, ys = _grouped(ax, table, "param.node", "param.e_d", "node")
    ax.set_xlabel("kick rate")
    ax.set_ylabel("fidelity")
    return annotations, fits, xs, ys


def _contour(ax, table: Table, second):
    annotations, fits, xs, ys = _grouped(
        ax, table, "param.layers", "param.e_t", "depth"
    )
    ax.set_xlabel("gate error rate")
    ax.set_ylabel("fidelity")
    return annotations, fits, xs, ys


def _entropy(ax, table: Table, second):
    layer, entropy = table.require("param.layer", "fidelity")
    ax.scatter(layer, entropy, marker="o", zorder=2)
    levels = np.unique(layer)
    means = [entropy[layer == value].mean() for value in levels]
    ax.plot(levels, means, linestyle="-", linewidth=1.0, zorder=1)
    ax.set_xticks(levels)
    ax.set_xlabel("layer")
    ax.set_ylabel("entropy (bits)")
    return [], (), [layer], [entropy]


def _valid_fraction(ax, table: Table, second):
    k, vf, ci = table.require(
        "param.k_layers", "valid_fraction", "valid_fraction_ci"
    )
    if second is None:
        ax.bar(k, vf, width=0.6, yerr=ci, capsize=3, zorder=2)
        xs, ys = [k], [vf]
    else:
        k2, vf2, ci2 = second.require(
            "param.k_layers", "valid_fraction", "valid_fraction_ci"
        )
        ax.bar(
            k - 0.2, vf, width=0.38, yerr=ci, capsize=3,
            label=_stem(table.path), zorder=2,
        )
        ax.bar(
            k2 + 0.2, vf2, width=0.38, yerr=ci2, capsize=3,
            label=_stem(second.path), zorder=2,
        )
        ax.legend(fontsize=8)
        xs, ys = [k, k2], [vf, vf2]
    ax.set_xlabel("scope depth")
    ax.set_ylabel("valid fraction")
    return [], (), xs, ys


_BUILDERS = {
    "scaling": _scaling,
    "mitigation": _mitigation,
    "injection": _injection,
    "contour": _contour,
    "entropy": _entropy,
    "valid-fraction": _valid_fraction,
}


def _apply_scales(ax, spec: FigureSpec, xs, ys) -> None:
    default_x, default_y = _DEFAULT_SCALES[spec.kind]
    log_x = default_x if spec.log_x is None else spec.log_x
    log_y = default_y if spec.log_y is None else spec.log_y
    for flag, arrays, axis, setter in (
        (log_x, xs, "x", ax.set_xscale),
        (log_y, ys, "y", ax.set_yscale),
    ):
        if not flag:
            continue
        if any(len(a) and a.min() <= 0 for a in arrays):
            raise PlotError(
                f"log scale on non-positive {axis} data; pass --log-{axis} off"
            )
        setter("log")


def render(spec: FigureSpec) -> RenderResult:
    """Write the figure for one spec; returns the annotations it drew."""
    table = read_table(spec.path)
    second = None
    if spec.second_path is not None:
        if spec.kind not in _PAIRED_KINDS:
            raise PlotError(
                f"second input only applies to {' and '.join(_PAIRED_KINDS)} figures"
            )
        second = read_table(spec.second_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    try:
        annotations, fits, xs, ys = _BUILDERS[spec.kind](ax, table, second)
        _apply_scales(ax, spec, xs, ys)
        if annotations:
            ax.text(
                0.02,
                0.02,
                "\n".join(annotations),
                transform=ax.transAxes,
                fontsize=8,
                family="monospace",
                va="bottom",
                bbox={"boxstyle": "round", "facecolor": "white", "alpha": 0.8},
            )
        fig.tight_layout()
        fig.savefig(spec.out, dpi=150)
    finally:
        plt.close(fig)
    return RenderResult(
        out=spec.out, annotations=tuple(annotations), fits=tuple(fits)
    )
