"""Render kmdflow CSV output into deterministic SVG figures.

Four figure kinds:

``loglinear``  log-y energy/norm decay against time, with exponential
               reference guides ``y0 * exp(-rate (t - t0))``
``loglog``     log-log decay with power-law guides ``y0 * (t/t0)^-p``
``snapshots``  density profiles, one line per requested time
``holemap``    space-time image of the low-density region (black where
               the density is at or below the threshold)

The first two read the fixed-schema series CSV; the last two read the
snapshot CSV (``x`` column plus one ``t=...`` column per time).  Output is
byte-deterministic for identical inputs: the SVG hash salt is pinned and
no timestamps are embedded.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

SERIES_COLUMNS = (
    "t",
    "dt",
    "energy",
    "hminus_s",
    "hgamma",
    "min_mu",
    "max_mu",
    "mass",
    "w2",
    "sublevel_a",
    "dissipation_residual",
)

KINDS = ("loglinear", "loglog", "snapshots", "holemap")

_RC = {
    "svg.hashsalt": "kmdplots",
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}


class SchemaError(ValueError):
    """Input CSV does not match the expected schema; names the offender."""


@dataclass
class PlotSpec:
    kind: str
    inputs: list[str]
    output: str
    column: str = "hminus_s"
    references: list[tuple[str, float]] = field(default_factory=list)
    threshold: float = 0.0
    labels: list[str] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown plot kind {self.kind!r}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")


def read_series(path) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
    for got, want in zip(header, SERIES_COLUMNS):
        if got != want:
            raise SchemaError(f"column {got!r} (expected {want!r}) in {path}")
    if len(header) != len(SERIES_COLUMNS):
        raise SchemaError(f"expected {len(SERIES_COLUMNS)} columns in {path}")
    raw = np.genfromtxt(path, delimiter=",", skip_header=1, missing_values="",
                        filling_values=np.nan)
    raw = np.atleast_2d(raw)
    return {name: raw[:, j] for j, name in enumerate(SERIES_COLUMNS)}


def read_snapshots(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (x, times, profiles) with profiles shaped (n_times, n_cells)."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
    if header[0] != "x":
        raise SchemaError(f"column {header[0]!r} (expected 'x') in {path}")
    times = []
    for name in header[1:]:
        if not name.startswith("t="):
            raise SchemaError(f"column {name!r} (expected 't=<time>') in {path}")
        times.append(float(name[2:]))
    raw = np.atleast_2d(np.genfromtxt(path, delimiter=",", skip_header=1))
    return raw[:, 0], np.asarray(times), raw[:, 1:].T


def _series_label(path, i, labels):
    if labels and i < len(labels):
        return labels[i]
    return f"run {i}" if i else "run 0"


def _plot_decay(spec: PlotSpec, ax, logx: bool):
    anchor = None
    for i, path in enumerate(spec.inputs):
        data = read_series(path)
        if spec.column not in data:
            raise SchemaError(f"column {spec.column!r} not in schema")
        t, y = data["t"], data[spec.column]
        keep = np.isfinite(y) & (y > 0)
        if logx:
            keep &= t > 0
        t, y = t[keep], y[keep]
        if t.size == 0:
            raise SchemaError(f"no positive {spec.column!r} samples in {path}")
        ax.plot(t, y, lw=1.2, label=_series_label(path, i, spec.labels))
        if anchor is None:
            anchor = (t[0], y[0], t[-1])
    t0, y0, t1 = anchor
    guide = np.linspace(t0, t1, 200) if not logx else np.geomspace(t0, t1, 200)
    for label, value in spec.references:
        if logx:
            ref = y0 * (guide / t0) ** (-value)
        else:
            ref = y0 * np.exp(-value * (guide - t0))
        ax.plot(guide, ref, "--", lw=1.0, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(spec.column)
    ax.set_yscale("log")
    if logx:
        ax.set_xscale("log")
    ax.legend(loc="best", fontsize=8)


def _plot_snapshots(spec: PlotSpec, ax):
    x, times, profiles = read_snapshots(spec.inputs[0])
    for tt, prof in zip(times, profiles):
        ax.plot(x, prof, lw=1.2, label=f"t={tt:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.legend(loc="best", fontsize=8)


def _plot_holemap(spec: PlotSpec, ax):
    x, times, profiles = read_snapshots(spec.inputs[0])
    low = (profiles.T <= spec.threshold).astype(float)  # (cells, times)
    ax.imshow(
        low,
        origin="lower",
        aspect="auto",
        cmap="gray_r",
        interpolation="nearest",
        extent=(times[0], times[-1], 0.0, 1.0),
        vmin=0.0,
        vmax=1.0,
    )
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_title(f"region with density <= {spec.threshold:g}", fontsize=9)
    ax.grid(False)


def render(spec: PlotSpec) -> None:
    """Draw the figure described by ``spec`` and write a deterministic SVG."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            if spec.kind == "loglinear":
                _plot_decay(spec, ax, logx=False)
            elif spec.kind == "loglog":
                _plot_decay(spec, ax, logx=True)
            elif spec.kind == "snapshots":
                _plot_snapshots(spec, ax)
            else:
                _plot_holemap(spec, ax)
            fig.tight_layout()
            buf = io.BytesIO()
            if str(spec.output).lower().endswith(".png"):
                fig.savefig(buf, format="png")
            else:
                fig.savefig(buf, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    with open(spec.output, "wb") as fh:
        fh.write(buf.getvalue())
