"""Run configuration, sampled trajectory container, and CSV emission.

The CSV schema is shared by the grid flows and the particle flows so one
file format feeds every downstream consumer:

    t,dt,energy,hminus_s,hgamma,min_mu,max_mu,mass,w2,sublevel_a,dissipation_residual

Optional columns (``w2``, ``sublevel_a``, ``dissipation_residual`` on the
first row, ``hgamma`` for particle runs) are left empty when not computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CSV_COLUMNS = (
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

CSV_HEADER = ",".join(CSV_COLUMNS)


class FlowAbort(RuntimeError):
    """Integration aborted; ``status`` describes why, ``series`` holds partial data."""

    def __init__(self, status: str, series: "FlowTimeSeries | None" = None):
        super().__init__(status)
        self.status = status
        self.series = series


class CFLViolation(RuntimeError):
    """Requested time step exceeds the stability/positivity bound."""


@dataclass
class SolverConfig:
    """Time stepping and sampling controls for a single run."""

    t_end: float
    cfl: float = 0.45
    dt_max: float = 0.5
    dt_min: float = 1e-12
    sample_interval: float | None = None  # default: t_end / 400
    sample_stride: int | None = None  # alternative cadence, in steps

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.dt_min < self.dt_max:
            raise ValueError("dt_min must be smaller than dt_max")
        if self.sample_stride is not None and self.sample_stride < 1:
            raise ValueError("sample_stride must be a positive integer")

    def resolved_sample_interval(self) -> float | None:
        if self.sample_stride is not None:
            return None
        if self.sample_interval is not None:
            return self.sample_interval
        return self.t_end / 400.0


@dataclass
class FlowTimeSeries:
    """Sampled diagnostics of one flow: column arrays indexed by sample."""

    t: np.ndarray
    dt: np.ndarray
    energy: np.ndarray
    hminus_s: np.ndarray
    hgamma: np.ndarray
    min_mu: np.ndarray
    max_mu: np.ndarray
    mass: np.ndarray
    w2: np.ndarray
    sublevel_a: np.ndarray
    dissipation: np.ndarray  # windowed mean dissipation since previous sample
    dissipation_residual: np.ndarray
    # run-level metadata
    s: float | None = None
    gamma_report: float | None = None
    sublevel_threshold: float | None = None
    max_energy_increment: float = 0.0
    n_steps: int = 0
    status: str = "completed"
    conserve_mass: bool = True
    snapshots: np.ndarray | None = None  # (n_snapshots, n_cells)
    snapshot_times: np.ndarray | None = None

    def __len__(self) -> int:
        return self.t.size

    def to_csv(self, path) -> None:
        """Write the fixed-schema CSV; deterministic for identical data."""
        if self.min_mu[np.isfinite(self.min_mu)].min() < 0:
            raise ValueError("refusing to write series with negative densities")
        if self.conserve_mass:
            mass = self.mass[np.isfinite(self.mass)]
            if mass.size and np.max(np.abs(mass - mass[0])) > 1e-8 * max(1.0, abs(mass[0])):
                raise ValueError("refusing to write series with drifting mass")
        cols = [
            self.t,
            self.dt,
            self.energy,
            self.hminus_s,
            self.hgamma,
            self.min_mu,
            self.max_mu,
            self.mass,
            self.w2,
            self.sublevel_a,
            self.dissipation_residual,
        ]
        lines = [CSV_HEADER]
        for i in range(len(self)):
            lines.append(",".join(_format_cell(col[i]) for col in cols))
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _format_cell(x: float) -> str:
    if x is None or not np.isfinite(x):
        return ""
    return format(float(x), ".17g")


def read_series_csv(path) -> dict:
    """Read a schema CSV back into column arrays (empty cells become NaN)."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = {}
    for j, name in enumerate(CSV_COLUMNS):
        data[name] = np.array(
            [float(r[j]) if r[j] != "" else np.nan for r in rows], dtype=np.float64
        )
    return data


class SeriesBuilder:
    """Accumulates sample rows; the flow drivers own the sampling policy."""

    def __init__(self):
        self.rows = {name: [] for name in CSV_COLUMNS}
        self.rows["dissipation"] = []

    def add(
        self,
        t,
        dt,
        energy,
        hminus_s,
        hgamma,
        min_mu,
        max_mu,
        mass,
        w2=np.nan,
        sublevel_a=np.nan,
        dissipation=np.nan,
        dissipation_residual=np.nan,
    ):
        loc = locals()
        for name in list(self.rows):
            self.rows[name].append(float(loc[name]))

    def build(self, **meta) -> FlowTimeSeries:
        arrays = {name: np.asarray(vals, dtype=np.float64) for name, vals in self.rows.items()}
        return FlowTimeSeries(
            t=arrays["t"],
            dt=arrays["dt"],
            energy=arrays["energy"],
            hminus_s=arrays["hminus_s"],
            hgamma=arrays["hgamma"],
            min_mu=arrays["min_mu"],
            max_mu=arrays["max_mu"],
            mass=arrays["mass"],
            w2=arrays["w2"],
            sublevel_a=arrays["sublevel_a"],
            dissipation=arrays["dissipation"],
            dissipation_residual=arrays["dissipation_residual"],
            **meta,
        )
