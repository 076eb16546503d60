"""Command-line entry point: experiment presets, orchestration, CSV/JSON output.

Presets
-------
coulomb   order s = 1 grid flow; exponential convergence at rate min(nu)
riesz_s   order s > 1 grid flow; polynomial convergence, exponent
          (min(gamma0, gamma_nu - s) + s) / (2 (s - 1)) for the order -s norm
relu      circle particle flow (W or WFR); polynomial energy decay, exponent
          (min(gamma0, gamma_nu - 1) + s) / (s - 1) with s = 2
custom    grid flow with everything explicit

Each run writes ``manifest.json`` (resolved config + version + status; the
only file carrying timestamps), ``series.csv`` (fixed schema), and
``rates.json`` (fitted vs predicted rates).  ``--snapshot-times`` adds
``snapshots.csv`` with one density column per requested time.

Exit codes: 0 success, 2 configuration error, 3 solver abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, densities, diagnostics, flow1d, sphere_relu
from .series import FlowAbort, SolverConfig
from .spectral import DensityField, RieszParams, TorusGrid1D

PRESETS = ("coulomb", "riesz_s", "relu", "custom")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    """Flat experiment description; unset fields get preset defaults."""

    preset: str = "custom"
    s: float | None = None
    gamma0: float | None = None
    gamma_nu: float | None = None
    min0: float = 0.2
    min_nu: float = 0.2
    n_cells: int = 512
    n_particles: int = 800
    t_end: float | None = None
    seed: int = 0
    mode: str = "w"
    output_path: str = "out"
    sample_interval: float | None = None
    cfl: float = 0.45
    dt_max: float | None = None
    band_limit: int | None = None
    hole_width: float | None = None
    sublevel_threshold: float | None = None
    w2: bool | None = None
    mu0_equals_nu: bool = False
    snapshot_times: list[float] | None = None

    def resolve(self) -> "ExperimentConfig":
        """Fill preset defaults and validate cross-field consistency."""
        cfg = dataclasses.replace(self)
        if cfg.preset not in PRESETS:
            raise ConfigError(f"unknown preset {cfg.preset!r}")
        if cfg.preset == "coulomb":
            if cfg.s not in (None, 1, 1.0):
                raise ConfigError("preset coulomb forces s = 1")
            cfg.s = 1.0
            cfg.t_end = 30.0 if cfg.t_end is None else cfg.t_end
            cfg.w2 = True if cfg.w2 is None else cfg.w2
        elif cfg.preset == "riesz_s":
            cfg.s = 2.0 if cfg.s is None else float(cfg.s)
            if cfg.s <= 1.0:
                raise ConfigError("preset riesz_s needs s > 1")
            cfg.t_end = 2.0e4 if cfg.t_end is None else cfg.t_end
        elif cfg.preset == "relu":
            if cfg.s not in (None, 2, 2.0):
                raise ConfigError("preset relu forces s = 2 (circle, d = 1)")
            cfg.s = 2.0
            cfg.t_end = 300.0 if cfg.t_end is None else cfg.t_end
            cfg.dt_max = 0.25 if cfg.dt_max is None else cfg.dt_max
            cfg.gamma0 = math.inf if cfg.gamma0 is None else cfg.gamma0
            if cfg.mode not in ("w", "wfr"):
                raise ConfigError(f"mode must be 'w' or 'wfr', got {cfg.mode!r}")
        else:
            if cfg.s is None:
                raise ConfigError("preset custom requires --s")
            cfg.s = float(cfg.s)
            if cfg.s < 1.0:
                raise ConfigError("s must be >= 1")
            cfg.t_end = 30.0 if cfg.t_end is None else cfg.t_end
        cfg.gamma0 = 2.0 if cfg.gamma0 is None else cfg.gamma0
        cfg.gamma_nu = 2.0 if cfg.gamma_nu is None else cfg.gamma_nu
        cfg.dt_max = 0.5 if cfg.dt_max is None else cfg.dt_max
        cfg.w2 = False if cfg.w2 is None else cfg.w2
        cfg.band_limit = cfg.n_cells // 4 if cfg.band_limit is None else cfg.band_limit
        if cfg.t_end <= 0:
            raise ConfigError("t_end must be positive")
        if cfg.hole_width is not None and cfg.sublevel_threshold is None:
            cfg.sublevel_threshold = 0.0
        if cfg.snapshot_times is not None and cfg.preset == "relu":
            raise ConfigError("snapshots require a grid preset")
        return cfg


def _seed_pair(seed: int) -> tuple[int, int]:
    children = np.random.SeedSequence(seed).spawn(2)
    return tuple(int(c.generate_state(1)[0]) for c in children)


def build_inputs(cfg: ExperimentConfig):
    """Construct (mu0, nu) on the grid for a resolved grid-preset config."""
    grid = TorusGrid1D(cfg.n_cells)
    mu_seed, nu_seed = _seed_pair(cfg.seed)
    nu = densities.random_density(
        densities.DensitySpec(cfg.gamma_nu, cfg.min_nu, cfg.band_limit, nu_seed), grid
    )
    if cfg.mu0_equals_nu:
        mu0 = DensityField(grid, nu.values.copy())
    else:
        mu0 = densities.random_density(
            densities.DensitySpec(cfg.gamma0, cfg.min0, cfg.band_limit, mu_seed), grid
        )
    if cfg.hole_width is not None:
        mu0 = densities.plant_zero_plateau(mu0, center=0.5, width=cfg.hole_width)
    return mu0, nu


def predicted_rate(cfg: ExperimentConfig) -> tuple[str, float, dict]:
    """(fit kind, guaranteed decay value, acceptance bounds) per preset."""
    if cfg.preset == "coulomb":
        pred = cfg.min_nu
        return "exponential", pred, {"lower": 0.9 * pred, "upper": 2.25 * pred}
    if cfg.preset == "relu":
        pred = (min(cfg.gamma0, cfg.gamma_nu - 1.0) + cfg.s) / (cfg.s - 1.0)
        # the bound is conservative: extra slack on the faster-decay side
        return "power_law", pred, {"lower": pred - 0.2, "upper": pred + 0.5}
    pred = (min(cfg.gamma0, cfg.gamma_nu - cfg.s) + cfg.s) / (2.0 * (cfg.s - 1.0))
    return "power_law", pred, {"lower": pred - 0.3, "upper": pred + 0.3}


def _run_series(cfg: ExperimentConfig):
    solver = SolverConfig(
        t_end=cfg.t_end,
        cfl=cfg.cfl,
        dt_max=cfg.dt_max,
        sample_interval=cfg.sample_interval,
    )
    if cfg.preset == "relu":
        grid = TorusGrid1D(cfg.n_cells)
        _, nu_seed = _seed_pair(cfg.seed)
        nu_density = densities.random_density(
            densities.DensitySpec(cfg.gamma_nu, cfg.min_nu, cfg.band_limit, nu_seed), grid
        )
        teacher = densities.quantile_diracs(nu_density, cfg.n_particles)
        student = sphere_relu.ParticleSystem(
            angles=2.0 * math.pi * (np.arange(cfg.n_particles) + 0.5) / cfg.n_particles,
            weights=np.full(cfg.n_particles, 1.0 / cfg.n_particles),
            mode=sphere_relu.WFR_MODE if cfg.mode == "wfr" else sphere_relu.W_MODE,
        )
        return sphere_relu.run_relu_flow(student, teacher, sphere_relu.ArccosKernel(), solver)
    mu0, nu = build_inputs(cfg)
    return flow1d.run_flow(
        mu0,
        nu,
        RieszParams(cfg.s),
        solver,
        gamma_report=cfg.gamma0 if math.isfinite(cfg.gamma0) else None,
        w2_every_sample=cfg.w2,
        sublevel_threshold=cfg.sublevel_threshold,
        snapshot_times=cfg.snapshot_times,
    )


def _fit_rates(cfg: ExperimentConfig, series) -> dict:
    kind, pred, bounds = predicted_rate(cfg)
    column = "energy" if cfg.preset == "relu" else "hminus_s"
    y = getattr(series, column)
    positive = y > 0
    fits = []
    try:
        if kind == "exponential":
            fit = diagnostics.fit_exponential(series.t[positive], y[positive], prediction=pred)
        else:
            fit = diagnostics.fit_power_law(series.t[positive], y[positive], prediction=pred)
        fit.within_tolerance = bool(bounds["lower"] <= fit.value <= bounds["upper"])
        fits.append(
            {
                "name": f"{column}_decay",
                "kind": fit.kind,
                "value": fit.value,
                "window": list(fit.fit_window),
                "residual": fit.residual,
                "prediction": fit.prediction,
                "tolerance": bounds,
                "within_tolerance": fit.within_tolerance,
            }
        )
    except ValueError as exc:
        fits.append({"name": f"{column}_decay", "error": str(exc)})
    return {"preset": cfg.preset, "seed": cfg.seed, "fits": fits}


def _write_snapshots_csv(path: Path, grid: TorusGrid1D, series) -> None:
    if series.snapshots is None:
        raise ConfigError("run recorded no snapshots")
    header = ["x"] + [f"t={format(t, '.17g')}" for t in series.snapshot_times]
    lines = [",".join(header)]
    centers = grid.cell_centers()
    for i in range(grid.n_cells):
        row = [format(centers[i], ".17g")] + [
            format(snap[i], ".17g") for snap in series.snapshots
        ]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def run_experiment(config: ExperimentConfig) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    cfg = config.resolve()
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": __version__,
        "config": dataclasses.asdict(cfg),
        "created_unix": time.time(),
        "status": "running",
    }
    started = time.monotonic()
    status = 0
    try:
        series = _run_series(cfg)
        manifest["status"] = series.status
    except FlowAbort as abort:
        series = abort.series
        manifest["status"] = abort.status
        status = 3
    manifest["wall_seconds"] = time.monotonic() - started
    if series is not None:
        series.to_csv(out / "series.csv")
        (out / "rates.json").write_text(
            json.dumps(_fit_rates(cfg, series), indent=2) + "\n", encoding="ascii"
        )
        if cfg.snapshot_times is not None:
            _write_snapshots_csv(out / "snapshots.csv", TorusGrid1D(cfg.n_cells), series)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="ascii")
    return status


def snapshot_density(config: ExperimentConfig, times) -> Path:
    """Run a grid preset and write density profiles at the requested times."""
    cfg = dataclasses.replace(config, snapshot_times=list(times))
    status = run_experiment(cfg)
    if status != 0:
        raise FlowAbort(f"snapshot run exited with status {status}")
    return Path(cfg.output_path) / "snapshots.csv"


# ---------------------------------------------------------------------------
# argument and file parsing
# ---------------------------------------------------------------------------

_FIELD_TYPES = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    if name == "snapshot_times":
        return [float(x) for x in raw.replace(",", " ").split()]
    if name in ("w2", "mu0_equals_nu"):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"boolean key {name} got {raw!r}")
    if name in ("preset", "mode", "output_path"):
        return raw
    if name in ("n_cells", "n_particles", "seed", "band_limit"):
        return int(raw)
    return float(raw)


def load_config_file(path) -> dict:
    """Flat key=value text or a JSON object; unknown keys are rejected."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ConfigError("JSON config must be an object")
        bad = set(raw) - set(_FIELD_TYPES)
        if bad:
            raise ConfigError(f"unknown config keys {sorted(bad)}")
        return raw
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        values[key.strip()] = _coerce(key.strip(), raw.strip())
    return values


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="kmdflow",
        description="Kernel-discrepancy gradient-flow experiments (grid and particle).",
    )
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--s", type=float, dest="s")
    p.add_argument("--gamma0", type=float)
    p.add_argument("--gamma-nu", type=float, dest="gamma_nu")
    p.add_argument("--min0", type=float)
    p.add_argument("--min-nu", type=float, dest="min_nu")
    p.add_argument("--cells", type=int, dest="n_cells")
    p.add_argument("--particles", type=int, dest="n_particles")
    p.add_argument("--mode", choices=("w", "wfr"))
    p.add_argument("--tend", type=float, dest="t_end")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_path")
    p.add_argument("--config", help="key=value or JSON config file")
    p.add_argument("--sweep", help="JSON list of configs to fan out over threads")
    p.add_argument("--sweep-workers", type=int, default=4)
    p.add_argument("--sample-interval", type=float, dest="sample_interval")
    p.add_argument("--cfl", type=float)
    p.add_argument("--dt-max", type=float, dest="dt_max")
    p.add_argument("--band-limit", type=int, dest="band_limit")
    p.add_argument("--hole-width", type=float, dest="hole_width")
    p.add_argument("--sublevel-a", type=float, dest="sublevel_threshold")
    p.add_argument("--w2", action=argparse.BooleanOptionalAction)
    p.add_argument("--mu0-equals-nu", action="store_true", default=None, dest="mu0_equals_nu")
    p.add_argument("--snapshot-times", dest="snapshot_times",
                   help="comma-separated times; writes snapshots.csv")
    return p


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        values.update(load_config_file(args.config))
    for name in _FIELD_TYPES:
        cli_value = getattr(args, name, None)
        if cli_value is not None:
            if name == "snapshot_times" and isinstance(cli_value, str):
                cli_value = _coerce(name, cli_value)
            values[name] = cli_value
    return ExperimentConfig(**values)


def _run_sweep(path: str, workers: int) -> int:
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(entries, list):
        raise ConfigError("sweep file must hold a JSON list of configs")
    outs = [entry.get("output_path") for entry in entries]
    if len(set(outs)) != len(outs):
        raise ConfigError("sweep entries must use distinct output_path values")
    configs = [ExperimentConfig(**entry) for entry in entries]
    for cfg in configs:
        cfg.resolve()  # fail fast on config errors before launching
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        statuses = list(pool.map(run_experiment, configs))
    return max(statuses, default=0)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.sweep:
            return _run_sweep(args.sweep, args.sweep_workers)
        config = _config_from_args(args)
        return run_experiment(config)
    except (ConfigError, TypeError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FlowAbort as abort:
        print(f"solver abort: {abort.status}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
