"""Random densities of prescribed Sobolev regularity and their discretizations.

A density labelled ``gamma`` is synthesized from band-limited Fourier noise
whose mode-k standard deviation is ``k^-(gamma + 1/2 + delta)`` with a small
margin ``delta``: the resulting field lies in every H^g with g < gamma +
delta, making ``gamma`` the effective regularity label.  The raw field is
shifted/scaled to a probability density of minimum zero, then mixed with
the uniform density so the minimum equals ``min_value`` exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .spectral import DensityField, Spectrum, TorusGrid1D, forward_transform, \
    inverse_transform, sobolev_seminorm
from .sphere_relu import ParticleSystem

logger = logging.getLogger(__name__)

REGULARITY_MARGIN = 0.01  # delta in the variance-decay exponent


@dataclass(frozen=True)
class DensitySpec:
    """Recipe for one random density: regularity label, floor, band, seed."""

    gamma: float
    min_value: float = 0.0
    band_limit: int = 128
    seed: int = 0

    def __post_init__(self):
        if not self.gamma > 0.5:
            raise ValueError("gamma must exceed 1/2 for a bounded density")
        if not 0.0 <= self.min_value < 1.0:
            raise ValueError("min_value must lie in [0, 1)")
        if self.band_limit < 1:
            raise ValueError("band_limit must be >= 1")


def random_density(spec: DensitySpec, grid: TorusGrid1D) -> DensityField:
    """Probability density with min exactly ``spec.min_value``, deterministic in seed."""
    n = grid.n_cells
    if spec.band_limit > n // 2:
        raise ValueError(f"band_limit {spec.band_limit} exceeds n_cells/2 = {n // 2}")
    # The unpaired Nyquist mode cannot carry a real cosine on this grid.
    k_active = min(spec.band_limit, n // 2 - 1)
    rng = np.random.default_rng(spec.seed)
    k = np.arange(1, k_active + 1)
    sd = k ** (-(spec.gamma + 0.5 + REGULARITY_MARGIN))
    a = rng.normal(0.0, sd)
    b = rng.normal(0.0, sd)
    coeffs = np.zeros(n, dtype=np.complex128)
    coeffs[k] = 0.5 * (a - 1j * b)
    coeffs[-k] = np.conj(coeffs[k])
    g = inverse_transform(Spectrum(grid, coeffs)).values

    shifted = g - g.min()
    mean = shifted.mean()
    if not mean > 0.0:
        raise ValueError("degenerate sample: cannot normalize a constant field")
    base = shifted / mean
    m = spec.min_value
    values = (1.0 - m) * base + m
    out = DensityField(grid, values)

    if logger.isEnabledFor(logging.DEBUG):
        s = forward_transform(out)
        logger.debug(
            "random_density(gamma=%g, seed=%d): |.|_{H^%g}=%.4g |.|_{H^%g}=%.4g",
            spec.gamma, spec.seed,
            spec.gamma, sobolev_seminorm(s, spec.gamma),
            spec.gamma + 1, sobolev_seminorm(s, spec.gamma + 1),
        )
    return out


def plant_zero_plateau(f: DensityField, center: float, width: float,
                       ramp: float = 0.1) -> DensityField:
    """Zero out the density on an interval of the given width and renormalize.

    The mask vanishes exactly for cell centers inside the interval and
    rises smoothly over ``ramp`` on each side, so the zero set of the
    result has measure ``width`` up to one cell.
    """
    if not 0.0 < width < 1.0 - 2.0 * ramp:
        raise ValueError("width must leave room for the ramps")
    x = f.grid.cell_centers()
    dist = np.abs(np.mod(x - center + 0.5, 1.0) - 0.5)  # torus distance to center
    s = np.clip((dist - width / 2.0) / ramp, 0.0, 1.0)
    mask = s * s * (3.0 - 2.0 * s)
    values = f.values * mask
    mass = values.mean()
    if not mass > 0.0:
        raise ValueError("plateau removed all mass")
    return DensityField(f.grid, values / mass)


class TorusCDF:
    """Piecewise-linear CDF of a cell-averaged probability density on [0, 1]."""

    def __init__(self, f: DensityField):
        if f.values.min() < 0.0:
            raise ValueError(f"negative density value {f.values.min():g}")
        if abs(f.mass - 1.0) > 1e-9:
            raise ValueError(f"density mass {f.mass!r} is not 1")
        n = f.grid.n_cells
        edges = np.concatenate([[0.0], np.cumsum(f.values) / n])
        edges /= edges[-1]  # pin F(1) = 1 exactly
        self.grid = f.grid
        self.edge_positions = np.arange(n + 1) / n
        self.edge_values = edges

    def __call__(self, x):
        return np.interp(x, self.edge_positions, self.edge_values)

    def quantile(self, q):
        """Generalized inverse ``inf {x : F(x) >= q}`` for q in [0, 1]."""
        q = np.asarray(q, dtype=np.float64)
        if np.any(q < 0.0) or np.any(q > 1.0):
            raise ValueError("quantile levels must lie in [0, 1]")
        n = self.grid.n_cells
        i = np.searchsorted(self.edge_values[1:], q, side="left")
        i = np.minimum(i, n - 1)
        lo = self.edge_values[i]
        hi = self.edge_values[i + 1]
        den = hi - lo
        frac = np.where(den > 0.0, (q - lo) / np.where(den > 0.0, den, 1.0), 0.0)
        x = (i + np.clip(frac, 0.0, 1.0)) / n
        return x if x.ndim else float(x)


def cdf(f: DensityField) -> TorusCDF:
    """Exact integral of the cell-average density: F(0) = 0, F(1) = 1, nondecreasing."""
    return TorusCDF(f)


def quantile_diracs(f: DensityField, n_particles: int) -> ParticleSystem:
    """Equal Dirac masses at the midpoint quantiles ``F^{-1}((j - 1/2)/N)``.

    Positions are returned as angles (2 pi x) so the result plugs directly
    into the circle dynamics; divide by 2 pi to recover torus coordinates.
    """
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    F = cdf(f)
    qs = (np.arange(n_particles) + 0.5) / n_particles
    locations = F.quantile(qs)
    return ParticleSystem(
        angles=2.0 * math.pi * locations,
        weights=np.full(n_particles, 1.0 / n_particles),
    )
