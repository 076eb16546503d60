"""Quantitative observables: circle Wasserstein distance, sublevel measures,
dissipation residuals, and exponential/power-law rate fits.

The 2-Wasserstein distance on the unit-circumference torus is computed from
the classical reduction to quantile functions: lifting the target's inverse
CDF periodically, the transport cost at a given offset is
``g(alpha) = int_0^1 (F_mu^{-1}(q) - F_nu^{-1}(q - alpha))^2 dq`` and
``W_2^2 = min_alpha g(alpha)`` with ``g`` convex in the offset.  Atomic
inputs are handled exactly (``g`` is piecewise linear, so the minimum sits
at a breakpoint); densities go through midpoint quadrature in ``q`` plus a
ternary search in the offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import cdf
from .spectral import DensityField
from .sphere_relu import TWO_PI, ParticleSystem

QUADRATURE_NODES = 4096
TERNARY_ITERS = 60


@dataclass
class RateFit:
    """Fitted decay: ``value`` is kappa for exp(-kappa t) or p for t^-p."""

    kind: str  # "exponential" or "power_law"
    value: float
    fit_window: tuple[float, float]
    residual: float
    prediction: float | None = None
    within_tolerance: bool | None = None

    def __post_init__(self):
        if not self.fit_window[0] < self.fit_window[1]:
            raise ValueError("fit window must have t_lo < t_hi")
        if self.residual < 0:
            raise ValueError("residual must be nonnegative")


def sublevel_measure(mu: DensityField, a: float) -> float:
    """Lebesgue measure of the sublevel set {mu <= a}, one cell at a time."""
    if a < 0:
        raise ValueError("threshold must be nonnegative")
    return float(np.mean(mu.values <= a))


def dissipation_residual(series, window: tuple[int, int]) -> float:
    """Mismatch between the sampled energy slope and the recorded dissipation.

    ``window`` is an index pair (i, j) into the series; the residual is
    |(E_j - E_i)/(t_j - t_i) + mean dissipation| normalized by the mean
    dissipation magnitude.
    """
    i, j = window
    n = len(series.t)
    if not (0 <= i < j < n):
        raise ValueError(f"degenerate window {window} for series of length {n}")
    t1, t2 = series.t[i], series.t[j]
    if not t2 > t1:
        raise ValueError("window has zero duration")
    seg_dt = np.diff(series.t[i : j + 1])
    seg_d = series.dissipation[i + 1 : j + 1]
    if np.any(~np.isfinite(seg_d)):
        raise ValueError("window contains samples without dissipation data")
    mean_d = float(np.sum(seg_d * seg_dt) / (t2 - t1))
    de_dt = (series.energy[j] - series.energy[i]) / (t2 - t1)
    return abs(de_dt + mean_d) / max(abs(mean_d), 1e-30)


def _select_window(t, y, window):
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if t.shape != y.shape or t.ndim != 1 or t.size < 2:
        raise ValueError("need matching 1-d arrays with at least two samples")
    mask = (t >= window[0]) & (t <= window[1])
    if mask.sum() < 2:
        raise ValueError("fit window contains fewer than two samples")
    if np.any(y[mask] <= 0):
        raise ValueError("fit requires positive values on the window")
    return t[mask], y[mask]


def fit_exponential(t, y, window=None, prediction=None) -> RateFit:
    """Least squares of log y against t; ``value`` is the decay rate.

    Default window: the last half of the samples.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.size < 2:
        raise ValueError("need at least two samples to fit a rate")
    if window is None:
        window = (t[t.size // 2], t[-1])
    tw, yw = _select_window(t, y, window)
    slope, intercept = np.polyfit(tw, np.log(yw), 1)
    resid = np.log(yw) - (slope * tw + intercept)
    return RateFit(
        kind="exponential",
        value=float(-slope),
        fit_window=(float(tw[0]), float(tw[-1])),
        residual=float(np.sqrt(np.mean(resid**2))),
        prediction=prediction,
    )


def fit_power_law(t, y, window=None, prediction=None) -> RateFit:
    """Least squares of log y against log t; ``value`` is the decay exponent.

    Default window: the last decade in t.  The window must exclude t = 0.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.size < 2:
        raise ValueError("need at least two samples to fit a rate")
    if window is None:
        window = (t[-1] / 10.0, t[-1])
    if not window[0] > 0:
        raise ValueError("power-law window must have t_lo > 0")
    tw, yw = _select_window(t, y, window)
    slope, intercept = np.polyfit(np.log(tw), np.log(yw), 1)
    resid = np.log(yw) - (slope * np.log(tw) + intercept)
    return RateFit(
        kind="power_law",
        value=float(-slope),
        fit_window=(float(tw[0]), float(tw[-1])),
        residual=float(np.sqrt(np.mean(resid**2))),
        prediction=prediction,
    )


# ---------------------------------------------------------------------------
# Circle W2
# ---------------------------------------------------------------------------


def _atoms_on_torus(p: ParticleSystem):
    x = np.mod(p.angles / TWO_PI, 1.0)
    order = np.argsort(x, kind="stable")
    x = x[order]
    w = p.weights[order]
    mass = w.sum()
    if not mass > 0:
        raise ValueError("measure has no mass")
    return x, w / mass, float(mass)


def _g_cost_discrete(alpha, x, cum_a, y, cum_b):
    """Exact transport cost at offset alpha for sorted atomic measures."""
    bp = np.concatenate([[0.0, 1.0], cum_a[:-1], np.mod(cum_b + alpha, 1.0)])
    bp = np.unique(np.clip(bp, 0.0, 1.0))
    dq = np.diff(bp)
    qm = 0.5 * (bp[1:] + bp[:-1])
    keep = dq > 0
    dq, qm = dq[keep], qm[keep]
    xi = x[np.searchsorted(cum_a, qm, side="left")]
    p = qm - alpha
    wind = np.floor(p)
    j = np.searchsorted(cum_b, p - wind, side="left")
    ylift = y[j] + wind
    return float(np.sum(dq * (xi - ylift) ** 2))


def _w2sq_discrete(mu: ParticleSystem, nu: ParticleSystem) -> float:
    x, wx, mass_x = _atoms_on_torus(mu)
    y, wy, mass_y = _atoms_on_torus(nu)
    if abs(mass_x - mass_y) > 1e-9 * max(mass_x, mass_y):
        raise ValueError(f"unequal total masses {mass_x!r} vs {mass_y!r}")
    cum_a = np.cumsum(wx)
    cum_a[-1] = 1.0
    cum_b = np.cumsum(wy)
    cum_b[-1] = 1.0
    # g is piecewise linear and convex in the offset, so its minimum is at a
    # breakpoint: a cumulative level of mu aligning with one of nu (any winding).
    diffs = (cum_a[:, None] - cum_b[None, :]).ravel()
    cands = np.unique(np.concatenate([diffs - 1.0, diffs, diffs + 1.0, [0.0]]))
    cands = cands[(cands >= -1.0) & (cands <= 1.0)]
    best = min(_g_cost_discrete(a, x, cum_a, y, cum_b) for a in cands)
    return best * mass_x


def _quantile_fn(obj):
    if isinstance(obj, DensityField):
        F = cdf(obj)
        return F.quantile, obj.mass
    if isinstance(obj, ParticleSystem):
        x, w, mass = _atoms_on_torus(obj)
        cw = np.cumsum(w)
        cw[-1] = 1.0

        def quantile(q):
            idx = np.searchsorted(cw, q, side="left")
            return x[np.minimum(idx, x.size - 1)]

        return quantile, mass
    raise TypeError(f"unsupported measure type {type(obj).__name__}")


def _w2sq_quadrature(mu, nu) -> float:
    qf_mu, mass_x = _quantile_fn(mu)
    qf_nu, mass_y = _quantile_fn(nu)
    if abs(mass_x - mass_y) > 1e-8 * max(mass_x, mass_y):
        raise ValueError(f"unequal total masses {mass_x!r} vs {mass_y!r}")
    qs = (np.arange(QUADRATURE_NODES) + 0.5) / QUADRATURE_NODES
    xq = qf_mu(qs)

    def cost(alpha):
        p = qs - alpha
        wind = np.floor(p)
        return float(np.mean((xq - (qf_nu(p - wind) + wind)) ** 2))

    lo, hi = -1.0, 1.0
    for _ in range(TERNARY_ITERS):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if cost(m1) <= cost(m2):
            hi = m2
        else:
            lo = m1
    return cost(0.5 * (lo + hi)) * mass_x


def w2_torus_1d(mu, nu) -> float:
    """2-Wasserstein distance on the unit-circumference torus.

    Accepts cell-averaged densities and/or particle systems (particle
    angles are mapped to torus coordinates via theta / 2 pi).  Inputs must
    carry equal total mass.  Atomic pairs are solved exactly; pairs
    involving a density use quantile quadrature.
    """
    if isinstance(mu, ParticleSystem) and isinstance(nu, ParticleSystem):
        return float(np.sqrt(max(_w2sq_discrete(mu, nu), 0.0)))
    return float(np.sqrt(max(_w2sq_quadrature(mu, nu), 0.0)))
