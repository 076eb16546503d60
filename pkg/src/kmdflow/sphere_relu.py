"""Particle dynamics on the unit circle under the arccos (ReLU) kernel.

The kernel between points at geodesic distance ``theta`` is
``J(theta) = c (sin theta + (pi - theta) cos theta)`` with ``c = 1/2``,
which makes the quadratic discrepancy energy equal to half the squared
L2 gap between the represented ridge functions.  Particles carry
nonnegative weights; in Wasserstein mode the weights are frozen, in
Wasserstein--Fisher--Rao (WFR) mode they follow the reaction rate
``dw/dt = -4 (K(mu - nu))(theta) w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .series import FlowAbort, FlowTimeSeries, SeriesBuilder, SolverConfig

TWO_PI = 2.0 * math.pi

W_MODE = "wasserstein"
WFR_MODE = "wfr"


@dataclass(frozen=True)
class ArccosKernel:
    """Arccos-type kernel on the circle; ``c`` fixed by J(0) = pi/2 in d = 1."""

    c: float = 0.5

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")


@dataclass
class ParticleSystem:
    """Weighted Dirac masses at angles on the circle."""

    angles: np.ndarray
    weights: np.ndarray
    mode: str = W_MODE

    def __post_init__(self):
        self.angles = np.mod(np.asarray(self.angles, dtype=np.float64), TWO_PI)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.angles.shape != self.weights.shape or self.angles.ndim != 1:
            raise ValueError("angles and weights must be 1-d arrays of equal length")
        if self.weights.min(initial=0.0) < 0.0:
            raise ValueError("weights must be nonnegative")
        if self.mode not in (W_MODE, WFR_MODE):
            raise ValueError(f"mode must be {W_MODE!r} or {WFR_MODE!r}")

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta < -1e-12) or np.any(theta > math.pi + 1e-12):
        raise ValueError("theta must lie in [0, pi]")
    return np.clip(theta, 0.0, math.pi)


def kernel_value(theta, kernel: ArccosKernel = ArccosKernel()):
    """J(theta) on [0, pi]: nonnegative, strictly decreasing, J(pi) = 0."""
    theta = _check_theta(theta)
    out = kernel.c * (np.sin(theta) + (math.pi - theta) * np.cos(theta))
    return float(out) if np.isscalar(theta) or out.ndim == 0 else out

def kernel_derivative(theta, kernel: ArccosKernel = ArccosKernel()):
    """J'(theta) = -c (pi - theta) sin(theta); vanishes at both endpoints."""
    theta = _check_theta(theta)
    out = -kernel.c * (math.pi - theta) * np.sin(theta)
    return float(out) if np.isscalar(theta) or out.ndim == 0 else out


def signed_geodesic(alpha, beta):
    """Signed angular difference alpha - beta wrapped to [-pi, pi).

    Sign convention: the derivative of ``J(geodesic(alpha, beta))`` with
    respect to ``alpha`` is ``J'(|delta|) * sign(delta)`` for
    ``delta = signed_geodesic(alpha, beta)``; both endpoint cases are safe
    because J' vanishes at 0 and pi.
    """
    return np.mod(np.asarray(alpha) - beta + math.pi, TWO_PI) - math.pi


def _charges(mu: ParticleSystem, nu: ParticleSystem):
    pts = np.concatenate([mu.angles, nu.angles])
    q = np.concatenate([mu.weights, -nu.weights])
    return pts, q


def potential(eval_angles, mu: ParticleSystem, nu: ParticleSystem,
              kernel: ArccosKernel = ArccosKernel()) -> np.ndarray:
    """(K(mu - nu))(x) = sum_j q_j J(geodesic(x, y_j)) at the given angles."""
    pts, q = _charges(mu, nu)
    d = np.abs(signed_geodesic(np.asarray(eval_angles)[:, None], pts[None, :]))
    return kernel_value(d, kernel) @ q


def particle_velocity(mu: ParticleSystem, nu: ParticleSystem,
                      kernel: ArccosKernel = ArccosKernel()) -> np.ndarray:
    """Angular velocity of each mu-particle: minus the potential's tangential gradient."""
    pts, q = _charges(mu, nu)
    delta = signed_geodesic(mu.angles[:, None], pts[None, :])
    grad = kernel_derivative(np.abs(delta), kernel) * np.sign(delta)
    return -(grad @ q)


def wfr_weight_rate(mu: ParticleSystem, nu: ParticleSystem,
                    kernel: ArccosKernel = ArccosKernel()) -> np.ndarray:
    """Reaction rate dw/dt = -4 (K(mu - nu))(theta_i) w_i (WFR mode only)."""
    if mu.mode != WFR_MODE:
        raise ValueError("weight rates are defined for WFR-mode systems")
    return -4.0 * potential(mu.angles, mu, nu, kernel) * mu.weights


def relu_energy(mu: ParticleSystem, nu: ParticleSystem,
                kernel: ArccosKernel = ArccosKernel()) -> float:
    """Discrepancy energy 1/2 sum_ij q_i q_j J(geodesic) over signed charges."""
    pts, q = _charges(mu, nu)
    d = np.abs(signed_geodesic(pts[:, None], pts[None, :]))
    return 0.5 * float(q @ kernel_value(d, kernel) @ q)


def spectral_lambda(k: int) -> float:
    """Eigenvalue of the kernel operator on the frequency-k circle harmonics.

    lambda_0 = 4, lambda_1 = pi^2/4, lambda_k = 4/(k^2-1)^2 for even k >= 2,
    and 0 for odd k >= 3.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return 4.0
    if k == 1:
        return math.pi**2 / 4.0
    if k % 2 == 0:
        return 4.0 / (k**2 - 1) ** 2
    return 0.0


@dataclass
class SphereSpectrum:
    """Trigonometric moments a_k, b_k (k = 0..k_max) of a particle measure.

    Normalization: ``a_k = sum_j w_j cos(k theta_j) / pi`` (and ``/2 pi`` for
    k = 0), so the k-component of the measure has density
    ``a_k cos(k theta) + b_k sin(k theta)``.
    """

    a: np.ndarray
    b: np.ndarray

    @classmethod
    def from_particles(cls, system: ParticleSystem, k_max: int) -> "SphereSpectrum":
        k = np.arange(k_max + 1, dtype=np.float64)
        ka = k[:, None] * system.angles[None, :]
        a = np.cos(ka) @ system.weights / math.pi
        b = np.sin(ka) @ system.weights / math.pi
        a[0] *= 0.5
        b[0] = 0.0
        return cls(a, b)

    @property
    def k_max(self) -> int:
        return self.a.size - 1

    def seminorm(self, order: float) -> float:
        """Truncated circle Sobolev seminorm with eigenvalue weights (k^2)^order."""
        k = np.arange(1, self.k_max + 1, dtype=np.float64)
        return float(
            np.sqrt(np.sum(k ** (2.0 * order) * math.pi * (self.a[1:] ** 2 + self.b[1:] ** 2)))
        )


def circle_moment_seminorm(mu: ParticleSystem, nu: ParticleSystem, order: float,
                           k_max: int = 128) -> float:
    """Truncated circle Sobolev seminorm of mu - nu from trigonometric moments.

    Uses the Laplace--Beltrami eigenvalues k^2 on the circle:
    ||eta||_{H^order}^2 = sum_{k>=1} (k^2)^order * pi * (a_k^2 + b_k^2) with
    a_k = (1/pi) sum_j q_j cos(k theta_j) and likewise for b_k.  Only
    meaningful for negative ``order`` (Dirac combs have no positive norms).
    """
    pts, q = _charges(mu, nu)
    k = np.arange(1, k_max + 1, dtype=np.float64)
    ka = k[:, None] * pts[None, :]
    a = np.cos(ka) @ q
    b = np.sin(ka) @ q
    # (k^2)^order eigenvalue weight; moments enter as (A^2 + B^2)/pi
    return float(np.sqrt(np.sum(k ** (2.0 * order) * (a**2 + b**2) / math.pi)))


@njit(cache=True, parallel=True, fastmath=True)
def _pair_rates_njit(theta, pts, q, c, need_potential):
    """Velocity and potential at the ``theta`` particles.

    pts/q hold ALL charges (mu with +w then nu with -w); self-interaction
    contributes zero to the velocity because J'(0) = 0.  Per pair only one
    inverse trig call is needed: with delta = theta_i - y_j,
    cos d = cos delta and sin(d) sign(delta) = sin delta come from products
    of the precomputed sines/cosines.
    """
    n = theta.shape[0]
    m = pts.shape[0]
    v = np.zeros(n)
    phi = np.zeros(n)
    cp = np.cos(pts)
    sp = np.sin(pts)
    for i in prange(n):
        ci = math.cos(theta[i])
        si = math.sin(theta[i])
        acc_v = 0.0
        acc_p = 0.0
        for j in range(m):
            cd = ci * cp[j] + si * sp[j]
            sd = si * cp[j] - ci * sp[j]
            if cd > 1.0:
                cd = 1.0
            elif cd < -1.0:
                cd = -1.0
            pi_d = math.pi - math.acos(cd)
            acc_v += q[j] * (-c * pi_d * sd)  # J'(d) * sign(delta)
            if need_potential:
                acc_p += q[j] * c * (abs(sd) + pi_d * cd)
        v[i] = -acc_v
        phi[i] = acc_p
    return v, phi


@njit(cache=True, parallel=True, fastmath=True)
def _energy_njit(pts, q, c):
    m = pts.shape[0]
    cp = np.cos(pts)
    sp = np.sin(pts)
    acc = 0.0
    for i in prange(m):
        row = 0.0
        for j in range(m):
            cd = cp[i] * cp[j] + sp[i] * sp[j]
            if cd > 1.0:
                cd = 1.0
            elif cd < -1.0:
                cd = -1.0
            sin_d = math.sqrt(max(0.0, 1.0 - cd * cd))
            row += q[j] * (sin_d + (math.pi - math.acos(cd)) * cd)
        acc += q[i] * row
    return 0.5 * c * acc


def run_relu_flow(
    mu0: ParticleSystem,
    nu: ParticleSystem,
    kernel: ArccosKernel,
    config: SolverConfig,
    track_energy_steps: bool = False,
) -> FlowTimeSeries:
    """Explicit Euler on angles (and weights in WFR mode) with rate-based steps.

    The step is limited by ``cfl / R`` where ``R`` bounds both the angular
    rate relative to the mean particle spacing and, in WFR mode, the
    relative weight rate ``4 |K(mu - nu)|``; a step that would drive a
    weight negative is rejected and retried with half the step.
    """
    wfr = mu0.mode == WFR_MODE
    theta = mu0.angles.copy()
    w = mu0.weights.copy()
    pts_nu = nu.angles.copy()
    w_nu = nu.weights.copy()
    c = kernel.c
    h_scale = TWO_PI / max(theta.size, pts_nu.size)

    sample_interval = config.resolved_sample_interval()
    stride = config.sample_stride
    builder = SeriesBuilder()
    t = 0.0
    n_steps = 0
    last_dt = 0.0
    max_inc = -np.inf
    prev_sample_t = 0.0
    prev_sample_energy = np.nan
    acc_dissipation = 0.0
    prev_energy_step = None
    next_sample = sample_interval if sample_interval is not None else None
    t_final = config.t_end

    def all_charges():
        return np.concatenate([theta, pts_nu]), np.concatenate([w, -w_nu])

    while True:
        pts, q = all_charges()
        v, phi = _pair_rates_njit(theta, pts, q, c, wfr)
        energy = float(_energy_njit(pts, q, c))
        if track_energy_steps:
            if prev_energy_step is not None:
                max_inc = max(max_inc, energy - prev_energy_step)
            prev_energy_step = energy
        dissipation = float(np.sum(w * v**2))
        if wfr:
            dissipation += float(np.sum(w * 4.0 * phi**2))

        due = (
            t == 0.0
            or t >= t_final - 1e-12 * max(1.0, t_final)
            or (next_sample is not None and t >= next_sample - 1e-12 * max(1.0, t_final))
            or (stride is not None and n_steps % stride == 0)
        )
        if due:
            if t > prev_sample_t:
                window = t - prev_sample_t
                mean_dissipation = acc_dissipation / window
                de_dt = (energy - prev_sample_energy) / window
                residual = abs(de_dt + mean_dissipation) / max(abs(mean_dissipation), 1e-30)
            else:
                mean_dissipation = np.nan
                residual = np.nan
            builder.add(
                t=t,
                dt=last_dt,
                energy=energy,
                hminus_s=circle_moment_seminorm(
                    ParticleSystem(theta, w, mu0.mode), ParticleSystem(pts_nu, w_nu), -2.0
                ),
                hgamma=np.nan,
                min_mu=float(w.min()),
                max_mu=float(w.max()),
                mass=float(w.sum()),
                dissipation=mean_dissipation,
                dissipation_residual=residual,
            )
            prev_sample_t = t
            prev_sample_energy = energy
            acc_dissipation = 0.0
            if next_sample is not None:
                while next_sample <= t + 1e-12 * max(1.0, t_final):
                    next_sample += sample_interval

        if t >= t_final - 1e-12 * max(1.0, t_final):
            break

        rate = np.max(np.abs(v)) / h_scale
        if wfr:
            rate = max(rate, 4.0 * float(np.max(np.abs(phi))))
        dt = min(config.dt_max, config.cfl / rate) if rate > 0 else config.dt_max
        dt = min(dt, t_final - t)
        if dt < config.dt_min:
            raise FlowAbort(
                "rate blow-up",
                builder.build(status="rate blow-up", conserve_mass=not wfr),
            )

        while True:
            if wfr:
                w_new = w * (1.0 - 4.0 * dt * phi)
                if w_new.min() < 0.0:
                    dt *= 0.5
                    if dt < config.dt_min:
                        raise FlowAbort(
                            "weight positivity unreachable",
                            builder.build(status="weight positivity unreachable",
                                          conserve_mass=not wfr),
                        )
                    continue
            else:
                w_new = w
            break
        theta = np.mod(theta + dt * v, TWO_PI)
        w = w_new
        acc_dissipation += dissipation * dt
        t += dt
        last_dt = dt
        n_steps += 1

    return builder.build(
        s=2.0,
        max_energy_increment=(max_inc if np.isfinite(max_inc) else 0.0),
        n_steps=n_steps,
        status="completed",
        conserve_mass=not wfr,
    )
