"""Gradient flows of kernel mean discrepancies on the 1-torus and the circle."""

__version__ = "0.1.0"

from .densities import DensitySpec, cdf, plant_zero_plateau, quantile_diracs, random_density
from .diagnostics import (
    RateFit,
    dissipation_residual,
    fit_exponential,
    fit_power_law,
    sublevel_measure,
    w2_torus_1d,
)
from .flow1d import FlowState, adaptive_dt, run_flow, upwind_step, upwind_update
from .series import CFLViolation, FlowAbort, FlowTimeSeries, SolverConfig
from .spectral import (
    DensityField,
    RieszParams,
    Spectrum,
    TorusGrid1D,
    forward_transform,
    hminus_s_energy,
    inverse_transform,
    riesz_velocity,
    sobolev_seminorm,
)
from .sphere_relu import (
    ArccosKernel,
    ParticleSystem,
    kernel_derivative,
    kernel_value,
    particle_velocity,
    relu_energy,
    run_relu_flow,
    spectral_lambda,
    wfr_weight_rate,
)
