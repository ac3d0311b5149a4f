"""Numerical laboratory for the NLS/mKdV integrable hierarchy.

Diagonal Green's functions of the Lax operator, the perturbation
determinant and its conserved densities and currents, the full,
regularized, and difference flows, and the norm-inflation experiment, all
on a periodic pseudo-spectral grid.
"""

from .spectral import Cutoff, Field, Grid, apply_multiplier, sobolev_norm
from .lax import (
    GreensTriple,
    OperatorPair,
    alpha,
    greens_fixed_point,
    greens_oracle,
    greens_series,
    pdet_integral,
    pdet_trace,
)
from .hierarchy import (
    DensityCurrent,
    HamiltonianValue,
    current,
    density,
    density_current,
    expansion_error,
    hamiltonians,
    poisson_bracket,
)
from .flows import (
    FlowSpec,
    Trajectory,
    evolve,
    rescale,
    step_a_flow,
    step_difference,
    step_full,
    step_regularized,
)
from .diagnostics import (
    InflationReport,
    ResidualReport,
    equicontinuity_tail,
    kappa_convergence_study,
    local_smoothing_norm,
    micro_residual,
    norm_inflation_experiment,
    tightness_metric,
)
from .config import ExperimentConfig

__version__ = "0.1.0"

__all__ = [
    "Cutoff", "Field", "Grid", "apply_multiplier", "sobolev_norm",
    "GreensTriple", "OperatorPair", "alpha", "greens_fixed_point",
    "greens_oracle", "greens_series", "pdet_integral", "pdet_trace",
    "DensityCurrent", "HamiltonianValue", "current", "density",
    "density_current", "expansion_error", "hamiltonians", "poisson_bracket",
    "FlowSpec", "Trajectory", "evolve", "rescale", "step_a_flow",
    "step_difference", "step_full", "step_regularized",
    "InflationReport", "ResidualReport", "equicontinuity_tail",
    "kappa_convergence_study", "local_smoothing_norm", "micro_residual",
    "norm_inflation_experiment", "tightness_metric",
    "ExperimentConfig",
]
