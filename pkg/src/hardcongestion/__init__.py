"""Hard-congestion particle dynamics in one dimension."""

from .errors import (
    CongestionError,
    ConfigError,
    ConvergenceError,
    InputError,
    IntegrationError,
    ParameterError,
    StepSizeError,
)
from .eulerian import PiecewiseField, histogram_density, pressure_fields, weak_form_residual
from .harness import ExperimentConfig, SweepResult, steady_state_benchmark, sweep_N, sweep_tau, uniqueness_probe
from .jko import StepReport, jko_step, pav, project_to_cone, recover_multipliers
from .metrics import estimate_suite, wasserstein_p
from .potential import InteractionKernel, Potential, builtin_quadratic, double_well_confined
from .quantile import QuantileFn
from .sampling import MacroDensity, quantile_of_density, sample_particles
from .trajectory import Trajectory, integrate, load_trajectory, save_trajectory

__version__ = "0.1.0"
