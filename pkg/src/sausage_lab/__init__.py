"""Stochastic sausage-volume laboratory.

Estimates asymptotic volume growth rates of diffusion sausages (a moving
compact shape swept along an SDE path) for periodic incompressible drifts,
with closed-form capacity cross-checks, effective-diffusivity estimation,
scaling-identity validation, and Poisson-obstacle survival experiments.
"""

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    FieldValidationError,
    InsufficientDataError,
    IntegrationDivergedError,
    ResourceLimitError,
    SausageLabError,
)
from .fields import (
    VelocityField,
    check_divergence_free,
    check_mean_zero,
    custom_field,
    fourier_field,
    load_field_file,
    resolve_field,
    taylor_green,
    validate_field,
    zero_field,
)
from .obstacles import (
    HittingResult,
    ObstacleField,
    Region,
    SurvivalSummary,
    SurvivalTrial,
    conditional_tail_gap,
    default_region,
    first_hitting_time,
    sample_obstacles,
    survival_experiment,
    write_trials_csv,
)
from .rates import (
    CapacityResult,
    DiffusivityResult,
    GrowthRateResult,
    SweepResult,
    SweepRow,
    capacity_anisotropic,
    capacity_ball,
    displacement_covariance_from_reported,
    ellipsoid_capacity,
    estimate_effective_diffusivity,
    estimate_growth_rate,
    read_sweep_csv,
    suggested_dt,
    sweep_r,
    write_sweep_csv,
)
from .sausage import (
    CellRefinement,
    CrossSection,
    SausageEstimate,
    SausageIndex,
    ball,
    bounding_cube,
    box,
    estimate_volume,
    refine_cells,
    voxel_oracle_volume,
)
from .sde import (
    IntegratorConfig,
    SamplePath,
    integrate,
    integrate_batch,
    integrate_coupled_pair,
    integrate_finals,
    integrate_strided,
    load_path,
    save_path,
)

__version__ = "0.1.0"

__all__ = [
    "SausageLabError",
    "ConfigurationError",
    "FieldValidationError",
    "IntegrationDivergedError",
    "DegenerateInputError",
    "ResourceLimitError",
    "InsufficientDataError",
    "VelocityField",
    "zero_field",
    "taylor_green",
    "fourier_field",
    "custom_field",
    "load_field_file",
    "resolve_field",
    "check_divergence_free",
    "check_mean_zero",
    "validate_field",
    "IntegratorConfig",
    "SamplePath",
    "integrate",
    "integrate_strided",
    "integrate_batch",
    "integrate_finals",
    "integrate_coupled_pair",
    "save_path",
    "load_path",
    "CrossSection",
    "ball",
    "box",
    "SausageIndex",
    "CellRefinement",
    "SausageEstimate",
    "bounding_cube",
    "refine_cells",
    "estimate_volume",
    "voxel_oracle_volume",
    "GrowthRateResult",
    "DiffusivityResult",
    "CapacityResult",
    "SweepRow",
    "SweepResult",
    "estimate_growth_rate",
    "estimate_effective_diffusivity",
    "capacity_ball",
    "ellipsoid_capacity",
    "capacity_anisotropic",
    "displacement_covariance_from_reported",
    "suggested_dt",
    "sweep_r",
    "write_sweep_csv",
    "read_sweep_csv",
    "Region",
    "ObstacleField",
    "HittingResult",
    "SurvivalTrial",
    "SurvivalSummary",
    "sample_obstacles",
    "first_hitting_time",
    "default_region",
    "survival_experiment",
    "conditional_tail_gap",
    "write_trials_csv",
    "__version__",
]
