"""Wasserstein variation, deformation-model fitting and bootstrap tests."""

from .align import (
    AlignmentResult,
    OptimizerConfig,
    alignment_cost,
    batch_alignment_costs,
    minimize_alignment,
    scale_closed_form,
)
from .boot import (
    BootstrapConfig,
    TestReport,
    bootstrap_statistics,
    empirical_quantile_of,
    gof_test,
    rejection_frequency,
    threshold_test,
)
from .deform import (
    DeformationFamily,
    FiniteDifferenceFamily,
    ParameterVector,
    get_family,
    location_family,
    location_scale_family,
    scale_family,
)
from .empirical import (
    EmpiricalDistribution,
    QuantileFunction,
    barycenter_quantile,
    frechet_mean,
    from_samples,
    multimarginal_variation_oracle,
    quantile,
    variation_r,
    variation_squared,
    wasserstein_r,
)
from .estimators import (
    DeformationGofTest,
    ThresholdTest,
    WarpingAligner,
    WassersteinVariation,
    check_samples,
)
from .exceptions import NoConvergenceWarning, WarpfitError
from .experiments import ExperimentTable, run_level_experiment, run_power_experiment
from .limitlaw import (
    ErrorDistribution,
    centering_constant,
    nonpar_clt_variance,
    sample_bridge,
    sample_gof_limit,
    sigma_matrix,
)
from .rng import RandomStream
from .scenarios import DistSpec, ScenarioSpec, alternative_scenario, generate, null_scenario

__version__ = "0.1.0"
