"""causal-var: causal inference on vector autoregressive processes.

Stable VAR models, their interventions (additive, forcing and ``do``),
forecasts and causal-effect paths, the equilibrium SCM of a stable
process, and counterfactual trajectories by abduction and replay.

The numerical functions are plain functions of immutable value types.
:func:`init` bootstraps a pico-ioc container for the application layer
(benchmark runners and the CLI), which reads its settings from the
configuration context.
"""

from pico_ioc import ContextConfig, PicoContainer

from .bootstrap import init
from .core import (
    LongRunReport,
    MaCoefficients,
    StabilityReport,
    StructuralVarModel,
    VarModel,
    check_stability,
    companion_matrix,
    long_run_matrix,
    long_run_report,
    ma_coefficients,
    process_mean,
    stationary_covariance,
    svar_to_var,
)
from .counterfactual import CounterfactualResult, counterfactual_panel, counterfactual_trajectory
from .errors import (
    CausalVarError,
    DataFormatError,
    DomainError,
    EstimationError,
    ModelValidationError,
    NumericalError,
    SimulationOverflowError,
    UsageError,
)
from .estimate import FitOptions, FitReport, fit, residuals, select_lag
from .forecast import (
    CausalEffectPath,
    Forecast,
    causal_effect_path,
    forecast,
    forecast_intervened,
    oracle_forecast,
)
from .graph import CausalGraph, induced_graph, structural_graph
from .harness import ExperimentRunner, ExperimentSpec, run_interventional, run_observational, run_usecase_crossing
from .intervene import (
    Intervention,
    InterventionKind,
    apply_additive,
    apply_forcing,
    do_intervention,
    forcing_stability,
    intervened_model,
    intervened_stability,
)
from .metrics import MetricReport, metrics
from .scm import (
    CommutationReport,
    GaussianDist,
    LinearScm,
    scm_intervene,
    scm_solution,
    to_equilibrium_scm,
    verify_commutation,
)
from .simulate import PanelSeries, SimConfig, TimeSeries, rollout, simulate, simulate_intervened, simulate_panel

__all__ = [
    "init",
    "PicoContainer",
    "ContextConfig",
    "VarModel",
    "StructuralVarModel",
    "StabilityReport",
    "MaCoefficients",
    "LongRunReport",
    "companion_matrix",
    "check_stability",
    "ma_coefficients",
    "long_run_report",
    "long_run_matrix",
    "process_mean",
    "stationary_covariance",
    "svar_to_var",
    "CausalGraph",
    "induced_graph",
    "structural_graph",
    "TimeSeries",
    "PanelSeries",
    "SimConfig",
    "simulate",
    "simulate_intervened",
    "simulate_panel",
    "rollout",
    "FitOptions",
    "FitReport",
    "fit",
    "residuals",
    "select_lag",
    "Intervention",
    "InterventionKind",
    "apply_additive",
    "apply_forcing",
    "forcing_stability",
    "do_intervention",
    "intervened_model",
    "intervened_stability",
    "Forecast",
    "CausalEffectPath",
    "forecast",
    "oracle_forecast",
    "forecast_intervened",
    "causal_effect_path",
    "LinearScm",
    "GaussianDist",
    "CommutationReport",
    "to_equilibrium_scm",
    "scm_solution",
    "scm_intervene",
    "verify_commutation",
    "CounterfactualResult",
    "counterfactual_trajectory",
    "counterfactual_panel",
    "MetricReport",
    "metrics",
    "ExperimentSpec",
    "ExperimentRunner",
    "run_observational",
    "run_interventional",
    "run_usecase_crossing",
    "CausalVarError",
    "UsageError",
    "ModelValidationError",
    "DomainError",
    "DataFormatError",
    "NumericalError",
    "SimulationOverflowError",
    "EstimationError",
]
