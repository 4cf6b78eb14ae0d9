"""Retrospective counterfactuals by abduction, action and prediction.

1. Abduction: recover the shocks of an observed trajectory as residuals
   of the model.
2. Action: replace the model by its intervened version.
3. Prediction: replay the recovered shocks through the intervened
   recursion, starting from the factual presample.

For forcing interventions the whole right-hand side, recovered shock
included, is multiplied by ``(I + diag F)^{-1}``.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from .config import DEFAULT_OVERFLOW_BOUND
from .core import VarModel
from .errors import DomainError, ModelValidationError
from .estimate import residuals
from .intervene import Intervention, intervened_model
from .simulate import PanelSeries, TimeSeries, propagate, shock_scale

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
LJUNG_BOX_LAGS = 10
SIGNIFICANCE = 0.01
TRACE_RATIO_BAND = (1.0 / 1.5, 1.5)


@dataclass(frozen=True, eq=False)
class ResidualDiagnostics:
    """Checks of the recovered shocks against the model's assumptions.

    Attributes:
        mean: Residual mean per component.
        covariance: Residual covariance.
        trace_ratio: ``trace(covariance) / trace(Sigma_u)``.
        ljung_box: Ljung-Box ``Q`` statistic per component.
        p_values: Chi-square tail probability of each ``Q``.
        lags: Autocorrelation lags entering ``Q``.
        misspecified: True when the trace ratio leaves ``[1/1.5, 1.5]`` or
            some ``Q`` is significant at 1% after a Bonferroni correction.
    """

    mean: np.ndarray
    covariance: np.ndarray
    trace_ratio: float
    ljung_box: np.ndarray
    p_values: np.ndarray
    lags: int
    misspecified: bool


@dataclass(frozen=True, eq=False)
class CounterfactualResult:
    """Factual and counterfactual trajectories over ``[t0 - p, t1]``.

    The counterfactual equals the factual before ``t0``; ``effect`` is
    their difference.
    """

    factual: TimeSeries
    counterfactual: TimeSeries
    effect: TimeSeries
    t0: int
    t1: int
    diagnostics: Optional[ResidualDiagnostics] = None


def ljung_box(errors: np.ndarray, lags: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per-column Ljung-Box statistics and their chi-square p-values."""
    n = errors.shape[0]
    centred = errors - errors.mean(axis=0)
    denom = (centred**2).sum(axis=0)
    q = np.zeros(errors.shape[1])
    for k in range(1, lags + 1):
        num = (centred[k:] * centred[:-k]).sum(axis=0)
        rho = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
        q += rho**2 / (n - k)
    q *= n * (n + 2)
    return q, stats.chi2.sf(q, lags)


def residual_diagnostics(model: VarModel, errors: np.ndarray) -> ResidualDiagnostics:
    n, d = errors.shape
    mean = errors.mean(axis=0)
    centred = errors - mean
    covariance = centred.T @ centred / max(n - 1, 1)
    noise_trace = float(np.trace(model.noise_cov))
    trace = float(np.trace(covariance))
    if noise_trace > 0:
        trace_ratio = trace / noise_trace
    else:
        trace_ratio = 1.0 if trace == 0 else float("inf")
    lags = min(LJUNG_BOX_LAGS, n - 1)
    if lags >= 1:
        q, p_values = ljung_box(errors, lags)
    else:
        q, p_values = np.zeros(d), np.ones(d)
    low, high = TRACE_RATIO_BAND
    misspecified = not (low <= trace_ratio <= high) or bool(np.any(p_values < SIGNIFICANCE / d))
    if misspecified:
        logger.warning(
            "Residuals of '%s' do not look like its noise: trace ratio %.3g, smallest Ljung-Box p-value %.3g",
            model.name,
            trace_ratio,
            float(p_values.min(initial=1.0)),
        )
    return ResidualDiagnostics(mean, covariance, trace_ratio, q, p_values, lags, misspecified)


def counterfactual_trajectory(
    model: VarModel,
    trajectory: TimeSeries,
    intervention: Intervention,
    t0: int,
    t1: int,
    overflow_bound: float = DEFAULT_OVERFLOW_BOUND,
) -> CounterfactualResult:
    """What *trajectory* would have been had *intervention* acted from ``t0``.

    The intervention becomes active at ``t0 + intervention.start``.

    Args:
        model: Model used for abduction and prediction.
        trajectory: Observed series covering ``[t0 - p, t1]``.
        intervention: Intervention to replay.
        t0: First intervened time index.
        t1: Last time index, inclusive.

    Raises:
        DomainError: If ``t0 > t1`` or the trajectory does not cover the
            needed range.
    """
    p = model.lag
    if trajectory.dim != model.dim:
        raise ModelValidationError(f"trajectory has dim {trajectory.dim}, model '{model.name}' has dim {model.dim}")
    if t0 > t1:
        raise DomainError(f"counterfactual window is empty: t0={t0} > t1={t1}")
    if t0 - p < trajectory.start_index or t1 >= trajectory.end_index:
        raise DomainError(
            f"counterfactual needs observations on [{t0 - p}, {t1}], "
            f"trajectory covers [{trajectory.start_index}, {trajectory.end_index - 1}]"
        )
    if not 0 <= intervention.start <= t1 - t0:
        raise DomainError(f"intervention start {intervention.start} outside the window [0, {t1 - t0}]")
    window = trajectory.window(t0 - p, t1 + 1)
    shocks = residuals(model, window).values
    replay = propagate(
        model,
        window.values[np.newaxis, :p],
        shocks[np.newaxis],
        overflow_bound,
        t0,
        after=intervened_model(model, intervention),
        switch_at=intervention.start,
        after_scale=shock_scale(model, intervention),
    )[0]
    values = np.concatenate([window.values[:p], replay])
    labels = model.labels or trajectory.labels
    counterfactual = TimeSeries(values, window.start_index, labels)
    effect = TimeSeries(values - window.values, window.start_index, labels)
    return CounterfactualResult(
        factual=TimeSeries(window.values, window.start_index, labels),
        counterfactual=counterfactual,
        effect=effect,
        t0=t0,
        t1=t1,
        diagnostics=residual_diagnostics(model, shocks),
    )


def counterfactual_panel(
    model: VarModel,
    panel: PanelSeries,
    intervention: Intervention,
    t0: int,
    t1: int,
    workers: int = 1,
) -> List[Tuple[str, CounterfactualResult]]:
    """:func:`counterfactual_trajectory` for every entity, in panel order."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(
            pool.map(lambda item: counterfactual_trajectory(model, item[1], intervention, t0, t1), panel.entities)
        )
    return list(zip(panel.ids, results))


def counterfactual_frame(result: CounterfactualResult, entity: Optional[str] = None) -> pd.DataFrame:
    names = result.factual.labels or tuple(f"x{i}" for i in range(result.factual.dim))
    columns = {}
    if entity is not None:
        columns["entity"] = entity
    columns["t"] = result.factual.index
    parts = {"factual": result.factual, "counterfactual": result.counterfactual, "effect": result.effect}
    for prefix, series in parts.items():
        columns.update({f"{prefix}_{name}": series.values[:, i] for i, name in enumerate(names)})
    return pd.DataFrame(columns)


def save_counterfactual_csv(
    results: Union[CounterfactualResult, List[Tuple[str, CounterfactualResult]]],
    path: PathLike,
) -> None:
    """Write one result, or panel results with a leading ``entity`` column."""
    if isinstance(results, CounterfactualResult):
        frame = counterfactual_frame(results)
    else:
        frame = pd.concat([counterfactual_frame(result, entity) for entity, result in results], ignore_index=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


__all__ = [
    "ResidualDiagnostics",
    "CounterfactualResult",
    "ljung_box",
    "residual_diagnostics",
    "counterfactual_trajectory",
    "counterfactual_panel",
    "counterfactual_frame",
    "save_counterfactual_csv",
]
