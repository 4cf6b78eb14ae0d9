"""Observational and interventional forecasts and causal-effect paths.

Forecast step ``k`` (``k = 1 .. h``) predicts ``X_{t+k}`` from a history
ending at ``t``.  An intervention with ``start = s`` is active from step
``s + 1`` onward, so ``start = 0`` acts on the first predicted step.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import DEFAULT_STABILITY_MARGIN, DEFAULT_Z_SCORE
from .core import VarModel, check_stability, companion_matrix, long_run_matrix, ma_coefficients, process_mean
from .errors import DomainError, ModelValidationError
from .intervene import Intervention, InterventionKind, intervened_model, intervened_stability
from .simulate import TimeSeries

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class Forecast:
    """Means and forecast-error covariances for steps ``1 .. h``.

    Attributes:
        horizon: Number of steps ``h``.
        means: ``h x d`` conditional means.
        covariances: ``h x d x d`` forecast-error covariances.
        origin: Time index of the last history row.
        labels: Component names.
        unstable: True when the dynamics in force are not stable, in which
            case divergent means are expected.
    """

    horizon: int
    means: np.ndarray
    covariances: np.ndarray
    origin: int = 0
    labels: Optional[Tuple[str, ...]] = None
    unstable: bool = False

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def variances(self) -> np.ndarray:
        return np.diagonal(self.covariances, axis1=1, axis2=2)

    def as_series(self) -> TimeSeries:
        return TimeSeries(self.means, self.origin + 1, self.labels)


@dataclass(frozen=True, eq=False)
class CausalEffectPath:
    """Causal effect over time.

    Row ``k`` of ``effects`` is the effect ``k`` steps after the
    intervention became active.  ``asymptote`` is the long-run effect,
    ``None`` when it does not exist.
    """

    horizon: int
    effects: np.ndarray
    asymptote: Optional[np.ndarray] = None
    kind: InterventionKind = InterventionKind.ADDITIVE
    labels: Optional[Tuple[str, ...]] = None

    def first_nonzero(self, component: int) -> Optional[int]:
        """First row with a non-zero effect on *component*, if any."""
        hits = np.flatnonzero(self.effects[:, component] != 0.0)
        return int(hits[0]) if hits.size else None


def _check_inputs(model: VarModel, history: TimeSeries, horizon: int) -> None:
    if history.dim != model.dim:
        raise ModelValidationError(f"history has dim {history.dim}, model '{model.name}' has dim {model.dim}")
    if history.length < model.lag:
        raise DomainError(
            f"forecast with '{model.name}' needs at least p={model.lag} history rows, got {history.length}"
        )
    if horizon < 1:
        raise DomainError(f"forecast horizon must be >= 1, got {horizon}")


def _mean_path(models: Sequence[VarModel], presample: np.ndarray) -> np.ndarray:
    """Means for a batch: ``presample`` is ``(n, p, d)``, one model per step."""
    n, p, d = presample.shape
    state = presample[:, ::-1, :].reshape(n, p * d)
    out = np.empty((n, len(models), d))
    for k, current in enumerate(models):
        x = current.intercept + state @ current.stacked_coeffs.T
        out[:, k] = x
        state = np.concatenate([x, state[:, : (p - 1) * d]], axis=1) if p > 1 else x
    return out


def _phi_covariances(model: VarModel, horizon: int) -> np.ndarray:
    """``Sigma_X(k) = sum_{i<k} Phi_i Sigma_u Phi_i'`` for ``k = 1 .. h``."""
    phis = ma_coefficients(model, horizon - 1).phis
    terms = phis @ model.noise_cov @ np.transpose(phis, (0, 2, 1))
    return np.cumsum(terms, axis=0)


def _switching_covariances(models: Sequence[VarModel]) -> np.ndarray:
    """Forecast-error covariances when the dynamics change along the horizon.

    Propagates the companion-form error covariance
    ``P_k = C_k P_{k-1} C_k' + E Sigma_k E'``.
    """
    d, p = models[0].dim, models[0].lag
    state_cov = np.zeros((d * p, d * p))
    out = np.empty((len(models), d, d))
    for k, current in enumerate(models):
        companion = companion_matrix(current)
        state_cov = companion @ state_cov @ companion.T
        state_cov[:d, :d] += current.noise_cov
        out[k] = (state_cov[:d, :d] + state_cov[:d, :d].T) / 2.0
    return out


def forecast(model: VarModel, history: TimeSeries, horizon: int) -> Forecast:
    """Optimal ``h``-step predictor and its error covariances.

    Example:
        >>> fc = forecast(VarModel.scalar(0.5), TimeSeries([[4.0]]), 2)
        >>> fc.means.ravel().tolist(), fc.covariances.ravel().tolist()
        ([2.0, 1.0], [1.0, 1.25])
    """
    _check_inputs(model, history, horizon)
    means = _mean_path([model] * horizon, history.tail(model.lag)[np.newaxis])[0]
    return Forecast(
        horizon=horizon,
        means=means,
        covariances=_phi_covariances(model, horizon),
        origin=history.end_index - 1,
        labels=model.labels or history.labels,
    )


def oracle_forecast(true_model: VarModel, history: TimeSeries, horizon: int) -> Forecast:
    """Forecast under the ground-truth generator; the benchmark reference."""
    return forecast(true_model, history, horizon)


def _step_models(model: VarModel, intervention: Intervention, horizon: int) -> List[VarModel]:
    if intervention.start < 0:
        raise DomainError(f"intervention start must be >= 0 relative to the forecast origin, got {intervention.start}")
    after = intervened_model(model, intervention)
    return [model if k < intervention.start else after for k in range(horizon)]


def forecast_intervened(
    model: VarModel,
    intervention: Intervention,
    history: TimeSeries,
    horizon: int,
    margin: float = DEFAULT_STABILITY_MARGIN,
) -> Forecast:
    """Forecast under *intervention*, active from step ``start + 1``.

    Additive interventions keep the observational covariances.  Forcing
    and ``do`` use the transformed dynamics and noise once active; if the
    transformed dynamics are unstable the forecast is still computed and
    flagged ``unstable``.
    """
    _check_inputs(model, history, horizon)
    if intervention.is_null:
        return forecast(model, history, horizon)
    models = _step_models(model, intervention, horizon)
    means = _mean_path(models, history.tail(model.lag)[np.newaxis])[0]
    unstable = False
    if intervention.kind is InterventionKind.ADDITIVE:
        covariances = _phi_covariances(model, horizon)
    else:
        unstable = not intervened_stability(model, intervention, margin).preserved
        if intervention.start == 0:
            covariances = _phi_covariances(models[0], horizon)
        elif intervention.start >= horizon:
            covariances = _phi_covariances(model, horizon)
        else:
            covariances = _switching_covariances(models)
    return Forecast(
        horizon=horizon,
        means=means,
        covariances=covariances,
        origin=history.end_index - 1,
        labels=model.labels or history.labels,
        unstable=unstable,
    )


def causal_effect_path(
    model: VarModel,
    intervention: Intervention,
    history: TimeSeries,
    horizon: int,
    margin: float = DEFAULT_STABILITY_MARGIN,
) -> CausalEffectPath:
    """Causal effect ``k = 0 .. h`` steps after the intervention starts.

    Additive interventions use the closed form ``sum_{l<=k} Phi_l F``,
    which does not depend on *history*.  Forcing and ``do`` take the
    difference of the interventional and observational forecasts with
    the intervention active from the first step.
    """
    _check_inputs(model, history, max(horizon, 1))
    labels = model.labels or history.labels
    if intervention.dim != model.dim:
        raise ModelValidationError(f"intervention has dim {intervention.dim}, model '{model.name}' has dim {model.dim}")
    stable = check_stability(model, margin).is_stable
    if intervention.kind is InterventionKind.ADDITIVE:
        effects = ma_coefficients(model, horizon).cumulative() @ intervention.force
        asymptote = long_run_matrix(model, margin) @ intervention.force if stable else None
        return CausalEffectPath(horizon, effects, asymptote, intervention.kind, labels)
    active = intervention.with_start(0)
    factual = forecast(model, history, horizon + 1).means
    intervened = forecast_intervened(model, active, history, horizon + 1, margin).means
    effects = intervened - factual
    asymptote = None
    after = intervened_model(model, active)
    if stable and check_stability(after, margin).is_stable:
        asymptote = process_mean(after, margin) - process_mean(model, margin)
    return CausalEffectPath(horizon, effects, asymptote, intervention.kind, labels)


def forecast_means_batch(
    model: VarModel,
    series: TimeSeries,
    origins: Sequence[int],
    horizon: int,
    intervention: Optional[Intervention] = None,
) -> np.ndarray:
    """Conditional means from many origins at once.

    Args:
        model: Forecasting model.
        series: Observed series.
        origins: Time indices of the last known row of each forecast.
        horizon: Steps per forecast.
        intervention: Optional intervention, ``start`` relative to each origin.

    Returns:
        ``(len(origins), h, d)`` array.
    """
    if horizon < 1:
        raise DomainError(f"forecast horizon must be >= 1, got {horizon}")
    p = model.lag
    rows = np.asarray(origins, dtype=int) - series.start_index
    if rows.size and (rows.min() < p - 1 or rows.max() >= series.length):
        raise DomainError(
            f"forecast origins must lie in [{series.start_index + p - 1}, {series.end_index - 1}] for a VAR({p})"
        )
    presample = np.stack([series.values[r - p + 1 : r + 1] for r in rows]) if rows.size else np.empty((0, p, model.dim))
    if intervention is None or intervention.is_null:
        models = [model] * horizon
    else:
        models = _step_models(model, intervention, horizon)
    return _mean_path(models, presample)


def confidence_bounds(fc: Forecast, z: float = DEFAULT_Z_SCORE) -> Tuple[np.ndarray, np.ndarray]:
    """``mean -/+ z * sqrt(diag Sigma_X(k))``."""
    half_width = z * np.sqrt(np.clip(fc.variances, 0.0, None))
    return fc.means - half_width, fc.means + half_width


def forecast_frame(fc: Forecast, z: Optional[float] = None) -> pd.DataFrame:
    """Table with columns ``k, mean_0.., var_0..`` (and bounds when *z* is given)."""
    columns = {"k": np.arange(1, fc.horizon + 1)}
    columns.update({f"mean_{i}": fc.means[:, i] for i in range(fc.dim)})
    columns.update({f"var_{i}": fc.variances[:, i] for i in range(fc.dim)})
    if z is not None:
        lower, upper = confidence_bounds(fc, z)
        columns.update({f"lower_{i}": lower[:, i] for i in range(fc.dim)})
        columns.update({f"upper_{i}": upper[:, i] for i in range(fc.dim)})
    return pd.DataFrame(columns)


def effect_frame(path: CausalEffectPath) -> pd.DataFrame:
    """Table with columns ``k, ce_0..``; one row per ``k = 0 .. h``."""
    columns = {"k": np.arange(path.horizon + 1)}
    columns.update({f"ce_{i}": path.effects[:, i] for i in range(path.effects.shape[1])})
    return pd.DataFrame(columns)


def save_forecast_csv(fc: Forecast, path: PathLike, z: Optional[float] = None) -> None:
    forecast_frame(fc, z).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def save_effect_csv(effect: CausalEffectPath, path: PathLike) -> None:
    effect_frame(effect).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


__all__ = [
    "Forecast",
    "CausalEffectPath",
    "forecast",
    "oracle_forecast",
    "forecast_intervened",
    "causal_effect_path",
    "forecast_means_batch",
    "confidence_bounds",
    "forecast_frame",
    "effect_frame",
    "save_forecast_csv",
    "save_effect_csv",
]
