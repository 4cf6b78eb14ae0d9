"""Least-squares estimation of VAR models.

Every equation is solved on its own over the regressors
``[1, X_{t-1}, ..., X_{t-p}]``.  A causal graph restricts the lag columns
an equation may use; self-loops are always allowed.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from .config import DEFAULT_CONDITION_LIMIT
from .core import VarModel
from .errors import DomainError, EstimationError, ModelValidationError
from .graph import CausalGraph
from .simulate import PanelSeries, TimeSeries

logger = logging.getLogger(__name__)

Data = Union[TimeSeries, PanelSeries]
Criterion = Literal["aic", "bic"]


@dataclass(frozen=True)
class FitOptions:
    """Options of :func:`fit`.

    Attributes:
        lag: VAR order ``p``.
        graph_constraint: Allowed ``cause -> effect`` edges.  Lag
            coefficients outside the graph are fixed at zero.
        ridge: Nonnegative ridge penalty on the lag coefficients.
        include_intercept: Whether to estimate an intercept.
        condition_limit: Largest accepted condition number of a design.
    """

    lag: int = 1
    graph_constraint: Optional[CausalGraph] = None
    ridge: float = 0.0
    include_intercept: bool = True
    condition_limit: float = DEFAULT_CONDITION_LIMIT

    def __post_init__(self):
        if self.lag < 1:
            raise ModelValidationError(f"lag must be >= 1, got {self.lag}")
        if self.ridge < 0:
            raise ModelValidationError(f"ridge must be nonnegative, got {self.ridge}")


@dataclass(frozen=True, eq=False)
class FitReport:
    """Result of :func:`fit`.

    ``residuals`` concatenates the per-entity residuals in panel order; for
    a single series it keeps the time index of the rows it belongs to.
    """

    model: VarModel
    residuals: TimeSeries
    aic: float
    bic: float
    n_effective: int
    n_parameters: int

    @property
    def lag(self) -> int:
        return self.model.lag


def _entities(data: Data) -> List[TimeSeries]:
    if isinstance(data, PanelSeries):
        return data.series()
    return [data]


def _lagged(values: np.ndarray, p: int) -> np.ndarray:
    """Rows ``[X_{t-1}, ..., X_{t-p}]`` for ``t = p .. T-1``."""
    n = values.shape[0] - p
    return np.concatenate([values[p - k : p - k + n] for k in range(1, p + 1)], axis=1)


def residuals(model: VarModel, data: TimeSeries) -> TimeSeries:
    """One-step prediction errors ``X_t - nu - sum B_k X_{t-k}``, ``t = p .. T-1``."""
    if data.dim != model.dim:
        raise ModelValidationError(f"data has dim {data.dim}, model '{model.name}' has dim {model.dim}")
    p = model.lag
    if data.length <= p:
        raise DomainError(f"residuals need more than {p} rows, got {data.length}")
    values = data.values
    errors = values[p:] - model.intercept - _lagged(values, p) @ model.stacked_coeffs.T
    return TimeSeries(errors, data.start_index + p, model.labels or data.labels)


def _design(series: Sequence[TimeSeries], p: int, include_intercept: bool) -> Tuple[np.ndarray, np.ndarray]:
    blocks, targets = [], []
    for item in series:
        lagged = _lagged(item.values, p)
        if include_intercept:
            lagged = np.concatenate([np.ones((lagged.shape[0], 1)), lagged], axis=1)
        blocks.append(lagged)
        targets.append(item.values[p:])
    return np.concatenate(blocks), np.concatenate(targets)


def _allowed_columns(options: FitOptions, dim: int) -> np.ndarray:
    """Boolean ``d x (offset + d*p)`` mask of the regressors each equation may use."""
    if options.graph_constraint is None:
        mask = np.ones((dim, dim), dtype=bool)
    else:
        if options.graph_constraint.dim != dim:
            raise ModelValidationError(f"graph has dim {options.graph_constraint.dim}, data has dim {dim}")
        mask = options.graph_constraint.allowed_mask(self_loops=True)
    columns = np.tile(mask, (1, options.lag))
    if options.include_intercept:
        columns = np.concatenate([np.ones((dim, 1), dtype=bool), columns], axis=1)
    return columns


def _solve_equation(z: np.ndarray, y: np.ndarray, ridge: float, n_unpenalised: int, limit: float, equation: int):
    if ridge > 0:
        penalty = np.sqrt(ridge) * np.eye(z.shape[1])[n_unpenalised:]
        z = np.concatenate([z, penalty])
        y = np.concatenate([y, np.zeros(penalty.shape[0])])
    if z.shape[1] == 0:
        return np.empty(0)
    condition = np.linalg.cond(z)
    if not np.isfinite(condition) or condition > limit:
        raise EstimationError(
            f"design of equation {equation} is rank deficient (condition number {condition:.3g} > {limit:.3g}); "
            "consider a ridge penalty or a smaller lag"
        )
    solution, *_ = np.linalg.lstsq(z, y, rcond=None)
    return solution


def _information_criteria(errors: np.ndarray, n_parameters: int) -> Tuple[float, float]:
    n = errors.shape[0]
    sign, logdet = np.linalg.slogdet(errors.T @ errors / n)
    logdet = logdet if sign > 0 else -np.inf
    return float(logdet + 2.0 * n_parameters / n), float(logdet + n_parameters * np.log(n) / n)


def fit(data: Data, options: Optional[FitOptions] = None, name: str = "fitted") -> FitReport:
    """Estimate a VAR(p) from a series or a panel.

    Panel entities are stacked after each one drops its own first ``p``
    rows.  The noise covariance uses the denominator
    ``max(n_effective - (d*p + 1), 1)``.

    Args:
        data: Observed series or panel.
        options: Estimation options; ``FitOptions()`` fits a VAR(1).
        name: Name given to the fitted model.

    Raises:
        EstimationError: If there are fewer effective rows than free
            parameters in some equation, or a design is rank deficient.
    """
    options = options or FitOptions()
    entities = _entities(data)
    if not entities:
        raise EstimationError("cannot fit a VAR to an empty panel")
    d, p = entities[0].dim, options.lag
    n_effective = sum(max(item.length - p, 0) for item in entities)
    columns = _allowed_columns(options, d)
    most_free = int(columns.sum(axis=1).max())
    if n_effective <= most_free:
        per_series = -(-(most_free + 1) // len(entities)) + p
        raise EstimationError(
            f"fit of a VAR({p}) on {d} components needs at least {most_free + 1} effective rows "
            f"(about {per_series} samples per series), got {n_effective}"
        )
    usable = [item for item in entities if item.length > p]
    z, y = _design(usable, p, options.include_intercept)
    offset = 1 if options.include_intercept else 0
    solution = np.zeros((d, offset + d * p))
    for j in range(d):
        allowed = columns[j]
        solution[j, allowed] = _solve_equation(
            z[:, allowed], y[:, j], options.ridge, offset, options.condition_limit, j
        )
    intercept = solution[:, 0] if options.include_intercept else np.zeros(d)
    coeffs = solution[:, offset:].reshape(d, p, d).transpose(1, 0, 2)

    labels = entities[0].labels
    provisional = VarModel(intercept, coeffs, np.zeros((d, d)), labels, name)
    parts = [residuals(provisional, item) for item in usable]
    errors = np.concatenate([part.values for part in parts])
    dof = max(n_effective - (d * p + offset), 1)
    noise_cov = errors.T @ errors / dof
    model = provisional.replace(noise_cov=(noise_cov + noise_cov.T) / 2.0)
    n_parameters = int(columns.sum())
    aic, bic = _information_criteria(errors, n_parameters)
    start = parts[0].start_index if len(parts) == 1 else p
    logger.info("Fitted VAR(%d) '%s' on %d effective rows (%d parameters)", p, name, n_effective, n_parameters)
    return FitReport(
        model=model,
        residuals=TimeSeries(errors, start, labels),
        aic=aic,
        bic=bic,
        n_effective=n_effective,
        n_parameters=n_parameters,
    )


def _trimmed(data: Data, drop: int) -> Data:
    if drop == 0:
        return data
    if isinstance(data, PanelSeries):
        return PanelSeries(
            tuple((entity_id, item.window(item.start_index + drop, item.end_index)) for entity_id, item in data)
        )
    return data.window(data.start_index + drop, data.end_index)


def lag_criteria(data: Data, p_max: int, options: Optional[FitOptions] = None) -> Dict[int, Tuple[float, float]]:
    """``{p: (aic, bic)}`` for ``p = 1 .. p_max`` on the common sample ``t >= p_max``."""
    if p_max < 1:
        raise DomainError(f"p_max must be >= 1, got {p_max}")
    options = options or FitOptions()
    table = {}
    for p in range(1, p_max + 1):
        report = fit(_trimmed(data, p_max - p), replace(options, lag=p))
        table[p] = (report.aic, report.bic)
        logger.debug("Lag %d: aic=%.6g bic=%.6g", p, report.aic, report.bic)
    return table


def select_lag(data: Data, p_max: int, criterion: Criterion = "bic", options: Optional[FitOptions] = None) -> int:
    """The order in ``[1, p_max]`` minimising *criterion*; ties go to the smaller order."""
    if criterion not in ("aic", "bic"):
        raise DomainError(f"unknown information criterion '{criterion}', expected 'aic' or 'bic'")
    position = 0 if criterion == "aic" else 1
    table = lag_criteria(data, p_max, options)
    return min(table, key=lambda p: (table[p][position], p))


__all__ = ["FitOptions", "FitReport", "fit", "residuals", "lag_criteria", "select_lag"]
