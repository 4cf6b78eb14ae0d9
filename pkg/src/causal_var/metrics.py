"""Point-forecast error metrics."""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ModelValidationError
from .simulate import TimeSeries

ArrayLike = Union[TimeSeries, np.ndarray, Sequence]


@dataclass(frozen=True)
class ComponentMetrics:
    component: int
    mae: float
    rmse: float
    smape: float


@dataclass(frozen=True)
class MetricReport:
    """MAE, RMSE and SMAPE (in percent, ``0 .. 200``) over the target components."""

    mae: float
    rmse: float
    smape: float
    target_components: Tuple[int, ...]
    per_component: Optional[Tuple[ComponentMetrics, ...]] = None


def _matrix(values: ArrayLike) -> np.ndarray:
    array = values.values if isinstance(values, TimeSeries) else np.asarray(values, dtype=float)
    if array.ndim == 1:
        array = array[:, np.newaxis]
    return array


def smape_terms(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """``2|p - y| / (|p| + |y|)`` elementwise, with ``0/0`` taken as 0."""
    denom = np.abs(pred) + np.abs(truth)
    return np.divide(2.0 * np.abs(pred - truth), denom, out=np.zeros_like(denom), where=denom > 0)


def metrics(pred: ArrayLike, truth: ArrayLike, targets: Optional[Sequence[int]] = None) -> MetricReport:
    """Score *pred* against *truth* on the *targets* columns (all by default).

    Example:
        >>> metrics([[1.0], [3.0]], [[1.0], [1.0]]).smape
        50.0
    """
    pred, truth = _matrix(pred), _matrix(truth)
    if pred.shape != truth.shape:
        raise ModelValidationError(f"prediction shape {pred.shape} differs from truth shape {truth.shape}")
    targets = tuple(range(pred.shape[1])) if targets is None else tuple(int(i) for i in targets)
    if any(not 0 <= i < pred.shape[1] for i in targets):
        raise ModelValidationError(f"target components {targets} out of range for {pred.shape[1]} columns")
    if pred.shape[0] == 0 or not targets:
        raise ModelValidationError("cannot score an empty prediction")
    p, y = pred[:, targets], truth[:, targets]
    errors = p - y
    terms = smape_terms(p, y)
    per_component = tuple(
        ComponentMetrics(
            component=i,
            mae=float(np.mean(np.abs(errors[:, k]))),
            rmse=float(np.sqrt(np.mean(errors[:, k] ** 2))),
            smape=float(100.0 * np.mean(terms[:, k])),
        )
        for k, i in enumerate(targets)
    )
    return MetricReport(
        mae=float(np.mean(np.abs(errors))),
        rmse=float(np.sqrt(np.mean(errors**2))),
        smape=float(100.0 * np.mean(terms)),
        target_components=targets,
        per_component=per_component,
    )


def mean_and_sd(values: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and standard deviation (``ddof=1``, 0 for a single value)."""
    array = np.asarray(values, dtype=float)
    if array.size == 0:
        return float("nan"), float("nan")
    sd = float(np.std(array, ddof=1)) if array.size > 1 else 0.0
    return float(np.mean(array)), sd


__all__ = ["ComponentMetrics", "MetricReport", "metrics", "smape_terms", "mean_and_sd"]
