"""Intervened models for additive, forcing and do interventions.

The transforms here are time-invariant model algebra.  When an
intervention starts is carried by :attr:`Intervention.start` and is
consumed by the simulation, forecasting and counterfactual code.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import DEFAULT_STABILITY_MARGIN
from .core import StabilityReport, VarModel, check_stability
from .errors import DomainError, ModelValidationError

logger = logging.getLogger(__name__)


class InterventionKind(str, Enum):
    ADDITIVE = "additive"
    FORCING = "forcing"
    DO = "do"


@dataclass(frozen=True, eq=False)
class Intervention:
    """An intervention on a ``d``-dimensional process.

    Attributes:
        kind: Additive shift, forcing toward a target, or hard ``do``.
        force: Length-``d`` vector.  Zero entries leave a component alone.
            For forcing it is the (nonnegative) strength; for ``do`` any
            non-zero entry marks the component as intervened.
        target: Length-``d`` target values, read where ``force`` is non-zero.
            Unused for additive interventions.
        start: Time step at which the intervention becomes active.
    """

    kind: InterventionKind
    force: np.ndarray
    target: Optional[np.ndarray] = None
    start: int = 0

    def __post_init__(self):
        kind = InterventionKind(self.kind)
        force = np.array(self.force, dtype=float)
        if force.ndim != 1 or not np.all(np.isfinite(force)):
            raise ModelValidationError("intervention force must be a finite vector")
        if kind is InterventionKind.FORCING and np.any(force < 0):
            raise DomainError("forcing strengths must be nonnegative: F is assumed positive on intervened components")
        target = None
        if kind is not InterventionKind.ADDITIVE:
            if self.target is None:
                raise ModelValidationError(f"a {kind.value} intervention needs a target vector")
            target = np.array(self.target, dtype=float)
            if target.shape != force.shape:
                raise ModelValidationError(f"target has shape {target.shape}, force has {force.shape}")
            if not np.all(np.isfinite(target[force != 0])):
                raise ModelValidationError("target must be finite on every intervened component")
            target = np.where(force != 0, target, 0.0)
            target.setflags(write=False)
        force.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "force", force)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "start", int(self.start))

    @property
    def dim(self) -> int:
        return self.force.shape[0]

    @property
    def components(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.force))

    @property
    def is_null(self) -> bool:
        return not np.any(self.force)

    def with_start(self, start: int) -> "Intervention":
        return Intervention(self.kind, self.force, self.target, start)

    @classmethod
    def additive(cls, force: Sequence[float], start: int = 0) -> "Intervention":
        return cls(InterventionKind.ADDITIVE, np.asarray(force, dtype=float), None, start)

    @classmethod
    def forcing(cls, force: Sequence[float], target: Sequence[float], start: int = 0) -> "Intervention":
        return cls(InterventionKind.FORCING, np.asarray(force, dtype=float), np.asarray(target, dtype=float), start)

    @classmethod
    def do(cls, dim: int, values: Mapping[int, float], start: int = 0) -> "Intervention":
        force = np.zeros(dim)
        target = np.zeros(dim)
        for component, value in values.items():
            force[component] = 1.0
            target[component] = value
        return cls(InterventionKind.DO, force, target, start)


@dataclass(frozen=True)
class InterventionStability:
    report: StabilityReport
    preserved: bool


def _check_dim(model: VarModel, vector: np.ndarray, what: str) -> np.ndarray:
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (model.dim,):
        raise ModelValidationError(f"{what} has shape {vector.shape}, model '{model.name}' has dim {model.dim}")
    return vector


def apply_additive(model: VarModel, force: Sequence[float]) -> VarModel:
    """Shift the intercept by *force*; dynamics and noise are unchanged."""
    force = _check_dim(model, force, "force")
    return model.replace(intercept=model.intercept + force)


def apply_forcing(model: VarModel, force: Sequence[float], target: Sequence[float]) -> VarModel:
    """Pull components toward *target* with strengths *force*.

    The intervened equation ``X_t = nu + sum B_k X_{t-k} + u_t + F*(target - X_t)``
    is solved for ``X_t`` by left-multiplying with ``M = (I + diag F)^{-1}``.
    """
    force = _check_dim(model, force, "force")
    target = _check_dim(model, target, "target")
    if np.any(force < 0):
        raise DomainError("forcing strengths must be nonnegative: F is assumed positive on intervened components")
    if not np.any(force):
        return model
    scale = 1.0 / (1.0 + force)
    pulled = np.where(force > 0, force * target, 0.0)
    return model.replace(
        intercept=scale * (model.intercept + pulled),
        coeffs=model.coeffs * scale[np.newaxis, :, np.newaxis],
        noise_cov=model.noise_cov * np.outer(scale, scale),
    )


def forcing_stability(
    model: VarModel,
    force: Sequence[float],
    margin: float = DEFAULT_STABILITY_MARGIN,
) -> InterventionStability:
    """Stability of the forced dynamics; targets do not matter here."""
    force = _check_dim(model, force, "force")
    forced = apply_forcing(model, force, np.zeros(model.dim))
    report = check_stability(forced, margin)
    return InterventionStability(report=report, preserved=report.is_stable)


def do_intervention(model: VarModel, component: int, value: float) -> VarModel:
    """Replace the equation of *component* by the constant *value*."""
    return do_components(model, {component: value})


def do_components(model: VarModel, values: Mapping[int, float]) -> VarModel:
    intercept = model.intercept.copy()
    coeffs = model.coeffs.copy()
    noise_cov = model.noise_cov.copy()
    for component, value in values.items():
        if not 0 <= component < model.dim:
            raise ModelValidationError(f"component {component} out of range for dim {model.dim}")
        intercept[component] = value
        coeffs[:, component, :] = 0.0
        noise_cov[component, :] = 0.0
        noise_cov[:, component] = 0.0
    return model.replace(intercept=intercept, coeffs=coeffs, noise_cov=noise_cov)


def intervened_model(model: VarModel, intervention: Intervention) -> VarModel:
    """The time-invariant model that governs the process once *intervention* is active."""
    if intervention.dim != model.dim:
        raise ModelValidationError(f"intervention has dim {intervention.dim}, model '{model.name}' has dim {model.dim}")
    if intervention.kind is InterventionKind.ADDITIVE:
        return apply_additive(model, intervention.force)
    if intervention.kind is InterventionKind.FORCING:
        return apply_forcing(model, intervention.force, intervention.target)
    return do_components(model, {i: float(intervention.target[i]) for i in intervention.components})


def intervened_stability(
    model: VarModel,
    intervention: Intervention,
    margin: float = DEFAULT_STABILITY_MARGIN,
) -> InterventionStability:
    """Stability verdict for any kind of intervention."""
    if intervention.kind is InterventionKind.ADDITIVE:
        report = check_stability(model, margin)
        return InterventionStability(report=report, preserved=True)
    report = check_stability(intervened_model(model, intervention), margin)
    if not report.is_stable:
        logger.warning(
            "Intervention on components %s makes '%s' unstable (spectral radius %.4g)",
            intervention.components,
            model.name,
            report.spectral_radius,
        )
    return InterventionStability(report=report, preserved=report.is_stable)


__all__ = [
    "InterventionKind",
    "Intervention",
    "InterventionStability",
    "apply_additive",
    "apply_forcing",
    "forcing_stability",
    "do_intervention",
    "do_components",
    "intervened_model",
    "intervened_stability",
]
