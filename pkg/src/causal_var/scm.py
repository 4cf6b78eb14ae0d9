"""The equilibrium structural causal model of a stable VAR.

A stable VAR(p) maps to the linear SCM ``X = A X + u`` (plus the
process mean) with ``A = B_1 + ... + B_p`` and ``u ~ N(0, Sigma_u)``.
The solution law of this SCM is the limit law of the long-run normalised
mean ``Z_t = mu + t^{-1/2} sum_{i<=t} (X_i - mu)``, before and after
interventions.  :func:`verify_commutation` checks this by simulation.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .config import DEFAULT_CONDITION_LIMIT, DEFAULT_OVERFLOW_BOUND, DEFAULT_STABILITY_MARGIN
from .core import VarModel, check_stability, process_mean
from .errors import DomainError, ModelValidationError, NumericalError
from .intervene import Intervention, InterventionKind, intervened_model
from .simulate import propagate, replicate_shocks

logger = logging.getLogger(__name__)

COMMUTATION_CHUNK = 64


def _square(values, dim: Optional[int], what: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != 2 or array.shape[0] != array.shape[1] or (dim is not None and array.shape[0] != dim):
        raise ModelValidationError(f"{what} must be a square {dim or 'd'}x{dim or 'd'} matrix, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ModelValidationError(f"{what} contains non-finite entries")
    array.setflags(write=False)
    return array


def _check_psd(cov: np.ndarray, what: str) -> None:
    if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-10:
        raise ModelValidationError(f"{what} is not symmetric")
    if np.linalg.eigvalsh((cov + cov.T) / 2.0).min(initial=0.0) < -1e-10:
        raise ModelValidationError(f"{what} is not positive semidefinite")


def _solve_equilibrium(coeff: np.ndarray, rhs: np.ndarray, limit: float, what: str) -> np.ndarray:
    lhs = np.eye(coeff.shape[0]) - coeff
    condition = np.linalg.cond(lhs)
    if not np.isfinite(condition) or condition >= limit:
        raise NumericalError(f"{what}: I - A is singular or ill-conditioned (condition number {condition:.3g})")
    return scipy.linalg.solve(lhs, rhs)


@dataclass(frozen=True, eq=False)
class GaussianDist:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = _square(self.cov, mean.shape[0], "cov")
        _check_psd(cov, "cov")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class LinearScm:
    """Linear SCM ``X = coeff @ X + intercept + u``, ``u ~ N(0, exo_cov)``.

    The intercept is not stored: the SCM is translated so that its
    solution has mean ``mean``, and ``intercept = (I - coeff) @ mean``.

    Attributes:
        coeff: Effect-row ``d x d`` matrix.
        exo_cov: Covariance of the exogenous terms.
        mean: Mean of the solution.
        labels: Optional component names.
    """

    coeff: np.ndarray
    exo_cov: np.ndarray
    mean: np.ndarray
    labels: Optional[Tuple[str, ...]] = None
    condition_limit: float = DEFAULT_CONDITION_LIMIT

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        if mean.ndim != 1:
            raise ModelValidationError(f"mean must be a vector, got shape {mean.shape}")
        coeff = _square(self.coeff, mean.shape[0], "coeff")
        exo_cov = _square(self.exo_cov, mean.shape[0], "exo_cov")
        _check_psd(exo_cov, "exo_cov")
        condition = np.linalg.cond(np.eye(mean.shape[0]) - coeff)
        if not np.isfinite(condition) or condition >= self.condition_limit:
            raise NumericalError(f"I - coeff is singular or ill-conditioned (condition number {condition:.3g})")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "coeff", coeff)
        object.__setattr__(self, "exo_cov", exo_cov)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def intercept(self) -> np.ndarray:
        return (np.eye(self.dim) - self.coeff) @ self.mean


def to_equilibrium_scm(model: VarModel, margin: float = DEFAULT_STABILITY_MARGIN) -> LinearScm:
    """Equilibrium SCM of a stable VAR: ``coeff = sum B_k``, ``exo_cov = Sigma_u``.

    Raises:
        DomainError: If *model* is not stable.
    """
    report = check_stability(model, margin)
    if not report.is_stable:
        raise DomainError(
            f"equilibrium SCM undefined for unstable model '{model.name}' "
            f"(spectral radius {report.spectral_radius:.6g})"
        )
    return LinearScm(
        coeff=model.coeffs.sum(axis=0),
        exo_cov=model.noise_cov,
        mean=process_mean(model, margin),
        labels=model.labels,
    )


def scm_solution(scm: LinearScm) -> GaussianDist:
    """Law of the solution: ``N(mean, (I-A)^{-1} Sigma (I-A)^{-T})``."""
    inverse = _solve_equilibrium(scm.coeff, np.eye(scm.dim), scm.condition_limit, "scm_solution")
    cov = inverse @ scm.exo_cov @ inverse.T
    return GaussianDist(scm.mean, (cov + cov.T) / 2.0)


def scm_intervene(scm: LinearScm, intervention: Intervention) -> LinearScm:
    """The SCM after *intervention*.

    Additive shifts move the mean by ``(I-A)^{-1} F``.  Forcing solves
    ``(I - A + diag F) X = nu + F * target + u`` and renormalises to the
    form ``X = M A X + M(...) + M u`` with ``M = (I + diag F)^{-1}``.
    ``do`` replaces the intervened equations by constants.

    Raises:
        NumericalError: If the intervened ``I - A`` is singular.
    """
    if intervention.dim != scm.dim:
        raise ModelValidationError(f"intervention has dim {intervention.dim}, SCM has dim {scm.dim}")
    if intervention.is_null:
        return scm
    intercept = scm.intercept
    kind = intervention.kind
    if kind is InterventionKind.ADDITIVE:
        coeff, exo_cov = scm.coeff, scm.exo_cov
        intercept = intercept + intervention.force
    elif kind is InterventionKind.FORCING:
        scale = 1.0 / (1.0 + intervention.force)
        coeff = scm.coeff * scale[:, np.newaxis]
        exo_cov = scm.exo_cov * np.outer(scale, scale)
        intercept = scale * (intercept + intervention.force * intervention.target)
    else:
        coeff, exo_cov, intercept = scm.coeff.copy(), scm.exo_cov.copy(), intercept.copy()
        for i in intervention.components:
            coeff[i, :] = 0.0
            exo_cov[i, :] = 0.0
            exo_cov[:, i] = 0.0
            intercept[i] = intervention.target[i]
    mean = _solve_equilibrium(coeff, intercept, scm.condition_limit, f"{kind.value} intervention on the SCM")
    return LinearScm(coeff, exo_cov, mean, scm.labels, scm.condition_limit)


@dataclass(frozen=True, eq=False)
class CommutationReport:
    """Monte Carlo comparison of the two routes around the commutation square.

    Attributes:
        max_mean_gap: Largest absolute gap between empirical and SCM means.
        max_cov_gap_rel: Relative Frobenius gap of the covariances.
        mean_standard_errors: Monte Carlo standard error of each empirical mean.
        empirical: Law estimated from the normalised means ``Z_T``.
        predicted: Solution law of the intervened SCM.
        replicates: Number of simulated paths.
        length: Steps per path.
    """

    max_mean_gap: float
    max_cov_gap_rel: float
    mean_standard_errors: np.ndarray
    empirical: GaussianDist
    predicted: GaussianDist
    replicates: int
    length: int

    @property
    def max_mean_gap_in_se(self) -> float:
        """Largest mean gap measured in Monte Carlo standard errors."""
        gaps = np.abs(self.empirical.mean - self.predicted.mean)
        se = self.mean_standard_errors
        scaled = np.where(se > 0, gaps / np.where(se > 0, se, 1.0), np.where(gaps > 0, np.inf, 0.0))
        return float(scaled.max(initial=0.0))


def _normalised_sums(model: VarModel, centre: np.ndarray, length: int, seed: int, replicates: range, bound: float):
    presample = np.broadcast_to(np.tile(centre, (model.lag, 1)), (len(replicates), model.lag, model.dim))
    shocks = replicate_shocks(model, seed, [f"commutation/{r}" for r in replicates], length)
    paths = propagate(model, presample, shocks, bound)
    return centre + (paths - centre).sum(axis=1) / np.sqrt(length)


def verify_commutation(
    model: VarModel,
    intervention: Intervention,
    replicates: int = 5000,
    length: int = 4000,
    seed: int = 0,
    workers: int = 1,
    margin: float = DEFAULT_STABILITY_MARGIN,
    overflow_bound: float = DEFAULT_OVERFLOW_BOUND,
) -> CommutationReport:
    """Compare the simulated long-run law with the intervened SCM solution.

    Route A simulates the intervened process from its own mean and forms
    ``Z_T`` for every replicate.  Route B intervenes on the equilibrium
    SCM and solves it.

    Raises:
        DomainError: If *model* or the intervened dynamics are unstable.
    """
    if replicates < 2 or length < 1:
        raise DomainError(f"need at least 2 replicates and 1 step, got {replicates} x {length}")
    scm = to_equilibrium_scm(model, margin)
    after = intervened_model(model, intervention)
    report = check_stability(after, margin)
    if not report.is_stable:
        raise DomainError(
            f"intervened dynamics of '{model.name}' are unstable (spectral radius {report.spectral_radius:.6g}); "
            "check forcing_stability before verifying"
        )
    centre = process_mean(after, margin)
    chunks = [range(lo, min(lo + COMMUTATION_CHUNK, replicates)) for lo in range(0, replicates, COMMUTATION_CHUNK)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(lambda c: _normalised_sums(after, centre, length, seed, c, overflow_bound), chunks))
    z = np.concatenate(parts)
    empirical_cov = np.atleast_2d(np.cov(z, rowvar=False))
    empirical = GaussianDist(z.mean(axis=0), (empirical_cov + empirical_cov.T) / 2.0)
    predicted = scm_solution(scm_intervene(scm, intervention))
    norm = np.linalg.norm(predicted.cov)
    cov_gap = np.linalg.norm(empirical.cov - predicted.cov)
    result = CommutationReport(
        max_mean_gap=float(np.max(np.abs(empirical.mean - predicted.mean))),
        max_cov_gap_rel=float(cov_gap / norm if norm > 0 else cov_gap),
        mean_standard_errors=np.sqrt(np.diag(empirical.cov) / replicates),
        empirical=empirical,
        predicted=predicted,
        replicates=replicates,
        length=length,
    )
    logger.info(
        "Commutation check on '%s' (%s): mean gap %.3g (%.2f se), covariance gap %.3g",
        model.name,
        intervention.kind.value,
        result.max_mean_gap,
        result.max_mean_gap_in_se,
        result.max_cov_gap_rel,
    )
    return result


__all__ = [
    "GaussianDist",
    "LinearScm",
    "CommutationReport",
    "to_equilibrium_scm",
    "scm_solution",
    "scm_intervene",
    "verify_commutation",
]
