"""Canonical VAR representations and their linear-systems machinery.

Orientation convention
----------------------
All reduced-form matrices are stored *effect-row*: ``coeffs[k-1][j, i]``
is the coefficient of cause ``i`` at lag ``k`` in the equation of effect
``j``, so the process reads::

    X_t = intercept + sum_k coeffs[k-1] @ X_{t-k} + u_t,   u_t ~ N(0, noise_cov)

Structural models keep the *cause-row* layout in which published
coefficient lists are usually written (``lag_coeffs[k-1][i, j]`` is the
effect of ``i`` on ``j``).  :func:`svar_to_var` performs the transposition.
"""

import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import scipy.linalg

from .config import DEFAULT_CONDITION_LIMIT, DEFAULT_STABILITY_MARGIN
from .errors import DomainError, ModelValidationError, NumericalError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-10
PSD_TOLERANCE = 1e-10
CLUSTER_TOLERANCE = 1e-6


def _frozen(values, ndim: int, what: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise ModelValidationError(f"{what} must be {ndim}-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ModelValidationError(f"{what} contains non-finite entries")
    array.setflags(write=False)
    return array


def _check_covariance(cov: np.ndarray, dim: int, what: str) -> None:
    if cov.shape != (dim, dim):
        raise ModelValidationError(f"{what} must be {dim}x{dim}, got {cov.shape}")
    if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOLERANCE:
        raise ModelValidationError(f"{what} is not symmetric")
    if np.linalg.eigvalsh((cov + cov.T) / 2.0).min() < -PSD_TOLERANCE:
        raise ModelValidationError(f"{what} is not positive semidefinite")


def _as_lag_stack(coeffs, what: str) -> np.ndarray:
    stack = np.array(coeffs, dtype=float)
    if stack.ndim == 2:
        stack = stack[np.newaxis]
    return _frozen(stack, 3, what)


def _check_labels(labels: Optional[Sequence[str]], dim: int) -> Optional[Tuple[str, ...]]:
    if labels is None:
        return None
    labels = tuple(str(label) for label in labels)
    if len(labels) != dim:
        raise ModelValidationError(f"expected {dim} labels, got {len(labels)}")
    return labels


@dataclass(frozen=True, eq=False)
class VarModel:
    """Reduced-form VAR(p) in effect-row orientation.

    Attributes:
        intercept: Length-``d`` intercept vector.
        coeffs: Array of shape ``(p, d, d)``; ``coeffs[k-1]`` multiplies ``X_{t-k}``.
        noise_cov: Symmetric PSD ``d x d`` covariance of the white noise.
        labels: Optional component names.
        name: Free-form identifier used in log and error messages.
    """

    intercept: np.ndarray
    coeffs: np.ndarray
    noise_cov: np.ndarray
    labels: Optional[Tuple[str, ...]] = None
    name: str = "model"

    def __post_init__(self):
        intercept = _frozen(self.intercept, 1, "intercept")
        coeffs = _as_lag_stack(self.coeffs, "coeffs")
        dim = intercept.shape[0]
        if dim < 1:
            raise ModelValidationError("a VAR needs at least one component")
        if coeffs.shape[0] < 1 or coeffs.shape[1:] != (dim, dim):
            raise ModelValidationError(f"coeffs must have shape (p, {dim}, {dim}) with p >= 1, got {coeffs.shape}")
        noise_cov = _frozen(self.noise_cov, 2, "noise_cov")
        _check_covariance(noise_cov, dim, "noise_cov")
        object.__setattr__(self, "intercept", intercept)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "noise_cov", noise_cov)
        object.__setattr__(self, "labels", _check_labels(self.labels, dim))

    @property
    def dim(self) -> int:
        return self.intercept.shape[0]

    @property
    def lag(self) -> int:
        return self.coeffs.shape[0]

    @cached_property
    def stacked_coeffs(self) -> np.ndarray:
        """``[B_1 ... B_p]`` as one ``d x (d*p)`` matrix."""
        stacked = np.concatenate(list(self.coeffs), axis=1)
        stacked.setflags(write=False)
        return stacked

    def component_names(self) -> Tuple[str, ...]:
        return self.labels or tuple(f"x{i}" for i in range(self.dim))

    def replace(self, **changes) -> "VarModel":
        return replace(self, **changes)

    @classmethod
    def scalar(
        cls, *coefficients: float, intercept: float = 0.0, variance: float = 1.0, name: str = "scalar"
    ) -> "VarModel":
        """Build a one-dimensional AR(p) with the given lag coefficients."""
        coeffs = np.array(coefficients, dtype=float).reshape(-1, 1, 1)
        return cls(np.array([intercept]), coeffs, np.array([[variance]]), name=name)


@dataclass(frozen=True, eq=False)
class StructuralVarModel:
    """Structural VAR with acyclic instantaneous effects, cause-row orientation.

    ``instantaneous[i, j]`` is the contemporaneous effect of ``i`` on ``j``
    and ``lag_coeffs[k-1][i, j]`` the effect of ``i`` at lag ``k`` on ``j``.
    Structural shocks are mutually uncorrelated, so ``noise_cov`` is diagonal.
    """

    intercept: np.ndarray
    instantaneous: np.ndarray
    lag_coeffs: np.ndarray
    noise_cov: np.ndarray
    labels: Optional[Tuple[str, ...]] = None
    name: str = "svar"

    def __post_init__(self):
        intercept = _frozen(self.intercept, 1, "intercept")
        dim = intercept.shape[0]
        instantaneous = _frozen(self.instantaneous, 2, "instantaneous")
        lag_coeffs = _as_lag_stack(self.lag_coeffs, "lag_coeffs")
        noise_cov = _frozen(self.noise_cov, 2, "noise_cov")
        if instantaneous.shape != (dim, dim):
            raise ModelValidationError(f"instantaneous must be {dim}x{dim}, got {instantaneous.shape}")
        if lag_coeffs.shape[0] < 1 or lag_coeffs.shape[1:] != (dim, dim):
            raise ModelValidationError(f"lag_coeffs must have shape (p, {dim}, {dim}), got {lag_coeffs.shape}")
        if np.any(np.diag(instantaneous) != 0.0):
            raise ModelValidationError("instantaneous effects must have a zero diagonal")
        if noise_cov.shape != (dim, dim) or np.any(noise_cov != np.diag(np.diag(noise_cov))):
            raise ModelValidationError("structural noise_cov must be a diagonal matrix")
        if np.any(np.diag(noise_cov) < 0.0):
            raise ModelValidationError("structural shock variances must be nonnegative")
        if not nx.is_directed_acyclic_graph(_instantaneous_digraph(instantaneous)):
            raise DomainError(f"instantaneous effects of '{self.name}' are cyclic: no triangular ordering exists")
        object.__setattr__(self, "intercept", intercept)
        object.__setattr__(self, "instantaneous", instantaneous)
        object.__setattr__(self, "lag_coeffs", lag_coeffs)
        object.__setattr__(self, "noise_cov", noise_cov)
        object.__setattr__(self, "labels", _check_labels(self.labels, dim))

    @property
    def dim(self) -> int:
        return self.intercept.shape[0]

    @property
    def lag(self) -> int:
        return self.lag_coeffs.shape[0]

    def causal_order(self) -> Tuple[int, ...]:
        """A topological order of the instantaneous effects."""
        return tuple(nx.lexicographical_topological_sort(_instantaneous_digraph(self.instantaneous)))


def _instantaneous_digraph(instantaneous: np.ndarray) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(instantaneous.shape[0]))
    graph.add_edges_from(zip(*np.nonzero(instantaneous)))
    return graph


@dataclass(frozen=True)
class StabilityReport:
    """Companion-eigenvalue summary of a VAR.

    ``root_moduli`` are the moduli of the companion eigenvalues, sorted
    ascending; the roots of the determinantal polynomial are their
    reciprocals.
    """

    spectral_radius: float
    is_stable: bool
    root_moduli: Tuple[float, ...]
    margin: float = DEFAULT_STABILITY_MARGIN


@dataclass(frozen=True, eq=False)
class MaCoefficients:
    """Moving-average (impulse-response) matrices ``Phi_0 .. Phi_H``."""

    horizon: int
    phis: np.ndarray

    def cumulative(self) -> np.ndarray:
        """Partial sums ``sum_{l<=k} Phi_l`` for ``k = 0..H``."""
        return np.cumsum(self.phis, axis=0)


@dataclass(frozen=True, eq=False)
class LongRunReport:
    matrix: np.ndarray
    condition_number: float
    ill_conditioned: bool


def companion_matrix(model: VarModel) -> np.ndarray:
    """Return the ``(d*p) x (d*p)`` companion matrix of *model*.

    The top block row is ``[B_1 ... B_p]``, identity blocks sit on the
    block subdiagonal.

    Example:
        >>> companion_matrix(VarModel.scalar(0.2, 0.3))
        array([[0.2, 0.3],
               [1. , 0. ]])
    """
    d, p = model.dim, model.lag
    companion = np.zeros((d * p, d * p))
    companion[:d, :] = model.stacked_coeffs
    if p > 1:
        companion[d:, :-d] = np.eye(d * (p - 1))
    return companion


def _eigenvalue_moduli(eigenvalues: np.ndarray) -> np.ndarray:
    """Sorted moduli, each cluster of nearly equal eigenvalues replaced by its geometric mean.

    A defective multiple eigenvalue is only resolved to about the square
    root of machine precision, while the product over its cluster is not.
    """
    moduli = np.abs(eigenvalues)
    remaining = list(range(len(eigenvalues)))
    while remaining:
        first = remaining.pop(0)
        cluster = [first] + [k for k in remaining if abs(eigenvalues[k] - eigenvalues[first]) < CLUSTER_TOLERANCE]
        if len(cluster) > 1:
            remaining = [k for k in remaining if k not in cluster]
            moduli[cluster] = np.prod(moduli[cluster]) ** (1.0 / len(cluster))
    return np.sort(moduli)


def check_stability(model: VarModel, margin: float = DEFAULT_STABILITY_MARGIN) -> StabilityReport:
    """Decide stability from the companion eigenvalues.

    Args:
        model: The VAR to analyse.
        margin: The model is stable iff the spectral radius is below ``1 - margin``.

    Raises:
        NumericalError: If the eigenvalue iteration does not converge.
    """
    if margin < 0:
        raise DomainError(f"stability margin must be nonnegative, got {margin}")
    try:
        eigenvalues = np.linalg.eigvals(companion_matrix(model))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration did not converge for '{model.name}': {exc}") from exc
    moduli = _eigenvalue_moduli(eigenvalues)
    radius = float(moduli[-1])
    return StabilityReport(
        spectral_radius=radius,
        is_stable=radius < 1.0 - margin,
        root_moduli=tuple(float(m) for m in moduli),
        margin=margin,
    )


def ma_coefficients(model: VarModel, horizon: int) -> MaCoefficients:
    """Moving-average matrices by the recursion ``Phi_i = sum_j Phi_{i-j} B_j``."""
    if horizon < 0:
        raise DomainError(f"horizon must be nonnegative, got {horizon}")
    d, p = model.dim, model.lag
    phis = np.zeros((horizon + 1, d, d))
    phis[0] = np.eye(d)
    for i in range(1, horizon + 1):
        for j in range(1, min(i, p) + 1):
            phis[i] += phis[i - j] @ model.coeffs[j - 1]
    phis.setflags(write=False)
    return MaCoefficients(horizon=horizon, phis=phis)


def long_run_report(
    model: VarModel,
    margin: float = DEFAULT_STABILITY_MARGIN,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> LongRunReport:
    """Compute ``(I - B_1 - ... - B_p)^{-1}`` together with its conditioning.

    Raises:
        DomainError: If *model* is not stable.
    """
    report = check_stability(model, margin)
    if not report.is_stable:
        raise DomainError(
            f"long-run matrix undefined for unstable model '{model.name}' "
            f"(spectral radius {report.spectral_radius:.6g})"
        )
    lhs = np.eye(model.dim) - model.coeffs.sum(axis=0)
    condition = float(np.linalg.cond(lhs))
    ill_conditioned = condition > condition_limit
    if ill_conditioned:
        logger.warning("Long-run matrix of '%s' is ill-conditioned (condition number %.3g)", model.name, condition)
    matrix = scipy.linalg.solve(lhs, np.eye(model.dim))
    matrix.setflags(write=False)
    return LongRunReport(matrix=matrix, condition_number=condition, ill_conditioned=ill_conditioned)


def long_run_matrix(model: VarModel, margin: float = DEFAULT_STABILITY_MARGIN) -> np.ndarray:
    """``Phi(1)``, the sum of all moving-average matrices."""
    return long_run_report(model, margin).matrix


def process_mean(model: VarModel, margin: float = DEFAULT_STABILITY_MARGIN) -> np.ndarray:
    """Unconditional mean ``mu = Phi(1) nu`` of a stable VAR."""
    return long_run_matrix(model, margin) @ model.intercept


def stationary_covariance(model: VarModel, margin: float = DEFAULT_STABILITY_MARGIN) -> np.ndarray:
    """Lag-0 covariance of a stable VAR.

    Solves the discrete Lyapunov equation ``G = F G F' + Q`` for the
    companion matrix ``F`` and returns the top-left ``d x d`` block.
    """
    report = check_stability(model, margin)
    if not report.is_stable:
        raise DomainError(f"stationary covariance undefined for unstable model '{model.name}'")
    d, p = model.dim, model.lag
    q = np.zeros((d * p, d * p))
    q[:d, :d] = model.noise_cov
    gamma = scipy.linalg.solve_discrete_lyapunov(companion_matrix(model), q)[:d, :d]
    return (gamma + gamma.T) / 2.0


def svar_to_var(svar: StructuralVarModel) -> VarModel:
    """Reduce a structural VAR to its reduced form.

    With ``A0 = I - C'`` the reduced form has ``B_k = A0^{-1} L_k'``,
    intercept ``A0^{-1} nu`` and noise covariance ``A0^{-1} S A0^{-T}``.
    """
    if not nx.is_directed_acyclic_graph(_instantaneous_digraph(svar.instantaneous)):
        raise DomainError(f"cannot reduce '{svar.name}': instantaneous effects are cyclic")
    a0 = np.eye(svar.dim) - svar.instantaneous.T
    a0_inv = scipy.linalg.solve(a0, np.eye(svar.dim))
    coeffs = np.stack([a0_inv @ lag.T for lag in svar.lag_coeffs])
    noise_cov = a0_inv @ svar.noise_cov @ a0_inv.T
    return VarModel(
        intercept=a0_inv @ svar.intercept,
        coeffs=coeffs,
        noise_cov=(noise_cov + noise_cov.T) / 2.0,
        labels=svar.labels,
        name=svar.name,
    )


__all__ = [
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
]
