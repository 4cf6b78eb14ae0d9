"""Seeded trajectory generation for VAR processes, with and without interventions.

Randomness comes from counter-based Philox generators.  Every trajectory
owns a substream derived from ``(seed, key)`` where the key names the
series, the panel entity or the Monte Carlo replicate, so results do not
depend on how work is scheduled across threads.
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import DEFAULT_BURN_IN, DEFAULT_OVERFLOW_BOUND
from .core import VarModel, check_stability, process_mean
from .errors import DomainError, ModelValidationError, SimulationOverflowError
from .intervene import Intervention, InterventionKind, intervened_model

logger = logging.getLogger(__name__)

MAX_SEED = 2**64
CHUNK_PATHS = 256


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A realised trajectory.

    Attributes:
        values: ``T x d`` matrix, one row per time step.
        start_index: Time index of the first row.
        labels: Optional component names.
    """

    values: np.ndarray
    start_index: int = 0
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ModelValidationError(f"series values must be a T x d matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ModelValidationError("series values contain non-finite entries")
        if self.labels is not None and len(self.labels) != values.shape[1]:
            raise ModelValidationError(f"expected {values.shape[1]} labels, got {len(self.labels)}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "start_index", int(self.start_index))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def end_index(self) -> int:
        """One past the last time index."""
        return self.start_index + self.length

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.start_index, self.end_index)

    def window(self, start: int, stop: int) -> "TimeSeries":
        """Rows with time index in ``[start, stop)``."""
        if start < self.start_index or stop > self.end_index or start > stop:
            raise DomainError(f"window [{start}, {stop}) outside series range [{self.start_index}, {self.end_index})")
        lo = start - self.start_index
        return TimeSeries(self.values[lo : lo + stop - start], start, self.labels)

    def tail(self, n: int) -> np.ndarray:
        return self.values[self.length - n :]


@dataclass(frozen=True, eq=False)
class PanelSeries:
    """Series of several entities sharing dimension and length."""

    entities: Tuple[Tuple[str, TimeSeries], ...]
    dim: int = 0

    def __post_init__(self):
        entities = tuple((str(entity_id), series) for entity_id, series in self.entities)
        dim = entities[0][1].dim if entities else self.dim
        ids = [entity_id for entity_id, _ in entities]
        if len(set(ids)) != len(ids):
            raise ModelValidationError("panel entity ids must be unique")
        if entities:
            length = entities[0][1].length
            for entity_id, series in entities:
                if series.dim != dim or series.length != length:
                    raise ModelValidationError(
                        f"entity '{entity_id}' has shape {series.values.shape}, expected ({length}, {dim})"
                    )
        object.__setattr__(self, "entities", entities)
        object.__setattr__(self, "dim", dim)

    def __len__(self) -> int:
        return len(self.entities)

    def __iter__(self) -> Iterator[Tuple[str, TimeSeries]]:
        return iter(self.entities)

    @property
    def length(self) -> int:
        return self.entities[0][1].length if self.entities else 0

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(entity_id for entity_id, _ in self.entities)

    @property
    def labels(self) -> Optional[Tuple[str, ...]]:
        return self.entities[0][1].labels if self.entities else None

    def series(self) -> List[TimeSeries]:
        return [series for _, series in self.entities]

    def get(self, entity_id: str) -> TimeSeries:
        for key, series in self.entities:
            if key == entity_id:
                return series
        raise KeyError(entity_id)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """How to run a simulation.

    Attributes:
        length: Number of samples kept after burn-in.
        burn_in: Samples generated and discarded first.
        seed: Unsigned 64-bit master seed.
        initial_state: Optional ``p x d`` presample, oldest row first.
            Defaults to the process mean (zeros for unstable models).
        stream: Substream key of a single series.
    """

    length: int
    burn_in: int = DEFAULT_BURN_IN
    seed: int = 0
    initial_state: Optional[np.ndarray] = None
    stream: str = "series"

    def __post_init__(self):
        if self.length < 1:
            raise ModelValidationError(f"simulation length must be >= 1, got {self.length}")
        if self.burn_in < 0:
            raise ModelValidationError(f"burn_in must be nonnegative, got {self.burn_in}")
        if not 0 <= self.seed < MAX_SEED:
            raise ModelValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


SeriesLike = Union[TimeSeries, PanelSeries]


def substream(seed: int, key: str) -> np.random.Generator:
    """Independent generator for ``(seed, key)``."""
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=16).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    entropy = [seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF, *words]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def noise_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD covariance."""
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    return (eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ eigenvectors.T


def _shocks(model: VarModel, generator: np.random.Generator, n_steps: int) -> np.ndarray:
    return generator.standard_normal((n_steps, model.dim)) @ noise_factor(model.noise_cov).T


def replicate_shocks(model: VarModel, seed: int, keys: Sequence[str], n_steps: int) -> np.ndarray:
    """``(len(keys), n_steps, d)`` Gaussian shocks, one substream per key."""
    factor = noise_factor(model.noise_cov).T
    if not keys:
        return np.empty((0, n_steps, model.dim))
    return np.stack([substream(seed, key).standard_normal((n_steps, model.dim)) @ factor for key in keys])


def _default_presample(model: VarModel) -> np.ndarray:
    if check_stability(model).is_stable:
        mean = process_mean(model)
    else:
        mean = np.zeros(model.dim)
    return np.tile(mean, (model.lag, 1))


def _presample(model: VarModel, initial_state: Optional[np.ndarray]) -> np.ndarray:
    if initial_state is None:
        return _default_presample(model)
    presample = np.asarray(initial_state, dtype=float)
    if presample.shape != (model.lag, model.dim):
        raise ModelValidationError(
            f"initial_state must be {model.lag}x{model.dim} for '{model.name}', got {presample.shape}"
        )
    return presample


def shock_scale(model: VarModel, intervention: Intervention) -> np.ndarray:
    """Diagonal map applied to the original shocks once *intervention* is active."""
    if intervention.kind is InterventionKind.FORCING:
        return 1.0 / (1.0 + intervention.force)
    if intervention.kind is InterventionKind.DO:
        return (intervention.force == 0).astype(float)
    return np.ones(model.dim)


def propagate(
    model: VarModel,
    presample: np.ndarray,
    shocks: np.ndarray,
    bound: float,
    index_offset: int = 0,
    after: Optional[VarModel] = None,
    switch_at: Optional[int] = None,
    after_scale: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Run the recursion for a batch of paths.

    ``presample`` is ``(n, p, d)`` oldest first, ``shocks`` is ``(n, T, d)``.
    From step ``switch_at`` onward the dynamics of ``after`` are used and
    shocks are multiplied by ``after_scale``.  ``index_offset`` is the time
    index of the first step and only shows up in overflow errors.

    Returns:
        The ``(n, T, d)`` generated states.
    """
    n, n_steps, d = shocks.shape
    p = model.lag
    state = presample[:, ::-1, :].reshape(n, p * d)
    out = np.empty((n, n_steps, d))
    current, scale = model, None
    for t in range(n_steps):
        if after is not None and t == switch_at:
            current, scale = after, after_scale
        shock = shocks[:, t] if scale is None else shocks[:, t] * scale
        x = current.intercept + state @ current.stacked_coeffs.T + shock
        if not np.all(np.abs(x) <= bound):
            raise SimulationOverflowError(
                f"simulation of '{model.name}' left the range |x| <= {bound:g} at index {index_offset + t}",
                index=index_offset + t,
            )
        out[:, t] = x
        state = np.concatenate([x, state[:, : (p - 1) * d]], axis=1) if p > 1 else x
    return out


def draw_shocks(model: VarModel, cfg: SimConfig) -> TimeSeries:
    """The white-noise draws :func:`simulate` uses for *cfg*, burn-in included.

    The returned series starts at index ``-cfg.burn_in`` so that its rows
    line up with the time index of the simulated output.
    """
    shocks = _shocks(model, substream(cfg.seed, cfg.stream), cfg.burn_in + cfg.length)
    return TimeSeries(shocks, -cfg.burn_in, model.labels)


def simulate(model: VarModel, cfg: SimConfig, overflow_bound: float = DEFAULT_OVERFLOW_BOUND) -> TimeSeries:
    """Generate ``X_t = nu + sum B_k X_{t-k} + u_t`` with Gaussian ``u_t``.

    Raises:
        SimulationOverflowError: If the state leaves ``|x| <= overflow_bound``.
    """
    shocks = draw_shocks(model, cfg).values
    presample = _presample(model, cfg.initial_state)
    path = propagate(model, presample[np.newaxis], shocks[np.newaxis], overflow_bound, -cfg.burn_in)[0]
    return TimeSeries(path[cfg.burn_in :], 0, model.labels)


def simulate_intervened(
    model: VarModel,
    intervention: Intervention,
    cfg: SimConfig,
    overflow_bound: float = DEFAULT_OVERFLOW_BOUND,
) -> Tuple[TimeSeries, TimeSeries]:
    """Coupled factual and intervened trajectories sharing every shock.

    The intervention becomes active at kept index ``intervention.start``.
    """
    if not 0 <= intervention.start < cfg.length:
        raise DomainError(f"intervention start {intervention.start} outside [0, {cfg.length})")
    shocks = draw_shocks(model, cfg).values[np.newaxis]
    presample = _presample(model, cfg.initial_state)[np.newaxis]
    factual = propagate(model, presample, shocks, overflow_bound, -cfg.burn_in)[0]
    intervened = propagate(
        model,
        presample,
        shocks,
        overflow_bound,
        -cfg.burn_in,
        after=intervened_model(model, intervention),
        switch_at=cfg.burn_in + intervention.start,
        after_scale=shock_scale(model, intervention),
    )[0]
    return (
        TimeSeries(factual[cfg.burn_in :], 0, model.labels),
        TimeSeries(intervened[cfg.burn_in :], 0, model.labels),
    )


def simulate_panel(
    model: VarModel,
    cfg: SimConfig,
    entity_ids: Sequence[str],
    overflow_bound: float = DEFAULT_OVERFLOW_BOUND,
) -> PanelSeries:
    """Simulate several entities at once, each on its own substream."""
    if not entity_ids:
        return PanelSeries((), model.dim)
    n_steps = cfg.burn_in + cfg.length
    shocks = replicate_shocks(model, cfg.seed, [f"entity/{entity_id}" for entity_id in entity_ids], n_steps)
    presample = np.broadcast_to(_presample(model, cfg.initial_state), (len(entity_ids), model.lag, model.dim))
    paths = propagate(model, presample, shocks, overflow_bound, -cfg.burn_in)
    logger.debug("Simulated %d entities of '%s' (%d steps each)", len(entity_ids), model.name, cfg.length)
    return PanelSeries(
        tuple(
            (entity_id, TimeSeries(path[cfg.burn_in :], 0, model.labels)) for entity_id, path in zip(entity_ids, paths)
        )
    )


def _rollout_chunk(
    model: VarModel,
    presample: np.ndarray,
    n_steps: int,
    seed: int,
    replicates: range,
    intervention: Optional[Intervention],
    bound: float,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    shocks = replicate_shocks(model, seed, [f"rollout/{r}" for r in replicates], n_steps)
    batch = np.broadcast_to(presample, (len(replicates),) + presample.shape)
    factual = propagate(model, batch, shocks, bound)
    if intervention is None:
        return factual, None
    intervened = propagate(
        model,
        batch,
        shocks,
        bound,
        after=intervened_model(model, intervention),
        switch_at=intervention.start,
        after_scale=shock_scale(model, intervention),
    )
    return factual, intervened


def rollout(
    model: VarModel,
    history: TimeSeries,
    n_steps: int,
    n_paths: int,
    seed: int,
    intervention: Optional[Intervention] = None,
    workers: int = 1,
    overflow_bound: float = DEFAULT_OVERFLOW_BOUND,
) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """Monte Carlo continuations of *history*.

    Args:
        model: Generating model.
        history: Observed past; its last ``p`` rows are the presample.
        n_steps: Steps simulated after the end of *history*.
        n_paths: Number of replicates, each on substream ``rollout/<r>``.
        seed: Master seed.
        intervention: When given, coupled intervened paths are returned as
            well; ``start = 0`` activates it on the first simulated step.
        workers: Threads used over fixed-size replicate chunks.

    Returns:
        ``(n_paths, n_steps, d)`` array, or a ``(factual, intervened)`` pair.
    """
    if history.length < model.lag:
        raise DomainError(f"rollout needs at least {model.lag} history rows, got {history.length}")
    presample = history.tail(model.lag)
    chunks = [range(lo, min(lo + CHUNK_PATHS, n_paths)) for lo in range(0, n_paths, CHUNK_PATHS)]
    args = (model, presample, n_steps, seed)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda chunk: _rollout_chunk(*args, chunk, intervention, overflow_bound), chunks))
    factual = np.concatenate([r[0] for r in results]) if results else np.empty((0, n_steps, model.dim))
    if intervention is None:
        return factual
    intervened = np.concatenate([r[1] for r in results]) if results else np.empty((0, n_steps, model.dim))
    return factual, intervened


__all__ = [
    "TimeSeries",
    "PanelSeries",
    "SimConfig",
    "substream",
    "noise_factor",
    "shock_scale",
    "replicate_shocks",
    "propagate",
    "draw_shocks",
    "simulate",
    "simulate_intervened",
    "simulate_panel",
    "rollout",
]
