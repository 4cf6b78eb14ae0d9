"""Built-in synthetic datasets and panel/series CSV files.

Two generators ship with the package:

* ``german`` -- a 7-variable structural VAR(4) of a loan applicant
  (Expertise, Responsibility, LoanAmount, LoanDuration, Income, Savings,
  CreditScore) whose Credit Score reacts instantaneously to its parents.
* ``pendulum`` -- a 2-variable VAR(1) whose second component is explosive
  on its own and is stabilised by feedback from the first.

Extension packages can contribute more generators; see
:mod:`causal_var.bootstrap`.
"""

import functools
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
import pandas as pd

from .config import DEFAULT_BURN_IN, DEFAULT_NOISE_SCALE
from .core import StructuralVarModel, VarModel, svar_to_var
from .errors import CausalVarError, DataFormatError, UsageError
from .graph import CausalGraph, structural_graph
from .intervene import Intervention
from .simulate import PanelSeries, SimConfig, TimeSeries, simulate_panel

logger = logging.getLogger(__name__)

GERMAN_LABELS = ("Expertise", "Responsibility", "LoanAmount", "LoanDuration", "Income", "Savings", "CreditScore")
EXPERTISE, CREDIT_SCORE = 0, 6
PENDULUM_LABELS = ("Position", "Angle")
FLOAT_FORMAT = "%.17g"


def german_svar(noise_scale: float = DEFAULT_NOISE_SCALE) -> StructuralVarModel:
    """Structural VAR(4) of the German credit scenario, cause-row orientation."""
    d = len(GERMAN_LABELS)
    instantaneous = np.zeros((d, d))
    instantaneous[3, 6] = 0.5
    instantaneous[4, 6] = -0.3
    instantaneous[5, 6] = -0.5
    lags = np.zeros((4, d, d))
    lags[0][np.diag_indices(d)] = 0.95
    lags[0][6, 6] = 0.0
    lags[1][1, 4] = 0.3
    lags[1][2, 6] = 0.5
    lags[1][4, 5] = 0.2
    lags[2][2, 3] = 0.5
    lags[3][0, 1] = 0.3
    lags[3][0, 4] = 0.8
    return StructuralVarModel(
        intercept=np.zeros(d),
        instantaneous=instantaneous,
        lag_coeffs=lags,
        noise_cov=np.eye(d) * noise_scale**2,
        labels=GERMAN_LABELS,
        name="german",
    )


def german_model(noise_scale: float = DEFAULT_NOISE_SCALE) -> VarModel:
    return svar_to_var(german_svar(noise_scale))


def german_graph() -> CausalGraph:
    """The nine cause -> effect edges the German data is drawn from."""
    return structural_graph(german_svar())


def pendulum_svar(noise_scale: float = DEFAULT_NOISE_SCALE) -> StructuralVarModel:
    lag = math.sqrt(2.0) * np.array([[0.0, -0.5], [0.5, 1.0]])
    return StructuralVarModel(
        intercept=np.zeros(2),
        instantaneous=np.zeros((2, 2)),
        lag_coeffs=lag[np.newaxis],
        noise_cov=np.eye(2) * noise_scale**2,
        labels=PENDULUM_LABELS,
        name="pendulum",
    )


def pendulum_model(noise_scale: float = DEFAULT_NOISE_SCALE) -> VarModel:
    return svar_to_var(pendulum_svar(noise_scale))


@dataclass(frozen=True)
class SyntheticDataset:
    """A named ground-truth generator usable by the benchmark runners.

    Attributes:
        name: Registry key.
        build: Maps a noise scale to the ground-truth reduced-form model.
        target_components: Components scored by the benchmarks.
        intervened_component: Component the default interventions act on.
        additive_force: Strength of the default additive intervention.
        forcing_force: Strength of the default forcing intervention.
        forcing_target: Target of the default forcing intervention; ``None``
            leaves forcing out of the defaults.
        validation_size: Samples between training and test segments.
        test_size: Length of the held-out test segment.
        graph: Optional known causal graph used for constrained fits.
    """

    name: str
    build: Callable[[float], VarModel]
    target_components: Tuple[int, ...]
    intervened_component: int
    validation_size: int
    test_size: int
    additive_force: float = 0.2
    forcing_force: float = 1.0
    forcing_target: Optional[float] = None
    graph: Optional[Callable[[], CausalGraph]] = field(default=None, compare=False)

    def model(self, noise_scale: float = DEFAULT_NOISE_SCALE) -> VarModel:
        return self.build(noise_scale)

    def default_interventions(self, dim: int) -> Tuple[Intervention, ...]:
        """Interventions scored when a benchmark names none, additive first."""
        force = np.zeros(dim)
        force[self.intervened_component] = self.additive_force
        defaults = [Intervention.additive(force)]
        if self.forcing_target is not None:
            force = np.zeros(dim)
            force[self.intervened_component] = self.forcing_force
            target = np.zeros(dim)
            target[self.intervened_component] = self.forcing_target
            defaults.append(Intervention.forcing(force, target))
        return tuple(defaults)

    def generate(
        self,
        seed: int,
        length: int,
        n_entities: int = 1,
        noise_scale: float = DEFAULT_NOISE_SCALE,
        burn_in: int = DEFAULT_BURN_IN,
    ) -> Tuple[PanelSeries, VarModel]:
        model = self.model(noise_scale)
        cfg = SimConfig(length=length, burn_in=burn_in, seed=seed)
        panel = simulate_panel(model, cfg, [f"{k:04d}" for k in range(n_entities)])
        return panel, model


GERMAN = SyntheticDataset(
    name="german",
    build=german_model,
    target_components=(CREDIT_SCORE,),
    intervened_component=EXPERTISE,
    validation_size=300,
    test_size=2400,
    additive_force=0.2,
    forcing_force=1.0,
    forcing_target=5.0,
    graph=german_graph,
)

PENDULUM = SyntheticDataset(
    name="pendulum",
    build=pendulum_model,
    target_components=(0,),
    intervened_component=1,
    validation_size=100,
    test_size=2200,
    additive_force=0.4,
    forcing_force=1.0,
    forcing_target=1.0,
)

BUILTIN_DATASETS = (GERMAN, PENDULUM)


class DatasetRegistry:
    """Generators available to the benchmark runners, by name.

    The first generator registered under a name wins; later duplicates
    are logged and ignored.
    """

    def __init__(self, datasets: Iterable[SyntheticDataset] = BUILTIN_DATASETS):
        self._datasets: Dict[str, SyntheticDataset] = {}
        for dataset in datasets:
            self.register(dataset)

    def register(self, dataset: SyntheticDataset) -> None:
        if dataset.name in self._datasets:
            logger.warning("Dataset '%s' is already registered; ignoring duplicate", dataset.name)
            return
        self._datasets[dataset.name] = dataset

    def get(self, name: str) -> SyntheticDataset:
        try:
            return self._datasets[name]
        except KeyError:
            raise UsageError(f"unknown dataset '{name}', known datasets: {', '.join(self.names())}") from None

    def names(self) -> Tuple[str, ...]:
        return tuple(sorted(self._datasets))

    def __contains__(self, name: object) -> bool:
        return name in self._datasets

    def __len__(self) -> int:
        return len(self._datasets)


def generate_german(
    seed: int,
    length: int,
    n_entities: int = 1,
    noise_scale: float = DEFAULT_NOISE_SCALE,
    burn_in: int = DEFAULT_BURN_IN,
) -> Tuple[PanelSeries, VarModel]:
    """Panel drawn from the German SVAR plus its reduced-form ground truth."""
    return GERMAN.generate(seed, length, n_entities, noise_scale, burn_in)


def generate_pendulum(
    seed: int,
    length: int,
    n_entities: int = 1,
    noise_scale: float = DEFAULT_NOISE_SCALE,
    burn_in: int = DEFAULT_BURN_IN,
) -> Tuple[PanelSeries, VarModel]:
    """Panel drawn from the pendulum VAR(1) plus its ground truth."""
    return PENDULUM.generate(seed, length, n_entities, noise_scale, burn_in)


PathLike = Union[str, Path]
T = TypeVar("T")


def _loader(load: Callable[..., T]) -> Callable[..., T]:
    """Report any parse failure of a CSV loader as a DataFormatError."""

    @functools.wraps(load)
    def wrapper(path: PathLike, *args, **kwargs) -> T:
        try:
            return load(path, *args, **kwargs)
        except CausalVarError:
            raise
        except (KeyError, ValueError, IndexError, pd.errors.ParserError) as exc:
            raise DataFormatError(f"{path}: cannot parse CSV: {exc}") from exc

    return wrapper


def _parse_numeric(frame: pd.DataFrame, columns: Sequence[str], path: PathLike) -> np.ndarray:
    out = np.empty((len(frame), len(columns)))
    for k, column in enumerate(columns):
        try:
            out[:, k] = frame[column].astype(float).to_numpy()
        except ValueError:
            bad = pd.to_numeric(frame[column], errors="coerce").isna().to_numpy().nonzero()[0][0]
            raise DataFormatError(
                f"{path}: non-numeric value {frame[column].iloc[bad]!r} in column '{column}'",
                row=int(frame.index[bad]) + 2,
            ) from None
    if not np.all(np.isfinite(out)):
        bad = int(np.argwhere(~np.isfinite(out))[0][0])
        raise DataFormatError(f"{path}: non-finite value", row=int(frame.index[bad]) + 2)
    return out


def _read_frame(path: PathLike, required: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as exc:
        raise DataFormatError(f"{path}: file has no header") from exc
    except pd.errors.ParserError as exc:
        line = re.search(r"line (\d+)", str(exc))
        raise DataFormatError(f"{path}: malformed CSV", row=int(line.group(1)) if line else None) from exc
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path}: not UTF-8 text") from exc
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise DataFormatError(f"{path}: missing column(s) {', '.join(missing)}", row=1)
    return frame


def _time_column(frame: pd.DataFrame, path: PathLike) -> np.ndarray:
    times = _parse_numeric(frame, ["t"], path)[:, 0]
    fractional = np.flatnonzero(times != np.round(times))
    if fractional.size:
        raise DataFormatError(f"{path}: time index must be integral", row=int(frame.index[fractional[0]]) + 2)
    return times.astype(np.int64)


def _check_contiguous(times: np.ndarray, rows: np.ndarray, what: str, path: PathLike) -> None:
    gaps = np.flatnonzero(np.diff(times) != 1)
    if gaps.size:
        k = gaps[0] + 1
        raise DataFormatError(f"{path}: {what} has a gap or duplicate at t={times[k]}", row=int(rows[k]) + 2)


@_loader
def load_panel_csv(path: PathLike, schema: Optional[Sequence[str]] = None) -> PanelSeries:
    """Read a wide panel CSV with header ``entity,t,<name0>,...``.

    Args:
        path: File to read.
        schema: Expected component columns, in order.  Defaults to every
            column after ``entity`` and ``t``.

    Raises:
        DataFormatError: On missing columns, non-numeric cells, gaps in
            ``t`` or entities of different lengths.  Messages carry the
            one-based line number.
    """
    frame = _read_frame(path, ["entity", "t", *(schema or [])])
    columns = list(schema) if schema is not None else [c for c in frame.columns if c not in ("entity", "t")]
    if not columns:
        raise DataFormatError(f"{path}: no component columns", row=1)
    if frame.empty:
        return PanelSeries((), len(columns))
    frame = frame.assign(_t=_time_column(frame, path)).sort_values(["entity", "_t"], kind="stable")
    values = _parse_numeric(frame, columns, path)
    entities = []
    length = None
    for entity_id, positions in frame.groupby("entity", sort=False).indices.items():
        times = frame["_t"].to_numpy()[positions]
        rows = frame.index.to_numpy()[positions]
        _check_contiguous(times, rows, f"entity '{entity_id}'", path)
        if length is None:
            length = len(positions)
        elif len(positions) != length:
            raise DataFormatError(
                f"{path}: entity '{entity_id}' has {len(positions)} rows, expected {length}", row=int(rows[0]) + 2
            )
        entities.append((str(entity_id), TimeSeries(values[positions], int(times[0]), tuple(columns))))
    logger.info("Loaded panel %s: %d entities x %d steps x %d components", path, len(entities), length, len(columns))
    return PanelSeries(tuple(entities))


def save_panel_csv(panel: PanelSeries, path: PathLike) -> None:
    """Write *panel* as a byte-deterministic wide CSV."""
    names = list(panel.labels or [f"x{i}" for i in range(panel.dim)])
    frames = [
        pd.DataFrame({"entity": entity_id, "t": series.index, **dict(zip(names, series.values.T))})
        for entity_id, series in panel
    ]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["entity", "t", *names])
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")


@_loader
def load_series_csv(path: PathLike, schema: Optional[Sequence[str]] = None) -> TimeSeries:
    """Read a single series with header ``t,<name0>,...``."""
    frame = _read_frame(path, ["t", *(schema or [])])
    columns = list(schema) if schema is not None else [c for c in frame.columns if c != "t"]
    if not columns:
        raise DataFormatError(f"{path}: no component columns", row=1)
    if frame.empty:
        return TimeSeries(np.empty((0, len(columns))), 0, tuple(columns))
    frame = frame.assign(_t=_time_column(frame, path)).sort_values("_t", kind="stable")
    times = frame["_t"].to_numpy()
    _check_contiguous(times, frame.index.to_numpy(), "series", path)
    return TimeSeries(_parse_numeric(frame, columns, path), int(times[0]), tuple(columns))


def save_series_csv(series: TimeSeries, path: PathLike) -> None:
    names = list(series.labels or [f"x{i}" for i in range(series.dim)])
    frame = pd.DataFrame({"t": series.index, **dict(zip(names, series.values.T))}, columns=["t", *names])
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")


__all__ = [
    "GERMAN_LABELS",
    "PENDULUM_LABELS",
    "EXPERTISE",
    "CREDIT_SCORE",
    "SyntheticDataset",
    "GERMAN",
    "PENDULUM",
    "BUILTIN_DATASETS",
    "DatasetRegistry",
    "german_svar",
    "german_model",
    "german_graph",
    "pendulum_svar",
    "pendulum_model",
    "generate_german",
    "generate_pendulum",
    "load_panel_csv",
    "save_panel_csv",
    "load_series_csv",
    "save_series_csv",
]
