"""Benchmark runners and the crossing-time use case.

:class:`ExperimentRunner` is the application-layer component: it reads
the configured settings and the dataset registry from the container and
passes every tunable down to the numerical functions explicitly.  Runs
of a benchmark execute on a thread pool; each run owns a seed derived
from ``(spec.seed, run index)`` and results are collected in run order,
so a benchmark is reproducible regardless of the worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Literal, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
import pandas as pd
from pico_ioc import component

from .bootstrap import init
from .config import EstimationSettings, RuntimeSettings, SimulationSettings, StabilitySettings, build_configuration
from .core import VarModel
from .datasets import DatasetRegistry, SyntheticDataset, load_panel_csv
from .errors import DomainError, ModelValidationError
from .estimate import FitOptions, fit, select_lag
from .forecast import causal_effect_path, forecast_intervened, forecast_means_batch
from .intervene import Intervention, InterventionKind
from .metrics import MetricReport, mean_and_sd, metrics
from .simulate import TimeSeries

logger = logging.getLogger(__name__)

Direction = Literal["above", "below"]
T = TypeVar("T")

DEFAULT_USECASE_FORCE = 0.38
CSV_MAX_LAG = 8


@dataclass(frozen=True)
class ExperimentSpec:
    """What a benchmark run does.

    Attributes:
        dataset: Registered dataset name, or the path of a panel CSV.
        train_size: Samples used for fitting.
        horizon: Forecast horizon ``h``.
        n_runs: Independent repetitions, each with a fresh seed.
        seed: Master seed.
        intervention: Intervention of the interventional runs and of the
            use case; defaults depend on the runner.
        target_components: Scored components; defaults to the dataset's.
        lag: VAR order of the fitted model; defaults to the true order.
        noise_scale: Shock standard deviation of synthetic data.
        validation_size: Gap between training and test segments.
        test_size: Number of forecast origins scored per run.
        n_entities: Panel size of the crossing use case.
        threshold: Acceptance threshold of the crossing use case.
        direction: Whether crossing means reaching ``>=`` or ``<=`` threshold.
        use_true_model: Crossing use case only; skip fitting.
    """

    dataset: str
    train_size: int = 500
    horizon: int = 1
    n_runs: int = 10
    seed: int = 0
    intervention: Optional[Intervention] = None
    target_components: Optional[Tuple[int, ...]] = None
    lag: Optional[int] = None
    noise_scale: Optional[float] = None
    validation_size: Optional[int] = None
    test_size: Optional[int] = None
    n_entities: int = 100
    threshold: Optional[float] = None
    direction: Direction = "above"
    use_true_model: bool = False

    def __post_init__(self):
        if self.n_runs < 1:
            raise ModelValidationError(f"n_runs must be >= 1, got {self.n_runs}")
        if self.train_size < 1 or self.horizon < 1:
            raise ModelValidationError("train_size and horizon must be positive")
        if self.direction not in ("above", "below"):
            raise ModelValidationError(f"direction must be 'above' or 'below', got {self.direction!r}")
        if self.target_components is not None:
            object.__setattr__(self, "target_components", tuple(int(i) for i in self.target_components))

    def describe(self) -> Dict[str, Any]:
        described = {key: value for key, value in asdict(self).items() if key != "intervention"}
        if self.intervention is not None:
            described["intervention"] = {
                "kind": self.intervention.kind.value,
                "force": self.intervention.force.tolist(),
                "target": self.intervention.target.tolist() if self.intervention.target is not None else None,
                "start": self.intervention.start,
            }
        return described


@dataclass(frozen=True)
class RunRecord:
    run: int
    seed: int
    label: str
    report: MetricReport
    extras: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class BenchmarkRow:
    """Aggregate over runs of one forecaster (or intervention kind)."""

    label: str
    dataset: str
    train_size: int
    horizon: int
    n_runs: int
    mae_mean: float
    mae_sd: float
    rmse_mean: float
    rmse_sd: float
    smape_mean: float
    smape_sd: float


@dataclass(frozen=True)
class BenchmarkResult:
    rows: Tuple[BenchmarkRow, ...]
    runs: Tuple[RunRecord, ...]
    metadata: Dict[str, Any]

    def row(self, label: str) -> BenchmarkRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def values(self, label: str, metric: str = "mae") -> np.ndarray:
        """Per-run values of *metric* for *label*, in run order."""
        return np.array([getattr(r.report, metric) for r in self.runs if r.label == label])

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows])


@dataclass(frozen=True)
class CrossingRecord:
    """Crossing time of one entity; ``None`` means it never crossed within the horizon."""

    entity: str
    crossing_time: Optional[int]
    path: np.ndarray


@dataclass(frozen=True)
class CrossingResult:
    records: Tuple[CrossingRecord, ...]
    histogram: Tuple[Tuple[str, int], ...]
    threshold: float
    direction: Direction
    target: int
    unstable: bool = False

    @property
    def crossed(self) -> int:
        return sum(1 for record in self.records if record.crossing_time is not None)

    @property
    def never(self) -> int:
        return len(self.records) - self.crossed

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "entity": [r.entity for r in self.records],
                "crossing_time": [r.crossing_time if r.crossing_time is not None else "never" for r in self.records],
            }
        )

    def histogram_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.histogram), columns=["bin", "count"])


def run_seed(seed: int, run: int) -> int:
    """Unsigned 64-bit seed of run *run*."""
    return int(np.random.SeedSequence([seed, run]).generate_state(1, dtype=np.uint64)[0])


def crossing_time(path: Sequence[float], threshold: float, direction: Direction = "above") -> Optional[int]:
    """First index at which *path* reaches *threshold*, or ``None``."""
    values = np.asarray(path, dtype=float)
    hits = np.flatnonzero(values >= threshold if direction == "above" else values <= threshold)
    return int(hits[0]) if hits.size else None


def _package_versions() -> Dict[str, str]:
    versions = {}
    for name in ("causal-var", "numpy", "scipy", "pandas", "networkx", "pico-ioc"):
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _aggregate(records: Sequence[RunRecord], spec: ExperimentSpec, dataset: str) -> Tuple[BenchmarkRow, ...]:
    labels = list(dict.fromkeys(record.label for record in records))
    rows = []
    for label in labels:
        reports = [r.report for r in sorted(records, key=lambda r: r.run) if r.label == label]
        mae = mean_and_sd([r.mae for r in reports])
        rmse = mean_and_sd([r.rmse for r in reports])
        smape = mean_and_sd([r.smape for r in reports])
        rows.append(
            BenchmarkRow(label, dataset, spec.train_size, spec.horizon, len(reports), *mae, *rmse, *smape)
        )
    return tuple(rows)


@dataclass
class _Prepared:
    series: TimeSeries
    true_model: Optional[VarModel]
    lag: int
    targets: Tuple[int, ...]
    origins: np.ndarray
    dataset: Optional[SyntheticDataset]


@component
class ExperimentRunner:
    """Runs the observational, interventional and crossing experiments."""

    def __init__(
        self,
        runtime: RuntimeSettings,
        stability: StabilitySettings,
        simulation: SimulationSettings,
        estimation: EstimationSettings,
        registry: DatasetRegistry,
    ):
        self.runtime = runtime
        self.stability = stability
        self.simulation = simulation
        self.estimation = estimation
        self.registry = registry

    def _map_runs(self, spec: ExperimentSpec, work: Callable[[int, int], List[T]]) -> List[T]:
        with ThreadPoolExecutor(max_workers=min(self.runtime.worker_count(), spec.n_runs)) as pool:
            batches = list(pool.map(lambda run: work(run, run_seed(spec.seed, run)), range(spec.n_runs)))
        return [item for batch in batches for item in batch]

    def _is_csv(self, spec: ExperimentSpec) -> bool:
        return spec.dataset not in self.registry and Path(spec.dataset).suffix.lower() == ".csv"

    def _fit_options(self, lag: int) -> FitOptions:
        return FitOptions(lag=lag, ridge=self.estimation.ridge, condition_limit=self.stability.condition_limit)

    def _prepare(self, spec: ExperimentSpec, seed: int) -> _Prepared:
        if self._is_csv(spec):
            panel = load_panel_csv(spec.dataset)
            if len(panel) == 0:
                raise DomainError(f"dataset {spec.dataset} has no rows")
            series = panel.series()[0]
            lag = spec.lag or select_lag(series.window(0, spec.train_size), CSV_MAX_LAG, "bic")
            test_start = spec.train_size + (spec.validation_size or 0)
            test_size = spec.test_size or (series.length - test_start - spec.horizon + 1)
            if test_size < 1 or test_start + test_size - 1 + spec.horizon > series.length:
                raise DomainError(
                    f"dataset {spec.dataset} has {series.length} rows, too few for "
                    f"train {spec.train_size} + validation {spec.validation_size or 0} + horizon {spec.horizon}"
                )
            targets = spec.target_components or tuple(range(series.dim))
            origins = series.start_index + np.arange(test_start - 1, test_start - 1 + test_size)
            return _Prepared(series, None, lag, targets, origins, None)
        dataset = self.registry.get(spec.dataset)
        validation = dataset.validation_size if spec.validation_size is None else spec.validation_size
        test_size = dataset.test_size if spec.test_size is None else spec.test_size
        length = spec.train_size + validation + test_size + spec.horizon
        noise = self.simulation.noise_scale if spec.noise_scale is None else spec.noise_scale
        panel, true_model = dataset.generate(seed, length, 1, noise, self.simulation.burn_in)
        series = panel.series()[0]
        test_start = spec.train_size + validation
        origins = np.arange(test_start - 1, test_start - 1 + test_size)
        targets = spec.target_components or dataset.target_components
        return _Prepared(series, true_model, spec.lag or true_model.lag, targets, origins, dataset)

    def _fitted(self, prepared: _Prepared, spec: ExperimentSpec) -> VarModel:
        train = prepared.series.window(prepared.series.start_index, prepared.series.start_index + spec.train_size)
        return fit(train, self._fit_options(prepared.lag), name="var").model

    def run_observational(self, spec: ExperimentSpec) -> BenchmarkResult:
        """Score h-step forecasts of the fitted VAR and of the oracle.

        Each run generates fresh data, fits a VAR of the true order on the
        training segment, and scores the ``h``-step forecasts from every
        test origin against the realised values.
        """
        if self._is_csv(spec) and spec.n_runs > 1:
            logger.info("CSV dataset %s is deterministic; running once", spec.dataset)
            spec = replace(spec, n_runs=1)

        def work(run: int, seed: int) -> List[RunRecord]:
            prepared = self._prepare(spec, seed)
            series, h = prepared.series, spec.horizon
            truth = series.values[prepared.origins - series.start_index + h]
            forecasters = [("var", self._fitted(prepared, spec))]
            if prepared.true_model is not None:
                forecasters.append(("oracle", prepared.true_model))
            records = []
            for label, model in forecasters:
                predicted = forecast_means_batch(model, series, prepared.origins, h)[:, h - 1]
                records.append(RunRecord(run, seed, label, metrics(predicted, truth, prepared.targets)))
            logger.info("Observational run %d on '%s' done", run, spec.dataset)
            return records

        records = self._map_runs(spec, work)
        return BenchmarkResult(
            rows=_aggregate(records, spec, spec.dataset),
            runs=tuple(records),
            metadata=self._metadata(spec, "observational"),
        )

    def run_interventional(self, spec: ExperimentSpec) -> BenchmarkResult:
        """Score the causal-effect path of the fitted VAR against the true one.

        Steps ``1 .. h`` after the intervention starts are scored, i.e.
        rows ``0 .. h-1`` of the effect path; ``metadata["scoring"]``
        records this.  Additive effects use the closed form; forcing and
        ``do`` effects are averaged over the test origins.

        Without ``spec.intervention`` every default intervention of the
        dataset is scored, one row per intervention kind.
        """
        if self._is_csv(spec):
            raise DomainError("interventional benchmarks need a synthetic dataset with a known generator")

        def work(run: int, seed: int) -> List[RunRecord]:
            prepared = self._prepare(spec, seed)
            if spec.intervention is not None:
                interventions: Tuple[Intervention, ...] = (spec.intervention,)
            else:
                interventions = prepared.dataset.default_interventions(prepared.series.dim)
            fitted = self._fitted(prepared, spec)
            return [self._score_effects(run, seed, prepared, fitted, iv, spec.horizon) for iv in interventions]

        records = self._map_runs(spec, work)
        metadata = self._metadata(spec, "interventional")
        metadata["scoring"] = {
            "effect_rows": [0, spec.horizon - 1],
            "forecast_steps": [1, spec.horizon],
            "average": "mean over effect rows, test origins and target components",
        }
        return BenchmarkResult(rows=_aggregate(records, spec, spec.dataset), runs=tuple(records), metadata=metadata)

    def _score_effects(
        self,
        run: int,
        seed: int,
        prepared: _Prepared,
        fitted: VarModel,
        intervention: Intervention,
        h: int,
    ) -> RunRecord:
        true_model, margin = prepared.true_model, self.stability.margin
        truth_path = causal_effect_path(true_model, intervention, prepared.series, h, margin)
        if intervention.kind is InterventionKind.ADDITIVE:
            truth = truth_path.effects[:h]
            predicted = causal_effect_path(fitted, intervention, prepared.series, h, margin).effects[:h]
        else:
            active = intervention.with_start(0)
            series, origins = prepared.series, prepared.origins

            def effects(model: VarModel) -> np.ndarray:
                moved = forecast_means_batch(model, series, origins, h, active)
                return (moved - forecast_means_batch(model, series, origins, h)).reshape(-1, series.dim)

            truth, predicted = effects(true_model), effects(fitted)
        extras = {}
        if truth_path.asymptote is not None:
            extras["asymptote_magnitude"] = float(np.mean(np.abs(truth_path.asymptote[list(prepared.targets)])))
        report = metrics(predicted, truth, prepared.targets)
        return RunRecord(run, seed, intervention.kind.value, report, extras)

    def run_usecase_crossing(self, spec: ExperimentSpec) -> CrossingResult:
        """Time each entity's forecast needs to cross ``spec.threshold``.

        Every entity of a synthetic panel gets an interventional forecast of
        the target component.  Index 0 of each path is the last observed
        value, so an entity already past the threshold crosses at 0.
        """
        if spec.threshold is None:
            raise DomainError("the crossing use case needs a threshold")
        dataset = self.registry.get(spec.dataset)
        noise = self.simulation.noise_scale if spec.noise_scale is None else spec.noise_scale
        panel, true_model = dataset.generate(
            spec.seed, spec.train_size, spec.n_entities, noise, self.simulation.burn_in
        )
        if spec.use_true_model:
            model = true_model
        else:
            model = fit(panel, self._fit_options(spec.lag or true_model.lag), name="var").model
        target = (spec.target_components or dataset.target_components)[0]
        intervention = spec.intervention
        if intervention is None:
            force = np.zeros(panel.dim)
            force[dataset.intervened_component] = DEFAULT_USECASE_FORCE
            intervention = Intervention.additive(force)

        def one(item: Tuple[str, TimeSeries]) -> Tuple[CrossingRecord, bool]:
            entity, series = item
            fc = forecast_intervened(model, intervention, series, spec.horizon, self.stability.margin)
            path = np.concatenate([[series.values[-1, target]], fc.means[:, target]])
            return CrossingRecord(entity, crossing_time(path, spec.threshold, spec.direction), path), fc.unstable

        with ThreadPoolExecutor(max_workers=self.runtime.worker_count()) as pool:
            outcomes = list(pool.map(one, panel.entities))
        records = tuple(record for record, _ in outcomes)
        counts = {str(k): 0 for k in range(spec.horizon + 1)}
        counts["never"] = 0
        for record in records:
            counts["never" if record.crossing_time is None else str(record.crossing_time)] += 1
        result = CrossingResult(
            records=records,
            histogram=tuple(counts.items()),
            threshold=float(spec.threshold),
            direction=spec.direction,
            target=target,
            unstable=any(unstable for _, unstable in outcomes),
        )
        logger.info("Crossing use case: %d of %d entities crossed", result.crossed, len(records))
        return result

    def _metadata(self, spec: ExperimentSpec, benchmark: str) -> Dict[str, Any]:
        return {
            "benchmark": benchmark,
            "spec": spec.describe(),
            "seeds": [run_seed(spec.seed, run) for run in range(spec.n_runs)],
            "noise_scale": self.simulation.noise_scale if spec.noise_scale is None else spec.noise_scale,
            "burn_in": self.simulation.burn_in,
            "ridge": self.estimation.ridge,
            "versions": _package_versions(),
        }


@contextmanager
def configured_runner(settings_file: Optional[Union[str, Path]] = None) -> Iterator[ExperimentRunner]:
    """An :class:`ExperimentRunner` resolved from a short-lived container.

    Settings are layered by :func:`causal_var.config.build_configuration`,
    so *settings_file* and the ``CAUSAL_VAR_*`` variables apply exactly as
    they do for the CLI.
    """
    container = init(config=build_configuration(settings_file))
    try:
        yield container.get(ExperimentRunner)
    finally:
        container.shutdown()


def _with_runner(runner: Optional[ExperimentRunner], call: Callable[[ExperimentRunner], T]) -> T:
    if runner is not None:
        return call(runner)
    with configured_runner() as configured:
        return call(configured)


def run_observational(spec: ExperimentSpec, runner: Optional[ExperimentRunner] = None) -> BenchmarkResult:
    return _with_runner(runner, lambda r: r.run_observational(spec))


def run_interventional(spec: ExperimentSpec, runner: Optional[ExperimentRunner] = None) -> BenchmarkResult:
    return _with_runner(runner, lambda r: r.run_interventional(spec))


def run_usecase_crossing(spec: ExperimentSpec, runner: Optional[ExperimentRunner] = None) -> CrossingResult:
    return _with_runner(runner, lambda r: r.run_usecase_crossing(spec))


__all__ = [
    "ExperimentSpec",
    "RunRecord",
    "BenchmarkRow",
    "BenchmarkResult",
    "CrossingRecord",
    "CrossingResult",
    "ExperimentRunner",
    "configured_runner",
    "run_seed",
    "crossing_time",
    "run_observational",
    "run_interventional",
    "run_usecase_crossing",
]
