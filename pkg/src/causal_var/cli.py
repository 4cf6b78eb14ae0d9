"""Command-line surface: ``causal-var <command> [options]``.

Every subcommand accepts the common flags ``--seed``, ``--model``,
``--data``, ``--out``, ``--format``, ``--config`` and ``-v``.  A model
is either a JSON file or the name of a registered dataset, in which case
the dataset's ground-truth model is used.

Exit status: 0 on success, 2 on usage errors, 3 on domain and data
errors, 4 on numerical failures.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .bootstrap import init
from .config import ForecastSettings, RuntimeSettings, build_configuration, settings_error
from .core import VarModel, check_stability
from .counterfactual import counterfactual_frame, counterfactual_panel, counterfactual_trajectory
from .datasets import FLOAT_FORMAT, load_panel_csv, load_series_csv
from .errors import CausalVarError, UsageError
from .estimate import FitOptions, fit, select_lag
from .forecast import (
    causal_effect_path,
    effect_frame,
    forecast,
    forecast_frame,
    forecast_intervened,
)
from .graph import induced_graph
from .harness import ExperimentRunner, ExperimentSpec
from .intervene import Intervention, intervened_model, intervened_stability
from .scm import scm_intervene, scm_solution, to_equilibrium_scm, verify_commutation
from .serialization import (
    effect_to_dict,
    fit_sidecar,
    forecast_to_dict,
    graph_to_dict,
    intervention_to_dict,
    load_graph,
    load_intervention,
    load_model,
    model_to_dict,
    scm_to_dict,
)
from .simulate import PanelSeries, SimConfig, TimeSeries, simulate, simulate_intervened, simulate_panel

logger = logging.getLogger("causal_var")

DEFAULT_MAX_LAG = 8


@dataclass
class Context:
    """Settings and services a command runs with."""

    runner: ExperimentRunner
    forecast: ForecastSettings

    def resolve_model(self, reference: Optional[str]) -> VarModel:
        if reference is None:
            raise UsageError("--model is required")
        if reference in self.runner.registry:
            return self.runner.registry.get(reference).model(self.runner.simulation.noise_scale)
        return load_model(_existing(reference, "--model"))


def _existing(path: str, flag: str) -> Path:
    resolved = Path(path)
    if not resolved.is_file():
        raise UsageError(f"{flag}: no such file '{path}'")
    return resolved


def _required(value: Any, flag: str) -> Any:
    if value is None:
        raise UsageError(f"{flag} is required")
    return value


def _series(args: argparse.Namespace) -> TimeSeries:
    return load_series_csv(_existing(_required(args.data, "--data"), "--data"))


def _intervention(args: argparse.Namespace, required: bool = True) -> Optional[Intervention]:
    if args.intervention is None:
        if required:
            raise UsageError("--intervention is required")
        return None
    return load_intervention(_existing(args.intervention, "--intervention"))


def _targets(text: Optional[str]) -> Optional[List[int]]:
    if text is None:
        return None
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"--targets must be a comma-separated list of component indices, got '{text}'") from None


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {key: _to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(item) for item in value]
    return value


def _emit(args: argparse.Namespace, document: Dict[str, Any], frame: Optional[pd.DataFrame] = None) -> None:
    """Write *frame* as CSV, or *document* as JSON, to ``--out`` or stdout."""
    if args.format == "csv" and frame is not None:
        text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    else:
        text = json.dumps(_to_jsonable(document), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        logger.info("Wrote %s", args.out)
    else:
        sys.stdout.write(text)


def _series_frame(series: TimeSeries, entity: Optional[str] = None) -> pd.DataFrame:
    names = list(series.labels or [f"x{i}" for i in range(series.dim)])
    columns: Dict[str, Any] = {} if entity is None else {"entity": entity}
    columns["t"] = series.index
    columns.update(zip(names, series.values.T))
    return pd.DataFrame(columns)


def _series_document(series: TimeSeries) -> Dict[str, Any]:
    return {
        "labels": list(series.labels) if series.labels else None,
        "start_index": series.start_index,
        "values": series.values,
    }


def cmd_simulate(args: argparse.Namespace, ctx: Context) -> int:
    model = ctx.resolve_model(args.model)
    burn_in = ctx.runner.simulation.burn_in if args.burn_in is None else args.burn_in
    bound = ctx.runner.simulation.overflow_bound
    cfg = SimConfig(length=args.length, burn_in=burn_in, seed=args.seed)
    intervention = _intervention(args, required=False)
    if args.entities > 1:
        if intervention is not None:
            raise UsageError("--intervention cannot be combined with --entities")
        panel = simulate_panel(model, cfg, [f"{k:04d}" for k in range(args.entities)], bound)
        frame = pd.concat([_series_frame(series, entity) for entity, series in panel], ignore_index=True)
        document = {"entities": {entity: _series_document(series) for entity, series in panel}}
        _emit(args, document, frame)
        return 0
    if intervention is None:
        series = simulate(model, cfg, bound)
        _emit(args, _series_document(series), _series_frame(series))
        return 0
    factual, intervened = simulate_intervened(model, intervention, cfg, bound)
    document = {"factual": _series_document(factual), "intervened": _series_document(intervened)}
    _emit(args, document, _series_frame(intervened))
    return 0


def cmd_fit(args: argparse.Namespace, ctx: Context) -> int:
    data = _series_or_panel(args)
    graph = load_graph(_existing(args.graph, "--graph")) if args.graph else None
    ridge = ctx.runner.estimation.ridge if args.ridge is None else args.ridge
    options = FitOptions(
        graph_constraint=graph,
        ridge=ridge,
        include_intercept=not args.no_intercept,
        condition_limit=ctx.runner.stability.condition_limit,
    )
    lag = args.lag or select_lag(data, args.max_lag, args.criterion, options)
    report = fit(data, replace(options, lag=lag), name=args.name)
    document = model_to_dict(report.model)
    document["fit"] = fit_sidecar(report)
    document["graph"] = graph_to_dict(induced_graph(report.model, ctx.runner.stability.graph_tolerance))
    _emit(args, document)
    return 0


def _series_or_panel(args: argparse.Namespace):
    path = _existing(_required(args.data, "--data"), "--data")
    if args.panel:
        return load_panel_csv(path)
    return load_series_csv(path)


def cmd_stability(args: argparse.Namespace, ctx: Context) -> int:
    model = ctx.resolve_model(args.model)
    margin = ctx.runner.stability.margin
    intervention = _intervention(args, required=False)
    if intervention is None:
        report = check_stability(model, margin)
    else:
        report = intervened_stability(model, intervention, margin).report
    document = {
        "model": model.name,
        "spectral_radius": report.spectral_radius,
        "stable": report.is_stable,
        "root_moduli": list(report.root_moduli),
    }
    if args.format == "json":
        _emit(args, document)
    else:
        verdict = "stable" if report.is_stable else "unstable"
        text = f"spectral radius {report.spectral_radius:.4f} ({verdict})\n"
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    if args.require_stable and not report.is_stable:
        logger.error("stability: model '%s' is unstable", model.name)
        return 3
    return 0


def cmd_forecast(args: argparse.Namespace, ctx: Context) -> int:
    model = ctx.resolve_model(args.model)
    history = _series(args)
    if args.origin is not None:
        history = history.window(history.start_index, args.origin + 1)
    intervention = _intervention(args, required=False)
    if intervention is None:
        fc = forecast(model, history, args.horizon)
    else:
        fc = forecast_intervened(model, intervention, history, args.horizon, ctx.runner.stability.margin)
    z = ctx.forecast.z_score if args.z is None else args.z
    _emit(args, forecast_to_dict(fc), forecast_frame(fc, z))
    return 0


def cmd_intervene(args: argparse.Namespace, ctx: Context) -> int:
    model = ctx.resolve_model(args.model)
    intervention = _intervention(args)
    after = intervened_model(model, intervention)
    stability = intervened_stability(model, intervention, ctx.runner.stability.margin)
    document = model_to_dict(after.replace(name=f"{model.name}+{intervention.kind.value}"))
    document["intervention"] = intervention_to_dict(intervention)
    document["stable"] = stability.preserved
    _emit(args, document)
    return 0


def cmd_ce(args: argparse.Namespace, ctx: Context) -> int:
    model = ctx.resolve_model(args.model)
    path = causal_effect_path(model, _intervention(args), _series(args), args.horizon, ctx.runner.stability.margin)
    _emit(args, effect_to_dict(path), effect_frame(path))
    return 0


def cmd_counterfact(args: argparse.Namespace, ctx: Context) -> int:
    model = ctx.resolve_model(args.model)
    data = _series_or_panel(args)
    intervention = _intervention(args)
    if isinstance(data, PanelSeries):
        t1 = data.entities[0][1].end_index - 1 if args.t1 is None and len(data) else args.t1
        results = counterfactual_panel(model, data, intervention, args.t0, t1, ctx.runner.runtime.worker_count())
        frame = pd.concat([counterfactual_frame(result, entity) for entity, result in results], ignore_index=True)
        document = {entity: _counterfactual_document(result) for entity, result in results}
    else:
        t1 = data.end_index - 1 if args.t1 is None else args.t1
        result = counterfactual_trajectory(
            model, data, intervention, args.t0, t1, ctx.runner.simulation.overflow_bound
        )
        frame = counterfactual_frame(result)
        document = _counterfactual_document(result)
    _emit(args, document, frame)
    return 0


def _counterfactual_document(result) -> Dict[str, Any]:
    document = {
        "t0": result.t0,
        "t1": result.t1,
        "factual": _series_document(result.factual),
        "counterfactual": _series_document(result.counterfactual),
        "effect": _series_document(result.effect),
    }
    if result.diagnostics is not None:
        document["diagnostics"] = asdict(result.diagnostics)
    return document


def cmd_scm(args: argparse.Namespace, ctx: Context) -> int:
    model = ctx.resolve_model(args.model)
    scm = to_equilibrium_scm(model, ctx.runner.stability.margin)
    intervention = _intervention(args, required=False)
    if intervention is not None:
        scm = scm_intervene(scm, intervention)
    solution = scm_solution(scm)
    document = {"scm": scm_to_dict(scm), "solution": {"mean": solution.mean, "cov": solution.cov}}
    names = list(model.component_names())
    frame = pd.DataFrame({"component": names, "mean": solution.mean, "variance": np.diag(solution.cov)})
    _emit(args, document, frame)
    return 0


def cmd_verify_commutation(args: argparse.Namespace, ctx: Context) -> int:
    model = ctx.resolve_model(args.model)
    intervention = _intervention(args, required=False) or Intervention.additive(np.zeros(model.dim))
    report = verify_commutation(
        model,
        intervention,
        replicates=args.replicates,
        length=args.length,
        seed=args.seed,
        workers=ctx.runner.runtime.worker_count(),
        margin=ctx.runner.stability.margin,
        overflow_bound=ctx.runner.simulation.overflow_bound,
    )
    document = {
        "max_mean_gap": report.max_mean_gap,
        "max_mean_gap_in_se": report.max_mean_gap_in_se,
        "max_cov_gap_rel": report.max_cov_gap_rel,
        "mean_standard_errors": report.mean_standard_errors,
        "empirical": {"mean": report.empirical.mean, "cov": report.empirical.cov},
        "predicted": {"mean": report.predicted.mean, "cov": report.predicted.cov},
        "replicates": report.replicates,
        "length": report.length,
    }
    frame = pd.DataFrame(
        {
            "component": list(model.component_names()),
            "empirical_mean": report.empirical.mean,
            "predicted_mean": report.predicted.mean,
            "standard_error": report.mean_standard_errors,
        }
    )
    _emit(args, document, frame)
    return 0


def _experiment(args: argparse.Namespace, **extra: Any) -> ExperimentSpec:
    targets = _targets(args.targets)
    return ExperimentSpec(
        dataset=args.dataset,
        train_size=args.train_size,
        horizon=args.horizon,
        seed=args.seed,
        intervention=_intervention(args, required=False),
        target_components=tuple(targets) if targets is not None else None,
        lag=args.lag,
        **extra,
    )


def _emit_benchmark(args: argparse.Namespace, result) -> None:
    document = {"rows": [asdict(row) for row in result.rows], "metadata": result.metadata}
    _emit(args, document, result.frame())
    if args.out and args.format == "csv":
        meta = Path(args.out).with_suffix(".meta.json")
        meta.write_text(json.dumps(_to_jsonable(result.metadata), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_bench_observational(args: argparse.Namespace, ctx: Context) -> int:
    _emit_benchmark(args, ctx.runner.run_observational(_experiment(args, n_runs=args.runs)))
    return 0


def cmd_bench_interventional(args: argparse.Namespace, ctx: Context) -> int:
    _emit_benchmark(args, ctx.runner.run_interventional(_experiment(args, n_runs=args.runs)))
    return 0


def cmd_usecase_crossing(args: argparse.Namespace, ctx: Context) -> int:
    spec = _experiment(
        args,
        n_entities=args.entities,
        threshold=args.threshold,
        direction=args.direction,
        use_true_model=args.true_model,
    )
    result = ctx.runner.run_usecase_crossing(spec)
    document = {
        "threshold": result.threshold,
        "direction": result.direction,
        "target": result.target,
        "unstable": result.unstable,
        "histogram": dict(result.histogram),
        "records": [
            {"entity": r.entity, "crossing_time": r.crossing_time, "path": r.path} for r in result.records
        ],
    }
    _emit(args, document, result.frame())
    if args.out and args.format == "csv":
        result.histogram_frame().to_csv(
            Path(args.out).with_suffix(".histogram.csv"), index=False, lineterminator="\n"
        )
    return 0


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    common.add_argument("--model", help="model JSON file or registered dataset name")
    common.add_argument("--data", help="input CSV")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default: csv)")
    common.add_argument("--config", help="JSON or YAML settings file")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    return common


def _add_experiment_arguments(parser: argparse.ArgumentParser, horizon: int = 1) -> None:
    parser.add_argument("--dataset", default="german", help="registered dataset name or panel CSV (default: german)")
    parser.add_argument("--train-size", type=int, default=500)
    parser.add_argument("--horizon", type=int, default=horizon)
    parser.add_argument("--lag", type=int, help="VAR order of the fitted model (default: the true order)")
    parser.add_argument("--targets", help="comma-separated scored components")
    parser.add_argument("--intervention", help="intervention JSON file")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="causal-var", description="Causal inference on VAR processes.")
    commands = parser.add_subparsers(dest="command", metavar="command")

    def command(name: str, handler: Callable[[argparse.Namespace, Context], int], help_text: str):
        sub = commands.add_parser(name, parents=[common], help=help_text, description=help_text)
        sub.set_defaults(handler=handler)
        return sub

    sub = command("simulate", cmd_simulate, "Simulate a series, a panel or coupled intervened paths.")
    sub.add_argument("--length", type=int, required=True)
    sub.add_argument("--burn-in", type=int)
    sub.add_argument("--entities", type=int, default=1)
    sub.add_argument("--intervention", help="write the intervened path of a coupled run")

    sub = command("fit", cmd_fit, "Fit a VAR by least squares and write the model JSON.")
    sub.add_argument("--lag", type=int, help="VAR order (default: selected by --criterion)")
    sub.add_argument("--max-lag", type=int, default=DEFAULT_MAX_LAG)
    sub.add_argument("--criterion", choices=("aic", "bic"), default="bic")
    sub.add_argument("--graph", help="causal graph JSON constraining the lag coefficients")
    sub.add_argument("--ridge", type=float)
    sub.add_argument("--no-intercept", action="store_true")
    sub.add_argument("--panel", action="store_true", help="--data is a panel CSV with an entity column")
    sub.add_argument("--name", default="fitted")

    sub = command("stability", cmd_stability, "Report the spectral radius of a model.")
    sub.add_argument("--intervention", help="report the stability of the intervened model")
    sub.add_argument("--require-stable", action="store_true", help="exit 3 if the model is unstable")

    sub = command("forecast", cmd_forecast, "Forecast means and covariances, optionally under an intervention.")
    sub.add_argument("--horizon", type=int, required=True)
    sub.add_argument("--origin", type=int, help="last observed time index (default: end of --data)")
    sub.add_argument("--intervention")
    sub.add_argument("--z", type=float, help="width of the confidence bounds")

    sub = command("intervene", cmd_intervene, "Write the intervened model.")
    sub.add_argument("--intervention", required=True)

    sub = command("ce", cmd_ce, "Causal-effect path k = 0..horizon.")
    sub.add_argument("--intervention", required=True)
    sub.add_argument("--horizon", type=int, required=True)

    sub = command("counterfact", cmd_counterfact, "Counterfactual trajectory by abduction and replay.")
    sub.add_argument("--intervention", required=True)
    sub.add_argument("--t0", type=int, required=True)
    sub.add_argument("--t1", type=int)
    sub.add_argument("--panel", action="store_true", help="--data is a panel CSV with an entity column")

    sub = command("scm", cmd_scm, "Equilibrium SCM of a stable model and its solution.")
    sub.add_argument("--intervention")

    sub = command("verify-commutation", cmd_verify_commutation, "Monte Carlo check of the VAR-to-SCM mapping.")
    sub.add_argument("--intervention")
    sub.add_argument("--replicates", type=int, default=5000)
    sub.add_argument("--length", type=int, default=4000)

    sub = command("bench-observational", cmd_bench_observational, "Fitted VAR versus oracle forecasts.")
    _add_experiment_arguments(sub)
    sub.add_argument("--runs", type=int, default=10)

    sub = command("bench-interventional", cmd_bench_interventional, "Estimated versus true causal effects.")
    _add_experiment_arguments(sub)
    sub.add_argument("--runs", type=int, default=10)

    sub = command("usecase-crossing", cmd_usecase_crossing, "Time each entity needs to cross a threshold.")
    _add_experiment_arguments(sub, horizon=10)
    sub.add_argument("--threshold", type=float, required=True)
    sub.add_argument("--direction", choices=("above", "below"), default="above")
    sub.add_argument("--entities", type=int, default=100)
    sub.add_argument("--true-model", action="store_true", help="forecast with the generating model")
    return parser


def _configure_logging(level_name: str, verbose: int) -> None:
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, str(level_name).upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger().setLevel(level)


def _exit_status(code: Any) -> int:
    if code is None:
        return 0
    return code if isinstance(code, int) else 2


def _container(settings_file: Optional[str]):
    if settings_file is None:
        return init(config=build_configuration())
    path = _existing(settings_file, "--config")
    try:
        return init(config=build_configuration(path))
    except CausalVarError:
        raise
    except (ValueError, TypeError) as exc:
        raise settings_error(path, exc) from exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return _exit_status(exc.code)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        container = _container(args.config)
        try:
            _configure_logging(container.get(RuntimeSettings).log_level, args.verbose)
            ctx = Context(runner=container.get(ExperimentRunner), forecast=container.get(ForecastSettings))
            return args.handler(args, ctx)
        finally:
            container.shutdown()
    except CausalVarError as exc:
        sys.stderr.write(f"causal-var {args.command}: {exc}\n")
        return exc.exit_code


__all__ = ["build_parser", "main"]
