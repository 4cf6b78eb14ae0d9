"""JSON documents for models, interventions, graphs, SCMs and fit reports.

Reduced-form models are written in effect-row orientation and the
document says so; a model document with any other ``orientation`` is
rejected.  Structural models keep the cause-row layout and are tagged
``"kind": "svar"``.  Floats are written with Python's shortest
round-trip representation, so save/load is exact.
"""

import json
from pathlib import Path
from typing import Any, Dict, Mapping, Union

import numpy as np

from .core import StructuralVarModel, VarModel, svar_to_var
from .errors import DataFormatError, DomainError, ModelValidationError
from .estimate import FitReport
from .forecast import CausalEffectPath, Forecast
from .graph import CausalGraph
from .intervene import Intervention, InterventionKind
from .scm import LinearScm

PathLike = Union[str, Path]
EFFECT_ROW = "effect-row"
CAUSE_ROW = "cause-row"


def _require(document: Mapping[str, Any], *keys: str) -> None:
    missing = [key for key in keys if key not in document]
    if missing:
        raise DataFormatError(f"document is missing key(s): {', '.join(missing)}")


def _labels(document: Mapping[str, Any]):
    labels = document.get("labels")
    return tuple(labels) if labels is not None else None


def model_to_dict(model: VarModel) -> Dict[str, Any]:
    document = {
        "kind": "var",
        "name": model.name,
        "dim": model.dim,
        "lag": model.lag,
        "orientation": EFFECT_ROW,
        "intercept": model.intercept.tolist(),
        "coeffs": model.coeffs.tolist(),
        "noise_cov": model.noise_cov.tolist(),
    }
    if model.labels is not None:
        document["labels"] = list(model.labels)
    return document


def model_from_dict(document: Mapping[str, Any]) -> VarModel:
    """Parse a reduced-form model document.

    Raises:
        DataFormatError: On missing keys, a wrong orientation or
            inconsistent ``dim``/``lag``.
    """
    _require(document, "dim", "lag", "intercept", "coeffs", "noise_cov", "orientation")
    if document["orientation"] != EFFECT_ROW:
        raise DataFormatError(f"unsupported orientation '{document['orientation']}', expected '{EFFECT_ROW}'")
    try:
        model = VarModel(
            intercept=np.asarray(document["intercept"], dtype=float),
            coeffs=np.asarray(document["coeffs"], dtype=float),
            noise_cov=np.asarray(document["noise_cov"], dtype=float),
            labels=_labels(document),
            name=document.get("name", "model"),
        )
    except ModelValidationError:
        raise
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid model document: {exc}") from exc
    if model.dim != document["dim"] or model.lag != document["lag"]:
        raise DataFormatError(
            f"declared dim/lag ({document['dim']}, {document['lag']}) "
            f"do not match the arrays ({model.dim}, {model.lag})"
        )
    return model


def svar_to_dict(svar: StructuralVarModel) -> Dict[str, Any]:
    document = {
        "kind": "svar",
        "name": svar.name,
        "dim": svar.dim,
        "lag": svar.lag,
        "orientation": CAUSE_ROW,
        "intercept": svar.intercept.tolist(),
        "instantaneous": svar.instantaneous.tolist(),
        "lag_coeffs": svar.lag_coeffs.tolist(),
        "noise_cov": svar.noise_cov.tolist(),
    }
    if svar.labels is not None:
        document["labels"] = list(svar.labels)
    return document


def svar_from_dict(document: Mapping[str, Any]) -> StructuralVarModel:
    _require(document, "intercept", "instantaneous", "lag_coeffs", "noise_cov", "orientation")
    if document["orientation"] != CAUSE_ROW:
        raise DataFormatError(f"structural models are stored '{CAUSE_ROW}', got '{document['orientation']}'")
    try:
        return StructuralVarModel(
            intercept=np.asarray(document["intercept"], dtype=float),
            instantaneous=np.asarray(document["instantaneous"], dtype=float),
            lag_coeffs=np.asarray(document["lag_coeffs"], dtype=float),
            noise_cov=np.asarray(document["noise_cov"], dtype=float),
            labels=_labels(document),
            name=document.get("name", "svar"),
        )
    except (ModelValidationError, DomainError):
        raise
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"invalid structural model document: {exc}") from exc


def any_model_from_dict(document: Mapping[str, Any]) -> VarModel:
    """Reduced form of a ``var`` or ``svar`` document."""
    if document.get("kind") == "svar":
        return svar_to_var(svar_from_dict(document))
    return model_from_dict(document)


def intervention_to_dict(intervention: Intervention) -> Dict[str, Any]:
    document = {
        "kind": intervention.kind.value,
        "force": intervention.force.tolist(),
        "start": intervention.start,
    }
    if intervention.target is not None:
        document["target"] = intervention.target.tolist()
    return document


def intervention_from_dict(document: Mapping[str, Any]) -> Intervention:
    _require(document, "kind", "force")
    try:
        kind = InterventionKind(document["kind"])
    except ValueError as exc:
        raise DataFormatError(
            f"unknown intervention kind '{document['kind']}', expected one of "
            f"{', '.join(k.value for k in InterventionKind)}"
        ) from exc
    target = document.get("target")
    return Intervention(
        kind=kind,
        force=np.asarray(document["force"], dtype=float),
        target=np.asarray(target, dtype=float) if target is not None else None,
        start=int(document.get("start", 0)),
    )


def graph_to_dict(graph: CausalGraph) -> Dict[str, Any]:
    document = {"dim": graph.dim, "edges": sorted([list(edge) for edge in graph.edges])}
    if graph.labels is not None:
        document["labels"] = list(graph.labels)
    return document


def graph_from_dict(document: Mapping[str, Any]) -> CausalGraph:
    """Parse ``{"dim", "edges", "labels"?}``; edges may use labels instead of indices."""
    _require(document, "dim", "edges")
    labels = _labels(document)
    lookup = {name: i for i, name in enumerate(labels or ())}

    def resolve(node):
        if not isinstance(node, str):
            return int(node)
        if node not in lookup:
            raise DataFormatError(f"edge refers to unknown component {node!r}")
        return lookup[node]

    edges = [(resolve(cause), resolve(effect)) for cause, effect in document["edges"]]
    return CausalGraph.from_edges(int(document["dim"]), edges, labels)


def scm_to_dict(scm: LinearScm) -> Dict[str, Any]:
    document = {
        "dim": scm.dim,
        "orientation": EFFECT_ROW,
        "coeff": scm.coeff.tolist(),
        "exo_cov": scm.exo_cov.tolist(),
        "mean": scm.mean.tolist(),
    }
    if scm.labels is not None:
        document["labels"] = list(scm.labels)
    return document


def scm_from_dict(document: Mapping[str, Any]) -> LinearScm:
    _require(document, "coeff", "exo_cov", "mean", "orientation")
    if document["orientation"] != EFFECT_ROW:
        raise DataFormatError(f"unsupported orientation '{document['orientation']}', expected '{EFFECT_ROW}'")
    return LinearScm(
        coeff=np.asarray(document["coeff"], dtype=float),
        exo_cov=np.asarray(document["exo_cov"], dtype=float),
        mean=np.asarray(document["mean"], dtype=float),
        labels=_labels(document),
    )


def fit_sidecar(report: FitReport) -> Dict[str, Any]:
    """Information criteria and sample size written next to a fitted model."""
    return {
        "lag": report.lag,
        "aic": report.aic,
        "bic": report.bic,
        "n_effective": report.n_effective,
        "n_parameters": report.n_parameters,
    }


def forecast_to_dict(fc: Forecast) -> Dict[str, Any]:
    return {
        "horizon": fc.horizon,
        "origin": fc.origin,
        "unstable": fc.unstable,
        "means": fc.means.tolist(),
        "covariances": fc.covariances.tolist(),
        "labels": list(fc.labels) if fc.labels else None,
    }


def effect_to_dict(path: CausalEffectPath) -> Dict[str, Any]:
    return {
        "horizon": path.horizon,
        "kind": path.kind.value,
        "effects": path.effects.tolist(),
        "asymptote": path.asymptote.tolist() if path.asymptote is not None else None,
        "labels": list(path.labels) if path.labels else None,
    }


def read_json(path: PathLike) -> Dict[str, Any]:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path} is not valid JSON: {exc.msg}", row=exc.lineno) from exc
    if not isinstance(document, dict):
        raise DataFormatError(f"{path} must contain a JSON object")
    return document


def write_json(document: Mapping[str, Any], path: PathLike) -> None:
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def save_model(model: VarModel, path: PathLike) -> None:
    write_json(model_to_dict(model), path)


def load_model(path: PathLike) -> VarModel:
    return any_model_from_dict(read_json(path))


def load_intervention(path: PathLike) -> Intervention:
    return intervention_from_dict(read_json(path))


def load_graph(path: PathLike) -> CausalGraph:
    return graph_from_dict(read_json(path))


__all__ = [
    "model_to_dict",
    "model_from_dict",
    "svar_to_dict",
    "svar_from_dict",
    "any_model_from_dict",
    "intervention_to_dict",
    "intervention_from_dict",
    "graph_to_dict",
    "graph_from_dict",
    "scm_to_dict",
    "scm_from_dict",
    "fit_sidecar",
    "forecast_to_dict",
    "effect_to_dict",
    "read_json",
    "write_json",
    "save_model",
    "load_model",
    "load_intervention",
    "load_graph",
]
