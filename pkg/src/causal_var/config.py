"""Configuration for the application layer.

The numerical functions of causal-var take every tunable as a keyword
argument.  The harness and the CLI read the values below from a pico-ioc
configuration context and pass them down explicitly.

Sources are layered in increasing priority::

    built-in DEFAULTS  <  JSON/YAML settings file  <  overrides  <  environment variables

Environment variables follow the pico-ioc naming convention: the dotted
path upper-cased with underscores, e.g. ``causal_var.simulation.burn_in``
is overridden by ``CAUSAL_VAR_SIMULATION_BURN_IN``.
"""

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pico_ioc import (
    ContextConfig,
    DictSource,
    EnvSource,
    JsonTreeSource,
    YamlTreeSource,
    configuration,
    configured,
)

from .errors import DataFormatError

logger = logging.getLogger(__name__)

DEFAULT_STABILITY_MARGIN = 1e-8
DEFAULT_GRAPH_TOLERANCE = 1e-12
DEFAULT_CONDITION_LIMIT = 1e12
DEFAULT_NOISE_SCALE = 0.1
DEFAULT_BURN_IN = 200
DEFAULT_OVERFLOW_BOUND = 1e100
DEFAULT_Z_SCORE = 1.96

DEFAULTS: Dict[str, Any] = {
    "causal_var": {
        "threads": 0,
        "log_level": "WARNING",
        "stability": {
            "margin": DEFAULT_STABILITY_MARGIN,
            "graph_tolerance": DEFAULT_GRAPH_TOLERANCE,
            "condition_limit": DEFAULT_CONDITION_LIMIT,
        },
        "simulation": {
            "noise_scale": DEFAULT_NOISE_SCALE,
            "burn_in": DEFAULT_BURN_IN,
            "overflow_bound": DEFAULT_OVERFLOW_BOUND,
        },
        "estimation": {"ridge": 0.0},
        "forecast": {"z_score": DEFAULT_Z_SCORE},
    }
}


@configured(prefix="causal_var")
@dataclass
class RuntimeSettings:
    """Process-wide knobs.

    ``threads`` caps the worker pool of the benchmark runners and of the
    Monte Carlo verification; ``0`` means one worker per CPU.
    """

    threads: int = 0
    log_level: str = "WARNING"

    def worker_count(self) -> int:
        if self.threads > 0:
            return self.threads
        return os.cpu_count() or 1


@configured(prefix="causal_var.stability")
@dataclass
class StabilitySettings:
    margin: float = DEFAULT_STABILITY_MARGIN
    graph_tolerance: float = DEFAULT_GRAPH_TOLERANCE
    condition_limit: float = DEFAULT_CONDITION_LIMIT


@configured(prefix="causal_var.simulation")
@dataclass
class SimulationSettings:
    noise_scale: float = DEFAULT_NOISE_SCALE
    burn_in: int = DEFAULT_BURN_IN
    overflow_bound: float = DEFAULT_OVERFLOW_BOUND


@configured(prefix="causal_var.estimation")
@dataclass
class EstimationSettings:
    ridge: float = 0.0


@configured(prefix="causal_var.forecast")
@dataclass
class ForecastSettings:
    z_score: float = DEFAULT_Z_SCORE


YAML_SUFFIXES = (".yaml", ".yml")


def settings_source(path: Union[str, Path]) -> Union[JsonTreeSource, YamlTreeSource]:
    """pico-ioc tree source for a settings file; YAML by suffix, JSON otherwise.

    YAML files need the ``yaml`` extra (PyYAML).
    """
    path = Path(path)
    if path.suffix.lower() in YAML_SUFFIXES:
        return YamlTreeSource(str(path))
    return JsonTreeSource(str(path))


def build_configuration(
    settings_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
    use_env: bool = True,
) -> ContextConfig:
    """Assemble the pico-ioc configuration context.

    Sources are passed to ``configuration()`` lowest priority first:
    ``DEFAULTS``, the settings file, *overrides*, then the environment.

    Args:
        settings_file: Optional JSON or YAML settings file.
        overrides: Optional mapping layered over the file (used by tests
            and by CLI flags).
        use_env: Whether environment variables take the highest priority.

    Returns:
        A ``ContextConfig`` ready to pass to :func:`causal_var.init`.

    Raises:
        DataFormatError: If the settings file cannot be parsed.
    """
    sources: List[Any] = [DictSource(DEFAULTS)]
    if settings_file is not None:
        logger.debug("Layering settings from %s", settings_file)
        sources.append(settings_source(settings_file))
    if overrides:
        sources.append(DictSource(overrides))
    if use_env:
        sources.append(EnvSource())
    try:
        return configuration(*sources)
    except (ValueError, TypeError) as exc:
        raise settings_error(settings_file, exc) from exc


def settings_error(settings_file: Optional[Union[str, Path]], exc: Exception) -> DataFormatError:
    """Wrap a parse failure of *settings_file* raised by a pico-ioc source."""
    return DataFormatError(f"settings file {settings_file} could not be loaded: {exc}", row=getattr(exc, "lineno", None))


__all__ = [
    "DEFAULTS",
    "RuntimeSettings",
    "StabilitySettings",
    "SimulationSettings",
    "EstimationSettings",
    "ForecastSettings",
    "build_configuration",
    "settings_error",
    "settings_source",
]
