"""Container bootstrap with dataset-plugin discovery.

:func:`init` wraps ``pico_ioc.init()`` and adds three steps:

1. the *modules* argument is normalised (imported, de-duplicated) and
   always includes the causal-var application modules;
2. extension packages registering the ``causal_var.datasets`` entry-point
   group are imported, unless ``CAUSAL_VAR_AUTO_PLUGINS`` is ``"false"``,
   ``"0"`` or ``"no"``;
3. every loaded module is inspected for a ``CAUSAL_VAR_DATASETS`` list of
   :class:`~causal_var.datasets.SyntheticDataset` objects, which are added
   to the :class:`~causal_var.datasets.DatasetRegistry` handed to the
   container as an override.

Typical usage::

    from causal_var import init
    from causal_var.harness import ExperimentRunner

    container = init()
    runner = container.get(ExperimentRunner)
"""

import inspect
import logging
import os
from importlib import import_module
from importlib.metadata import entry_points
from types import ModuleType
from typing import Any, Iterable, List, Union

from pico_ioc import PicoContainer
from pico_ioc import init as _ioc_init

from .datasets import BUILTIN_DATASETS, DatasetRegistry, SyntheticDataset

logger = logging.getLogger(__name__)

PLUGIN_GROUP = "causal_var.datasets"
AUTO_PLUGINS_ENV = "CAUSAL_VAR_AUTO_PLUGINS"
APPLICATION_MODULES = ("causal_var.config", "causal_var.harness")


def _to_module_list(modules: Union[Any, Iterable[Any]]) -> List[Any]:
    """Coerce *modules* into a flat list; strings count as single items.

    Example:
        >>> _to_module_list("myapp")
        ['myapp']
        >>> _to_module_list(["a", "b"])
        ['a', 'b']
    """
    if modules is None:
        return []
    if isinstance(modules, Iterable) and not isinstance(modules, (str, bytes)):
        return list(modules)
    return [modules]


def _import_module_like(obj: Any) -> ModuleType:
    """Resolve a module, a dotted name or any object to its imported module.

    Raises:
        ImportError: If the module cannot be determined or imported.
    """
    if isinstance(obj, ModuleType):
        return obj
    if isinstance(obj, str):
        return import_module(obj)
    module_name = getattr(obj, "__module__", None) or getattr(obj, "__name__", None)
    if not module_name:
        raise ImportError(f"Cannot determine module for object {obj!r}")
    return import_module(module_name)


def _normalize_modules(raw: Iterable[Any]) -> List[ModuleType]:
    """Import and de-duplicate module references, keeping first occurrences."""
    seen: set[str] = set()
    result: List[ModuleType] = []
    for item in raw:
        m = _import_module_like(item)
        if m.__name__ not in seen:
            seen.add(m.__name__)
            result.append(m)
    return result


def _harvest_datasets(modules: List[ModuleType]) -> List[SyntheticDataset]:
    """Collect module-level ``CAUSAL_VAR_DATASETS`` lists.

    Example:
        If ``my_plugin`` defines::

            CAUSAL_VAR_DATASETS = [SyntheticDataset(name="lorenz", ...)]

        then ``_harvest_datasets([my_plugin])`` returns that dataset.
    """
    datasets: List[SyntheticDataset] = []
    for m in modules:
        module_datasets = getattr(m, "CAUSAL_VAR_DATASETS", None)
        if module_datasets:
            datasets.extend(module_datasets)
    return datasets


def _load_plugin_modules(group: str = PLUGIN_GROUP) -> List[ModuleType]:
    """Import the modules registered under the entry-point *group*.

    Entry points pointing at ``causal_var`` itself are skipped.  Plugins
    that fail to import are logged at ``WARNING`` level and skipped so that
    one broken extension does not take the application down.

    Example:
        Given a ``pyproject.toml`` entry::

            [project.entry-points."causal_var.datasets"]
            lorenz = "lorenz_var.datasets"

        ``_load_plugin_modules()`` imports and returns ``lorenz_var.datasets``.
    """
    selected = entry_points().select(group=group)

    seen: set[str] = set()
    modules: List[ModuleType] = []

    for ep in selected:
        try:
            if ep.module == "causal_var" or ep.module.startswith("causal_var."):
                continue
            m = import_module(ep.module)
        except Exception as exc:
            logger.warning(
                "Failed to load causal-var dataset plugin '%s' (%s): %s",
                ep.name,
                ep.module,
                exc,
            )
            continue

        if m.__name__ not in seen:
            seen.add(m.__name__)
            modules.append(m)

    return modules


def auto_plugins_enabled() -> bool:
    return os.getenv(AUTO_PLUGINS_ENV, "true").lower() not in ("0", "false", "no")


_IOC_INIT_SIG = inspect.signature(_ioc_init)


def init(*args: Any, **kwargs: Any) -> PicoContainer:
    """Bootstrap a container for the causal-var application layer.

    Accepts the parameters of ``pico_ioc.init()``; *modules* may be
    omitted.  A :class:`DatasetRegistry` holding the built-in and harvested
    datasets is added to *overrides* unless the caller provides one.

    Args:
        *args: Positional arguments forwarded to ``pico_ioc.init()``.
        **kwargs: Keyword arguments forwarded to ``pico_ioc.init()``,
            typically *modules*, *config* (see
            :func:`causal_var.config.build_configuration`) and *overrides*.

    Returns:
        PicoContainer: The initialised container.

    Raises:
        ImportError: If a user-specified module cannot be imported.
    """
    if not args and "modules" not in kwargs:
        kwargs["modules"] = []
    bound = _IOC_INIT_SIG.bind(*args, **kwargs)
    bound.apply_defaults()

    base_modules = _normalize_modules(list(APPLICATION_MODULES) + _to_module_list(bound.arguments["modules"]))

    if auto_plugins_enabled():
        plugin_modules = _load_plugin_modules()
        all_modules = _normalize_modules(list(base_modules) + plugin_modules)
    else:
        all_modules = base_modules

    bound.arguments["modules"] = all_modules

    overrides = dict(bound.arguments.get("overrides") or {})
    if DatasetRegistry not in overrides:
        harvested = _harvest_datasets(all_modules)
        if harvested:
            logger.info("Harvested datasets: %s", ", ".join(d.name for d in harvested))
        overrides[DatasetRegistry] = DatasetRegistry(list(BUILTIN_DATASETS) + harvested)
    bound.arguments["overrides"] = overrides

    return _ioc_init(*bound.args, **bound.kwargs)


init.__signature__ = _IOC_INIT_SIG

__all__ = ["init", "auto_plugins_enabled", "PLUGIN_GROUP", "AUTO_PLUGINS_ENV"]
