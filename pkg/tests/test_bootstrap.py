"""
Tests for causal_var.bootstrap.

Tests cover:
- init(): application modules, user modules, plugin merging and de-duplication
- CAUSAL_VAR_AUTO_PLUGINS control
- Parameter forwarding to pico_ioc.init()
- Dataset harvesting into the DatasetRegistry override
- _load_plugin_modules: entry-point discovery, broken plugins, self-filtering
- Module helpers: _to_module_list, _import_module_like, _normalize_modules
"""

from types import ModuleType
from unittest.mock import MagicMock, patch

import pytest

from causal_var import bootstrap
from causal_var.datasets import GERMAN, DatasetRegistry, SyntheticDataset, pendulum_model


def _module(name, datasets=None):
    mod = ModuleType(name)
    mod.__name__ = name
    if datasets is not None:
        mod.CAUSAL_VAR_DATASETS = datasets
    return mod


def _dataset(name):
    return SyntheticDataset(
        name=name,
        build=pendulum_model,
        target_components=(0,),
        intervened_component=1,
        validation_size=10,
        test_size=20,
    )


def _forwarded(mock_ioc_init):
    """Arguments of the pico_ioc.init() call; *modules* may have been passed positionally."""
    call = mock_ioc_init.call_args
    forwarded = dict(call.kwargs)
    if "modules" not in forwarded:
        forwarded["modules"] = call.args[0]
    return forwarded


class TestInit:
    """Tests for the init() function."""

    def test_returns_pico_container(self):
        """Should return whatever pico_ioc.init() builds."""
        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[]):
                mock_container = MagicMock()
                mock_ioc_init.return_value = mock_container

                assert bootstrap.init() is mock_container
                mock_ioc_init.assert_called_once()

    def test_application_modules_always_included(self):
        """The config and harness modules are scanned even when no modules are given."""
        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[]):
                bootstrap.init()

                names = [m.__name__ for m in _forwarded(mock_ioc_init)["modules"]]
                assert names == ["causal_var.config", "causal_var.harness"]

    def test_user_modules_follow_application_modules(self):
        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[]):
                bootstrap.init(modules=["os", "json"])

                names = [m.__name__ for m in _forwarded(mock_ioc_init)["modules"]]
                assert names[2:] == ["os", "json"]

    def test_merges_plugin_modules(self):
        """Should merge discovered plugins with user modules."""
        plugin = _module("lorenz_plugin")
        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[plugin]):
                bootstrap.init(modules=["os"])

                names = [m.__name__ for m in _forwarded(mock_ioc_init)["modules"]]
                assert "os" in names
                assert "lorenz_plugin" in names

    def test_deduplicates_modules(self):
        """Should keep one copy of a module named by the user and by a plugin."""
        import os as os_module

        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[os_module]):
                bootstrap.init(modules=["os", "causal_var.config"])

                names = [m.__name__ for m in _forwarded(mock_ioc_init)["modules"]]
                assert names.count("os") == 1
                assert names.count("causal_var.config") == 1

    def test_unknown_module_raises(self):
        with patch("causal_var.bootstrap._ioc_init"):
            with pytest.raises(ImportError):
                bootstrap.init(modules=["no_such_module_for_causal_var"])


class TestAutoPlugins:
    """Tests for auto-discovery control via CAUSAL_VAR_AUTO_PLUGINS."""

    def test_enabled_by_default(self, monkeypatch):
        monkeypatch.delenv("CAUSAL_VAR_AUTO_PLUGINS", raising=False)
        with patch("causal_var.bootstrap._ioc_init"):
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[]) as mock_load:
                bootstrap.init()

                mock_load.assert_called_once()

    @pytest.mark.parametrize("value", ["false", "0", "no", "FALSE"])
    def test_disabled(self, monkeypatch, value):
        """Falsy values, in any case, switch discovery off."""
        monkeypatch.setenv("CAUSAL_VAR_AUTO_PLUGINS", value)
        with patch("causal_var.bootstrap._ioc_init"):
            with patch("causal_var.bootstrap._load_plugin_modules") as mock_load:
                bootstrap.init()

                mock_load.assert_not_called()
        assert not bootstrap.auto_plugins_enabled()

    def test_enabled_with_true(self, monkeypatch):
        monkeypatch.setenv("CAUSAL_VAR_AUTO_PLUGINS", "true")
        assert bootstrap.auto_plugins_enabled()


class TestParameterForwarding:
    """Tests for parameter forwarding to pico_ioc.init()."""

    def test_forwards_config(self):
        mock_config = MagicMock()
        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[]):
                bootstrap.init(config=mock_config)

                assert _forwarded(mock_ioc_init)["config"] is mock_config

    def test_forwards_profiles(self):
        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[]):
                bootstrap.init(profiles=["bench"])

                assert _forwarded(mock_ioc_init)["profiles"] == ["bench"]

    def test_user_overrides_are_kept(self):
        """User overrides survive next to the dataset registry override."""
        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[]):
                bootstrap.init(overrides={str: "value"})

                overrides = _forwarded(mock_ioc_init)["overrides"]
                assert overrides[str] == "value"
                assert isinstance(overrides[DatasetRegistry], DatasetRegistry)

    def test_user_registry_wins(self):
        registry = DatasetRegistry([GERMAN])
        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[]):
                bootstrap.init(overrides={DatasetRegistry: registry})

                assert _forwarded(mock_ioc_init)["overrides"][DatasetRegistry] is registry


class TestDatasetHarvesting:
    """Tests for CAUSAL_VAR_DATASETS harvesting."""

    def test_empty_and_missing_lists(self):
        assert bootstrap._harvest_datasets([]) == []
        assert bootstrap._harvest_datasets([_module("plain"), _module("none", None), _module("empty", [])]) == []

    def test_preserves_order(self):
        a, b, c = _dataset("a"), _dataset("b"), _dataset("c")
        mods = [_module("m1", [a, b]), _module("m2", (c,))]
        assert bootstrap._harvest_datasets(mods) == [a, b, c]

    def test_plugin_datasets_reach_the_registry(self):
        """Datasets declared by a plugin are registered after the built-ins."""
        plugin = _module("lorenz_plugin", [_dataset("lorenz")])
        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[plugin]):
                bootstrap.init()

                registry = _forwarded(mock_ioc_init)["overrides"][DatasetRegistry]
                assert registry.names() == ("german", "lorenz", "pendulum")

    def test_duplicate_name_keeps_builtin(self, caplog):
        plugin = _module("shadow", [_dataset("german")])
        with patch("causal_var.bootstrap._ioc_init") as mock_ioc_init:
            with patch("causal_var.bootstrap._load_plugin_modules", return_value=[plugin]):
                with caplog.at_level("WARNING", logger="causal_var.datasets"):
                    bootstrap.init()

                registry = _forwarded(mock_ioc_init)["overrides"][DatasetRegistry]
                assert registry.get("german") is GERMAN
                assert "already registered" in caplog.text

    def test_real_container_resolves_plugin_dataset(self, causal_container):
        """A module passed to init() contributes datasets to the resolved registry."""
        mod = _module("inline_datasets", [_dataset("inline")])
        container = causal_container(modules=[mod])
        assert "inline" in container.get(DatasetRegistry)


class TestLoadPluginModules:
    """Tests for _load_plugin_modules."""

    def _entry_point(self, name, module):
        ep = MagicMock()
        ep.name = name
        ep.module = module
        return ep

    def _patch_eps(self, eps):
        result = MagicMock()
        result.select.return_value = eps
        return patch("causal_var.bootstrap.entry_points", return_value=result), result

    def test_empty_group(self):
        patcher, result = self._patch_eps([])
        with patcher:
            assert bootstrap._load_plugin_modules() == []
        result.select.assert_called_once_with(group="causal_var.datasets")

    def test_loads_valid_plugin(self):
        plugin = _module("lorenz_var")
        patcher, _ = self._patch_eps([self._entry_point("lorenz", "lorenz_var")])
        with patcher:
            with patch("causal_var.bootstrap.import_module", return_value=plugin):
                assert bootstrap._load_plugin_modules() == [plugin]

    @pytest.mark.parametrize("module", ["causal_var", "causal_var.datasets"])
    def test_skips_own_package(self, module):
        patcher, _ = self._patch_eps([self._entry_point("self", module)])
        with patcher:
            with patch("causal_var.bootstrap.import_module") as mock_import:
                assert bootstrap._load_plugin_modules() == []
                mock_import.assert_not_called()

    def test_broken_plugin_is_logged_and_skipped(self):
        patcher, _ = self._patch_eps([self._entry_point("broken", "broken_plugin")])
        with patcher:
            with patch("causal_var.bootstrap.import_module", side_effect=ImportError("Module not found")):
                with patch("causal_var.bootstrap.logger") as mock_logger:
                    assert bootstrap._load_plugin_modules() == []
                    mock_logger.warning.assert_called_once()
                    assert "Failed to load causal-var dataset plugin" in mock_logger.warning.call_args[0][0]

    def test_deduplicates_plugins(self):
        plugin = _module("lorenz_var")
        eps = [self._entry_point("a", "lorenz_var"), self._entry_point("b", "lorenz_var")]
        patcher, _ = self._patch_eps(eps)
        with patcher:
            with patch("causal_var.bootstrap.import_module", return_value=plugin):
                assert len(bootstrap._load_plugin_modules()) == 1

    def test_custom_group(self):
        patcher, result = self._patch_eps([])
        with patcher:
            bootstrap._load_plugin_modules(group="custom.group")
        result.select.assert_called_once_with(group="custom.group")


class TestModuleHelpers:
    """Tests for the module normalisation helpers."""

    def test_to_module_list(self):
        assert bootstrap._to_module_list(None) == []
        assert bootstrap._to_module_list("myapp") == ["myapp"]
        assert bootstrap._to_module_list(("a", "b")) == ["a", "b"]
        assert bootstrap._to_module_list(b"raw") == [b"raw"]

    def test_import_module_like(self):
        import json

        assert bootstrap._import_module_like(json) is json
        assert bootstrap._import_module_like("json") is json
        assert bootstrap._import_module_like(json.dumps) is json

    def test_import_module_like_without_module(self):
        class Anonymous:
            __module__ = None

        with pytest.raises(ImportError, match="Cannot determine module"):
            bootstrap._import_module_like(Anonymous())

    def test_normalize_keeps_first_occurrence(self):
        names = [m.__name__ for m in bootstrap._normalize_modules(["json", "os", "json"])]
        assert names == ["json", "os"]
