"""
Pytest configuration and shared fixtures for causal-var tests.
"""

import numpy as np
import pytest

import causal_var
from causal_var.config import build_configuration
from causal_var.datasets import german_model, german_svar, pendulum_model


@pytest.fixture(autouse=True)
def _disable_auto_plugins(monkeypatch):
    """Isolate every test from dataset plugins installed in the environment."""
    monkeypatch.setenv("CAUSAL_VAR_AUTO_PLUGINS", "false")


@pytest.fixture
def scalar_model():
    """AR(1) with coefficient 0.5, zero intercept and unit noise."""
    return causal_var.VarModel.scalar(0.5)


@pytest.fixture
def pendulum():
    """The two-component pendulum VAR(1), noise scale 0.1."""
    return pendulum_model()


@pytest.fixture
def german():
    """Reduced form of the German credit SVAR(4), noise scale 0.1."""
    return german_model()


@pytest.fixture
def german_structural():
    return german_svar()


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def causal_container():
    """Create containers with an isolated configuration and shut them down after the test."""
    containers = []

    def _init(overrides=None, settings_file=None, **kwargs):
        config = build_configuration(settings_file=settings_file, overrides=overrides, use_env=False)
        c = causal_var.init(config=config, **kwargs)
        containers.append(c)
        return c

    yield _init

    for c in containers:
        c.shutdown()
