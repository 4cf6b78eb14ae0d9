"""
Tests for causal_var.metrics.

Tests cover:
- metrics: reference values, zero error, target selection and validation
- smape_terms edge cases
- mean_and_sd
"""

import math

import numpy as np
import pytest

from causal_var import ModelValidationError, TimeSeries, metrics
from causal_var.metrics import mean_and_sd, smape_terms


class TestMetrics:
    """Tests for metrics."""

    def test_reference_values(self):
        """(1, 3) against (1, 1): MAE 1, RMSE sqrt(2), SMAPE 50."""
        report = metrics([[1.0], [3.0]], [[1.0], [1.0]])
        assert report.mae == pytest.approx(1.0)
        assert report.rmse == pytest.approx(math.sqrt(2.0))
        assert report.smape == pytest.approx(50.0)

    def test_identical_inputs_score_zero(self, rng):
        values = rng.normal(size=(20, 3))
        report = metrics(values, values)
        assert (report.mae, report.rmse, report.smape) == (0.0, 0.0, 0.0)

    def test_symmetric_in_arguments(self, rng):
        a, b = rng.normal(size=(15, 2)), rng.normal(size=(15, 2))
        assert metrics(a, b) == metrics(b, a)

    def test_target_components(self):
        pred = np.array([[0.0, 10.0], [0.0, 10.0]])
        truth = np.zeros((2, 2))
        report = metrics(pred, truth, targets=[0])
        assert report.mae == 0.0
        assert report.target_components == (0,)
        assert metrics(pred, truth, targets=[1]).mae == 10.0

    def test_per_component(self):
        report = metrics([[1.0, 0.0]], [[0.0, 0.0]])
        assert [c.mae for c in report.per_component] == [1.0, 0.0]
        assert report.per_component[0].smape == 200.0

    def test_accepts_time_series_and_vectors(self):
        assert metrics(TimeSeries([[2.0], [2.0]]), [1.0, 1.0]).mae == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ModelValidationError, match="differs"):
            metrics(np.zeros((3, 2)), np.zeros((2, 2)))

    def test_empty_input(self):
        with pytest.raises(ModelValidationError, match="empty"):
            metrics(np.zeros((0, 2)), np.zeros((0, 2)))

    def test_target_out_of_range(self):
        with pytest.raises(ModelValidationError, match="out of range"):
            metrics(np.zeros((2, 2)), np.zeros((2, 2)), targets=[2])


class TestHelpers:
    """Tests for smape_terms and mean_and_sd."""

    def test_zero_over_zero_is_zero(self):
        assert smape_terms(np.zeros(3), np.zeros(3)).tolist() == [0.0, 0.0, 0.0]

    def test_smape_bounded(self):
        assert smape_terms(np.array([1.0]), np.array([-1.0]))[0] == 2.0

    def test_mean_and_sd(self):
        mean, sd = mean_and_sd([1.0, 2.0, 3.0])
        assert mean == 2.0
        assert sd == pytest.approx(1.0)

    def test_single_value_has_zero_sd(self):
        assert mean_and_sd([4.0]) == (4.0, 0.0)

    def test_no_values(self):
        mean, sd = mean_and_sd([])
        assert math.isnan(mean) and math.isnan(sd)
