"""
Tests for causal_var.harness.

Tests cover:
- ExperimentSpec validation and description
- run_observational: oracle comparison, finite-sample degradation, reproducibility, CSV datasets
- run_interventional: default additive and forcing rows, exact zero before propagation,
  growth with the horizon, size ordering, asymptote ratio, scoring metadata
- module-level runners resolve their settings like the CLI
- run_usecase_crossing: degenerate and non-degenerate histograms
- crossing_time and run_seed helpers
"""

from dataclasses import replace

import numpy as np
import pytest

from causal_var import (
    DomainError,
    ExperimentRunner,
    ExperimentSpec,
    Intervention,
    ModelValidationError,
    UsageError,
    run_interventional,
    run_observational,
    run_usecase_crossing,
)
from causal_var.config import EstimationSettings, RuntimeSettings, SimulationSettings, StabilitySettings
from causal_var.datasets import CREDIT_SCORE, DatasetRegistry, generate_pendulum, save_panel_csv
from causal_var.harness import configured_runner, crossing_time, run_seed


def _runner(threads: int) -> ExperimentRunner:
    return ExperimentRunner(
        RuntimeSettings(threads=threads),
        StabilitySettings(),
        SimulationSettings(),
        EstimationSettings(),
        DatasetRegistry(),
    )


def _ratio(result, metric: str = "mae") -> float:
    return getattr(result.row("var"), f"{metric}_mean") / getattr(result.row("oracle"), f"{metric}_mean")


class TestExperimentSpec:
    """Tests for ExperimentSpec."""

    def test_runs_must_be_positive(self):
        with pytest.raises(ModelValidationError, match="n_runs"):
            ExperimentSpec("german", n_runs=0)

    def test_direction_checked(self):
        with pytest.raises(ModelValidationError, match="direction"):
            ExperimentSpec("german", direction="sideways")

    def test_describe_includes_intervention(self):
        spec = ExperimentSpec("pendulum", intervention=Intervention.additive([0.0, 1.0]), target_components=[1])
        described = spec.describe()
        assert described["intervention"]["kind"] == "additive"
        assert described["target_components"] == (1,)

    def test_unknown_dataset(self):
        with pytest.raises(UsageError, match="unknown dataset 'nope'"):
            run_observational(ExperimentSpec("nope", n_runs=1))


class TestHelpers:
    """Tests for crossing_time and run_seed."""

    def test_crossing_time(self):
        assert crossing_time([0.0, 0.5, 1.0, 2.0], 1.0) == 2
        assert crossing_time([3.0, 2.0, 1.0], 1.5, "below") == 2
        assert crossing_time([0.0, 0.1], 1.0) is None

    def test_run_seed_is_stable_and_distinct(self):
        assert run_seed(0, 1) == run_seed(0, 1)
        assert len({run_seed(0, r) for r in range(20)}) == 20
        assert run_seed(0, 0) != run_seed(1, 0)


class TestObservational:
    """Tests for run_observational."""

    def test_german_large_sample_matches_oracle(self):
        """At 500 training samples and h=1 the fitted VAR is within 10% of the oracle."""
        result = run_observational(ExperimentSpec("german", train_size=500, horizon=1, n_runs=10, seed=7))
        assert _ratio(result) <= 1.1
        assert [row.label for row in result.rows] == ["var", "oracle"]

    @pytest.mark.slow
    def test_german_small_sample_degrades(self):
        """At h=10 the fitted/oracle ratio is worse with 100 samples than with 500."""
        small = run_observational(ExperimentSpec("german", train_size=100, horizon=10, n_runs=10, seed=3))
        large = run_observational(ExperimentSpec("german", train_size=500, horizon=10, n_runs=10, seed=3))
        assert _ratio(small) > _ratio(large)

    def test_oracle_never_loses_beyond_noise(self):
        result = run_observational(ExperimentSpec("pendulum", train_size=200, horizon=3, n_runs=5, seed=1))
        var, oracle = result.row("var"), result.row("oracle")
        assert oracle.mae_mean <= var.mae_mean + 3 * var.mae_sd / np.sqrt(5)

    def test_pendulum_error_grows_with_horizon(self):
        """Oracle errors at h=10 are several times those at h=1."""
        spec = ExperimentSpec("pendulum", train_size=200, n_runs=3, seed=2, target_components=(0, 1))
        short = run_observational(spec)
        long = run_observational(replace(spec, horizon=10))
        assert long.row("oracle").mae_mean > 2.5 * short.row("oracle").mae_mean

    def test_reproducible_across_worker_counts(self):
        spec = ExperimentSpec("pendulum", train_size=100, horizon=2, n_runs=4, seed=11, test_size=50)
        one = _runner(1).run_observational(spec)
        four = _runner(4).run_observational(spec)
        np.testing.assert_array_equal(one.values("var"), four.values("var"))
        assert one.rows == four.rows

    def test_metadata(self):
        spec = ExperimentSpec("pendulum", train_size=60, n_runs=2, test_size=10)
        result = run_observational(spec)
        assert result.metadata["benchmark"] == "observational"
        assert result.metadata["seeds"] == [run_seed(0, 0), run_seed(0, 1)]
        assert "numpy" in result.metadata["versions"]
        assert list(result.frame().columns)[:2] == ["label", "dataset"]

    def test_csv_dataset_runs_once(self, tmp_path):
        panel, _ = generate_pendulum(seed=4, length=300)
        path = tmp_path / "pendulum.csv"
        save_panel_csv(panel, path)
        result = run_observational(ExperimentSpec(str(path), train_size=200, horizon=1, n_runs=5, lag=1))
        assert [row.label for row in result.rows] == ["var"]
        assert result.row("var").n_runs == 1

    def test_csv_dataset_too_short(self, tmp_path):
        panel, _ = generate_pendulum(seed=4, length=50)
        path = tmp_path / "short.csv"
        save_panel_csv(panel, path)
        with pytest.raises(DomainError, match="too few"):
            run_observational(ExperimentSpec(str(path), train_size=60, lag=1))

    def test_runner_from_container(self, causal_container):
        runner = causal_container(overrides={"causal_var": {"threads": 1}}).get(ExperimentRunner)
        assert runner.runtime.worker_count() == 1
        assert "german" in runner.registry

    def test_module_runner_reads_environment(self, monkeypatch):
        monkeypatch.setenv("CAUSAL_VAR_THREADS", "1")
        with configured_runner() as runner:
            assert runner.runtime.worker_count() == 1

    def test_module_function_uses_configured_runner(self, monkeypatch):
        """Without an explicit runner the benchmark sees CAUSAL_VAR_* settings."""
        monkeypatch.setenv("CAUSAL_VAR_THREADS", "1")
        monkeypatch.setenv("CAUSAL_VAR_ESTIMATION_RIDGE", "0.5")
        result = run_observational(ExperimentSpec("pendulum", train_size=60, n_runs=2, test_size=10))
        assert result.metadata["ridge"] == 0.5

    def test_settings_file_reaches_runner(self, tmp_path):
        path = tmp_path / "settings.json"
        path.write_text('{"causal_var": {"threads": 3}}')
        with configured_runner(path) as runner:
            assert runner.runtime.threads == 3


class TestInterventional:
    """Tests for run_interventional."""

    def test_effect_is_exactly_zero_before_propagation(self):
        """Credit Score has no effect at h=1 under either model."""
        result = run_interventional(ExperimentSpec("german", train_size=500, horizon=1, n_runs=3, test_size=10))
        assert result.row("additive").mae_mean == 0.0
        assert result.row("additive").mae_sd == 0.0
        assert result.row("forcing").mae_mean <= 1e-12

    @pytest.mark.parametrize("dataset", ["german", "pendulum"])
    def test_default_rows_are_additive_and_forcing(self, dataset):
        spec = ExperimentSpec(dataset, train_size=200, horizon=2, n_runs=2, test_size=10)
        result = run_interventional(spec)
        assert [row.label for row in result.rows] == ["additive", "forcing"]
        assert all(row.n_runs == 2 for row in result.rows)

    def test_german_forcing_effect_reaches_credit_score(self):
        """Forcing Expertise to 5 moves Credit Score once the lag path closes, and the fit misses it slightly."""
        result = run_interventional(ExperimentSpec("german", train_size=200, horizon=8, n_runs=2, test_size=10))
        assert result.row("forcing").mae_mean > 0.0
        assert np.all(result.values("forcing") > 0.0)

    @pytest.mark.parametrize("label", ["additive", "forcing"])
    def test_pendulum_error_grows_with_horizon(self, label):
        """Position is untouched at the first step and drifts from the truth by step 10."""
        spec = ExperimentSpec("pendulum", train_size=200, n_runs=3, seed=2, test_size=20)
        short = run_interventional(spec)
        long = run_interventional(replace(spec, horizon=10))
        assert short.row(label).mae_mean <= 1e-12
        assert long.row(label).mae_mean > short.row(label).mae_mean

    def test_scoring_is_recorded(self):
        result = run_interventional(ExperimentSpec("pendulum", train_size=100, horizon=4, n_runs=1, test_size=5))
        assert result.metadata["scoring"]["effect_rows"] == [0, 3]
        assert result.metadata["scoring"]["forecast_steps"] == [1, 4]
        assert "target components" in result.metadata["scoring"]["average"]

    @pytest.mark.slow
    def test_german_effect_estimation(self):
        """At h=10 more data helps and the error stays below 5% of the long-run effect."""
        large = run_interventional(ExperimentSpec("german", train_size=500, horizon=10, n_runs=10, test_size=10))
        small = run_interventional(ExperimentSpec("german", train_size=100, horizon=10, n_runs=10, test_size=10))
        assert large.row("additive").mae_mean <= small.row("additive").mae_mean
        asymptote = np.mean([run.extras["asymptote_magnitude"] for run in large.runs])
        assert large.row("additive").mae_mean <= 0.05 * asymptote

    def test_forcing_uses_batch_differences(self):
        iv = Intervention.forcing([0.0, 1.0], [0.0, 0.5])
        result = run_interventional(
            ExperimentSpec("pendulum", train_size=300, horizon=3, n_runs=2, test_size=5, intervention=iv)
        )
        assert result.row("forcing").n_runs == 2
        assert result.row("forcing").mae_mean >= 0.0

    def test_csv_dataset_rejected(self, tmp_path):
        panel, _ = generate_pendulum(seed=1, length=30)
        path = tmp_path / "p.csv"
        save_panel_csv(panel, path)
        with pytest.raises(DomainError, match="known generator"):
            run_interventional(ExperimentSpec(str(path)))


class TestCrossing:
    """Tests for run_usecase_crossing."""

    def _spec(self, **changes):
        base = dict(dataset="german", train_size=100, horizon=10, n_entities=30, seed=5, use_true_model=True)
        base.update(changes)
        return ExperimentSpec(**base)

    def test_threshold_required(self):
        with pytest.raises(DomainError, match="threshold"):
            run_usecase_crossing(self._spec())

    def test_threshold_below_start_crosses_immediately(self):
        result = run_usecase_crossing(self._spec(threshold=-1e6))
        assert all(record.crossing_time == 0 for record in result.records)
        assert dict(result.histogram)["0"] == 30

    def test_unreachable_threshold_never_crosses(self):
        null = Intervention.additive(np.zeros(7))
        result = run_usecase_crossing(self._spec(threshold=1e6, intervention=null))
        assert result.never == 30
        assert [name for name, _ in result.histogram] == [str(k) for k in range(11)] + ["never"]

    def test_histogram_is_non_degenerate(self):
        """With the median path minimum as threshold some entities cross and some never do."""
        baseline = run_usecase_crossing(self._spec(threshold=-1e6))
        threshold = float(np.median([record.path.min() for record in baseline.records]))
        result = run_usecase_crossing(self._spec(threshold=threshold, direction="below"))
        assert 0 < result.crossed < 30
        assert result.target == CREDIT_SCORE
        assert sum(count for _, count in result.histogram) == 30

    def test_paths_start_at_last_observation(self):
        result = run_usecase_crossing(self._spec(threshold=0.0, n_entities=3))
        assert all(record.path.shape == (11,) for record in result.records)
        assert result.frame()["entity"].tolist() == ["0000", "0001", "0002"]

    def test_fitted_model(self):
        result = run_usecase_crossing(self._spec(threshold=0.0, use_true_model=False, n_entities=20, train_size=60))
        assert len(result.records) == 20
