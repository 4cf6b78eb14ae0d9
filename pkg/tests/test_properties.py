"""
Property-based tests for the metric and model algebra.

Tests cover:
- RMSE >= MAE and SMAPE in [0, 200]
- metric symmetry and invariance under row permutations
- additive interventions never change stability
- graph edges survive the networkx view and the effect-row mask
"""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from causal_var import CausalGraph, Intervention, VarModel, check_stability, intervened_stability, metrics

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
pairs = st.integers(1, 12).flatmap(
    lambda n: st.tuples(arrays(np.float64, (n, 2), elements=finite), arrays(np.float64, (n, 2), elements=finite))
)


@given(pairs)
def test_rmse_dominates_mae(pair):
    report = metrics(*pair)
    assert report.rmse >= report.mae - 1e-9
    assert 0.0 <= report.smape <= 200.0 + 1e-9


@given(pairs)
def test_metrics_symmetric(pair):
    pred, truth = pair
    assert metrics(pred, truth) == metrics(truth, pred)


@given(pairs, st.randoms(use_true_random=False))
def test_metrics_ignore_row_order(pair, random):
    pred, truth = pair
    order = list(range(pred.shape[0]))
    random.shuffle(order)
    a, b = metrics(pred, truth), metrics(pred[order], truth[order])
    assert np.isclose(a.mae, b.mae) and np.isclose(a.rmse, b.rmse) and np.isclose(a.smape, b.smape)


@settings(max_examples=50)
@given(
    st.floats(min_value=-0.95, max_value=0.95),
    st.lists(st.floats(min_value=-100, max_value=100, allow_nan=False), min_size=1, max_size=1),
)
def test_additive_keeps_stability(b, force):
    model = VarModel.scalar(b)
    verdict = intervened_stability(model, Intervention.additive(force))
    assert verdict.preserved
    assert verdict.report.spectral_radius == check_stability(model).spectral_radius


graphs = st.integers(2, 6).flatmap(
    lambda d: st.tuples(st.just(d), st.sets(st.tuples(st.integers(0, d - 1), st.integers(0, d - 1))))
)


@given(graphs)
def test_graph_edges_round_trip_through_networkx(case):
    dim, edges = case
    graph = CausalGraph.from_edges(dim, edges)
    assert set(graph.to_networkx().edges) == set(edges)
    assert graph.allowed_mask(self_loops=False).sum() == len(edges)
    assert graph.allowed_mask().diagonal().all()
