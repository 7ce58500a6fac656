import math

import numpy as np
import pytest

import configs
from metrics.base_metric import EvalOutputs
from metrics.metric_factory import MetricFactory


def _outputs(**overrides):
    values = {
        "y_b": np.array([0, 0, 1, 0]),
        "y_f": np.array([2, 1, -1, 0]),
        "p_bg": np.array([0.1, 0.6, 0.9, 0.2]),
        "fg_pred": np.array([2, 1, 0, 3]),
    }
    values.update(overrides)
    return EvalOutputs(**values)


@pytest.fixture
def factory():
    return MetricFactory()


def test_every_registered_metric_can_be_created(factory):
    for name in configs.metrics:
        assert factory.create_metric(name).calculate(_outputs()) is not None


def test_unknown_metric_is_a_value_error(factory):
    with pytest.raises(ValueError, match="not found"):
        factory.create_metric("sharpe")


def test_fg_accuracy_counts_foreground_only(factory):
    # foreground rows 0, 1, 3: hits on 0 and 1
    value = factory.create_metric("fg_accuracy").calculate(_outputs())
    assert value == pytest.approx(2 / 3)


def test_fg_accuracy_without_foreground_is_nan(factory):
    outputs = _outputs(y_b=np.ones(4, dtype=int), y_f=np.full(4, -1))
    assert math.isnan(factory.create_metric("fg_accuracy").calculate(outputs))


def test_bg_accuracy_thresholds_at_half(factory):
    # predicted background: rows 1 and 2; truth: row 2
    assert factory.create_metric("bg_accuracy").calculate(_outputs()) == pytest.approx(0.75)
    edge = _outputs(p_bg=np.array([0.49, 0.2, 0.5, 0.0]))
    assert factory.create_metric("bg_accuracy").calculate(edge) == pytest.approx(1.0)


def test_bg_accuracy_without_head_is_nan(factory):
    outputs = _outputs(p_bg=np.full(4, np.nan))
    assert math.isnan(factory.create_metric("bg_accuracy").calculate(outputs))


def test_event_accuracy_treats_background_as_a_class(factory):
    # row 0 hit, row 1 called background, row 2 background hit, row 3 miss
    assert factory.create_metric("event_accuracy").calculate(_outputs()) == pytest.approx(0.5)


def test_retrieval_recall_identity_embeddings(factory):
    embed = np.eye(4)
    outputs = _outputs(v_embed=embed, a_embed=embed * 3.0)
    assert factory.create_metric("retrieval_recall").calculate(outputs) == pytest.approx(1.0)


def test_retrieval_recall_uses_cosine_over_foreground(factory):
    v_embed = np.array([[1.0, 0.0], [0.0, 1.0], [5.0, 5.0], [1.0, 1.0]])
    a_embed = np.array([[0.3, 1.0], [0.0, 2.0], [9.0, 9.0], [1.0, 0.9]])
    # foreground rows 0, 1, 3: query 0 prefers audio 3, query 1 hits, query 3 hits
    outputs = _outputs(v_embed=v_embed, a_embed=a_embed)
    assert factory.create_metric("retrieval_recall").calculate(outputs) == pytest.approx(2 / 3)


def test_retrieval_recall_collapsed_embeddings_is_chance(factory):
    # identical embeddings tie everywhere; only the first query keeps its partner
    embed = np.ones((4, 3))
    outputs = _outputs(v_embed=embed, a_embed=embed)
    assert factory.create_metric("retrieval_recall").calculate(outputs) == pytest.approx(1 / 3)


def test_retrieval_recall_without_embeddings_is_nan(factory):
    assert math.isnan(factory.create_metric("retrieval_recall").calculate(_outputs()))


def test_calculate_all_returns_every_metric(factory):
    values = factory.calculate_all(configs.metrics, _outputs())
    assert list(values) == configs.metrics
