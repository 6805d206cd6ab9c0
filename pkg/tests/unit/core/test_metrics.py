from __future__ import annotations

import numpy as np
import pytest

from resin.errors import ShapeMismatchError
from resin.metrics import ZScoreStats, classify_metrics, pearson_r, rmse, zscore


def test_rmse_of_equal_sequences_is_zero() -> None:
    assert rmse(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0


def test_rmse_rejects_length_mismatch() -> None:
    with pytest.raises(ShapeMismatchError):
        rmse(np.ones(2), np.ones(3))


def test_pearson_of_scaled_copy_is_one() -> None:
    assert pearson_r(np.array([1.0, 2.0, 3.0]), np.array([2.0, 4.0, 6.0])) == pytest.approx(1.0)


def test_pearson_undefined_for_constant_input() -> None:
    assert pearson_r(np.ones(4), np.arange(4.0)) is None


def test_classify_metrics_hand_count() -> None:
    metrics = classify_metrics(np.array([1, 1, 0, 0]), np.array([1, 0, 0, 0]))

    assert (metrics.tp, metrics.fp, metrics.tn, metrics.fn) == (1, 1, 2, 0)
    assert metrics.precision == pytest.approx(0.5)
    assert metrics.recall == pytest.approx(1.0)
    assert metrics.f1 == pytest.approx(2 / 3)
    assert metrics.accuracy == pytest.approx(0.75)


def test_classify_metrics_flags_undefined_precision() -> None:
    metrics = classify_metrics(np.zeros(3), np.array([1, 0, 0]))

    assert not metrics.precision_defined
    assert metrics.precision == 0.0
    assert metrics.f1 == 0.0


def test_zscore_uses_fitting_set_statistics() -> None:
    train = np.array([[1.0, 5.0], [3.0, 5.0]])

    standardized, stats = zscore(train)

    np.testing.assert_allclose(standardized, [[-1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(stats.transform(np.array([[5.0, 9.0]])), [[3.0, 0.0]])


def test_zscore_stats_reject_feature_mismatch() -> None:
    stats = ZScoreStats.fit(np.ones((2, 3)))

    with pytest.raises(ShapeMismatchError):
        stats.transform(np.ones((2, 2)))
