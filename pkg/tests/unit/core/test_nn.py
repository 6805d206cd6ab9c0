from __future__ import annotations

import json
from typing import TYPE_CHECKING

import numpy as np
import pytest

from resin.errors import CheckpointError, ParameterError, ShapeMismatchError
from resin.nn import (
    FeatureMode,
    FusionClassifier,
    ResSiConfig,
    ResSiNet,
    ResSin,
    ResidualBlock,
    TrainConfig,
    TrainingSet,
    cross_entropy,
    evaluate,
    fuse_and_classify,
    learning_rate,
    predict,
    softmax,
    softmax_cross_entropy,
    train,
)
from resin.nn.checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from resin.nn.gradcheck import relative_error, run_gradcheck

if TYPE_CHECKING:
    from pathlib import Path

TINY = ResSiConfig(stage_channels=(2, 3, 4, 5), blocks_per_stage=1, in_channels=3)


def _separable_set(n: int = 20, *, seed: int = 0) -> TrainingSet:
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    images = rng.normal(scale=0.1, size=(n, 3, 8, 8)) + labels[:, None, None, None]
    music = rng.normal(size=(n, 4)) + 2.0 * labels[:, None]
    return TrainingSet(images=images, music=music, labels=labels)


def _model(mode: FeatureMode = FeatureMode.fusion, *, seed: int = 0) -> ResSin:
    return ResSin(res_si=TINY, music_dim=4, feature_mode=mode, hidden=8, rng=np.random.default_rng(seed))


def test_cross_entropy_of_unlikely_label() -> None:
    assert cross_entropy(np.array([0.9, 0.1]), 1) == pytest.approx(2.302585, abs=1e-6)


def test_softmax_rows_sum_to_one() -> None:
    probs = softmax(np.array([[1000.0, 0.0], [0.0, 0.0]]))

    np.testing.assert_allclose(probs.sum(axis=1), [1.0, 1.0])
    np.testing.assert_allclose(probs[1], [0.5, 0.5])


def test_softmax_cross_entropy_gradient_is_probs_minus_onehot() -> None:
    rng = np.random.default_rng(6)
    logits = rng.normal(size=(5, 2))
    labels = np.array([0, 1, 1, 0, 1])

    loss, probs, grad = softmax_cross_entropy(logits, labels)

    np.testing.assert_allclose(grad * labels.size, probs - np.eye(2)[labels], atol=1e-12)
    step = 1e-6
    bumped = logits.copy()
    bumped[2, 0] += step
    assert (softmax_cross_entropy(bumped, labels)[0] - loss) / step == pytest.approx(grad[2, 0], abs=1e-6)


def test_zero_initialised_residual_block_is_identity_on_nonnegative_input() -> None:
    block = ResidualBlock(3, 3, downsample=False, rng=np.random.default_rng(0))
    for parameter in block.parameters():
        parameter.value = np.zeros_like(parameter.value)
    x = np.abs(np.random.default_rng(1).normal(size=(2, 3, 6, 6)))

    np.testing.assert_array_equal(block.forward(x), x)


def test_learning_rate_decays_every_three_hundred_iterations() -> None:
    config = TrainConfig()

    assert learning_rate(config, 0) == pytest.approx(1e-3)
    assert learning_rate(config, 299) == pytest.approx(1e-3)
    assert learning_rate(config, 300) == pytest.approx(1e-4)
    assert learning_rate(config, 600) == pytest.approx(1e-5)


def test_gradients_match_finite_differences() -> None:
    results = run_gradcheck(seed=0)

    assert results
    failures = [(result.name, result.worst) for result in results if not result.passed()]
    assert failures == []


def test_relative_error_of_identical_arrays_is_zero() -> None:
    assert relative_error(np.ones(3), np.ones(3)) == 0.0


def test_res_si_net_embeds_to_last_stage_width() -> None:
    net = ResSiNet(TINY, rng=np.random.default_rng(0))

    assert net(np.zeros((2, 3, 16, 16))).shape == (2, 5)


def test_res_si_config_rejects_three_stages() -> None:
    with pytest.raises(ParameterError):
        ResSiNet(ResSiConfig(stage_channels=(2, 3, 4)), rng=np.random.default_rng(0))  # type: ignore[arg-type]


def test_fuse_and_classify_returns_probabilities() -> None:
    head = FusionClassifier(7, hidden=4, rng=np.random.default_rng(0))

    probs = fuse_and_classify(np.ones(5), np.zeros(2), head)

    assert probs.shape == (2,)
    assert probs.sum() == pytest.approx(1.0)


def test_fuse_and_classify_rejects_wrong_width() -> None:
    head = FusionClassifier(7, hidden=4, rng=np.random.default_rng(0))

    with pytest.raises(ShapeMismatchError):
        fuse_and_classify(np.ones(5), None, head)


def test_head_maps_constant_features_to_zero() -> None:
    head = FusionClassifier(2, hidden=4, rng=np.random.default_rng(0))
    head.fit_stats(np.array([[1.0, 3.0], [2.0, 3.0]]))

    np.testing.assert_array_equal(head.stats.scale, [2.0, 0.0])


def test_feature_modes_change_head_width() -> None:
    assert _model(FeatureMode.fusion).head.input_dim == 9
    assert _model(FeatureMode.eda_only).head.input_dim == 5
    assert _model(FeatureMode.music_only).head.input_dim == 4
    assert _model(FeatureMode.music_only).subnet is None


def test_music_only_model_ignores_images() -> None:
    model = _model(FeatureMode.music_only)
    data = _separable_set()

    assert model.forward(None, data.music).shape == (20, 2)


def test_fusion_model_requires_music() -> None:
    with pytest.raises(ParameterError):
        _model().forward(np.zeros((1, 3, 8, 8)), None)


def test_training_fits_a_separable_set() -> None:
    data = _separable_set()
    config = TrainConfig(batch_size=20, lr0=0.01, momentum=0.9, max_iters=300, crop_pad=0, decay_every=1000)
    model = _model(FeatureMode.eda_only)

    result = train(model, data, config)

    losses = [point.loss for point in result.losses]
    assert len(losses) == 300
    assert np.mean(losses[-20:]) < np.mean(losses[:20])
    assert evaluate(model, data).accuracy == 1.0


def test_training_is_reproducible_with_seed() -> None:
    data = _separable_set()
    config = TrainConfig(batch_size=5, lr0=0.01, max_iters=10, crop_pad=2, seed=3)

    first = train(_model(), data, config)
    second = train(_model(), data, config)

    assert [p.loss for p in first.losses] == [p.loss for p in second.losses]


def test_training_in_float32() -> None:
    config = TrainConfig(batch_size=10, max_iters=2, crop_pad=0, dtype='float32')
    model = _model()

    train(model, _separable_set(), config)

    assert all(p.value.dtype == np.float32 for p in model.parameters())


def test_training_rejects_empty_set() -> None:
    empty = TrainingSet(images=np.zeros((0, 3, 8, 8)), music=np.zeros((0, 4)), labels=np.zeros(0, dtype=int))

    with pytest.raises(ParameterError):
        train(_model(), empty, TrainConfig(max_iters=1))


def test_training_set_checks_lengths() -> None:
    with pytest.raises(ShapeMismatchError):
        TrainingSet(images=np.zeros((2, 3, 8, 8)), music=None, labels=np.zeros(3, dtype=int))


def test_predict_breaks_ties_towards_low() -> None:
    model = _model(FeatureMode.music_only)
    for parameter in model.parameters():
        parameter.value = np.zeros_like(parameter.value)

    predictions = predict(model, None, np.ones((3, 4)))

    assert predictions.labels.tolist() == [0, 0, 0]
    np.testing.assert_allclose(predictions.probabilities, 0.5)


def test_checkpoint_round_trip_preserves_predictions(tmp_path: Path) -> None:
    data = _separable_set()
    model = _model()
    model.fit_stats(data.images, data.music)
    path = tmp_path / 'model.json'

    save_checkpoint(model, path, extra={'axis': 'valence'})
    restored = load_checkpoint(path)

    np.testing.assert_array_equal(
        restored.predict_proba(data.images, data.music),
        model.predict_proba(data.images, data.music),
    )
    assert read_checkpoint(path).extra == {'axis': 'valence'}


def test_checkpoint_missing_file(tmp_path: Path) -> None:
    with pytest.raises(CheckpointError, match='file not found'):
        load_checkpoint(tmp_path / 'missing.json')


def test_checkpoint_rejects_other_version(tmp_path: Path) -> None:
    path = tmp_path / 'model.json'
    save_checkpoint(_model(), path)
    payload = json.loads(path.read_text(encoding='utf-8'))
    payload['version'] = 99
    path.write_text(json.dumps(payload), encoding='utf-8')

    with pytest.raises(CheckpointError, match='unsupported version'):
        read_checkpoint(path)
