"""Mini-batch SGD with a step learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger

from resin.errors import NonFiniteLossError, ParameterError, ShapeMismatchError
from resin.imaging import CROP_PAD, random_crop
from resin.metrics import ClassificationMetrics, classify_metrics
from resin.nn.layers import softmax_cross_entropy

if TYPE_CHECKING:
    from resin.nn.fusion import ResSin


@dataclass(frozen=True)
class TrainConfig:
    """Optimiser settings.

    Attributes:
        batch_size: Mini-batch size; capped at the training-set size.
        lr0: Initial learning rate.
        decay_factor: Multiplier applied every `decay_every` iterations.
        decay_every: Iterations between learning-rate decays.
        max_iters: Number of SGD iterations.
        momentum: Heavy-ball momentum; 0 is plain SGD.
        seed: Seed for initialisation, shuffling and crops.
        dtype: 'float64' or 'float32'.
        crop_pad: Reflect padding of the training crop; 0 disables cropping.
    """

    batch_size: int = 100
    lr0: float = 0.001
    decay_factor: float = 0.1
    decay_every: int = 300
    max_iters: int = 900
    momentum: float = 0.0
    seed: int = 0
    dtype: str = 'float64'
    crop_pad: int = CROP_PAD

    def validate(self) -> None:
        if self.batch_size < 1 or self.max_iters < 0 or self.decay_every < 1:
            raise ParameterError(
                'train',
                (self.batch_size, self.max_iters, self.decay_every),
                'batch_size and decay_every must be positive and max_iters non-negative',
            )
        if self.lr0 <= 0 or not 0 <= self.momentum < 1:
            raise ParameterError('lr0/momentum', (self.lr0, self.momentum), 'need lr0 > 0 and 0 <= momentum < 1')
        if self.dtype not in {'float64', 'float32'}:
            raise ParameterError('dtype', self.dtype, "must be 'float64' or 'float32'")


@dataclass(frozen=True)
class TrainingSet:
    """Evaluation-view images, music features and labels of one fold.

    Images are stored uncropped; training crops are cut per iteration.
    """

    images: np.ndarray | None
    music: np.ndarray | None
    labels: np.ndarray

    def __post_init__(self) -> None:
        n = self.labels.shape[0]
        for name, array in (('images', self.images), ('music', self.music)):
            if array is not None and array.shape[0] != n:
                raise ShapeMismatchError(what=f'training {name}', expected=n, found=array.shape[0])

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass(frozen=True)
class LossPoint:
    iteration: int
    loss: float
    lr: float


@dataclass
class TrainResult:
    model: ResSin
    losses: list[LossPoint] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.losses[-1].loss if self.losses else float('nan')


def learning_rate(config: TrainConfig, iteration: int) -> float:
    """lr0 * decay_factor ** floor(iteration / decay_every)."""
    return config.lr0 * config.decay_factor ** (iteration // config.decay_every)


def _crop_batch(images: np.ndarray, pad: int, rng: np.random.Generator) -> np.ndarray:
    if pad == 0:
        return images
    return np.stack([random_crop(image, pad=pad, rng=rng) for image in images])


class _BatchSampler:
    """Reshuffles at every epoch boundary; batches never straddle epochs."""

    def __init__(self, size: int, batch_size: int, rng: np.random.Generator) -> None:
        self.size = size
        self.batch_size = min(batch_size, size)
        self.rng = rng
        self.order = rng.permutation(size)
        self.position = 0

    def next(self) -> np.ndarray:
        if self.position + self.batch_size > self.size:
            self.order = self.rng.permutation(self.size)
            self.position = 0
        batch = self.order[self.position : self.position + self.batch_size]
        self.position += self.batch_size
        return batch


def train(model: ResSin, data: TrainingSet, config: TrainConfig) -> TrainResult:
    """Train `model` in place with SGD.

    The head's z-score statistics are fitted on `data` with the initial network and
    stay fixed during training. Given the same seed the loss curve is reproducible.

    Raises:
        NonFiniteLossError: If the loss becomes NaN or infinite.
        ParameterError: If the configuration or the training set is invalid.
    """
    config.validate()
    if len(data) == 0:
        raise ParameterError('training set', 0, 'must not be empty')
    dtype = np.dtype(config.dtype)
    model.astype(dtype)
    images = data.images.astype(dtype) if data.images is not None else None
    music = data.music.astype(dtype) if data.music is not None else None
    labels = data.labels.astype(np.int64)
    model.fit_stats(images, music, batch_size=config.batch_size)

    rng = np.random.default_rng(config.seed)
    sampler = _BatchSampler(len(data), config.batch_size, rng)
    velocity = [np.zeros_like(p.value) for p in model.parameters()]
    result = TrainResult(model=model)
    for iteration in range(config.max_iters):
        lr = learning_rate(config, iteration)
        batch = sampler.next()
        batch_images = _crop_batch(images[batch], config.crop_pad, rng) if images is not None else None
        batch_music = music[batch] if music is not None else None

        model.zero_grad()
        logits = model.forward(batch_images, batch_music)
        loss, _, grad = softmax_cross_entropy(logits, labels[batch])
        if not np.isfinite(loss):
            raise NonFiniteLossError(iteration=iteration, lr=lr, loss=loss)
        model.backward(grad)
        for parameter, v in zip(model.parameters(), velocity, strict=True):
            v *= config.momentum
            v -= lr * parameter.grad
            parameter.value += v
        result.losses.append(LossPoint(iteration=iteration, loss=loss, lr=lr))
        if iteration % 50 == 0:
            logger.debug('iter {}: loss={:.4f} lr={:g}', iteration, loss, lr)

    if result.losses:
        logger.info('Training finished after {} iterations, final loss {:.4f}', config.max_iters, result.final_loss)
    return result


@dataclass(frozen=True)
class Predictions:
    """Predicted labels and the probability of each predicted label, in input order."""

    labels: np.ndarray
    probabilities: np.ndarray


def predict(model: ResSin, images: np.ndarray | None, music: np.ndarray | None) -> Predictions:
    """Argmax of the softmax on evaluation views; a tie goes to label 0."""
    probs = model.predict_proba(images, music)
    labels = (probs[:, 1] > probs[:, 0]).astype(np.int64)
    return Predictions(labels=labels, probabilities=probs[np.arange(labels.size), labels])


def evaluate(model: ResSin, data: TrainingSet) -> ClassificationMetrics:
    return classify_metrics(predict(model, data.images, data.music).labels, data.labels)
