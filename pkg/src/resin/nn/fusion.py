"""Multi-feature fusion head and the complete classifier."""

from __future__ import annotations

from enum import StrEnum

import numpy as np

from resin.errors import ParameterError, ShapeMismatchError
from resin.metrics import ZScoreStats
from resin.nn.layers import Linear, Parameter, ReLU, Sequential, softmax
from resin.nn.resnet import ResSiConfig, ResSiNet

HEAD_HIDDEN = 512
CLASSES = 2


class FeatureMode(StrEnum):
    """Which features reach the classifier head."""

    eda_only = 'eda_only'
    music_only = 'music_only'
    fusion = 'fusion'

    @property
    def uses_eda(self) -> bool:
        return self is not FeatureMode.music_only

    @property
    def uses_music(self) -> bool:
        return self is not FeatureMode.eda_only


class FusionClassifier:
    """z-score -> linear(hidden) -> ReLU -> linear(2); softmax is applied by callers.

    The z-score statistics start as the identity and are replaced by `fit_stats`
    with training-fold statistics; features whose training std is below 1e-8 map to 0.
    """

    def __init__(self, input_dim: int, *, hidden: int = HEAD_HIDDEN, rng: np.random.Generator) -> None:
        self.input_dim = input_dim
        self.hidden = hidden
        self.stats = ZScoreStats(mean=np.zeros(input_dim), std=np.ones(input_dim))
        self.layers = Sequential(
            Linear(input_dim, hidden, rng=rng, name='head.fc1'),
            ReLU(),
            Linear(hidden, CLASSES, rng=rng, name='head.fc2'),
        )

    def parameters(self) -> list[Parameter]:
        return self.layers.parameters()

    def fit_stats(self, features: np.ndarray) -> None:
        stats = ZScoreStats.fit(features)
        if stats.mean.size != self.input_dim:
            raise ShapeMismatchError(what='fusion features', expected=self.input_dim, found=stats.mean.size)
        self.stats = stats

    def forward(self, features: np.ndarray) -> np.ndarray:
        return self.layers.forward(self.stats.transform(features))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return self.layers.backward(grad) * self.stats.scale


def fuse_and_classify(
    eda_vec: np.ndarray | None,
    music_vec: np.ndarray | None,
    classifier: FusionClassifier,
) -> np.ndarray:
    """Concatenate the available feature vectors and return class probabilities.

    Accepts single vectors or (N, D) batches; a missing part is passed as `None`.
    """
    parts = [np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in (eda_vec, music_vec) if v is not None]
    if not parts:
        raise ParameterError('features', None, 'need an EDA or a music vector')
    features = np.concatenate(parts, axis=1)
    if features.shape[1] != classifier.input_dim:
        raise ShapeMismatchError(what='fused features', expected=classifier.input_dim, found=features.shape[1])
    probs = softmax(classifier.forward(features))
    return probs[0] if np.ndim(eda_vec if eda_vec is not None else music_vec) == 1 else probs


class ResSin:
    """Residual subnet on signal images, optionally fused with music features."""

    def __init__(
        self,
        *,
        res_si: ResSiConfig,
        music_dim: int,
        feature_mode: FeatureMode = FeatureMode.fusion,
        hidden: int = HEAD_HIDDEN,
        rng: np.random.Generator,
    ) -> None:
        self.feature_mode = feature_mode
        self.res_si = res_si
        self.music_dim = music_dim
        self.subnet = ResSiNet(res_si, rng=rng) if feature_mode.uses_eda else None
        input_dim = (res_si.output_dim if feature_mode.uses_eda else 0) + (
            music_dim if feature_mode.uses_music else 0
        )
        self.head = FusionClassifier(input_dim, hidden=hidden, rng=rng)

    def parameters(self) -> list[Parameter]:
        subnet = self.subnet.parameters() if self.subnet is not None else []
        return subnet + self.head.parameters()

    def zero_grad(self) -> None:
        for parameter in self.parameters():
            parameter.zero_grad()

    def astype(self, dtype: np.dtype | type) -> None:
        for parameter in self.parameters():
            parameter.astype(dtype)

    def features(self, images: np.ndarray | None, music: np.ndarray | None) -> np.ndarray:
        parts = []
        if self.subnet is not None:
            if images is None:
                raise ParameterError('images', None, f'required in {self.feature_mode} mode')
            parts.append(self.subnet.forward(images))
        if self.feature_mode.uses_music:
            if music is None:
                raise ParameterError('music', None, f'required in {self.feature_mode} mode')
            parts.append(np.asarray(music, dtype=parts[0].dtype if parts else np.float64))
        return np.concatenate(parts, axis=1)

    def forward(self, images: np.ndarray | None, music: np.ndarray | None) -> np.ndarray:
        """Return logits for a batch."""
        return self.head.forward(self.features(images, music))

    def backward(self, grad_logits: np.ndarray) -> np.ndarray | None:
        """Accumulate parameter gradients; returns the image gradient when a subnet is present."""
        grad = self.head.backward(grad_logits)
        if self.subnet is None:
            return None
        return self.subnet.backward(grad[:, : self.subnet.output_dim])

    def fit_stats(self, images: np.ndarray | None, music: np.ndarray | None, *, batch_size: int = 100) -> None:
        """Fit the head's z-score statistics on training-fold features of the current network."""
        self.head.fit_stats(self._batched_features(images, music, batch_size))

    def _batched_features(self, images: np.ndarray | None, music: np.ndarray | None, batch_size: int) -> np.ndarray:
        total = len(images) if images is not None else len(music)  # type: ignore[arg-type]
        chunks = []
        for start in range(0, total, batch_size):
            window = slice(start, start + batch_size)
            chunks.append(
                self.features(
                    images[window] if images is not None else None,
                    music[window] if music is not None else None,
                ),
            )
        return np.concatenate(chunks, axis=0)

    def predict_proba(self, images: np.ndarray | None, music: np.ndarray | None, *, batch_size: int = 100) -> np.ndarray:
        return softmax(self.head.forward(self._batched_features(images, music, batch_size)))
