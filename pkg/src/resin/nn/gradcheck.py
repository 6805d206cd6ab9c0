"""Central-difference checks of every layer's backward pass."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from resin.nn.fusion import FeatureMode, FusionClassifier, ResSin
from resin.nn.layers import Conv2d, GlobalAvgPool, Linear, MaxPool2d, ReLU, softmax_cross_entropy
from resin.nn.resnet import ResidualBlock, ResSiConfig, ResSiNet

if TYPE_CHECKING:
    from collections.abc import Callable

    from resin.nn.layers import Layer, Parameter

STEP = 1e-5
TOLERANCE = 1e-4
MAX_ENTRIES = 12


@dataclass(frozen=True)
class GradCheckResult:
    name: str
    input_error: float
    parameter_error: float

    @property
    def worst(self) -> float:
        return max(self.input_error, self.parameter_error)

    def passed(self, tolerance: float = TOLERANCE) -> bool:
        return self.worst <= tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a|| + ||n||, 1e-12)."""
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    return float(np.linalg.norm(analytic - numeric)) / max(scale, 1e-12)


def _entries(array: np.ndarray, rng: np.random.Generator, limit: int) -> list[tuple[int, ...]]:
    flat = rng.choice(array.size, size=min(limit, array.size), replace=False)
    return [tuple(int(i) for i in np.unravel_index(index, array.shape)) for index in sorted(flat)]


def _numeric(loss: Callable[[], float], array: np.ndarray, index: tuple[int, ...], step: float) -> float:
    original = array[index]
    array[index] = original + step
    plus = loss()
    array[index] = original - step
    minus = loss()
    array[index] = original
    return (plus - minus) / (2 * step)


def check_function(
    name: str,
    forward: Callable[[np.ndarray], float],
    backward: Callable[[], np.ndarray],
    x: np.ndarray,
    parameters: list[Parameter],
    *,
    rng: np.random.Generator,
    step: float = STEP,
    max_entries: int = MAX_ENTRIES,
) -> GradCheckResult:
    """Compare analytic gradients of a scalar loss against central differences.

    `forward(x)` returns the loss; `backward()` must be called right after a forward and
    returns the input gradient while filling parameter gradients. Only up to
    `max_entries` randomly chosen coordinates of each array are perturbed.
    """
    for parameter in parameters:
        parameter.zero_grad()
    forward(x)
    input_grad = backward()
    parameter_grads = [parameter.grad.copy() for parameter in parameters]

    def loss() -> float:
        return forward(x)

    entries = _entries(x, rng, max_entries)
    numeric = np.array([_numeric(loss, x, index, step) for index in entries])
    analytic = np.array([input_grad[index] for index in entries])
    input_error = relative_error(analytic, numeric)

    analytic_params, numeric_params = [], []
    for parameter, grad in zip(parameters, parameter_grads, strict=True):
        for index in _entries(parameter.value, rng, max_entries):
            analytic_params.append(grad[index])
            numeric_params.append(_numeric(loss, parameter.value, index, step))
    parameter_error = relative_error(np.array(analytic_params), np.array(numeric_params)) if analytic_params else 0.0
    return GradCheckResult(name=name, input_error=input_error, parameter_error=parameter_error)


def check_layer(
    name: str,
    layer: Layer,
    x: np.ndarray,
    *,
    rng: np.random.Generator,
    step: float = STEP,
) -> GradCheckResult:
    """Check a layer under the loss sum(layer(x) * R) for a fixed random R."""
    projection = rng.normal(size=layer.forward(x).shape)

    def forward(inputs: np.ndarray) -> float:
        return float(np.sum(layer.forward(inputs) * projection))

    def backward() -> np.ndarray:
        return layer.backward(projection)

    return check_function(name, forward, backward, x, layer.parameters(), rng=rng, step=step)


def _check_head(rng: np.random.Generator) -> GradCheckResult:
    head = FusionClassifier(7, hidden=5, rng=rng)
    head.fit_stats(rng.normal(size=(9, 7)))
    labels = rng.integers(0, 2, size=4)
    x = rng.normal(size=(4, 7))

    def forward(inputs: np.ndarray) -> float:
        return softmax_cross_entropy(head.forward(inputs), labels)[0]

    def backward() -> np.ndarray:
        return head.backward(softmax_cross_entropy(head.forward(x), labels)[2])

    return check_function('fusion head + softmax cross-entropy', forward, backward, x, head.parameters(), rng=rng)


def _check_model(rng: np.random.Generator) -> GradCheckResult:
    config = ResSiConfig(stage_channels=(2, 3, 4, 5), blocks_per_stage=1, in_channels=3)
    model = ResSin(res_si=config, music_dim=3, feature_mode=FeatureMode.fusion, hidden=6, rng=rng)
    images = rng.normal(size=(2, 3, 9, 9))
    music = rng.normal(size=(2, 3))
    model.fit_stats(images, music)
    labels = np.array([0, 1])

    def forward(inputs: np.ndarray) -> float:
        return softmax_cross_entropy(model.forward(inputs, music), labels)[0]

    def backward() -> np.ndarray:
        grad = model.backward(softmax_cross_entropy(model.forward(images, music), labels)[2])
        assert grad is not None  # noqa: S101
        return grad

    return check_function('res-sin end to end', forward, backward, images, model.parameters(), rng=rng)


def run_gradcheck(seed: int = 0) -> list[GradCheckResult]:
    """Check every layer type, a residual block of each kind, the head and the full model."""
    rng = np.random.default_rng(seed)
    cases: list[tuple[str, Layer, tuple[int, ...]]] = [
        ('conv3x3 stride 1', Conv2d(2, 3, rng=rng), (2, 2, 5, 5)),
        ('conv3x3 stride 2', Conv2d(2, 3, stride=2, rng=rng), (2, 2, 7, 6)),
        ('conv1x1 stride 2', Conv2d(2, 3, kernel_size=1, stride=2, rng=rng), (2, 2, 5, 5)),
        ('relu', ReLU(), (3, 4)),
        ('max pool', MaxPool2d(), (2, 2, 5, 6)),
        ('global average pool', GlobalAvgPool(), (2, 3, 4, 5)),
        ('linear', Linear(4, 3, rng=rng), (5, 4)),
        ('residual block', ResidualBlock(3, 3, downsample=False, rng=rng), (2, 3, 6, 6)),
        ('residual block downsample', ResidualBlock(2, 4, downsample=True, rng=rng), (2, 2, 7, 7)),
        ('res-si subnet', ResSiNet(ResSiConfig((2, 3, 4, 5), 1, 3), rng=rng), (2, 3, 9, 9)),
    ]
    results = [check_layer(name, layer, rng.normal(size=shape), rng=rng) for name, layer, shape in cases]
    results.append(_check_head(rng))
    results.append(_check_model(rng))
    return results
