"""Layers with hand-written forward and backward passes.

All layers take batched inputs: images as (N, C, H, W) and vectors as (N, D). A
forward call caches what the matching backward call needs; backward accumulates
parameter gradients into `Parameter.grad` and returns the gradient of the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import as_strided

from resin.errors import ShapeMismatchError

PROB_FLOOR = 1e-12


@dataclass
class Parameter:
    """A trainable array and its gradient buffer."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def astype(self, dtype: np.dtype | type) -> None:
        self.value = self.value.astype(dtype)
        self.grad = np.zeros_like(self.value)


class Layer:
    """Base class; stateless layers only override forward/backward."""

    def parameters(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)


def he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _windows(padded: np.ndarray, kernel: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    n, c, _, _ = padded.shape
    sn, sc, sh, sw = padded.strides
    return as_strided(
        padded,
        shape=(n, c, out_h, out_w, kernel, kernel),
        strides=(sn, sc, stride * sh, stride * sw, sh, sw),
        writeable=False,
    )


class Conv2d(Layer):
    """Square cross-correlation with zero padding kernel // 2.

    Output spatial size is ceil(H / stride) for kernel 1 or 3.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        *,
        kernel_size: int = 3,
        stride: int = 1,
        rng: np.random.Generator,
        name: str = 'conv',
    ) -> None:
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = kernel_size // 2
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Parameter(
            f'{name}.weight',
            he_normal(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in),
        )
        self.bias = Parameter(f'{name}.bias', np.zeros(out_channels))
        self._cache: tuple[tuple[int, ...], np.ndarray] | None = None

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def output_size(self, size: int) -> int:
        return (size + 2 * self.padding - self.kernel_size) // self.stride + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:  # noqa: PLR2004
            raise ShapeMismatchError(what=self.weight.name, expected=f'(N, {self.in_channels}, H, W)', found=x.shape)
        out_h, out_w = self.output_size(x.shape[2]), self.output_size(x.shape[3])
        p = self.padding
        padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        windows = _windows(padded, self.kernel_size, self.stride, out_h, out_w)
        out = np.tensordot(windows, self.weight.value, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        self._cache = (padded.shape, windows)
        return out + self.bias.value[None, :, None, None]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        assert self._cache is not None  # noqa: S101
        padded_shape, windows = self._cache
        out_h, out_w = grad.shape[2], grad.shape[3]
        self.bias.grad += grad.sum(axis=(0, 2, 3))
        self.weight.grad += np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))

        columns = np.tensordot(grad, self.weight.value, axes=([1], [0]))  # (N, oh, ow, C, k, k)
        dx = np.zeros(padded_shape, dtype=grad.dtype)
        s = self.stride
        for i in range(self.kernel_size):
            for j in range(self.kernel_size):
                dx[:, :, i : i + s * (out_h - 1) + 1 : s, j : j + s * (out_w - 1) + 1 : s] += columns[
                    ...,
                    i,
                    j,
                ].transpose(0, 3, 1, 2)
        p = self.padding
        return dx[:, :, p : padded_shape[2] - p, p : padded_shape[3] - p]


class ReLU(Layer):
    def __init__(self) -> None:
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        assert self._mask is not None  # noqa: S101
        return np.where(self._mask, grad, 0.0)


class MaxPool2d(Layer):
    """2 x 2 max pooling with stride 2; odd sizes are padded so output is ceil(H / 2)."""

    def __init__(self) -> None:
        self._cache: tuple[tuple[int, ...], tuple[int, ...], np.ndarray] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, h, w = x.shape
        out_h, out_w = -(-h // 2), -(-w // 2)
        padded = np.pad(x, ((0, 0), (0, 0), (0, 2 * out_h - h), (0, 2 * out_w - w)), constant_values=-np.inf)
        blocks = padded.reshape(n, c, out_h, 2, out_w, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, out_h, out_w, 4)
        index = blocks.argmax(axis=-1)[..., None]
        self._cache = (x.shape, padded.shape, index)
        return np.take_along_axis(blocks, index, axis=-1)[..., 0]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        assert self._cache is not None  # noqa: S101
        (n, c, h, w), padded_shape, index = self._cache
        out_h, out_w = grad.shape[2], grad.shape[3]
        blocks = np.zeros((n, c, out_h, out_w, 4), dtype=grad.dtype)
        np.put_along_axis(blocks, index, grad[..., None], axis=-1)
        padded = blocks.reshape(n, c, out_h, out_w, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(padded_shape)
        return padded[:, :, :h, :w]


class GlobalAvgPool(Layer):
    """Average over the spatial axes: (N, C, H, W) -> (N, C)."""

    def __init__(self) -> None:
        self._shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        assert self._shape is not None  # noqa: S101
        _, _, h, w = self._shape
        return np.broadcast_to(grad[:, :, None, None] / (h * w), self._shape).copy()


class Linear(Layer):
    def __init__(self, in_features: int, out_features: int, *, rng: np.random.Generator, name: str = 'linear') -> None:
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(f'{name}.weight', he_normal(rng, (in_features, out_features), in_features))
        self.bias = Parameter(f'{name}.bias', np.zeros(out_features))
        self._x: np.ndarray | None = None

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:  # noqa: PLR2004
            raise ShapeMismatchError(what=self.weight.name, expected=f'(N, {self.in_features})', found=x.shape)
        self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad: np.ndarray) -> np.ndarray:
        assert self._x is not None  # noqa: S101
        self.weight.grad += self._x.T @ grad
        self.bias.grad += grad.sum(axis=0)
        return grad @ self.weight.value.T


class Sequential(Layer):
    def __init__(self, *layers: Layer) -> None:
        self.layers = list(layers)

    def parameters(self) -> list[Parameter]:
        return [parameter for layer in self.layers for parameter in layer.parameters()]

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """-log probs[label], with the probability clamped at 1e-12."""
    return float(-np.log(max(float(probs[label]), PROB_FLOOR)))


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy of a batch.

    Returns:
        (loss, probabilities, gradient of the mean loss with respect to the logits).
    """
    probs = softmax(logits)
    rows = np.arange(labels.size)
    loss = float(np.mean(-np.log(np.maximum(probs[rows, labels], PROB_FLOOR))))
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    return loss, probs, grad / labels.size
