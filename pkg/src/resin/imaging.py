"""Signal-to-image conversion for the residual network.

Each channel is min-max normalised, folded into a (seconds x samples-per-second)
matrix, resized bilinearly to a square image, optionally cropped, and shifted by the
training-fold channel mean.
"""

from __future__ import annotations

from enum import StrEnum
from typing import TYPE_CHECKING

import numpy as np
from scipy import ndimage

from resin.errors import ParameterError, ShapeMismatchError, SignalTooShortError

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from resin.cvxeda import ComponentChannels

IMAGE_SIZE = 224
CROP_PAD = 8
SAMPLES_PER_ROW = 50


class ChannelMode(StrEnum):
    """Which decomposition channels form the network input."""

    origin = 'origin'
    phasic = 'phasic'
    tonic = 'tonic'
    mix = 'mix'

    @property
    def channel_names(self) -> tuple[str, ...]:
        if self is ChannelMode.mix:
            return ('origin', 'phasic', 'tonic')
        return (self.value,)

    @property
    def depth(self) -> int:
        return len(self.channel_names)


def minmax_normalize(channel: np.ndarray) -> np.ndarray:
    """Map a channel linearly onto [0, 1]; a constant channel maps to zeros."""
    values = np.asarray(channel, dtype=np.float64)
    if values.size == 0:
        raise ParameterError('channel', '[]', 'must be non-empty')
    low, high = values.min(), values.max()
    if high == low:
        return np.zeros_like(values)
    return (values - low) / (high - low)


def signal_to_matrix(channel: np.ndarray, rate: int = SAMPLES_PER_ROW) -> np.ndarray:
    """Fold a sequence row-major into whole seconds, dropping the partial last second.

    Raises:
        SignalTooShortError: If the channel holds less than one second.
    """
    values = np.asarray(channel, dtype=np.float64)
    rows = values.size // rate
    if rows == 0:
        raise SignalTooShortError(length=values.size, required=rate, operation='signal_to_matrix')
    return values[: rows * rate].reshape(rows, rate)


def bilinear_resize(matrix: np.ndarray, out_h: int = IMAGE_SIZE, out_w: int = IMAGE_SIZE) -> np.ndarray:
    """Corner-aligned bilinear resize.

    Output pixel i samples the source at i * (in - 1) / (out - 1) on each axis, so the
    four corners map onto each other and every output lies within the input range.

    Raises:
        ParameterError: If either input or output dimension is below 2.
    """
    source = np.asarray(matrix, dtype=np.float64)
    if source.ndim != 2 or min(source.shape) < 2:  # noqa: PLR2004
        raise ParameterError('matrix', source.shape, 'needs at least 2 rows and 2 columns')
    if min(out_h, out_w) < 2:  # noqa: PLR2004
        raise ParameterError('output size', (out_h, out_w), 'must be at least 2 x 2')
    in_h, in_w = source.shape
    rows = np.arange(out_h) * ((in_h - 1) / (out_h - 1))
    cols = np.arange(out_w) * ((in_w - 1) / (out_w - 1))
    grid = np.meshgrid(rows, cols, indexing='ij')
    return ndimage.map_coordinates(source, grid, order=1, mode='nearest')


def crop_at(image: np.ndarray, *, pad: int, top: int, left: int) -> np.ndarray:
    """Reflect-pad the last two axes by `pad` and cut the window at (top, left)."""
    height, width = image.shape[-2:]
    widths = [(0, 0)] * (image.ndim - 2) + [(pad, pad), (pad, pad)]
    padded = np.pad(image, widths, mode='reflect')
    return padded[..., top : top + height, left : left + width]


def random_crop(image: np.ndarray, *, pad: int = CROP_PAD, rng: np.random.Generator) -> np.ndarray:
    """Training-time view: a window drawn uniformly from the (2 pad + 1)^2 offsets."""
    top, left = rng.integers(0, 2 * pad + 1, size=2)
    return crop_at(image, pad=pad, top=int(top), left=int(left))


def center_view(image: np.ndarray) -> np.ndarray:
    """Evaluation-time view: the centre window of the padded image, i.e. the image."""
    return image


def channel_image(channel: np.ndarray, *, image_size: int = IMAGE_SIZE, rate: int = SAMPLES_PER_ROW) -> np.ndarray:
    return bilinear_resize(signal_to_matrix(minmax_normalize(channel), rate), image_size, image_size)


def channel_round_trip(channel: np.ndarray, *, image_size: int = IMAGE_SIZE, rate: int = SAMPLES_PER_ROW) -> np.ndarray:
    """Resize a channel to an image and back, returning the flattened sequence.

    The result is comparable sample-by-sample with the normalised, truncated channel.
    """
    matrix = signal_to_matrix(minmax_normalize(channel), rate)
    image = bilinear_resize(matrix, image_size, image_size)
    return bilinear_resize(image, *matrix.shape).ravel()


def _stack(channels: ComponentChannels, mode: ChannelMode, image_size: int) -> np.ndarray:
    lengths = {getattr(channels, name).size for name in mode.channel_names}
    if len(lengths) != 1:
        raise ShapeMismatchError(what='channels', expected='equal lengths', found=sorted(lengths))
    return np.stack([channel_image(getattr(channels, name), image_size=image_size) for name in mode.channel_names])


def compute_channel_means(
    training: Sequence[ComponentChannels],
    *,
    mode: ChannelMode = ChannelMode.mix,
    image_size: int = IMAGE_SIZE,
) -> np.ndarray:
    """Per-channel mean pixel value over the evaluation-view images of a training fold."""
    if not training:
        return np.zeros(mode.depth)
    total = np.zeros(mode.depth)
    for channels in training:
        total += _stack(channels, mode, image_size).mean(axis=(1, 2))
    return total / len(training)


def make_image_tensor(
    channels: ComponentChannels,
    means: np.ndarray,
    *,
    mode: ChannelMode = ChannelMode.mix,
    rng: np.random.Generator | None = None,
    image_size: int = IMAGE_SIZE,
    crop_pad: int = CROP_PAD,
) -> np.ndarray:
    """Build the (depth x size x size) network input for one signal.

    Args:
        channels: Origin, phasic and tonic sequences.
        means: Training-fold mean of each selected channel.
        mode: Channel selection; `mix` stacks origin, phasic, tonic in that order.
        rng: Crop generator; `None` selects the deterministic evaluation view.
        image_size: Output height and width.
        crop_pad: Reflect padding of the training crop.

    Raises:
        ShapeMismatchError: If the channels differ in length or `means` has the wrong size.
    """
    means = np.asarray(means, dtype=np.float64)
    if means.shape != (mode.depth,):
        raise ShapeMismatchError(what='means', expected=(mode.depth,), found=means.shape)
    image = _stack(channels, mode, image_size)
    image = random_crop(image, pad=crop_pad, rng=rng) if rng is not None else center_view(image)
    return image - means[:, None, None]


def write_pgm(matrix: np.ndarray, path: Path) -> None:
    """Dump a matrix as an 8-bit binary PGM, mapping [min, max] onto [0, 255]."""
    scaled = np.round(minmax_normalize(np.asarray(matrix, dtype=np.float64).ravel()) * 255).astype(np.uint8)
    height, width = matrix.shape
    path.write_bytes(f'P5\n{width} {height}\n255\n'.encode('ascii') + scaled.tobytes())
