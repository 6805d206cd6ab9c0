"""Residual signal-image subnet: a batch-norm-free ResNet-18 variant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from resin.errors import ParameterError, ShapeMismatchError
from resin.nn.layers import Conv2d, GlobalAvgPool, Layer, MaxPool2d, Parameter, ReLU

STAGES = 4


@dataclass(frozen=True)
class ResSiConfig:
    """Subnet layout.

    Attributes:
        stage_channels: Output channels of the four stages; the last is the embedding size.
        blocks_per_stage: Residual blocks per stage.
        in_channels: Image depth (3 for origin/phasic/tonic, 1 for a single channel).
    """

    stage_channels: tuple[int, int, int, int] = (64, 128, 256, 512)
    blocks_per_stage: int = 2
    in_channels: int = 3

    def validate(self) -> None:
        if len(self.stage_channels) != STAGES or min(self.stage_channels) < 1:
            raise ParameterError('stage_channels', self.stage_channels, 'need four positive channel counts')
        if self.blocks_per_stage < 1:
            raise ParameterError('blocks_per_stage', self.blocks_per_stage, 'must be at least 1')

    @property
    def stem_channels(self) -> int:
        return self.stage_channels[0]

    @property
    def output_dim(self) -> int:
        return self.stage_channels[-1]


class ResidualBlock(Layer):
    """relu(conv-relu-conv(x) + skip(x)); skip is a 1x1 stride-2 projection when downsampling."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        *,
        downsample: bool,
        rng: np.random.Generator,
        name: str = 'block',
    ) -> None:
        stride = 2 if downsample else 1
        self.conv1 = Conv2d(in_channels, out_channels, stride=stride, rng=rng, name=f'{name}.conv1')
        self.relu1 = ReLU()
        self.conv2 = Conv2d(out_channels, out_channels, rng=rng, name=f'{name}.conv2')
        self.projection = (
            Conv2d(in_channels, out_channels, kernel_size=1, stride=stride, rng=rng, name=f'{name}.projection')
            if downsample or in_channels != out_channels
            else None
        )
        self.relu_out = ReLU()

    def parameters(self) -> list[Parameter]:
        params = self.conv1.parameters() + self.conv2.parameters()
        if self.projection is not None:
            params += self.projection.parameters()
        return params

    def forward(self, x: np.ndarray) -> np.ndarray:
        residual = self.conv2.forward(self.relu1.forward(self.conv1.forward(x)))
        skip = self.projection.forward(x) if self.projection is not None else x
        if residual.shape != skip.shape:
            raise ShapeMismatchError(what='residual block', expected=skip.shape, found=residual.shape)
        return self.relu_out.forward(residual + skip)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        grad = self.relu_out.backward(grad)
        through = self.conv1.backward(self.relu1.backward(self.conv2.backward(grad)))
        skip = self.projection.backward(grad) if self.projection is not None else grad
        return through + skip


class ResSiNet(Layer):
    """Stem conv + max-pool, four residual stages, global average pooling.

    Maps (N, in_channels, H, W) images to (N, stage_channels[-1]) embeddings.
    """

    def __init__(self, config: ResSiConfig, *, rng: np.random.Generator) -> None:
        config.validate()
        self.config = config
        self.stem = Conv2d(config.in_channels, config.stem_channels, rng=rng, name='stem')
        self.stem_relu = ReLU()
        self.pool = MaxPool2d()
        self.blocks: list[ResidualBlock] = []
        previous = config.stem_channels
        for stage, channels in enumerate(config.stage_channels):
            for index in range(config.blocks_per_stage):
                self.blocks.append(
                    ResidualBlock(
                        previous,
                        channels,
                        downsample=stage > 0 and index == 0,
                        rng=rng,
                        name=f'stage{stage}.block{index}',
                    ),
                )
                previous = channels
        self.gap = GlobalAvgPool()

    @property
    def output_dim(self) -> int:
        return self.config.output_dim

    def parameters(self) -> list[Parameter]:
        return self.stem.parameters() + [p for block in self.blocks for p in block.parameters()]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = self.pool.forward(self.stem_relu.forward(self.stem.forward(x)))
        for block in self.blocks:
            x = block.forward(x)
        return self.gap.forward(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        grad = self.gap.backward(grad)
        for block in reversed(self.blocks):
            grad = block.backward(grad)
        return self.stem.backward(self.stem_relu.backward(self.pool.backward(grad)))
