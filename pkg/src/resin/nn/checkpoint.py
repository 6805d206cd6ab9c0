"""JSON model checkpoints and loss-curve CSVs."""

from __future__ import annotations

import json
from typing import TYPE_CHECKING, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from resin.errors import CheckpointError
from resin.metrics import ZScoreStats
from resin.nn.fusion import FeatureMode, ResSin
from resin.nn.resnet import ResSiConfig

if TYPE_CHECKING:
    from collections.abc import Iterable
    from pathlib import Path

    from resin.nn.train import LossPoint

CHECKPOINT_VERSION = 1
LOSS_CURVE_HEADER = ('iter', 'loss', 'lr')


class StoredArray(BaseModel):
    shape: list[int]
    values: list[float]

    @classmethod
    def of(cls, array: np.ndarray) -> StoredArray:
        return cls(shape=list(array.shape), values=np.asarray(array, dtype=np.float64).ravel().tolist())

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64).reshape(self.shape)


class Checkpoint(BaseModel):
    """On-disk model: architecture echo, head statistics and 64-bit parameters."""

    format: Literal['resin-model'] = 'resin-model'
    version: int = CHECKPOINT_VERSION
    feature_mode: FeatureMode
    stage_channels: list[int]
    blocks_per_stage: int
    in_channels: int
    music_dim: int
    hidden: int
    stats_mean: StoredArray
    stats_std: StoredArray
    parameters: dict[str, StoredArray]
    extra: dict[str, object] = {}


def save_checkpoint(model: ResSin, path: Path, *, extra: dict[str, object] | None = None) -> None:
    """Write `model` to `path` as JSON; `extra` is echoed verbatim (e.g. the run config)."""
    checkpoint = Checkpoint(
        feature_mode=model.feature_mode,
        stage_channels=list(model.res_si.stage_channels),
        blocks_per_stage=model.res_si.blocks_per_stage,
        in_channels=model.res_si.in_channels,
        music_dim=model.music_dim,
        hidden=model.head.hidden,
        stats_mean=StoredArray.of(model.head.stats.mean),
        stats_std=StoredArray.of(model.head.stats.std),
        parameters={p.name: StoredArray.of(p.value) for p in model.parameters()},
        extra=extra or {},
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(checkpoint.model_dump_json(indent=1) + '\n', encoding='utf-8')


def read_checkpoint(path: Path) -> Checkpoint:
    """Parse and validate a checkpoint file without building the model.

    Raises:
        CheckpointError: If the file is missing, malformed or of another version.
    """
    try:
        checkpoint = Checkpoint.model_validate(json.loads(path.read_text(encoding='utf-8')))
    except FileNotFoundError as exc:
        raise CheckpointError(path=path, reason='file not found') from exc
    except (json.JSONDecodeError, ValidationError) as exc:
        raise CheckpointError(path=path, reason=str(exc).splitlines()[0]) from exc
    if checkpoint.version != CHECKPOINT_VERSION:
        raise CheckpointError(path=path, reason=f'unsupported version {checkpoint.version}')
    return checkpoint


def load_checkpoint(path: Path) -> ResSin:
    """Rebuild a model from a checkpoint written by `save_checkpoint`.

    Raises:
        CheckpointError: If the file is missing, malformed, of another version, or
            its parameters do not match the declared architecture.
    """
    checkpoint = read_checkpoint(path)
    config = ResSiConfig(
        stage_channels=tuple(checkpoint.stage_channels),  # type: ignore[arg-type]
        blocks_per_stage=checkpoint.blocks_per_stage,
        in_channels=checkpoint.in_channels,
    )
    model = ResSin(
        res_si=config,
        music_dim=checkpoint.music_dim,
        feature_mode=checkpoint.feature_mode,
        hidden=checkpoint.hidden,
        rng=np.random.default_rng(0),
    )
    for parameter in model.parameters():
        stored = checkpoint.parameters.get(parameter.name)
        if stored is None or tuple(stored.shape) != parameter.value.shape:
            raise CheckpointError(path=path, reason=f'parameter {parameter.name} missing or mis-shaped')
        parameter.value = stored.to_array()
        parameter.zero_grad()
    model.head.stats = ZScoreStats(mean=checkpoint.stats_mean.to_array(), std=checkpoint.stats_std.to_array())
    return model


def write_loss_curve_csv(losses: Iterable[LossPoint], path: Path) -> None:
    rows = [(point.iteration, point.loss, point.lr) for point in losses]
    pd.DataFrame(rows, columns=list(LOSS_CURVE_HEADER)).to_csv(path, index=False, lineterminator='\n')
