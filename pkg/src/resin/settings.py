from __future__ import annotations

import json
from pathlib import Path
from typing import TYPE_CHECKING, Any

from pydantic import AliasChoices, AliasGenerator, BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import (
    BaseSettings,
    JsonConfigSettingsSource,
    PydanticBaseSettingsSource,
    PyprojectTomlConfigSettingsSource,
    SettingsConfigDict,
)

from resin.baselines import BaselineConfig
from resin.cvxeda import DecompositionParams
from resin.errors import ConfigError
from resin.experiment import ExperimentConfig
from resin.imaging import ChannelMode
from resin.nn.fusion import FeatureMode
from resin.nn.resnet import ResSiConfig
from resin.nn.train import TrainConfig
from resin.qp import QpSettings

if TYPE_CHECKING:
    from collections.abc import Mapping


def _to_kebab(name: str) -> str:
    """Convert snake_case to kebab-case."""
    return name.replace('_', '-')


def _validation_alias(name: str) -> AliasChoices:
    """Accept both snake_case and kebab-case for settings keys.

    The snake_case name is listed first so it wins when both spellings are present.
    """
    return AliasChoices(name, _to_kebab(name))


_ALIASES = AliasGenerator(
    validation_alias=_validation_alias,
    serialization_alias=_to_kebab,
)


class _Section(BaseModel):
    model_config = ConfigDict(
        alias_generator=_ALIASES,
        populate_by_name=True,
        extra='forbid',
    )


class PathsSettings(_Section):
    """Input files and the output directory.

    Attributes:
        eda: Long-format EDA CSV.
        annotations: Static valence/arousal CSV.
        music_features: Per-song feature CSV.
        output_dir: Where artifacts and reports are written.
    """

    eda: Path = Path('data/eda.csv')
    annotations: Path = Path('data/annotations.csv')
    music_features: Path = Path('data/music_features.csv')
    output_dir: Path = Path('out')


class CvxEdaSettings(_Section):
    tau0: float = 0.7
    tau1: float = 2.0
    alpha: float = 8e-4
    gamma: float = 1e-2
    knot_spacing_s: float = 10.0

    def params(self) -> DecompositionParams:
        return DecompositionParams(**self.model_dump())


class QpSection(_Section):
    rho: float = 0.1
    sigma: float = 1e-6
    alpha_relax: float = 1.6
    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    eps_rel: float = Field(default=0.0, ge=0)
    max_iter: int = 20000
    adaptive_rho: bool = True
    polish: bool = True

    def settings(self) -> QpSettings:
        return QpSettings(**self.model_dump())


class ImagingSettings(_Section):
    image_size: int = Field(default=224, ge=2)
    crop_pad: int = Field(default=8, ge=0)


class ResSiSection(_Section):
    stage_channels: tuple[int, int, int, int] = (64, 128, 256, 512)
    blocks_per_stage: int = Field(default=2, ge=1)

    def config(self, *, in_channels: int) -> ResSiConfig:
        return ResSiConfig(
            stage_channels=self.stage_channels,
            blocks_per_stage=self.blocks_per_stage,
            in_channels=in_channels,
        )


class HeadSettings(_Section):
    hidden: int = Field(default=512, ge=1)


class TrainSection(_Section):
    batch_size: int = Field(default=100, ge=1)
    lr0: float = Field(default=1e-3, gt=0)
    decay_factor: float = 0.1
    decay_every: int = Field(default=300, ge=1)
    max_iters: int = Field(default=900, ge=0)
    momentum: float = Field(default=0.0, ge=0, lt=1)
    dtype: str = 'float64'

    def config(self, *, seed: int, crop_pad: int) -> TrainConfig:
        return TrainConfig(**self.model_dump(), seed=seed, crop_pad=crop_pad)


class BaselineSection(_Section):
    cutoff_hz: float = 0.6
    resample_length: int = 256
    svr_epsilon: float = 0.1
    svr_c: float = 1.0
    svm_c: float = 1.0
    iterations: int = 1000
    restarts: int = 5

    def config(self) -> BaselineConfig:
        return BaselineConfig(**self.model_dump())


class ResinSettings(BaseSettings):
    """Settings loaded from CLI args, env vars, and config files.

    Precedence (highest first):
      1. Explicit init kwargs (CLI layer and the `--config` file)
      2. RESIN_* env vars
      3. resin.json
      4. pyproject.toml ([tool.resin])
    """

    model_config = SettingsConfigDict(
        env_prefix='RESIN_',
        env_nested_delimiter='__',
        extra='ignore',
        pyproject_toml_table_header=('tool', 'resin'),
        json_file='resin.json',
        alias_generator=_ALIASES,
        populate_by_name=True,
    )

    paths: PathsSettings = Field(default_factory=PathsSettings)
    trim_seconds: float = Field(default=15.0, ge=0)
    cvxeda: CvxEdaSettings = Field(default_factory=CvxEdaSettings)
    qp: QpSection = Field(default_factory=QpSection)
    imaging: ImagingSettings = Field(default_factory=ImagingSettings)
    res_si: ResSiSection = Field(default_factory=ResSiSection)
    head: HeadSettings = Field(default_factory=HeadSettings)
    train: TrainSection = Field(default_factory=TrainSection)
    baseline: BaselineSection = Field(default_factory=BaselineSection)
    folds: int = Field(default=10, ge=2)
    seed: int = 0
    channel_mode: ChannelMode = ChannelMode.mix
    feature_mode: FeatureMode = FeatureMode.fusion
    sweep: bool = False

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        """Customize settings sources for resin."""
        _ = (dotenv_settings, file_secret_settings)
        return (
            init_settings,
            env_settings,
            JsonConfigSettingsSource(settings_cls),
            PyprojectTomlConfigSettingsSource(settings_cls),
        )

    def echo(self) -> dict[str, Any]:
        """JSON-ready dump of every resolved value, for report provenance."""
        return self.model_dump(mode='json')

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(
            channel_mode=self.channel_mode,
            feature_mode=self.feature_mode,
            folds=self.folds,
            seed=self.seed,
            image_size=self.imaging.image_size,
            res_si=self.res_si.config(in_channels=self.channel_mode.depth),
            hidden=self.head.hidden,
            train=self.train.config(seed=self.seed, crop_pad=self.imaging.crop_pad),
            baseline=self.baseline.config(),
            settings_echo=self.echo(),
        )


def _merge(base: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_settings(config_file: Path | None = None, **overrides: Any) -> ResinSettings:  # noqa: ANN401
    """Build settings from an optional JSON file plus CLI overrides.

    `None` overrides are dropped so unset CLI options fall through to lower sources.

    Raises:
        ConfigError: If the file is missing or not JSON, or a value fails validation.
    """
    values: dict[str, Any] = {}
    if config_file is not None:
        try:
            values = json.loads(config_file.read_text(encoding='utf-8'))
        except FileNotFoundError as exc:
            raise ConfigError(f'{config_file} does not exist') from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f'{config_file} is not valid JSON ({exc.msg} at line {exc.lineno})') from exc
        if not isinstance(values, dict):
            raise ConfigError(f'{config_file} must hold a JSON object')
    values = _merge(values, {key: value for key, value in overrides.items() if value is not None})
    try:
        return ResinSettings(**values)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = '.'.join(str(part) for part in first['loc'])
        raise ConfigError(f'{location}: {first["msg"]}') from exc
