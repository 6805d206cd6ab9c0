"""Synthetic EDA with known phasic/tonic ground truth.

The generator instantiates y = tonic + phasic + noise, where phasic is a sparse
driver convolved with a Bateman kernel and tonic is a smooth random spline plus a
linear drift. It doubles as the oracle for decomposition tests and as a desk-scale
stand-in corpus for the cross-validation harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from resin.errors import ParameterError
from resin.signals import (
    DATASET_RATE_HZ,
    Annotation,
    AnnotationSet,
    EdaSignal,
    MusicFeatureTable,
)

if TYPE_CHECKING:
    from pathlib import Path

MIN_KNOT_SPACING_S = 10.0


def bateman_kernel(*, tau0: float, tau1: float, delta: float, length: int) -> np.ndarray:
    """Sampled skin-conductance response shape, scaled to peak 1.

    k[i] = exp(-i*delta/tau1) - exp(-i*delta/tau0), so k[0] = 0.

    Args:
        tau0: Fast time constant in seconds.
        tau1: Slow time constant in seconds; must exceed `tau0`.
        delta: Sampling interval in seconds.
        length: Number of samples, at least 2.

    Raises:
        ParameterError: If the time constants or sizes are out of range.
    """
    if not 0 < tau0 < tau1:
        raise ParameterError('tau0', tau0, f'need 0 < tau0 < tau1 (tau1={tau1})')
    if delta <= 0:
        raise ParameterError('delta', delta, 'must be positive')
    if length < 2:
        raise ParameterError('length', length, 'must be at least 2')
    t = np.arange(length) * delta
    kernel = np.exp(-t / tau1) - np.exp(-t / tau0)
    return kernel / kernel.max()


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of one synthetic recording.

    Attributes:
        duration_s: Length of the recording in seconds.
        rate_hz: Sampling rate.
        n_events: Number of skin-conductance responses.
        amp_range: Uniform range of response peak heights (microsiemens).
        tonic_knot_spacing_s: Spacing of the random tonic spline knots, at least 10 s.
        tonic_level: Mean tonic level (microsiemens).
        tonic_variation: Half-range of the random knot offsets around the level.
        drift: Half-range of the linear drift accumulated over the recording.
        noise_sigma: Standard deviation of the additive Gaussian noise.
        tau0: Fast Bateman time constant.
        tau1: Slow Bateman time constant.
    """

    duration_s: float = 60.0
    rate_hz: float = DATASET_RATE_HZ
    n_events: int = 3
    amp_range: tuple[float, float] = (0.2, 1.0)
    tonic_knot_spacing_s: float = 20.0
    tonic_level: float = 2.0
    tonic_variation: float = 0.2
    drift: float = 0.1
    noise_sigma: float = 0.01
    tau0: float = 0.7
    tau1: float = 2.0

    def validate(self) -> None:
        if self.n_events < 0:
            raise ParameterError('n_events', self.n_events, 'must be non-negative')
        if self.duration_s < 1:
            raise ParameterError('duration_s', self.duration_s, 'must be at least 1 s')
        if self.noise_sigma < 0:
            raise ParameterError('noise_sigma', self.noise_sigma, 'must be non-negative')
        if self.tonic_knot_spacing_s < MIN_KNOT_SPACING_S:
            raise ParameterError('tonic_knot_spacing_s', self.tonic_knot_spacing_s, 'must be at least 10 s')
        low, high = self.amp_range
        if not 0 < low <= high:
            raise ParameterError('amp_range', self.amp_range, 'need 0 < low <= high')


@dataclass(frozen=True)
class GroundTruth:
    """Known components of a synthetic recording.

    Attributes:
        driver_times: Sample indices of the driver impulses.
        driver_amplitudes: Peak height of the response each impulse produces.
        tonic_true: Tonic component.
        phasic_true: Phasic component, elementwise non-negative.
        noise_sigma: Standard deviation of the injected noise.
    """

    driver_times: np.ndarray
    driver_amplitudes: np.ndarray
    tonic_true: np.ndarray
    phasic_true: np.ndarray
    noise_sigma: float


def _event_times(rng: np.random.Generator, *, n: int, n_events: int, rate_hz: float) -> np.ndarray:
    if n_events == 0:
        return np.zeros(0, dtype=np.int64)
    head = min(int(5 * rate_hz), n // 4)
    tail = min(int(8 * rate_hz), n // 4)
    edges = np.linspace(head, n - tail, n_events + 1)
    width = np.diff(edges)
    # keep each event in the middle half of its segment so responses stay apart
    offsets = rng.uniform(0.25, 0.75, size=n_events) * width
    return np.minimum(np.floor(edges[:-1] + offsets).astype(np.int64), n - 1)


def _tonic(rng: np.random.Generator, config: SynthConfig, n: int) -> np.ndarray:
    t = np.arange(n) / config.rate_hz
    intervals = max(1, math.floor(config.duration_s / config.tonic_knot_spacing_s))
    knots = np.linspace(0.0, config.duration_s, intervals + 1)
    values = config.tonic_level + rng.uniform(-config.tonic_variation, config.tonic_variation, size=knots.size)
    spline = CubicSpline(knots, values, bc_type='natural') if knots.size > 2 else None  # noqa: PLR2004
    smooth = spline(t) if spline is not None else np.interp(t, knots, values)
    slope = rng.uniform(-config.drift, config.drift)
    return smooth + slope * (t / config.duration_s - 0.5)


def generate(
    config: SynthConfig,
    *,
    seed: int,
    subject_id: str = 'synth',
    song_id: str = 'synth',
) -> tuple[EdaSignal, GroundTruth]:
    """Generate one recording and its ground truth; deterministic given `seed`.

    Raises:
        ParameterError: If the configuration is out of range.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    n = round(config.duration_s * config.rate_hz)
    times = _event_times(rng, n=n, n_events=config.n_events, rate_hz=config.rate_hz)
    amplitudes = rng.uniform(*config.amp_range, size=times.size)

    driver = np.zeros(n)
    np.add.at(driver, times, amplitudes)
    kernel = bateman_kernel(tau0=config.tau0, tau1=config.tau1, delta=1.0 / config.rate_hz, length=max(n, 2))
    phasic = np.convolve(driver, kernel)[:n]
    tonic = _tonic(rng, config, n)
    noise = rng.normal(0.0, config.noise_sigma, size=n) if config.noise_sigma > 0 else np.zeros(n)

    signal = EdaSignal(
        subject_id=subject_id,
        song_id=song_id,
        samples=tonic + phasic + noise,
        sample_rate_hz=config.rate_hz,
    )
    truth = GroundTruth(
        driver_times=times,
        driver_amplitudes=amplitudes,
        tonic_true=tonic,
        phasic_true=phasic,
        noise_sigma=config.noise_sigma,
    )
    return signal, truth


def write_ground_truth_csv(truth: GroundTruth, path: Path) -> None:
    frame = pd.DataFrame(
        {
            'sample_index': np.arange(truth.tonic_true.size),
            'tonic': truth.tonic_true,
            'phasic': truth.phasic_true,
        },
    )
    frame.to_csv(path, index=False, lineterminator='\n')


@dataclass(frozen=True)
class CorpusConfig:
    """Shape of a synthetic labelled corpus.

    Arousal ratings drive the tonic level linearly, valence ratings drive the
    response amplitudes, and both ratings lean on a per-song benchmark that the
    music features encode.

    Attributes:
        subjects: Number of subjects.
        songs: Size of the song pool.
        songs_per_subject: Clips each subject rates, drawn from the pool.
        music_dim: Dimension of the synthetic music feature vectors.
        music_weight: Share of each rating explained by the song benchmark.
        tonic_gain: Microsiemens of tonic level per unit of arousal.
        recording: Template for every recording.
    """

    subjects: int = 60
    songs: int = 40
    songs_per_subject: int = 10
    music_dim: int = 64
    music_weight: float = 0.6
    tonic_gain: float = 2.0
    recording: SynthConfig = SynthConfig(duration_s=75.0)


@dataclass(frozen=True)
class Corpus:
    """A synthetic dataset in the same shape as the file-based sources."""

    signals: list[EdaSignal]
    truths: dict[tuple[str, str], GroundTruth]
    annotations: AnnotationSet
    features: MusicFeatureTable


def generate_corpus(config: CorpusConfig, *, seed: int) -> Corpus:
    """Synthesise signals, annotations and music features for a whole corpus."""
    if config.songs_per_subject > config.songs:
        raise ParameterError('songs_per_subject', config.songs_per_subject, f'cannot exceed songs={config.songs}')
    rng = np.random.default_rng(seed)
    song_ids = [f'song{j:03d}' for j in range(config.songs)]
    benchmark = rng.uniform(0.15, 0.85, size=(config.songs, 2))

    directions = rng.normal(size=(2, config.music_dim)) / math.sqrt(config.music_dim)
    music = benchmark @ directions * 4.0 + 0.1 * rng.normal(size=(config.songs, config.music_dim))
    features = MusicFeatureTable(
        dimension=config.music_dim,
        entries={song: music[j] for j, song in enumerate(song_ids)},
    )

    signals: list[EdaSignal] = []
    truths: dict[tuple[str, str], GroundTruth] = {}
    entries: dict[tuple[str, str], Annotation] = {}
    weight = config.music_weight
    for i in range(config.subjects):
        subject_id = f's{i:03d}'
        picks = np.sort(rng.choice(config.songs, size=config.songs_per_subject, replace=False))
        for j in picks:
            own = rng.uniform(0.1, 0.9, size=2)
            valence, arousal = np.clip(weight * benchmark[j] + (1 - weight) * own, 0.05, 0.95)
            centre = 0.15 + 0.8 * valence
            recording = replace(
                config.recording,
                tonic_level=1.0 + config.tonic_gain * arousal,
                amp_range=(centre - 0.05, centre + 0.05),
            )
            signal, truth = generate(
                recording,
                seed=int(rng.integers(2**31)),
                subject_id=subject_id,
                song_id=song_ids[j],
            )
            signals.append(signal)
            truths[signal.key] = truth
            entries[signal.key] = Annotation(valence=float(valence), arousal=float(arousal))

    return Corpus(
        signals=signals,
        truths=truths,
        annotations=AnnotationSet(entries=entries),
        features=features,
    )
