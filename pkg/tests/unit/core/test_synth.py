from __future__ import annotations

import numpy as np
import pytest

from resin.errors import ParameterError
from resin.synth import CorpusConfig, SynthConfig, bateman_kernel, generate, generate_corpus


def test_bateman_kernel_starts_at_zero_and_peaks_at_one() -> None:
    kernel = bateman_kernel(tau0=0.7, tau1=2.0, delta=0.02, length=500)

    assert kernel[0] == 0.0
    assert kernel.max() == pytest.approx(1.0)
    assert (kernel >= 0).all()


def test_bateman_kernel_peak_time_matches_closed_form() -> None:
    tau0, tau1, delta = 0.7, 2.0, 0.02
    kernel = bateman_kernel(tau0=tau0, tau1=tau1, delta=delta, length=500)
    expected = np.log(tau1 / tau0) * tau0 * tau1 / (tau1 - tau0)

    assert int(np.argmax(kernel)) * delta == pytest.approx(expected, abs=delta)


def test_bateman_kernel_is_unimodal() -> None:
    kernel = bateman_kernel(tau0=0.5, tau1=3.0, delta=0.02, length=1000)
    peak = int(np.argmax(kernel))

    assert (np.diff(kernel[: peak + 1]) >= 0).all()
    assert (np.diff(kernel[peak:]) <= 0).all()


def test_bateman_kernel_rejects_swapped_time_constants() -> None:
    with pytest.raises(ParameterError):
        bateman_kernel(tau0=2.0, tau1=0.7, delta=0.02, length=10)


def test_generate_without_events_or_noise_is_pure_tonic() -> None:
    signal, truth = generate(SynthConfig(n_events=0, noise_sigma=0.0), seed=3)

    np.testing.assert_array_equal(signal.samples, truth.tonic_true)
    assert not truth.phasic_true.any()


def test_generate_is_deterministic() -> None:
    first, _ = generate(SynthConfig(), seed=11)
    second, _ = generate(SynthConfig(), seed=11)

    np.testing.assert_array_equal(first.samples, second.samples)


def test_generate_noise_has_configured_spread() -> None:
    signal, truth = generate(SynthConfig(duration_s=60.0, noise_sigma=0.01), seed=5)
    noise = signal.samples - truth.tonic_true - truth.phasic_true

    assert abs(noise.mean()) < 0.001
    assert noise.std() == pytest.approx(0.01, rel=0.1)
    assert (truth.phasic_true >= 0).all()
    assert truth.driver_times.size == 3


def test_generate_corpus_links_music_features_to_songs() -> None:
    config = CorpusConfig(subjects=4, songs=6, songs_per_subject=3, music_dim=8, recording=SynthConfig(duration_s=20.0))

    corpus = generate_corpus(config, seed=0)

    assert len(corpus.signals) == 12
    assert corpus.features.dimension == 8
    assert {key[1] for key in corpus.annotations.entries} <= set(corpus.features.entries)
    assert all(0.0 <= a.valence <= 1.0 and 0.0 <= a.arousal <= 1.0 for a in corpus.annotations.entries.values())


def test_generate_corpus_rejects_more_songs_per_subject_than_pool() -> None:
    with pytest.raises(ParameterError):
        generate_corpus(CorpusConfig(songs=3, songs_per_subject=4), seed=0)
