from __future__ import annotations

from dataclasses import replace
from typing import TYPE_CHECKING

import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.signal import lfilter

from resin.cvxeda import (
    ComponentChannels,
    DecompositionParams,
    arma_coefficients,
    build_arma,
    build_spline_basis,
    decompose,
    load_decompositions,
    system_matrices,
    write_decomposition_csv,
)
from resin.errors import ParameterError, SignalTooShortError
from resin.signals import EdaSignal
from resin.synth import SynthConfig, bateman_kernel, generate

if TYPE_CHECKING:
    from pathlib import Path


def _short_signal(seed: int = 1, duration_s: float = 20.0) -> EdaSignal:
    signal, _ = generate(SynthConfig(duration_s=duration_s, n_events=2), seed=seed, subject_id='s1', song_id='a')
    return signal


def test_arma_coefficients_are_normalised() -> None:
    ar, ma = arma_coefficients(tau0=0.7, tau1=2.0, delta=0.02)

    assert ar[0] == 1.0
    # unit DC gain: sum(ma) / sum(ar) == 1
    assert ma.sum() / ar.sum() == pytest.approx(1.0)


def test_build_arma_is_lower_triangular_with_unit_diagonal() -> None:
    M, A = build_arma(tau0=0.7, tau1=2.0, delta=0.02, n=6)
    dense = A.toarray()

    np.testing.assert_array_equal(np.diag(dense), np.ones(6))
    assert not np.triu(dense, 1).any()
    assert not np.triu(M.toarray(), 1).any()


def test_build_arma_rejects_short_signal() -> None:
    with pytest.raises(ParameterError):
        build_arma(tau0=0.7, tau1=2.0, delta=0.02, n=2)


def test_spline_basis_has_one_column_per_knot() -> None:
    basis = build_spline_basis(1000, knot_spacing_s=10.0, delta=0.02)

    assert basis.shape == (1000, 2)
    assert basis.toarray().max() == pytest.approx(1.0)


def test_decompose_is_exactly_additive() -> None:
    result = decompose(_short_signal())

    np.testing.assert_allclose(result.phasic + result.tonic + result.residual, result.origin, atol=1e-10)


def test_decompose_driver_is_non_negative() -> None:
    result = decompose(_short_signal())

    assert result.driver.min() >= -1e-6


def test_decompose_rejects_signal_under_three_seconds() -> None:
    signal = EdaSignal(subject_id='s1', song_id='a', samples=np.ones(100))

    with pytest.raises(SignalTooShortError):
        decompose(signal)


def test_decompose_rejects_swapped_time_constants() -> None:
    with pytest.raises(ParameterError):
        decompose(_short_signal(), DecompositionParams(tau0=2.0, tau1=0.7))


def test_larger_alpha_does_not_grow_driver_mass() -> None:
    signal = _short_signal(seed=4)
    params = DecompositionParams()

    loose = decompose(signal, params)
    tight = decompose(signal, replace(params, alpha=params.alpha * 10))

    assert np.abs(tight.driver).sum() <= np.abs(loose.driver).sum() + 1e-6


def test_larger_gamma_does_not_grow_spline_weights() -> None:
    signal = _short_signal(seed=4)
    params = DecompositionParams()

    loose = decompose(signal, params)
    tight = decompose(signal, replace(params, gamma=params.gamma * 10))

    assert np.linalg.norm(tight.spline_weights) <= np.linalg.norm(loose.spline_weights) + 1e-6


def test_decomposition_csv_round_trip(tmp_path: Path) -> None:
    channels = decompose(_short_signal()).channels()

    write_decomposition_csv(channels, tmp_path)
    loaded = load_decompositions(tmp_path, [channels.key])[channels.key]

    np.testing.assert_allclose(loaded.phasic, channels.phasic, rtol=1e-12)
    np.testing.assert_allclose(loaded.tonic, channels.tonic, rtol=1e-12)


def test_decomposition_files_of_underscored_ids_do_not_collide(tmp_path: Path) -> None:
    first = ComponentChannels('a_b', 'c', origin=np.ones(4), phasic=np.zeros(4), tonic=np.ones(4))
    second = ComponentChannels('a', 'b_c', origin=np.full(4, 2.0), phasic=np.zeros(4), tonic=np.full(4, 2.0))

    paths = {write_decomposition_csv(channels, tmp_path) for channels in (first, second)}
    loaded = load_decompositions(tmp_path, [first.key, second.key])

    assert len(paths) == 2
    assert loaded[first.key].origin.tolist() == [1.0] * 4
    assert loaded[second.key].origin.tolist() == [2.0] * 4


def test_arma_impulse_response_matches_bateman_kernel() -> None:
    ar, ma = arma_coefficients(tau0=0.7, tau1=2.0, delta=0.02)
    impulse = np.zeros(500)
    impulse[0] = 1.0

    response = lfilter(ma, ar, impulse)
    response = response / response.max()
    kernel = bateman_kernel(tau0=0.7, tau1=2.0, delta=0.02, length=500)

    assert np.abs(response - kernel).max() <= 0.02
    assert response.min() >= 0.0
    peak = int(response.argmax())
    steps = np.diff(response)
    assert (steps[:peak] >= 0).all()
    assert (steps[peak:] <= 0).all()


def test_spline_basis_covers_the_interior_evenly() -> None:
    basis = build_spline_basis(3000, knot_spacing_s=10.0, delta=0.02)

    interior = np.asarray(basis.sum(axis=1)).ravel()[500:2000]

    assert interior.min() >= 1.0
    np.testing.assert_allclose(interior, interior[0], rtol=1e-6)


def test_zero_signal_decomposes_to_zero() -> None:
    result = decompose(EdaSignal('s1', 'a', np.zeros(1000)))

    np.testing.assert_allclose(result.phasic, 0.0, atol=1e-8)
    np.testing.assert_allclose(result.tonic, 0.0, atol=1e-8)
    np.testing.assert_allclose(result.driver, 0.0, atol=1e-6)


def test_constant_signal_is_all_tonic() -> None:
    result = decompose(EdaSignal('s1', 'a', np.full(1000, 3.0)))

    np.testing.assert_allclose(result.tonic, 3.0, atol=1e-6)
    np.testing.assert_allclose(result.phasic, 0.0, atol=1e-6)
    np.testing.assert_allclose(result.residual, 0.0, atol=1e-6)


def _lbfgs_objective(signal: EdaSignal, params: DecompositionParams) -> float:
    """Minimise the decomposition objective over (driver, spline weights, drift) with L-BFGS-B."""
    y = signal.samples
    n = y.size
    delta = 1.0 / signal.sample_rate_hz
    ar, ma = arma_coefficients(tau0=params.tau0, tau1=params.tau1, delta=delta)
    matrices = system_matrices(n, tau0=params.tau0, tau1=params.tau1, delta=delta, knot_spacing_s=params.knot_spacing_s)
    basis, drift = matrices.B.tocsr(), matrices.C
    k = basis.shape[1]

    def objective(z: np.ndarray) -> tuple[float, np.ndarray]:
        p, weights, offsets = z[:n], z[n : n + k], z[n + k :]
        r = lfilter(ma, ar, p) + basis @ weights + drift @ offsets - y
        value = 0.5 * r @ r + params.alpha * p.sum() + 0.5 * params.gamma * weights @ weights
        grad = np.concatenate(
            [
                lfilter(ma, ar, r[::-1])[::-1] + params.alpha,
                basis.T @ r + params.gamma * weights,
                drift.T @ r,
            ],
        )
        return float(value), grad

    bounds = [(0.0, None)] * n + [(None, None)] * (k + 2)
    result = minimize(
        objective,
        np.zeros(n + k + 2),
        jac=True,
        method='L-BFGS-B',
        bounds=bounds,
        options={'maxiter': 20000, 'maxfun': 40000, 'ftol': 1e-15, 'gtol': 1e-10},
    )
    return float(result.fun)


def test_decompose_reaches_an_objective_no_worse_than_lbfgs() -> None:
    config = SynthConfig(duration_s=60.0, n_events=3, noise_sigma=0.01)
    signal, _ = generate(config, seed=3)
    params = DecompositionParams()

    result = decompose(signal, params)
    independent = _lbfgs_objective(signal, params)

    assert result.objective <= independent + 1e-6 * (1 + abs(independent))
    assert np.sqrt(np.mean(result.residual**2)) <= 2 * config.noise_sigma


def _check_recovery(seed: int, noise_sigma: float = 0.01) -> None:
    config = SynthConfig(duration_s=60.0, n_events=3, noise_sigma=noise_sigma)
    signal, truth = generate(config, seed=seed)
    search = round(2.0 * config.rate_hz)
    tolerance = round(0.5 * config.rate_hz)

    result = decompose(signal)

    assert np.sqrt(np.mean(result.residual**2)) <= 2 * noise_sigma
    assert np.corrcoef(truth.phasic_true, result.phasic)[0, 1] >= 0.9
    for time in truth.driver_times:
        start = max(0, int(time) - search)
        peak = start + int(np.argmax(result.driver[start : int(time) + search + 1]))
        assert abs(peak - int(time)) <= tolerance


@pytest.mark.parametrize('seed', [1, 2, 3])
def test_decompose_recovers_synthetic_components(seed: int) -> None:
    _check_recovery(seed)


@pytest.mark.slow
@pytest.mark.parametrize('seed', range(100, 150))
def test_decompose_recovers_synthetic_components_across_seeds(seed: int) -> None:
    _check_recovery(seed)


@pytest.mark.parametrize('noise_sigma', [0.005, 0.01, 0.05])
def test_residual_tracks_the_noise_level(noise_sigma: float) -> None:
    signal, _ = generate(SynthConfig(duration_s=60.0, n_events=3, noise_sigma=noise_sigma), seed=5)

    rms = float(np.sqrt(np.mean(decompose(signal).residual ** 2)))

    assert noise_sigma / 2 <= rms <= 2 * noise_sigma
