"""cvxEDA: split a skin-conductance signal into phasic, tonic and residual parts.

The observed signal is modelled as y = M A^-1 p + B lambda + C d + eps, where p is a
sparse non-negative driver filtered by a second-order ARMA system, B holds smooth
spline bumps, and C carries an offset and a linear drift. Substituting q = A^-1 p
turns the MAP estimate into a sparse QP that `resin.qp.solve_qp` solves.

The MA taps are of order delta^2 / (16 tau0 tau1), about 1e-5 at 50 Hz, so the QP
runs on u = g q, where g is the DC gain of M. Then M / g has taps (1, 2, 1) / 4 and
the constraint rows (A / g) u give the driver p itself.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import scipy.sparse as sp
from loguru import logger

from resin.errors import DecompositionError, ParameterError, SignalTooShortError
from resin.qp import QpProblem, QpSettings, QpStatus, solve_qp
from resin.signals import SignalKey, read_table, signal_path

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from pathlib import Path

    from resin.signals import EdaSignal

MIN_DURATION_S = 3.0
DECOMPOSITION_HEADER = ('sample_index', 'origin', 'phasic', 'tonic', 'residual')


@dataclass(frozen=True)
class DecompositionParams:
    """Model constants.

    Attributes:
        tau0: Fast time constant of the response filter (seconds).
        tau1: Slow time constant of the response filter (seconds).
        alpha: Weight of the l1 penalty on the driver.
        gamma: Weight of the l2 penalty on the spline coefficients.
        knot_spacing_s: Distance between tonic spline knots (seconds).
    """

    tau0: float = 0.7
    tau1: float = 2.0
    alpha: float = 8e-4
    gamma: float = 1e-2
    knot_spacing_s: float = 10.0

    def validate(self) -> None:
        if not 0 < self.tau0 < self.tau1:
            raise ParameterError('tau0', self.tau0, f'need 0 < tau0 < tau1 (tau1={self.tau1})')
        if self.alpha < 0 or self.gamma < 0:
            raise ParameterError('alpha/gamma', (self.alpha, self.gamma), 'must be non-negative')
        if self.knot_spacing_s <= 0:
            raise ParameterError('knot_spacing_s', self.knot_spacing_s, 'must be positive')


@dataclass(frozen=True)
class SystemMatrices:
    """The linear operators of the signal model for one signal length."""

    M: sp.csc_matrix
    A: sp.csc_matrix
    B: sp.csc_matrix
    C: np.ndarray
    delta: float

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def knots(self) -> int:
        return self.B.shape[1]

    @property
    def gain(self) -> float:
        """DC gain of the MA filter, the sum of its taps."""
        return float(self.M[self.n - 1].sum())

    @property
    def phasic_operator(self) -> sp.csc_matrix:
        return (self.M / self.gain).tocsc()

    @property
    def driver_operator(self) -> sp.csc_matrix:
        return (self.A / self.gain).tocsc()


@dataclass(frozen=True)
class ComponentChannels:
    """The three signal channels the imaging stage consumes."""

    subject_id: str
    song_id: str
    origin: np.ndarray
    phasic: np.ndarray
    tonic: np.ndarray

    @property
    def key(self) -> SignalKey:
        return (self.subject_id, self.song_id)

    @property
    def residual(self) -> np.ndarray:
        return self.origin - self.phasic - self.tonic


@dataclass(frozen=True)
class Decomposition:
    """Result of `decompose`.

    Attributes:
        subject_id: Subject of the source signal.
        song_id: Song of the source signal.
        origin: The decomposed signal y.
        phasic: r = M A^-1 p.
        tonic: t = B lambda + C d.
        driver: p, non-negative.
        spline_weights: lambda.
        drift: d, offset then slope.
        residual: y - r - t.
        alpha: l1 weight used.
        gamma: l2 weight used.
        objective: Value of the QP objective at the solution.
        iterations: Solver iterations.
    """

    subject_id: str
    song_id: str
    origin: np.ndarray
    phasic: np.ndarray
    tonic: np.ndarray
    driver: np.ndarray
    spline_weights: np.ndarray
    drift: np.ndarray
    residual: np.ndarray
    alpha: float
    gamma: float
    objective: float
    iterations: int

    @property
    def key(self) -> SignalKey:
        return (self.subject_id, self.song_id)

    def channels(self) -> ComponentChannels:
        return ComponentChannels(
            subject_id=self.subject_id,
            song_id=self.song_id,
            origin=self.origin,
            phasic=self.phasic,
            tonic=self.tonic,
        )


def arma_coefficients(*, tau0: float, tau1: float, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear-transform coefficients of 1 / ((tau0 s + 1)(tau1 s + 1)).

    Returns:
        (ar, ma), both normalised by the leading AR coefficient so ar[0] == 1.
    """
    if not 0 < tau0 < tau1:
        raise ParameterError('tau0', tau0, f'need 0 < tau0 < tau1 (tau1={tau1})')
    if delta <= 0:
        raise ParameterError('delta', delta, 'must be positive')
    a0 = (2 * tau0 + delta) * (2 * tau1 + delta)
    a1 = 2 * delta**2 - 8 * tau0 * tau1
    a2 = (delta - 2 * tau0) * (delta - 2 * tau1)
    ar = np.array([a0, a1, a2]) / a0
    ma = delta**2 * np.array([1.0, 2.0, 1.0]) / a0
    return ar, ma


def _lower_banded(coefficients: np.ndarray, n: int) -> sp.csc_matrix:
    return sp.diags(
        [np.full(n - k, c) for k, c in enumerate(coefficients)],
        offsets=[0, -1, -2],
        shape=(n, n),
        format='csc',
    )


def build_arma(*, tau0: float, tau1: float, delta: float, n: int) -> tuple[sp.csc_matrix, sp.csc_matrix]:
    """Build the MA and AR filter matrices.

    Both are lower-triangular Toeplitz with three diagonals; `A` has a unit diagonal.

    Raises:
        ParameterError: If the time constants are invalid or `n < 3`.
    """
    if n < 3:  # noqa: PLR2004
        raise ParameterError('n', n, 'must be at least 3')
    ar, ma = arma_coefficients(tau0=tau0, tau1=tau1, delta=delta)
    return _lower_banded(ma, n), _lower_banded(ar, n)


def spline_bump(knot_samples: int) -> np.ndarray:
    """Self-convolved triangle of half-width `knot_samples`, scaled to peak 1."""
    triangle = np.r_[np.arange(1.0, knot_samples), np.arange(knot_samples, 0.0, -1.0)]
    bump = np.convolve(triangle, triangle, 'full')
    return bump / bump.max()


def build_spline_basis(n: int, *, knot_spacing_s: float = 10.0, delta: float) -> sp.csc_matrix:
    """Build the tonic spline basis.

    Column j is a copy of `spline_bump` centred at sample j*K, truncated at the
    signal boundaries, for K = round(knot_spacing_s / delta).

    Raises:
        ParameterError: If the signal is not longer than one knot spacing.
    """
    knot = round(knot_spacing_s / delta)
    if knot < 1 or n <= knot:
        raise ParameterError('n', n, f'must exceed the knot spacing of {knot} samples')
    bump = spline_bump(knot)
    offsets = np.arange(-(bump.size // 2), (bump.size + 1) // 2)
    centres = np.arange(0, n, knot)
    rows = offsets[:, None] + centres[None, :]
    cols = np.broadcast_to(np.arange(centres.size), rows.shape)
    values = np.broadcast_to(bump[:, None], rows.shape)
    valid = (rows >= 0) & (rows < n)
    return sp.csc_matrix((values[valid], (rows[valid], cols[valid])), shape=(n, centres.size))


def drift_basis(n: int) -> np.ndarray:
    return np.column_stack([np.ones(n), np.arange(1.0, n + 1.0) / n])


@functools.lru_cache(maxsize=32)
def system_matrices(n: int, *, tau0: float, tau1: float, delta: float, knot_spacing_s: float) -> SystemMatrices:
    """Build (and cache per signal length and parameters) all model operators."""
    M, A = build_arma(tau0=tau0, tau1=tau1, delta=delta, n=n)
    B = build_spline_basis(n, knot_spacing_s=knot_spacing_s, delta=delta)
    return SystemMatrices(M=M, A=A, B=B, C=drift_basis(n), delta=delta)


def build_problem(y: np.ndarray, matrices: SystemMatrices, params: DecompositionParams) -> QpProblem:
    """Assemble the QP over z = (u, lambda, d), where u = g A^-1 p.

    The constraint rows compute the driver p, so lower <= Gz is p >= 0.
    """
    n, k = matrices.n, matrices.knots
    driver = matrices.driver_operator
    design = sp.hstack([matrices.phasic_operator, matrices.B, sp.csc_matrix(matrices.C)], format='csc')
    ridge = sp.block_diag(
        [sp.csc_matrix((n, n)), params.gamma * sp.eye(k), sp.csc_matrix((2, 2))],
        format='csc',
    )
    P = (design.T @ design + ridge).tocsc()
    P = ((P + P.T) * 0.5).tocsc()
    driver_cost = params.alpha * np.asarray(driver.sum(axis=0)).ravel()
    q = np.concatenate([driver_cost, np.zeros(k + 2)]) - design.T @ y
    G = sp.hstack([driver, sp.csc_matrix((n, k + 2))], format='csc')
    return QpProblem(P=P, q=q, G=G, lower=np.zeros(n), upper=np.full(n, np.inf))


def decompose(
    signal: EdaSignal,
    params: DecompositionParams | None = None,
    *,
    settings: QpSettings | None = None,
) -> Decomposition:
    """Decompose one signal into phasic, tonic and residual components.

    Args:
        signal: The (already trimmed) signal.
        params: Model constants; defaults apply when omitted.
        settings: QP solver settings.

    Returns:
        The decomposition; origin == phasic + tonic + residual exactly.

    Raises:
        SignalTooShortError: If the signal is shorter than three seconds.
        DecompositionError: If the solver does not reach status `solved`.
    """
    params = params or DecompositionParams()
    params.validate()
    y = np.asarray(signal.samples, dtype=np.float64)
    n = y.size
    required = int(np.ceil(MIN_DURATION_S * signal.sample_rate_hz))
    if n < required:
        raise SignalTooShortError(length=n, required=required, operation='decompose')
    delta = 1.0 / signal.sample_rate_hz
    knot_spacing = min(params.knot_spacing_s, (n - 1) * delta / 2)
    matrices = system_matrices(
        n,
        tau0=params.tau0,
        tau1=params.tau1,
        delta=delta,
        knot_spacing_s=knot_spacing,
    )
    problem = build_problem(y, matrices, params)
    solution = solve_qp(problem, settings)
    if solution.status is not QpStatus.solved:
        raise DecompositionError(status=str(solution.status), subject_id=signal.subject_id, song_id=signal.song_id)

    k = matrices.knots
    u, weights, drift = solution.x[:n], solution.x[n : n + k], solution.x[n + k :]
    phasic = matrices.phasic_operator @ u
    tonic = matrices.B @ weights + matrices.C @ drift
    logger.debug(
        'Decomposed ({}, {}) in {} iterations, objective {:.6g}',
        signal.subject_id,
        signal.song_id,
        solution.iterations,
        solution.objective,
    )
    return Decomposition(
        subject_id=signal.subject_id,
        song_id=signal.song_id,
        origin=y,
        phasic=phasic,
        tonic=tonic,
        driver=matrices.driver_operator @ u,
        spline_weights=weights,
        drift=drift,
        residual=y - phasic - tonic,
        alpha=params.alpha,
        gamma=params.gamma,
        objective=solution.objective + 0.5 * float(y @ y),
        iterations=solution.iterations,
    )


def decompose_batch(
    signals: Iterable[EdaSignal],
    params: DecompositionParams | None = None,
    *,
    settings: QpSettings | None = None,
) -> list[Decomposition]:
    """Decompose signals in order; each one independently."""
    results = []
    for signal in signals:
        results.append(decompose(signal, params, settings=settings))
        if len(results) % 50 == 0:
            logger.info('Decomposed {} signal(s)', len(results))
    logger.info('Decomposition finished for {} signal(s)', len(results))
    return results


def write_decomposition_csv(channels: ComponentChannels, directory: Path) -> Path:
    """Write `<subject>/<song>.csv` under `directory` with the three channels and the residual."""
    path = signal_path(directory, channels.key)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {
            'sample_index': np.arange(channels.origin.size),
            'origin': channels.origin,
            'phasic': channels.phasic,
            'tonic': channels.tonic,
            'residual': channels.residual,
        },
    )
    frame.to_csv(path, index=False, lineterminator='\n')
    return path


def load_decompositions(directory: Path, keys: Sequence[SignalKey]) -> dict[SignalKey, ComponentChannels]:
    """Read the per-signal CSVs written by `write_decomposition_csv` for `keys`.

    Raises:
        CsvHeaderError: If a file has the wrong header.
        CsvParseError: If a file is missing or a value does not parse.
    """
    loaded: dict[SignalKey, ComponentChannels] = {}
    for key in keys:
        frame = read_table(
            signal_path(directory, key),
            header=DECOMPOSITION_HEADER,
            dtypes={'sample_index': int, **dict.fromkeys(DECOMPOSITION_HEADER[1:], float)},
        )
        loaded[key] = ComponentChannels(
            subject_id=key[0],
            song_id=key[1],
            origin=frame['origin'].to_numpy(dtype=np.float64),
            phasic=frame['phasic'].to_numpy(dtype=np.float64),
            tonic=frame['tonic'].to_numpy(dtype=np.float64),
        )
    return loaded
