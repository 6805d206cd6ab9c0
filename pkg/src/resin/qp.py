"""Operator-splitting (ADMM) solver for convex quadratic programs.

Solves

    minimize    1/2 x'Px + q'x
    subject to  lower <= Gx <= upper

with the iteration popularised by OSQP: Ruiz equilibration of the KKT matrix, a
cached sparse factorisation of the regularised KKT system, over-relaxation,
residual-balancing rho updates and a polish on the guessed active set.

A point is reported as solved only when its residuals on the original problem pass
the absolute (plus optional relative) tolerances. ADMM alone converges slowly on
badly conditioned problems such as cvxEDA. There the polish does the last mile: it
re-solves the reduced KKT system until the active set settles.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING, Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from loguru import logger

from resin.errors import ParameterError, ShapeMismatchError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike

SYMMETRY_TOL = 1e-12
RHO_MIN = 1e-6
RHO_MAX = 1e6
RHO_EQ_FACTOR = 1e3
SCALING_MIN = 1e-4
SCALING_MAX = 1e4
INF_BOUND = 1e20


class QpStatus(StrEnum):
    """Outcome of a solve."""

    solved = 'solved'
    max_iter = 'max_iter'
    infeasible = 'infeasible'


def _as_csc(matrix: ArrayLike | sp.spmatrix, shape: tuple[int, int] | None = None) -> sp.csc_matrix:
    if sp.issparse(matrix):
        return sp.csc_matrix(matrix, dtype=np.float64)
    array = np.asarray(matrix, dtype=np.float64)
    if array.size == 0 and shape is not None:
        return sp.csc_matrix(shape, dtype=np.float64)
    return sp.csc_matrix(array)


def _inf_norm(vector: np.ndarray) -> float:
    return float(np.max(np.abs(vector))) if vector.size else 0.0


@dataclass(frozen=True)
class QpProblem:
    """A convex QP in OSQP form.

    Attributes:
        P: Symmetric positive-semidefinite n x n matrix.
        q: Linear cost, length n.
        G: Constraint matrix, m x n; m may be 0.
        lower: Lower bounds, length m; entries may be -inf.
        upper: Upper bounds, length m; entries may be +inf.
    """

    P: sp.csc_matrix
    q: np.ndarray
    G: sp.csc_matrix
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=np.float64).ravel()
        n = q.size
        P = _as_csc(self.P, (n, n))
        lower = np.asarray(self.lower, dtype=np.float64).ravel()
        upper = np.asarray(self.upper, dtype=np.float64).ravel()
        G = _as_csc(self.G, (lower.size, n))
        if P.shape != (n, n):
            raise ShapeMismatchError(what='P', expected=(n, n), found=P.shape)
        if G.shape[1] != n or G.shape[0] != lower.size:
            raise ShapeMismatchError(what='G', expected=(lower.size, n), found=G.shape)
        if upper.shape != lower.shape:
            raise ShapeMismatchError(what='upper', expected=lower.shape, found=upper.shape)
        asymmetry = abs(P - P.T)
        if asymmetry.nnz and asymmetry.max() > SYMMETRY_TOL:
            raise ParameterError('P', 'asymmetric', f'must be symmetric within {SYMMETRY_TOL}')
        if np.any(lower > upper):
            raise ParameterError('lower', 'above upper', 'need lower <= upper elementwise')
        object.__setattr__(self, 'P', P)
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'G', G)
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @classmethod
    def unconstrained(cls, P: ArrayLike | sp.spmatrix, q: ArrayLike) -> QpProblem:
        n = np.asarray(q).size
        return cls(P=P, q=q, G=sp.csc_matrix((0, n)), lower=np.zeros(0), upper=np.zeros(0))

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def m(self) -> int:
        return self.lower.size

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.P @ x) + self.q @ x)

    def scaled(self, factor: float) -> QpProblem:
        """The same feasible set with P and q multiplied by `factor`."""
        return QpProblem(P=self.P * factor, q=self.q * factor, G=self.G, lower=self.lower, upper=self.upper)


@dataclass(frozen=True)
class QpSettings:
    """ADMM settings.

    Termination follows OSQP: a residual passes when it is below
    `eps + eps_rel * scale`, measured on the original (unscaled) problem.

    Attributes:
        rho: Initial step size for inequality rows.
        sigma: Primal regularisation of the KKT system.
        alpha_relax: Over-relaxation parameter in (0, 2).
        eps_primal: Absolute tolerance on ||Gx - z||_inf.
        eps_dual: Absolute tolerance on ||Px + q + G'y||_inf.
        eps_rel: Relative tolerance added on top of the absolute ones.
        max_iter: Iteration cap.
        adaptive_rho: Rebalance rho from the residual ratio.
        adaptive_rho_interval: Iterations between rho updates and convergence checks.
        scaling_iter: Ruiz equilibration passes; 0 disables scaling.
        polish: Refine the solution on the guessed active set.
        polish_delta: Regularisation of the reduced KKT system.
        polish_refine_iter: Iterative refinement steps for each reduced solve.
        polish_max_iter: Active-set updates per polish attempt.
        early_polish_tol: Try polishing once both relative residuals fall below this.
        eps_infeasible: Tolerance of the infeasibility certificates.
    """

    rho: float = 0.1
    sigma: float = 1e-6
    alpha_relax: float = 1.6
    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    eps_rel: float = 0.0
    max_iter: int = 20000
    adaptive_rho: bool = True
    adaptive_rho_interval: int = 25
    scaling_iter: int = 10
    polish: bool = True
    polish_delta: float = 1e-9
    polish_refine_iter: int = 5
    polish_max_iter: int = 30
    early_polish_tol: float = 1e-3
    eps_infeasible: float = 1e-8

    def validate(self) -> None:
        if not 0 < self.alpha_relax < 2:  # noqa: PLR2004
            raise ParameterError('alpha_relax', self.alpha_relax, 'must lie in (0, 2)')
        if self.rho <= 0 or self.sigma <= 0:
            raise ParameterError('rho/sigma', (self.rho, self.sigma), 'must be positive')
        if min(self.eps_primal, self.eps_dual, self.eps_rel) < 0:
            raise ParameterError('eps', (self.eps_primal, self.eps_dual, self.eps_rel), 'must be non-negative')
        if self.max_iter < 1:
            raise ParameterError('max_iter', self.max_iter, 'must be at least 1')


@dataclass(frozen=True)
class QpSolution:
    """A solver result with its optimality certificate.

    Attributes:
        x: Primal solution.
        dual: Constraint multipliers; positive on upper-active rows, negative on lower-active rows.
        objective: 1/2 x'Px + q'x at `x`.
        primal_residual: ||Gx - z||_inf on the original problem, z being Gx projected on the bounds.
        dual_residual: ||Px + q + G'dual||_inf on the original problem.
        status: Solve outcome.
        iterations: ADMM iterations performed.
        polished: Whether the returned point came from active-set polishing.
    """

    x: np.ndarray
    dual: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    status: QpStatus
    iterations: int = 0
    polished: bool = False


class PrimalDualPoint(Protocol):
    x: np.ndarray
    dual: np.ndarray


@dataclass(frozen=True)
class KktResiduals:
    """Absolute KKT violations of a primal-dual point."""

    primal: float
    dual: float
    complementarity: float


def kkt_residuals(problem: QpProblem, solution: PrimalDualPoint) -> KktResiduals:
    """Compute the primal, dual and complementarity residual norms (infinity norm)."""
    x = np.asarray(solution.x, dtype=np.float64)
    y = np.asarray(solution.dual, dtype=np.float64)
    gx = problem.G @ x
    primal = np.maximum(problem.lower - gx, 0.0) + np.maximum(gx - problem.upper, 0.0)
    stationarity = problem.P @ x + problem.q + problem.G.T @ y

    y_up = np.maximum(y, 0.0)
    y_low = np.maximum(-y, 0.0)
    finite_up = np.isfinite(problem.upper)
    finite_low = np.isfinite(problem.lower)
    gap_up = np.where(finite_up, np.abs(np.where(finite_up, problem.upper, 0.0) - gx), 1.0)
    gap_low = np.where(finite_low, np.abs(gx - np.where(finite_low, problem.lower, 0.0)), 1.0)
    complementarity = np.maximum(y_up * gap_up, y_low * gap_low)
    return KktResiduals(
        primal=_inf_norm(primal),
        dual=_inf_norm(stationarity),
        complementarity=_inf_norm(complementarity),
    )


@dataclass(frozen=True)
class Residuals:
    """Unscaled residual norms and the magnitudes they are judged against."""

    primal: float
    dual: float
    primal_scale: float
    dual_scale: float

    @property
    def relative(self) -> float:
        """Scale-free merit, used to rank iterates and to time polishing."""
        return max(self.primal / (1.0 + self.primal_scale), self.dual / (1.0 + self.dual_scale))

    def passes(self, settings: QpSettings) -> bool:
        return (
            self.primal <= settings.eps_primal + settings.eps_rel * self.primal_scale
            and self.dual <= settings.eps_dual + settings.eps_rel * self.dual_scale
        )


def residuals(problem: QpProblem, x: np.ndarray, z: np.ndarray, y: np.ndarray) -> Residuals:
    """Primal and dual residuals of (x, z, y) on the original problem."""
    gx = problem.G @ x
    px = problem.P @ x
    gty = problem.G.T @ y
    return Residuals(
        primal=_inf_norm(gx - z),
        dual=_inf_norm(px + problem.q + gty),
        primal_scale=max(_inf_norm(gx), _inf_norm(z)),
        dual_scale=max(_inf_norm(px), _inf_norm(gty), _inf_norm(problem.q)),
    )


def _column_norms(matrix: sp.csc_matrix, axis: int) -> np.ndarray:
    size = matrix.shape[1 - axis]
    if matrix.shape[axis] == 0 or matrix.nnz == 0:
        return np.zeros(size)
    return np.asarray(abs(matrix).max(axis=axis).toarray()).ravel()


def _limit_scaling(norms: np.ndarray) -> np.ndarray:
    norms = np.where(norms < SCALING_MIN, 1.0, norms)
    return np.minimum(norms, SCALING_MAX)


@dataclass
class _Scaling:
    D: np.ndarray
    E: np.ndarray
    cost: float


@dataclass
class _Workspace:
    """Scaled problem data and ADMM iterates."""

    P: sp.csc_matrix
    q: np.ndarray
    G: sp.csc_matrix
    lower: np.ndarray
    upper: np.ndarray
    scaling: _Scaling
    rho_base: float = 0.1
    rho: np.ndarray = field(default_factory=lambda: np.zeros(0))
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    z: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    factor: spla.SuperLU | None = None

    @functools.cached_property
    def G_rows(self) -> sp.csr_matrix:  # noqa: N802
        return self.G.tocsr()


def _equilibrate(problem: QpProblem, iterations: int) -> _Workspace:
    P = problem.P.copy()
    q = problem.q.copy()
    G = problem.G.copy()
    D = np.ones(problem.n)
    E = np.ones(problem.m)
    cost = 1.0
    for _ in range(iterations):
        col = np.maximum(_column_norms(P, 0), _column_norms(G, 0))
        d = 1.0 / np.sqrt(_limit_scaling(col))
        e = 1.0 / np.sqrt(_limit_scaling(_column_norms(G.T.tocsc(), 0))) if problem.m else np.ones(0)
        Dd = sp.diags(d)
        P = (Dd @ P @ Dd).tocsc()
        G = (sp.diags(e) @ G @ Dd).tocsc() if problem.m else G
        q = d * q
        D *= d
        E *= e
        mean_col = float(np.mean(_column_norms(P, 0))) if problem.n else 0.0
        gamma = 1.0 / _limit_scaling(np.array([max(mean_col, _inf_norm(q))]))[0]
        P = (P * gamma).tocsc()
        q = q * gamma
        cost *= gamma
    with np.errstate(invalid='ignore'):
        lower = np.where(np.isfinite(problem.lower), E * np.nan_to_num(problem.lower), -np.inf)
        upper = np.where(np.isfinite(problem.upper), E * np.nan_to_num(problem.upper), np.inf)
    return _Workspace(P=P, q=q, G=G, lower=lower, upper=upper, scaling=_Scaling(D=D, E=E, cost=cost))


def _set_rho(work: _Workspace, rho: float) -> None:
    free = np.isinf(work.lower) & np.isinf(work.upper)
    equality = np.abs(work.upper - work.lower) < 1e-4  # noqa: PLR2004
    vector = np.full(work.lower.size, rho)
    vector[equality] = min(rho * RHO_EQ_FACTOR, RHO_MAX)
    vector[free] = RHO_MIN
    work.rho_base = rho
    work.rho = vector


def _saddle(top: sp.spmatrix, rows: sp.spmatrix, corner: sp.spmatrix | None) -> sp.csc_matrix:
    if rows.shape[0] == 0:
        return sp.csc_matrix(top)
    return sp.bmat([[top, rows.T], [rows, corner]], format='csc')


def _factorize(work: _Workspace, sigma: float) -> None:
    n = work.q.size
    top = work.P + sigma * sp.eye(n, format='csc')
    corner = -sp.diags(1.0 / work.rho) if work.rho.size else None
    work.factor = spla.splu(_saddle(top, work.G, corner))


def _admm_step(work: _Workspace, settings: QpSettings) -> None:
    n = work.q.size
    alpha = settings.alpha_relax
    rhs = np.concatenate([settings.sigma * work.x - work.q, work.z - work.y / work.rho])
    assert work.factor is not None  # noqa: S101
    sol = work.factor.solve(rhs)
    x_tilde = sol[:n]
    z_tilde = work.z + (sol[n:] - work.y) / work.rho
    work.x = alpha * x_tilde + (1.0 - alpha) * work.x
    z_relaxed = alpha * z_tilde + (1.0 - alpha) * work.z
    z_new = np.clip(z_relaxed + work.y / work.rho, work.lower, work.upper)
    work.y = work.y + work.rho * (z_relaxed - z_new)
    work.z = z_new


def _unscale(work: _Workspace, x: np.ndarray, z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, ...]:
    s = work.scaling
    return s.D * x, z / s.E if s.E.size else z, s.E * y / s.cost


def _balanced_rho(work: _Workspace) -> float:
    gx = work.G @ work.x
    px = work.P @ work.x
    gty = work.G.T @ work.y
    primal = _inf_norm(gx - work.z) / max(_inf_norm(gx), _inf_norm(work.z), 1e-10)
    dual = _inf_norm(px + work.q + gty) / max(_inf_norm(px), _inf_norm(gty), _inf_norm(work.q), 1e-10)
    ratio = np.sqrt(primal / max(dual, 1e-10))
    return float(np.clip(work.rho_base * ratio, RHO_MIN, RHO_MAX))


def _primal_infeasible(work: _Workspace, delta_y: np.ndarray, eps: float) -> bool:
    norm = _inf_norm(delta_y)
    if norm <= eps:
        return False
    v = delta_y / norm
    up = np.where(v > 0, np.where(np.isfinite(work.upper), work.upper, INF_BOUND), 0.0) * np.maximum(v, 0)
    low = np.where(v < 0, np.where(np.isfinite(work.lower), work.lower, -INF_BOUND), 0.0) * np.minimum(v, 0)
    support = float(np.sum(up) + np.sum(low))
    return support < -eps and _inf_norm(work.G.T @ v) < eps


def _dual_infeasible(work: _Workspace, delta_x: np.ndarray, eps: float) -> bool:
    norm = _inf_norm(delta_x)
    if norm <= eps:
        return False
    v = delta_x / norm
    if work.q @ v >= -eps or _inf_norm(work.P @ v) >= eps:
        return False
    gv = work.G @ v
    bad_up = np.isfinite(work.upper) & (gv > eps)
    bad_low = np.isfinite(work.lower) & (gv < -eps)
    return not bool(np.any(bad_up | bad_low))



@dataclass(frozen=True)
class _Candidate:
    x: np.ndarray
    dual: np.ndarray
    residuals: Residuals


def _candidate(problem: QpProblem, work: _Workspace) -> _Candidate:
    x, z, y = _unscale(work, work.x, work.z, work.y)
    return _Candidate(x=x, dual=y, residuals=residuals(problem, x, z, y))


def _refine(kkt: sp.csc_matrix, factor: spla.SuperLU, rhs: np.ndarray, iterations: int) -> np.ndarray:
    sol = factor.solve(rhs)
    for _ in range(iterations):
        sol = sol + factor.solve(rhs - kkt @ sol)
    return sol


def _reduced_solve(
    work: _Workspace,
    low: np.ndarray,
    up: np.ndarray,
    settings: QpSettings,
) -> tuple[np.ndarray, np.ndarray] | None:
    """Solve the equality-constrained QP with `low` rows at their lower and `up` rows at their upper bound."""
    n = work.q.size
    active = np.concatenate([low, up])
    g_red = work.G_rows[active] if active.size else sp.csc_matrix((0, n))
    delta = settings.polish_delta
    regular = _saddle(
        work.P + delta * sp.eye(n, format='csc'),
        g_red,
        -delta * sp.eye(active.size, format='csc'),
    )
    exact = _saddle(work.P, g_red, None)
    rhs = np.concatenate([-work.q, work.lower[low], work.upper[up]])
    try:
        factor = spla.splu(regular)
    except RuntimeError:
        logger.debug('Polish factorisation failed; keeping ADMM iterate')
        return None
    sol = _refine(exact, factor, rhs, settings.polish_refine_iter)
    if not np.all(np.isfinite(sol)):
        return None
    y = np.zeros(work.lower.size)
    y[low] = sol[n : n + low.size]
    y[up] = sol[n + low.size :]
    return sol[:n], y


def _active_sets(
    work: _Workspace,
    gx: np.ndarray,
    y: np.ndarray,
    previous: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Guess which rows sit on a bound from the sign of `Gx - bound + y`.

    Rows whose score is within rounding of zero keep their previous membership.
    """
    tol = 1e-9 * (1.0 + max(_inf_norm(gx), _inf_norm(y)))
    with np.errstate(invalid='ignore'):
        score_low = np.where(np.isfinite(work.lower), gx - np.nan_to_num(work.lower) + y, np.inf)
        score_up = np.where(np.isfinite(work.upper), gx - np.nan_to_num(work.upper) + y, -np.inf)
    low_mask = score_low < -tol
    up_mask = score_up > tol
    if previous is not None:
        was_low = np.zeros(work.lower.size, dtype=bool)
        was_up = np.zeros(work.lower.size, dtype=bool)
        was_low[previous[0]] = True
        was_up[previous[1]] = True
        low_mask |= was_low & (np.abs(score_low) <= tol)
        up_mask |= was_up & (np.abs(score_up) <= tol)
    up_mask &= ~low_mask
    return np.flatnonzero(low_mask), np.flatnonzero(up_mask)


def _polish(problem: QpProblem, work: _Workspace, settings: QpSettings) -> _Candidate | None:
    """Primal-dual active-set refinement started from the ADMM iterate.

    The reduced KKT system is re-solved until the active set stops changing; a
    fixed point with correctly signed multipliers is an exact KKT point.
    """
    sets = _active_sets(work, work.z, work.y)
    solved = None
    for _ in range(settings.polish_max_iter):
        solved = _reduced_solve(work, *sets, settings)
        if solved is None:
            return None
        following = _active_sets(work, work.G @ solved[0], solved[1], sets)
        if all(np.array_equal(a, b) for a, b in zip(following, sets, strict=True)):
            break
        sets = following
    if solved is None:
        return None

    x_bar, y_bar = solved
    low, up = sets
    sign_tol = 1e-9 * max(1.0, _inf_norm(y_bar))
    if np.any(y_bar[low] > sign_tol) or np.any(y_bar[up] < -sign_tol):
        return None
    x, _, y = _unscale(work, x_bar, work.G @ x_bar, y_bar)
    # z is Gx projected, so the primal residual is the bound violation of x on the original problem
    z = np.clip(problem.G @ x, problem.lower, problem.upper)
    return _Candidate(x=x, dual=y, residuals=residuals(problem, x, z, y))


def _solution(problem: QpProblem, best: _Candidate, status: QpStatus, iterations: int, *, polished: bool) -> QpSolution:
    return QpSolution(
        x=best.x,
        dual=best.dual,
        objective=problem.objective(best.x),
        primal_residual=best.residuals.primal,
        dual_residual=best.residuals.dual,
        status=status,
        iterations=iterations,
        polished=polished,
    )


def _try_polish(problem: QpProblem, work: _Workspace, settings: QpSettings) -> _Candidate | None:
    polished = _polish(problem, work, settings)
    if polished is None or not polished.residuals.passes(settings):
        return None
    return polished


def solve_qp(  # noqa: C901, PLR0912
    problem: QpProblem,
    settings: QpSettings | None = None,
    *,
    x0: np.ndarray | None = None,
) -> QpSolution:
    """Solve a convex QP with ADMM.

    Args:
        problem: The quadratic program.
        settings: Solver settings; defaults apply when omitted.
        x0: Optional initial primal point.

    Returns:
        The solution; with status `max_iter` it carries the best iterate seen.

    Raises:
        ParameterError: If the settings are out of range.
        ShapeMismatchError: If `x0` has the wrong length.
    """
    settings = settings or QpSettings()
    settings.validate()
    work = _equilibrate(problem, settings.scaling_iter)
    _set_rho(work, settings.rho)
    work.x = np.zeros(problem.n)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (problem.n,):
            raise ShapeMismatchError(what='x0', expected=(problem.n,), found=x0.shape)
        work.x = x0 / work.scaling.D
    work.z = np.clip(work.G @ work.x, work.lower, work.upper)
    work.y = np.zeros(problem.m)
    _factorize(work, settings.sigma)

    best = _candidate(problem, work)
    interval = max(1, settings.adaptive_rho_interval)
    polish_tried_at = -1
    iteration = 0
    for iteration in range(1, settings.max_iter + 1):
        x_prev, y_prev = work.x.copy(), work.y.copy()
        _admm_step(work, settings)
        if iteration % interval and iteration != settings.max_iter:
            continue

        current = _candidate(problem, work)
        if current.residuals.relative < best.residuals.relative:
            best = current
        logger.debug(
            'ADMM iter {}: primal={:.3e} dual={:.3e} rho={:.3e}',
            iteration,
            current.residuals.primal,
            current.residuals.dual,
            work.rho_base,
        )
        if current.residuals.passes(settings):
            polished = _try_polish(problem, work, settings) if settings.polish else None
            if polished is not None:
                return _solution(problem, polished, QpStatus.solved, iteration, polished=True)
            return _solution(problem, current, QpStatus.solved, iteration, polished=False)
        if _primal_infeasible(work, work.y - y_prev, settings.eps_infeasible) or _dual_infeasible(
            work,
            work.x - x_prev,
            settings.eps_infeasible,
        ):
            logger.warning('QP detected infeasible or unbounded after {} iterations', iteration)
            return _solution(problem, current, QpStatus.infeasible, iteration, polished=False)
        if (
            settings.polish
            and current.residuals.relative < settings.early_polish_tol
            and (polish_tried_at < 0 or iteration - polish_tried_at >= 10 * interval)
        ):
            polish_tried_at = iteration
            polished = _try_polish(problem, work, settings)
            if polished is not None:
                logger.debug('Polish succeeded at iteration {}', iteration)
                return _solution(problem, polished, QpStatus.solved, iteration, polished=True)
        if settings.adaptive_rho and problem.m:
            new_rho = _balanced_rho(work)
            if new_rho > 5 * work.rho_base or new_rho < 0.2 * work.rho_base:  # noqa: PLR2004
                _set_rho(work, new_rho)
                _factorize(work, settings.sigma)

    if settings.polish:
        polished = _try_polish(problem, work, settings)
        if polished is not None:
            return _solution(problem, polished, QpStatus.solved, iteration, polished=True)
    logger.warning(
        'QP hit max_iter={} (primal={:.2e}, dual={:.2e})',
        settings.max_iter,
        best.residuals.primal,
        best.residuals.dual,
    )
    return _solution(problem, best, QpStatus.max_iter, iteration, polished=False)
