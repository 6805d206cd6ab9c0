"""Dense primal-dual interior-point solver used to cross-check `solve_qp`.

Each finite bound becomes a one-sided row of Cx <= b and the KKT system is solved
with Mehrotra predictor-corrector steps. The multipliers of the two sides are folded
back into the signed `dual` convention of `QpSolution`.
"""

from __future__ import annotations

import numpy as np

from resin.errors import QpSizeError
from resin.qp import QpProblem, QpSolution, QpStatus, residuals

MAX_VARIABLES = 300
TOLERANCE = 1e-11
MAX_ITER = 200


def _step_length(value: np.ndarray, step: np.ndarray) -> float:
    negative = step < 0
    if not np.any(negative):
        return 1.0
    return float(min(1.0, np.min(-value[negative] / step[negative])))


def _solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(matrix, rhs, rcond=None)[0]


def solve_qp_reference(problem: QpProblem) -> QpSolution:
    """Solve a small QP to high accuracy with dense linear algebra.

    Raises:
        QpSizeError: If the problem has more than `MAX_VARIABLES` variables or rows.
    """
    n, m = problem.n, problem.m
    if max(n, m) > MAX_VARIABLES:
        raise QpSizeError(size=max(n, m), limit=MAX_VARIABLES)

    P = problem.P.toarray()
    q = problem.q
    G = problem.G.toarray()
    upper_rows = np.flatnonzero(np.isfinite(problem.upper))
    lower_rows = np.flatnonzero(np.isfinite(problem.lower))
    C = np.vstack([G[upper_rows], -G[lower_rows]]) if m else np.zeros((0, n))
    b = np.concatenate([problem.upper[upper_rows], -problem.lower[lower_rows]])
    p = b.size

    if p == 0:
        x = _solve(P, -q) if n else np.zeros(0)
        dual = np.zeros(m)
        norms = residuals(problem, x, G @ x, dual)
        return QpSolution(
            x=x,
            dual=dual,
            objective=problem.objective(x),
            primal_residual=norms.primal,
            dual_residual=norms.dual,
            status=QpStatus.solved,
        )

    x = np.zeros(n)
    s = np.maximum(b - C @ x, 1.0)
    z = np.ones(p)
    status = QpStatus.max_iter
    iteration = 0
    for iteration in range(1, MAX_ITER + 1):
        r_dual = P @ x + q + C.T @ z
        r_primal = C @ x + s - b
        mu = float(s @ z) / p
        if (
            np.max(np.abs(r_dual), initial=0.0) <= TOLERANCE * (1 + np.max(np.abs(q), initial=0.0))
            and np.max(np.abs(r_primal)) <= TOLERANCE * (1 + np.max(np.abs(b)))
            and mu <= TOLERANCE
        ):
            status = QpStatus.solved
            break

        weight = z / s
        hessian = P + C.T @ (weight[:, None] * C)

        def direction(r_comp: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            shifted = (-r_comp + z * r_primal) / s
            dx = _solve(hessian, -r_dual - C.T @ shifted)  # noqa: B023
            ds = -r_primal - C @ dx  # noqa: B023
            dz = shifted + weight * (C @ dx)  # noqa: B023
            return dx, ds, dz

        dx_aff, ds_aff, dz_aff = direction(s * z)
        step_aff = min(_step_length(s, ds_aff), _step_length(z, dz_aff))
        mu_aff = float((s + step_aff * ds_aff) @ (z + step_aff * dz_aff)) / p
        centering = (mu_aff / mu) ** 3

        dx, ds, dz = direction(s * z + ds_aff * dz_aff - centering * mu)
        step = min(1.0, 0.99 * min(_step_length(s, ds), _step_length(z, dz)))
        x = x + step * dx
        s = s + step * ds
        z = z + step * dz

    dual = np.zeros(m)
    dual[upper_rows] += z[: upper_rows.size]
    dual[lower_rows] -= z[upper_rows.size :]
    gx = G @ x
    norms = residuals(problem, x, np.clip(gx, problem.lower, problem.upper), dual)
    return QpSolution(
        x=x,
        dual=dual,
        objective=problem.objective(x),
        primal_residual=norms.primal,
        dual_residual=norms.dual,
        status=status,
        iterations=iteration,
    )
