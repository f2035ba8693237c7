"""The log-scaling chart on full-rank correlation matrices.

A correlation matrix C is symmetrically scaled by the unique positive
diagonal Delta that gives Delta C Delta unit row sums; the log of the scaled
matrix then has zero row sums (the all-ones vector is an eigenvector with
eigenvalue 1), so ``ls_log`` lands in the vector space of symmetric
matrices with zero row sums. ``ls_exp`` inverts by exponentiating and
renormalizing the diagonal. The scaling diagonal is found by Newton's
method on a strictly convex objective.

As with the off-log chart, pulling back a permutation-invariant inner
product through these maps yields a flat metric whose Riemannian
operations are affine statements in the chart.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    LineSearchStalled,
    MaxIterationsExceeded,
    NotPositiveDefinite,
    ValidationError,
)
from .spaces import check_correlation, check_hollow, check_rowzero, \
    snap_correlation, snap_hollow, snap_rowzero
from .symkernel import dexp, dlog, mat_exp, mat_log, symmetrize, _require_square

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100
ARMIJO_C = 1e-4


@dataclass(frozen=True)
class ScalingState:
    """Optimal scaling of a correlation matrix.

    ``delta`` holds the positive diagonal entries and ``sigma`` the scaled
    matrix Diag(delta) C Diag(delta), whose log has zero row sums.
    """

    delta: np.ndarray
    sigma: np.ndarray


@dataclass
class NewtonInfo:
    """Per-iteration record of the scaling solver, for diagnostics."""

    gradient_norms: list
    objective_values: list
    iterations: int


def _objective(sigma: np.ndarray, d: np.ndarray):
    return 0.5 * d @ sigma @ d - np.sum(np.log(d))


def solve_scaling(sigma: np.ndarray, tol: float = NEWTON_TOL,
                  max_iter: int = NEWTON_MAX_ITER,
                  return_info: bool = False):
    """Positive diagonal d scaling an SPD matrix to unit row sums.

    Minimizes the strictly convex F(d) = (1/2) d^T Sigma d - sum(log d),
    whose stationary point satisfies Sigma d = 1/d, i.e. Diag(d) Sigma
    Diag(d) has unit row sums. Newton steps use the exact gradient
    Sigma d - 1/d and Hessian Sigma + Diag(1/d^2) (positive definite, solved
    by Cholesky), safeguarded by halving backtracking that keeps d positive
    and enforces an Armijo decrease.

    Parameters
    ----------
    sigma : ndarray, shape (n, n)
        Strictly positive definite matrix.
    tol : float
        Terminal bound on the gradient norm.
    max_iter : int
        Newton iteration cap.
    return_info : bool
        Also return a :class:`NewtonInfo` with the residual history.

    Returns
    -------
    ndarray, shape (n,)
        The positive diagonal entries; with ``return_info``, a
        ``(d, NewtonInfo)`` pair.
    """
    sigma = symmetrize(_require_square(sigma, "matrix to scale"))
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            "diagonal scaling requires a positive definite matrix"
        ) from exc
    # Objective and gradient are accumulated in extended precision: near the
    # minimizer the double-precision matvec floor can sit above tight
    # tolerances (~1e-12 at n=100), masking convergence that has happened.
    sigma_x = sigma.astype(np.longdouble)

    def gradient(dv):
        return sigma_x @ dv - 1.0 / dv

    d = (1.0 / np.sqrt(np.diagonal(sigma))).astype(np.longdouble)
    f = _objective(sigma_x, d)
    info = NewtonInfo([], [float(f)], 0)
    for k in range(max_iter):
        grad = gradient(d)
        gnorm = float(np.sqrt(np.sum(grad * grad)))
        info.gradient_norms.append(gnorm)
        info.iterations = k
        if gnorm <= tol:
            return (d.astype(float), info) if return_info else d.astype(float)
        hess = sigma + np.diag(1.0 / (d * d).astype(float))
        step = -scipy.linalg.cho_solve(
            scipy.linalg.cho_factor(hess), grad.astype(float)
        ).astype(np.longdouble)
        slope = float(grad @ step)
        # Once the predicted decrease falls below the objective's floating
        # resolution, Armijo can no longer certify descent; the pure Newton
        # step is safe there (strictly convex F, exact Hessian) and the
        # gradient norm keeps contracting quadratically.
        f_floor = 4.0 * float(np.finfo(np.longdouble).eps) * max(1.0, abs(float(f)))
        t = 1.0
        while True:
            d_new = d + t * step
            if np.all(d_new > 0.0):
                f_new = _objective(sigma_x, d_new)
                if -slope <= f_floor or f_new <= f + ARMIJO_C * t * slope:
                    break
            t *= 0.5
            if t < 1e-14:
                raise LineSearchStalled(
                    f"no acceptable scaling step at gradient norm {gnorm:.3e}"
                )
        d, f = d_new, f_new
        info.objective_values.append(float(f))
    grad = gradient(d)
    raise MaxIterationsExceeded(
        f"scaling Newton solver did not converge in {max_iter} steps",
        residual=float(np.sqrt(np.sum(grad * grad))), iterations=max_iter,
    )


def scale_correlation(c: np.ndarray, tol: float = NEWTON_TOL,
                      max_iter: int = NEWTON_MAX_ITER) -> ScalingState:
    """Solve the scaling problem for a correlation matrix."""
    c = check_correlation(c, full=False)
    d = solve_scaling(c, tol=tol, max_iter=max_iter)
    # scaling by the outer product keeps the result bitwise symmetric
    return ScalingState(delta=d, sigma=c * np.outer(d, d))


def ls_log(c: np.ndarray, tol: float = NEWTON_TOL,
           max_iter: int = NEWTON_MAX_ITER) -> np.ndarray:
    """Log-scaling map: log of the optimally scaled matrix, zero row sums.

    Accepts stacks ``(..., n, n)``; the scaling is solved per matrix and the
    logs are taken in one batched eigendecomposition.
    """
    c = check_correlation(c, full=False)
    if c.ndim == 2:
        return snap_rowzero(mat_log(scale_correlation(c, tol, max_iter).sigma))
    flat = c.reshape(-1, *c.shape[-2:])
    scaled = np.empty_like(flat)
    for i, ci in enumerate(flat):
        scaled[i] = scale_correlation(ci, tol, max_iter).sigma
    return snap_rowzero(mat_log(scaled.reshape(c.shape)))


def ls_exp(s: np.ndarray) -> np.ndarray:
    """Inverse log-scaling map: renormalize exp(S) to unit diagonal."""
    s = check_rowzero(s)
    sigma = mat_exp(s)
    root = np.sqrt(np.diagonal(sigma, axis1=-2, axis2=-1))
    c = sigma / (root[..., :, None] * root[..., None, :])
    return snap_correlation(c)


def x0_term(sigma: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Diagonal compensation -2 diag((I + Sigma)^{-1} Delta X Delta 1).

    Delta is the square root of Sigma's diagonal. This is the diagonal
    velocity induced on the scaling by a tangent perturbation X of the
    underlying correlation matrix; linear in X.
    """
    sigma = symmetrize(_require_square(sigma, "scaled matrix"))
    x = _require_square(x, "tangent direction")
    root = np.sqrt(np.diagonal(sigma))
    rhs = (x * np.outer(root, root)) @ np.ones(sigma.shape[-1])
    lhs = sigma + np.eye(sigma.shape[-1])
    return -2.0 * scipy.linalg.cho_solve(scipy.linalg.cho_factor(lhs), rhs)


def ls_dlog(c: np.ndarray, x: np.ndarray, tol: float = NEWTON_TOL,
            max_iter: int = NEWTON_MAX_ITER) -> np.ndarray:
    """Differential of the log-scaling map at C along the hollow X.

    With Sigma the scaled matrix and X0 the diagonal compensation, this is
    dlog at Sigma applied to Delta X Delta + (X0 Sigma + Sigma X0)/2; the
    result has zero row sums up to rounding and is snapped onto the space.
    """
    c = check_correlation(c, full=False)
    x = check_hollow(x)
    state = scale_correlation(c, tol, max_iter)
    x0 = x0_term(state.sigma, x)
    arg = x * np.outer(state.delta, state.delta)
    arg = arg + 0.5 * (x0[:, None] * state.sigma + state.sigma * x0[None, :])
    return snap_rowzero(dlog(state.sigma, arg))


def ls_dexp(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Differential of the inverse log-scaling map at S along Y.

    Removes from dexp(S)[Y] the part that renormalizing the diagonal eats,
    then undoes the scaling; the result is hollow up to rounding and is
    snapped onto a zero diagonal.
    """
    s = check_rowzero(s)
    y = check_rowzero(y)
    sigma = mat_exp(s)
    g = dexp(s, y)
    dia = np.diagonal(sigma)
    ratio = np.diagonal(g) / dia
    m = g - 0.5 * (ratio[:, None] * sigma + sigma * ratio[None, :])
    root = np.sqrt(dia)
    return snap_hollow(m / np.outer(root, root))


@dataclass(frozen=True)
class RowZeroQuadraticForm:
    """Permutation-invariant quadratic form on row-zero n x n matrices.

    q(Y) = alpha tr(Y^2) + beta tr(Diag(Y)^2) + gamma tr(Y)^2, with the
    dimension-dependent admissibility constraints enforced here (alpha is
    forced to 0 at n = 3 and alpha = beta = 0 at n = 2).
    """

    alpha: float
    beta: float
    gamma: float
    n: int

    def __post_init__(self):
        a, b, g, n = self.alpha, self.beta, self.gamma, self.n
        if n < 2:
            raise ValidationError("quadratic forms require n >= 2")
        if n == 2:
            if a != 0.0 or b != 0.0:
                raise ValidationError("n = 2 requires alpha = beta = 0")
            if g <= 0.0:
                raise ValidationError("n = 2 requires gamma > 0")
            return
        if n == 3 and a != 0.0:
            raise ValidationError("n = 3 requires alpha = 0")
        if n >= 4 and a <= 0.0:
            raise ValidationError("alpha must be positive for n >= 4")
        if n * a + (n - 2) * b <= 0.0:
            raise ValidationError("n alpha + (n - 2) beta must be positive")
        if n * a + (n - 1) * (b + n * g) <= 0.0:
            raise ValidationError(
                "n alpha + (n - 1)(beta + n gamma) must be positive"
            )


def default_rowzero_form(n: int) -> RowZeroQuadraticForm:
    """Frobenius form for n >= 4; the simplest admissible member below."""
    if n >= 4:
        return RowZeroQuadraticForm(1.0, 0.0, 0.0, n)
    if n == 3:
        return RowZeroQuadraticForm(0.0, 1.0, 0.0, n)
    return RowZeroQuadraticForm(0.0, 0.0, 1.0, n)


def q_star_eval(form: RowZeroQuadraticForm, y: np.ndarray) -> float:
    """Evaluate the quadratic form on a row-zero matrix."""
    return inner_star(form, y, y)


def inner_star(form: RowZeroQuadraticForm, x: np.ndarray,
               y: np.ndarray) -> float:
    """Symmetric bilinear form polarizing :func:`q_star_eval`."""
    x = check_rowzero(x)
    y = check_rowzero(y)
    if x.shape[-1] != form.n or y.shape[-1] != form.n:
        raise ValidationError("matrix dimension does not match the form")
    dx = np.diagonal(x)
    dy = np.diagonal(y)
    return float(
        form.alpha * np.sum(x * y)
        + form.beta * np.dot(dx, dy)
        + form.gamma * dx.sum() * dy.sum()
    )


# Riemannian operations of the pullback geometry, affine in the chart.

def metric_inner(form: RowZeroQuadraticForm, c: np.ndarray, x: np.ndarray,
                 y: np.ndarray) -> float:
    """Pullback inner product of hollow tangents X, Y at base point C."""
    return inner_star(form, ls_dlog(c, x), ls_dlog(c, y))


def exp_map(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Riemannian exponential: follow the geodesic from C with velocity X."""
    return ls_exp(ls_log(c) + ls_dlog(c, x))


def log_map(c: np.ndarray, c_to: np.ndarray) -> np.ndarray:
    """Riemannian logarithm: the velocity at C of the geodesic reaching c_to."""
    s = ls_log(c)
    return ls_dexp(s, ls_log(c_to) - s)


def geodesic(c: np.ndarray, c_to: np.ndarray, t: float) -> np.ndarray:
    """Point at parameter t on the geodesic from C to c_to (t in R)."""
    return ls_exp((1.0 - t) * ls_log(c) + t * ls_log(c_to))


def distance(form: RowZeroQuadraticForm, c: np.ndarray,
             c_to: np.ndarray) -> float:
    """Geodesic distance: the form norm of the chart difference."""
    return float(np.sqrt(q_star_eval(form, ls_log(c_to) - ls_log(c))))


def parallel_transport(c: np.ndarray, c_to: np.ndarray,
                       x: np.ndarray) -> np.ndarray:
    """Transport the tangent vector X from C to c_to (path independent)."""
    return ls_dexp(ls_log(c_to), ls_dlog(c, x))


def frechet_mean(cs: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Mean correlation matrix: arithmetic mean in the chart, pulled back."""
    stack = np.asarray(cs, dtype=float)
    if stack.ndim == 2:
        stack = stack[None]
    return ls_exp(ls_log(stack).mean(axis=0))
