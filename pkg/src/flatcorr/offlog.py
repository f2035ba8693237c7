"""The off-log chart on full-rank correlation matrices.

``ol_log`` maps a correlation matrix to the off-diagonal part of its matrix
logarithm, a hollow matrix; ``ol_exp`` inverts it by solving for the unique
diagonal D that makes exp(D + S) have unit diagonal. Both maps are global
diffeomorphisms, so pulling a permutation-invariant inner product on hollow
matrices back through them yields a flat metric on the correlation manifold:
geodesics, distances, parallel transport and means all reduce to affine
operations in the chart.

Mapping functions accept stacks ``(..., n, n)``; differentials operate on a
single base point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .errors import MaxIterationsExceeded, ValidationError
from .spaces import check_correlation, check_hollow, snap_correlation, snap_hollow
from .symkernel import (
    dd_exp_table,
    dlog,
    mat_exp,
    mat_log,
    sym_eig,
    symmetrize,
    _frechet,
    _require_square,
)

SOLVE_DIAG_EPS = 1e-12
SOLVE_DIAG_MAX_ITER = 10_000


def _zero_diagonal(a: np.ndarray) -> np.ndarray:
    out = a.copy()
    idx = np.arange(a.shape[-1])
    out[..., idx, idx] = 0.0
    return out


def _add_diagonal(s: np.ndarray, d: np.ndarray) -> np.ndarray:
    out = s.copy()
    idx = np.arange(s.shape[-1])
    out[..., idx, idx] += d
    return out


def solve_diag(s: np.ndarray, eps: float = SOLVE_DIAG_EPS,
               max_iter: int = SOLVE_DIAG_MAX_ITER) -> np.ndarray:
    """Diagonal entries d such that exp(Diag(d) + S) has unit diagonal.

    Fixed-point iteration with linear convergence: starting from d = 0,
    each sweep subtracts the log of the current diagonal of the exponential,

        d_{k+1} = d_k - log(diag(exp(Diag(d_k) + S))),

    and stops once the Euclidean norm of the update is at most ``eps``
    (per stack element for stacked input).

    Parameters
    ----------
    s : ndarray, shape (..., n, n)
        Symmetric matrices, typically hollow.
    eps : float
        Convergence threshold on |d_k - d_{k-1}|.
    max_iter : int
        Iteration cap.

    Returns
    -------
    ndarray, shape (..., n)
        The diagonal entries of the unique D.

    Raises
    ------
    MaxIterationsExceeded
        If the cap is hit; the exception reports the worst unit-diagonal
        residual reached.
    """
    s = symmetrize(_require_square(s, "flat coordinates"))
    batch_shape = s.shape[:-2]
    n = s.shape[-1]
    flat = s.reshape((-1, n, n))
    d = np.zeros((flat.shape[0], n))
    active = np.arange(flat.shape[0])
    for _ in range(max_iter):
        m = mat_exp(_add_diagonal(flat[active], d[active]))
        step = np.log(np.diagonal(m, axis1=-2, axis2=-1))
        d[active] -= step
        active = active[np.sqrt(np.sum(step * step, axis=-1)) > eps]
        if active.size == 0:
            return d.reshape(batch_shape + (n,))
    m = mat_exp(_add_diagonal(flat[active], d[active]))
    resid = float(np.max(np.abs(np.diagonal(m, axis1=-2, axis2=-1) - 1.0)))
    raise MaxIterationsExceeded(
        f"diagonal normalization did not converge in {max_iter} sweeps "
        f"for {active.size} of {flat.shape[0]} matrices",
        residual=resid, iterations=max_iter,
    )


def ol_log(c: np.ndarray) -> np.ndarray:
    """Off-log map: the off-diagonal part of log(C), a hollow matrix."""
    c = check_correlation(c, full=False)
    return _zero_diagonal(mat_log(c))


def ol_exp(s: np.ndarray, eps: float = SOLVE_DIAG_EPS,
           max_iter: int = SOLVE_DIAG_MAX_ITER) -> np.ndarray:
    """Inverse off-log map: exp(Diag(d) + S) with d from :func:`solve_diag`.

    The result has unit diagonal by construction; the remaining residual is
    checked and then snapped to an exact unit diagonal.
    """
    s = check_hollow(s)
    d = solve_diag(s, eps=eps, max_iter=max_iter)
    return snap_correlation(mat_exp(_add_diagonal(s, d)))


class _TangentState(NamedTuple):
    """Eigendata of Diag(d) + S shared by the chart differentials."""

    p: np.ndarray
    table: np.ndarray
    h0_factor: tuple


def _h0_from_eig(p: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Contract H0[i, l] = sum_{j,k} P_ij P_lj table[j, k] P_ik P_lk.

    Evaluated as a single GEMM over the n^2 pair index: with
    B[(i,l), j] = P_ij P_lj, H0 = rowsum(B table * B). Symmetric positive
    definite because the table is a Hadamard integral of exponentials.
    """
    n = p.shape[-1]
    b = (p[:, None, :] * p[None, :, :]).reshape(n * n, n)
    h0 = ((b @ table) * b).sum(axis=1).reshape(n, n)
    return symmetrize(h0)


def h0_matrix(s: np.ndarray, eps: float = SOLVE_DIAG_EPS,
              max_iter: int = SOLVE_DIAG_MAX_ITER) -> np.ndarray:
    """The SPD system matrix coupling diagonal perturbations to exp's diagonal.

    Column l holds the diagonal of dexp evaluated at Diag(d) + S along the
    unit diagonal direction e_l e_l^T; solving against it yields the
    derivative of :func:`solve_diag`.
    """
    s = check_hollow(s)
    d = solve_diag(s, eps=eps, max_iter=max_iter)
    p, delta = sym_eig(_add_diagonal(s, d))
    return _h0_from_eig(p, dd_exp_table(delta))


def _tangent_state(s: np.ndarray, eps: float, max_iter: int) -> _TangentState:
    d = solve_diag(s, eps=eps, max_iter=max_iter)
    p, delta = sym_eig(_add_diagonal(s, d))
    table = dd_exp_table(delta)
    h0 = _h0_from_eig(p, table)
    return _TangentState(p=p, table=table, h0_factor=scipy.linalg.cho_factor(h0))


def d_diag(s: np.ndarray, y: np.ndarray, eps: float = SOLVE_DIAG_EPS,
           max_iter: int = SOLVE_DIAG_MAX_ITER) -> np.ndarray:
    """Derivative of :func:`solve_diag` at S along the hollow direction Y.

    Returns the diagonal entries of -H0^{-1} diag(dexp(Y)) evaluated at
    Diag(d) + S; linear in Y.
    """
    s = check_hollow(s)
    y = check_hollow(y)
    st = _tangent_state(s, eps, max_iter)
    g = _frechet(st.p, st.table, y)
    return -scipy.linalg.cho_solve(st.h0_factor, np.diagonal(g))


def ol_dlog(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Differential of the off-log map: the off part of dlog(C) along X."""
    c = check_correlation(c, full=False)
    x = check_hollow(x)
    return _zero_diagonal(dlog(c, x))


def ol_dexp(s: np.ndarray, y: np.ndarray, eps: float = SOLVE_DIAG_EPS,
            max_iter: int = SOLVE_DIAG_MAX_ITER) -> np.ndarray:
    """Differential of the inverse off-log map at S along Y.

    Evaluates dexp at Diag(d) + S on Y + Diag(d_diag(S, Y)); the result is
    hollow up to rounding and is snapped onto a zero diagonal.
    """
    s = check_hollow(s)
    y = check_hollow(y)
    st = _tangent_state(s, eps, max_iter)
    g = _frechet(st.p, st.table, y)
    x = -scipy.linalg.cho_solve(st.h0_factor, np.diagonal(g))
    out = _frechet(st.p, st.table, _add_diagonal(y, x))
    return snap_hollow(out)


@dataclass(frozen=True)
class HolQuadraticForm:
    """Permutation-invariant quadratic form on hollow n x n matrices.

    q(X) = alpha tr(X^2) + beta 1^T X^2 1 + gamma (1^T X 1)^2, positive
    definite exactly under the dimension-dependent coefficient constraints
    enforced here (alpha is forced to 0 at n = 3 and alpha = beta = 0 at
    n = 2, where the three invariants become linearly dependent).
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
        if 2.0 * a + (n - 2) * b <= 0.0:
            raise ValidationError("2 alpha + (n - 2) beta must be positive")
        if a + (n - 1) * (b + n * g) <= 0.0:
            raise ValidationError(
                "alpha + (n - 1)(beta + n gamma) must be positive"
            )


def default_hol_form(n: int) -> HolQuadraticForm:
    """Frobenius form for n >= 4; the simplest admissible member below."""
    if n >= 4:
        return HolQuadraticForm(1.0, 0.0, 0.0, n)
    if n == 3:
        return HolQuadraticForm(0.0, 1.0, 0.0, n)
    return HolQuadraticForm(0.0, 0.0, 1.0, n)


def q_eval(form: HolQuadraticForm, x: np.ndarray) -> float:
    """Evaluate the quadratic form on a hollow matrix."""
    return inner(form, x, x)


def inner(form: HolQuadraticForm, x: np.ndarray, y: np.ndarray) -> float:
    """Symmetric bilinear form polarizing :func:`q_eval`.

    <X, Y> = alpha tr(XY) + beta (X1)^T (Y1) + gamma (1^T X 1)(1^T Y 1).
    """
    x = check_hollow(x)
    y = check_hollow(y)
    if x.shape[-1] != form.n or y.shape[-1] != form.n:
        raise ValidationError("matrix dimension does not match the form")
    rx = x.sum(axis=-1)
    ry = y.sum(axis=-1)
    return float(
        form.alpha * np.sum(x * y)
        + form.beta * np.dot(rx, ry)
        + form.gamma * rx.sum() * ry.sum()
    )


# Riemannian operations of the pullback geometry. The chart is flat, so
# every operation is an affine statement about ol_log coordinates; only the
# inner product and the distance depend on the choice of quadratic form.

def metric_inner(form: HolQuadraticForm, c: np.ndarray, x: np.ndarray,
                 y: np.ndarray) -> float:
    """Pullback inner product of tangent vectors X, Y at base point C."""
    return inner(form, ol_dlog(c, x), ol_dlog(c, y))


def exp_map(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Riemannian exponential: follow the geodesic from C with velocity X."""
    return ol_exp(ol_log(c) + ol_dlog(c, x))


def log_map(c: np.ndarray, c_to: np.ndarray) -> np.ndarray:
    """Riemannian logarithm: the velocity at C of the geodesic reaching c_to."""
    s = ol_log(c)
    return ol_dexp(s, ol_log(c_to) - s)


def geodesic(c: np.ndarray, c_to: np.ndarray, t: float) -> np.ndarray:
    """Point at parameter t on the geodesic from C to c_to (t in R)."""
    return ol_exp((1.0 - t) * ol_log(c) + t * ol_log(c_to))


def distance(form: HolQuadraticForm, c: np.ndarray, c_to: np.ndarray) -> float:
    """Geodesic distance: the form norm of the chart difference."""
    return float(np.sqrt(q_eval(form, ol_log(c_to) - ol_log(c))))


def parallel_transport(c: np.ndarray, c_to: np.ndarray,
                       x: np.ndarray) -> np.ndarray:
    """Transport the tangent vector X from C to c_to (path independent)."""
    return ol_dexp(ol_log(c_to), ol_dlog(c, x))


def frechet_mean(cs: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Mean correlation matrix: arithmetic mean in the chart, pulled back."""
    stack = np.asarray(cs, dtype=float)
    if stack.ndim == 2:
        stack = stack[None]
    return ol_exp(ol_log(stack).mean(axis=0))
