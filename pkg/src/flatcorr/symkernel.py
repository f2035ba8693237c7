"""Dense symmetric-matrix kernels.

Eigendecomposition, matrix exponential/logarithm, and their directional
derivatives in the Daleckii-Krein form (eigenbasis congruence against a
table of first divided differences). Every function accepts a single
``(n, n)`` matrix or a stack ``(..., n, n)`` and treats inputs as
immutable. All outputs are exactly symmetric.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NonConvergence, NotPositiveDefinite, ValidationError

# Floor scale for positive definiteness: a matrix is accepted as SPD only if
# lambda_min > EIG_FLOOR_SCALE * max(1, lambda_max). Full rank is assumed
# throughout; the hard floor makes violations loud instead of silent.
EIG_FLOOR_SCALE = 1e-12

# |a - b| below which divided differences switch to the sinch series
# 1 + t^2/6 + t^4/120 to avoid catastrophic cancellation.
DD_SWITCH = 1e-7


class EigenDecomposition(NamedTuple):
    """Orthogonal eigendecomposition A = P diag(delta) P^T, delta ascending."""

    P: np.ndarray
    delta: np.ndarray


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the symmetric part (A + A^T)/2; exactly symmetric in floats."""
    a = np.asarray(a, dtype=float)
    return (a + np.swapaxes(a, -1, -2)) / 2.0


def _require_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValidationError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite entries")
    return a


def spd_floor(delta: np.ndarray) -> np.ndarray:
    """Positive-definiteness floor for eigenvalues ``delta`` (last axis)."""
    lam_max = np.max(delta, axis=-1)
    return EIG_FLOOR_SCALE * np.maximum(1.0, lam_max)


def sym_eig(a: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix (or stack of them).

    Returns
    -------
    EigenDecomposition
        ``P`` orthogonal with eigenvectors in columns, ``delta`` ascending.

    Raises
    ------
    NonConvergence
        If the underlying iterative eigensolver fails, which signals a
        pathological input.
    """
    a = _require_square(a)
    try:
        delta, p = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"symmetric eigensolver failed: {exc}") from exc
    return EigenDecomposition(P=p, delta=delta)


def is_spd(a: np.ndarray) -> bool:
    """True when every eigenvalue clears the positive-definiteness floor."""
    a = _require_square(a)
    delta = np.linalg.eigvalsh(a)
    return bool(np.all(delta[..., 0] > spd_floor(delta)))


def check_spd(a: np.ndarray, name: str = "matrix") -> None:
    """Raise NotPositiveDefinite unless ``a`` clears the eigenvalue floor."""
    a = _require_square(a, name)
    delta = np.linalg.eigvalsh(a)
    lam_min = delta[..., 0]
    floor = spd_floor(delta)
    if np.any(lam_min <= floor):
        worst = float(np.min(lam_min - floor))
        raise NotPositiveDefinite(
            f"{name} is not positive definite: lambda_min clears the floor "
            f"by {worst:.3e}"
        )


def _recompose(p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """P diag(w) P^T, symmetrized to machine exactness."""
    return symmetrize((p * w[..., None, :]) @ np.swapaxes(p, -1, -2))


def mat_exp(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a symmetric matrix via eigendecomposition."""
    p, delta = sym_eig(a)
    return _recompose(p, np.exp(delta))


def mat_log(a: np.ndarray) -> np.ndarray:
    """Matrix logarithm of a symmetric positive-definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If the smallest eigenvalue does not clear the SPD floor.
    """
    p, delta = sym_eig(a)
    lam_min = delta[..., 0]
    if np.any(lam_min <= spd_floor(delta)):
        raise NotPositiveDefinite(
            f"matrix logarithm requires a positive definite input "
            f"(lambda_min = {float(np.min(lam_min)):.3e})"
        )
    return _recompose(p, np.log(delta))


def _sinch(t: np.ndarray) -> np.ndarray:
    """Truncated series for sinh(t)/t, accurate to ~t^6 near zero."""
    t2 = t * t
    return 1.0 + t2 / 6.0 + t2 * t2 / 120.0


def divided_difference_exp(a: float, b: float) -> float:
    """First divided difference of exp: (e^a - e^b)/(a - b), e^a at a == b.

    Switches to e^((a+b)/2) * sinch((a-b)/2) when |a - b| < DD_SWITCH, which
    is continuous across the switch and exact in the limit of coincident
    arguments.
    """
    if abs(a - b) < DD_SWITCH:
        h = (a - b) / 2.0
        return float(np.exp((a + b) / 2.0) * _sinch(h))
    return float((np.exp(a) - np.exp(b)) / (a - b))


def dd_exp_table(delta: np.ndarray) -> np.ndarray:
    """Table of exp divided differences over all eigenvalue pairs.

    Entry (j, k) is (e^{d_j} - e^{d_k})/(d_j - d_k) with the series branch
    on near-coincident pairs; the diagonal is e^{d_j}.
    """
    delta = np.asarray(delta, dtype=float)
    di = delta[..., :, None]
    dj = delta[..., None, :]
    diff = di - dj
    small = np.abs(diff) < DD_SWITCH
    series = np.exp((di + dj) / 2.0) * _sinch(diff / 2.0)
    safe = np.where(small, 1.0, diff)
    exact = (np.exp(di) - np.exp(dj)) / safe
    return np.where(small, series, exact)


def dd_log_table(lam: np.ndarray) -> np.ndarray:
    """Table of log divided differences over positive eigenvalue pairs.

    Entry (j, k) is (log l_j - log l_k)/(l_j - l_k) with diagonal 1/l_j.
    Computed through 2*artanh(u)/(l_j + l_k) with u = (l_j - l_k)/(l_j + l_k),
    whose series 1 + u^2/3 + u^4/5 is used for |u| < DD_SWITCH; the relative
    switch keeps the table scale-invariant.
    """
    lam = np.asarray(lam, dtype=float)
    li = lam[..., :, None]
    lj = lam[..., None, :]
    s = li + lj
    u = (li - lj) / s
    small = np.abs(u) < DD_SWITCH
    u2 = u * u
    series = (2.0 / s) * (1.0 + u2 / 3.0 + u2 * u2 / 5.0)
    safe = np.where(small, 1.0, li - lj)
    exact = (np.log(li) - np.log(lj)) / safe
    return np.where(small, series, exact)


def _frechet(p: np.ndarray, table: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Daleckii-Krein congruence P [(P^T X P) o table] P^T, symmetrized."""
    pt = np.swapaxes(p, -1, -2)
    return symmetrize(p @ ((pt @ x @ p) * table) @ pt)


def dexp(at: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Directional derivative of the matrix exponential at ``at`` along ``x``.

    Linear in ``x``; reduces to ``x`` at the origin and to entrywise scaling
    by e^{d_i} in a common eigenbasis.
    """
    x = _require_square(x, "direction")
    p, delta = sym_eig(at)
    return _frechet(p, dd_exp_table(delta), x)


def dlog(at: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Directional derivative of the matrix logarithm at SPD ``at`` along ``x``.

    Inverse of :func:`dexp` at corresponding base points: the log table is the
    entrywise reciprocal of the exp table under lambda = e^delta.

    Raises
    ------
    NotPositiveDefinite
        If ``at`` does not clear the SPD floor.
    """
    x = _require_square(x, "direction")
    p, lam = sym_eig(at)
    lam_min = lam[..., 0]
    if np.any(lam_min <= spd_floor(lam)):
        raise NotPositiveDefinite(
            f"dlog requires a positive definite base point "
            f"(lambda_min = {float(np.min(lam_min)):.3e})"
        )
    return _frechet(p, dd_log_table(lam), x)
