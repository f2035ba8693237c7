"""Validators and repairs for the matrix spaces used throughout the package.

Correlation matrices (SPD, unit diagonal), hollow matrices (symmetric, zero
diagonal) and row-zero matrices (symmetric, zero row sums) are represented
as plain ndarrays; the functions here enforce their invariants. Validators
reject, producers repair: a residual below ``repair_tol`` is corrected to
make the invariant machine-exact, anything larger is an error because it
would mask a solver failure.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, ValidationError
from .symkernel import _require_square, check_spd

# Residual ceiling under which produced matrices may be snapped onto their
# space; above it the producing solver is considered to have failed.
REPAIR_TOL = 1e-8

# Validator tolerances for user-supplied inputs.
CORR_DIAG_TOL = 1e-12
HOLLOW_DIAG_TOL = 1e-12
ROWZERO_TOL = 1e-10


def _diag(a: np.ndarray) -> np.ndarray:
    return np.diagonal(a, axis1=-2, axis2=-1)


def check_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = _require_square(a, name)
    if not np.array_equal(a, np.swapaxes(a, -1, -2)):
        raise ValidationError(f"{name} is not exactly symmetric")
    return a


def check_correlation(c: np.ndarray, full: bool = True) -> np.ndarray:
    """Validate a full-rank correlation matrix (or stack).

    Symmetric, diagonal equal to 1 within ``CORR_DIAG_TOL``, off-diagonal
    entries in [-1, 1], and strictly positive definite when ``full``.
    """
    c = check_symmetric(c, "correlation matrix")
    if np.max(np.abs(_diag(c) - 1.0)) > CORR_DIAG_TOL:
        raise ValidationError("correlation matrix diagonal deviates from 1")
    if np.max(np.abs(c)) > 1.0 + CORR_DIAG_TOL:
        raise ValidationError("correlation entries outside [-1, 1]")
    if full:
        check_spd(c, "correlation matrix")
    return c


def check_hollow(s: np.ndarray) -> np.ndarray:
    """Validate a hollow matrix: symmetric with (machine-) zero diagonal."""
    s = check_symmetric(s, "hollow matrix")
    if np.max(np.abs(_diag(s)), initial=0.0) > HOLLOW_DIAG_TOL:
        raise ValidationError("hollow matrix has a nonzero diagonal")
    return s


def check_rowzero(s: np.ndarray) -> np.ndarray:
    """Validate a row-zero matrix: symmetric with row sums below 1e-10."""
    s = check_symmetric(s, "row-zero matrix")
    if np.max(np.abs(s.sum(axis=-1))) > ROWZERO_TOL:
        raise ValidationError("row sums exceed the row-zero tolerance")
    return s


def snap_hollow(s: np.ndarray, repair_tol: float = REPAIR_TOL) -> np.ndarray:
    """Zero the diagonal of a produced matrix whose residual is small.

    Raises
    ------
    NumericalError
        If any diagonal entry exceeds ``repair_tol``, since that indicates
        the producing computation failed rather than merely rounded.
    """
    s = np.asarray(s, dtype=float)
    resid = float(np.max(np.abs(_diag(s)), initial=0.0))
    if resid > repair_tol:
        raise NumericalError(
            f"diagonal residual {resid:.3e} exceeds the hollow repair "
            f"tolerance {repair_tol:.1e}"
        )
    out = s.copy()
    idx = np.arange(s.shape[-1])
    out[..., idx, idx] = 0.0
    return out


def snap_rowzero(s: np.ndarray, repair_tol: float = REPAIR_TOL) -> np.ndarray:
    """Symmetrically remove small row-sum residuals.

    Subtracts (r 1^T + 1 r^T)/n - (sum r / n^2) 1 1^T, which is symmetric
    and cancels the row sums exactly in exact arithmetic.
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[-1]
    r = s.sum(axis=-1)
    resid = float(np.max(np.abs(r)))
    if resid > repair_tol:
        raise NumericalError(
            f"row-sum residual {resid:.3e} exceeds the row-zero repair "
            f"tolerance {repair_tol:.1e}"
        )
    correction = (r[..., :, None] + r[..., None, :]) / n
    correction -= (r.sum(axis=-1) / n**2)[..., None, None]
    return s - correction


def snap_correlation(m: np.ndarray, repair_tol: float = REPAIR_TOL) -> np.ndarray:
    """Set the diagonal of a produced matrix to exactly 1.

    The unit-diagonal residual is the quality certificate of the producing
    solver; residuals above ``repair_tol`` raise instead of being hidden.
    Off-diagonal entries a rounding error beyond +-1 are clipped back.
    """
    m = np.asarray(m, dtype=float)
    resid = float(np.max(np.abs(_diag(m) - 1.0)))
    if resid > repair_tol:
        raise NumericalError(
            f"unit-diagonal residual {resid:.3e} exceeds the correlation "
            f"repair tolerance {repair_tol:.1e}"
        )
    if np.max(np.abs(m)) > 1.0 + CORR_DIAG_TOL:
        raise NumericalError("off-diagonal entries stray outside [-1, 1]")
    out = np.clip(m, -1.0, 1.0)
    idx = np.arange(m.shape[-1])
    out[..., idx, idx] = 1.0
    return out
