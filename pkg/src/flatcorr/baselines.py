"""Comparison frameworks and their diagnostics.

Two baselines for smoothing correlation trajectories: raw Euclidean
regression on matrix entries (which leaves the SPD cone) and SPD
log-Euclidean regression followed by diagonal rescaling back to unit
diagonal (which alters correlations). The diagnostics here quantify both
failure modes: per-time minimum eigenvalues, and the relative deviation
introduced by rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, ValidationError
from .symkernel import mat_exp, mat_log, symmetrize, _require_square
from .trajectory import Trajectory


@dataclass
class DiagnosticSeries:
    """Per-time diagnostics of a regressed trajectory.

    ``scaling_factors`` and the deviation fields are populated only by the
    rescaling baseline; ``mse_flat`` / ``mse_pullback`` report the fit error
    in the regression coordinates and after pullback, when available.
    """

    times: np.ndarray
    min_eigenvalues: np.ndarray
    scaling_factors: np.ndarray | None = None
    max_relative_deviation: float | None = None
    relative_deviations: np.ndarray | None = None
    mse_flat: float | None = None
    mse_pullback: float | None = None

    def __post_init__(self):
        t = len(np.asarray(self.times))
        if len(self.min_eigenvalues) != t:
            raise ValidationError("diagnostic series lengths disagree")
        if self.scaling_factors is not None and len(self.scaling_factors) != t:
            raise ValidationError("diagnostic series lengths disagree")
        if self.relative_deviations is not None \
                and len(self.relative_deviations) != t:
            raise ValidationError("diagnostic series lengths disagree")

    @property
    def n_nonpositive(self) -> int:
        """Number of time points whose smallest eigenvalue is <= 0."""
        return int(np.sum(np.asarray(self.min_eigenvalues) <= 0.0))


def spd_log(a: np.ndarray) -> np.ndarray:
    """Chart map of the SPD log-Euclidean geometry (matrix logarithm)."""
    return mat_log(a)


def spd_exp(s: np.ndarray) -> np.ndarray:
    """Inverse chart map of the SPD log-Euclidean geometry."""
    return mat_exp(s)


def cor_rescale(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rescale an SPD matrix to unit diagonal, returning the applied scaling.

    Returns
    -------
    (ndarray, ndarray)
        The correlation matrix Delta^{-1} A Delta^{-1} with an exact unit
        diagonal, and the diagonal entries of Delta = Diag(A)^{1/2}.
    """
    a = symmetrize(_require_square(a, "matrix to rescale"))
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("rescaling requires an SPD matrix") from exc
    delta = np.sqrt(np.diagonal(a, axis1=-2, axis2=-1))
    c = a / (delta[..., :, None] * delta[..., None, :])
    idx = np.arange(a.shape[-1])
    c[..., idx, idx] = 1.0
    return np.clip(c, -1.0, 1.0), delta


def scaling_deviation(before: np.ndarray, after: np.ndarray) -> float:
    """Largest relative off-diagonal change introduced by rescaling, in percent.

    The change |after_ij - before_ij| is taken relative to the mean absolute
    off-diagonal entry of ``before``. Zero when ``before`` already had a unit
    diagonal. This is one of several possible estimators of the rescaling
    distortion; the per-entry series is left to callers that want others.
    """
    before = _require_square(before, "pre-rescaling matrix")
    after = _require_square(after, "rescaled matrix")
    n = before.shape[-1]
    off = ~np.eye(n, dtype=bool)
    denom = float(np.mean(np.abs(before[off])))
    if denom == 0.0:
        return 0.0
    return float(np.max(np.abs(after[off] - before[off])) / denom * 100.0)


def min_eigenvalue_series(traj: Trajectory) -> DiagnosticSeries:
    """Smallest eigenvalue of each matrix in a symmetric trajectory."""
    mins = np.linalg.eigvalsh(traj.values)[..., 0]
    return DiagnosticSeries(times=traj.times, min_eigenvalues=mins)
