"""Polynomial regression of matrix trajectories in flat coordinates.

The workhorse is entrywise least squares on a Vandermonde system over time
normalized to [-1, 1] (raw frame indices in the hundreds would make a
degree-6 basis numerically useless). ``regress_pullback`` wires the full
chain: map a correlation trajectory through a chart, subsample, fit,
evaluate everywhere, and pull back through the inverse chart. For the
off-log and log-scaling charts every output point is a valid correlation
matrix by construction; the Euclidean and SPD baselines surface their
respective failure diagnostics instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import baselines, logscaling, offlog
from .baselines import DiagnosticSeries
from .errors import RankDeficient, ValidationError
from .trajectory import FLAT_TAGS, Trajectory

DEFAULT_DEGREES = tuple(range(1, 11))
DEFAULT_SAMPLE_COUNTS = (4, 6, 8, 10, 15, 20, 30, 50)

# Table entries within this relative slack of the minimum count as ties,
# broken toward the simpler model (smaller degree, then fewer samples).
TIE_REL_TOL = 1e-9

FRAMES = ("offlog", "logscaling", "spd", "euclidean")
_FRAME_ALIASES = {"spd_logeuclidean": "spd"}


@dataclass(frozen=True)
class PolynomialCurve:
    """Matrix-valued polynomial over a normalized time domain.

    ``coeffs`` stacks the degree + 1 coefficient matrices in increasing
    order of the normalized time u = 2 (t - t_min)/(t_max - t_min) - 1.
    """

    degree: int
    coeffs: np.ndarray
    domain: tuple[float, float]
    space_tag: str = "symmetric"

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.ndim != 3 or len(coeffs) != self.degree + 1:
            raise ValidationError("expected degree + 1 coefficient matrices")
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("polynomial coefficients are not finite")
        if not self.domain[1] > self.domain[0]:
            raise ValidationError("domain must have positive length")

    def _normalize(self, t: np.ndarray) -> np.ndarray:
        t0, t1 = self.domain
        return 2.0 * (np.asarray(t, dtype=float) - t0) / (t1 - t0) - 1.0

    def evaluate(self, t) -> np.ndarray:
        """Evaluate at scalar or array times by Horner's rule.

        Extrapolation outside the fitted domain is allowed (the chart
        geometry is flat) but flagged with a warning.
        """
        t = np.asarray(t, dtype=float)
        if np.any(t < self.domain[0]) or np.any(t > self.domain[1]):
            warnings.warn("evaluating polynomial outside its fitted domain",
                          stacklevel=2)
        u = np.atleast_1d(self._normalize(t))[:, None, None]
        out = np.broadcast_to(self.coeffs[-1], (len(u),) + self.coeffs.shape[1:]).copy()
        for c in self.coeffs[-2::-1]:
            out = out * u + c
        return out if t.ndim else out[0]


def subsample(traj: Trajectory, k: int) -> Trajectory:
    """Keep k evenly spaced points (rounded indices, both endpoints).

    Indices are round(linspace(0, T-1, k)); duplicates arising from the
    rounding are dropped.
    """
    t = len(traj)
    if not 2 <= k <= t:
        raise ValidationError(f"sample count {k} outside [2, {t}]")
    idx = np.unique(np.rint(np.linspace(0, t - 1, k)).astype(int))
    return traj.select(idx)


def fit_polynomial(traj: Trajectory, degree: int) -> PolynomialCurve:
    """Entrywise least-squares polynomial fit of a flat-space trajectory.

    Solves the Vandermonde system over normalized time with an orthogonal
    (SVD) factorization, one shared system for all matrix entries. Fitting
    preserves linear matrix subspaces, so hollow input yields hollow
    coefficients and row-zero input near-row-zero ones.

    Raises
    ------
    RankDeficient
        If there are fewer than degree + 1 samples, or the system loses
        rank (coincident normalized times).
    """
    if traj.space_tag not in FLAT_TAGS:
        raise ValidationError(
            f"can only fit flat-space trajectories, got {traj.space_tag!r}"
        )
    if degree < 0:
        raise ValidationError("degree must be non-negative")
    m, n = len(traj), traj.n
    if m < degree + 1:
        raise RankDeficient(
            f"degree {degree} needs {degree + 1} samples, trajectory has {m}"
        )
    domain = (float(traj.times[0]), float(traj.times[-1]))
    u = 2.0 * (traj.times - domain[0]) / (domain[1] - domain[0]) - 1.0
    vand = np.vander(u, degree + 1, increasing=True)
    # fit the upper triangle only and mirror: exact symmetry by construction
    iu = np.triu_indices(n)
    rhs = traj.values[:, iu[0], iu[1]]
    sol, _, rank, _ = np.linalg.lstsq(vand, rhs, rcond=None)
    if rank < degree + 1:
        raise RankDeficient(
            f"Vandermonde system has rank {rank} < {degree + 1}"
        )
    coeffs = np.zeros((degree + 1, n, n))
    coeffs[:, iu[0], iu[1]] = sol
    coeffs[:, iu[1], iu[0]] = sol
    return PolynomialCurve(degree=degree, coeffs=coeffs,
                           domain=domain, space_tag=traj.space_tag)


def mse(curve: PolynomialCurve, traj: Trajectory) -> float:
    """Mean squared Frobenius error of the curve over all trajectory times."""
    pred = curve.evaluate(traj.times)
    diff = pred - traj.values
    return float(np.mean(np.sum(diff * diff, axis=(-2, -1))))


@dataclass(frozen=True)
class GridSearchResult:
    """Log-scaled MSE table over (degree, sample count) with the best cell."""

    mse_table: np.ndarray
    degrees: tuple[int, ...]
    sample_counts: tuple[int, ...]
    best: tuple[int, int]
    tie_break_note: str


def grid_search(traj: Trajectory,
                degrees=DEFAULT_DEGREES,
                sample_counts=DEFAULT_SAMPLE_COUNTS) -> GridSearchResult:
    """Fit every (degree, sample count) cell and score full-trajectory MSE.

    Each cell subsamples, fits, and scores the fit against the complete
    trajectory; the stored table holds log10 of that MSE. Cells whose fit
    is rank deficient score +inf. ``best`` is the (degree, sample_count)
    pair minimizing the MSE, with near-ties (relative slack 1e-9) broken
    toward the smaller degree, then the smaller sample count.
    """
    degrees = tuple(int(d) for d in degrees)
    sample_counts = tuple(int(k) for k in sample_counts)
    if not degrees or not sample_counts:
        raise ValidationError("empty grid")
    raw = np.full((len(degrees), len(sample_counts)), np.inf)
    for i, d in enumerate(degrees):
        for j, k in enumerate(sample_counts):
            try:
                raw[i, j] = mse(fit_polynomial(subsample(traj, k), d), traj)
            except RankDeficient:
                continue
    if not np.any(np.isfinite(raw)):
        raise RankDeficient("every grid cell was rank deficient")
    cutoff = raw.min() * (1.0 + TIE_REL_TOL) + np.finfo(float).tiny
    ties = np.argwhere(raw <= cutoff)
    i, j = min(ties, key=lambda ij: (degrees[ij[0]], sample_counts[ij[1]]))
    with np.errstate(divide="ignore"):
        table = np.log10(raw)
    return GridSearchResult(
        mse_table=table, degrees=degrees, sample_counts=sample_counts,
        best=(degrees[i], sample_counts[j]),
        tie_break_note="ties broken toward smaller degree, then fewer samples",
    )


def canonical_frame(frame: str) -> str:
    frame = _FRAME_ALIASES.get(frame, frame)
    if frame not in FRAMES:
        raise ValidationError(
            f"unknown frame {frame!r}; expected one of {FRAMES}"
        )
    return frame


@dataclass(frozen=True)
class SolverParams:
    """Chart solver tolerances threaded through trajectory transforms."""

    diag_eps: float = offlog.SOLVE_DIAG_EPS
    diag_max_iter: int = offlog.SOLVE_DIAG_MAX_ITER
    newton_tol: float = logscaling.NEWTON_TOL
    newton_max_iter: int = logscaling.NEWTON_MAX_ITER


def transform_to_flat(traj: Trajectory, frame: str,
                      solver: SolverParams = SolverParams()) -> Trajectory:
    """Map a correlation trajectory into the frame's regression coordinates."""
    frame = canonical_frame(frame)
    if traj.space_tag != "correlation":
        raise ValidationError(
            f"frame transforms expect a correlation trajectory, "
            f"got {traj.space_tag!r}"
        )
    if frame == "offlog":
        return traj.with_values(offlog.ol_log(traj.values), "hollow")
    if frame == "logscaling":
        values = logscaling.ls_log(traj.values, tol=solver.newton_tol,
                                   max_iter=solver.newton_max_iter)
        return traj.with_values(values, "rowzero")
    if frame == "spd":
        return traj.with_values(baselines.spd_log(traj.values), "symmetric")
    return traj.with_values(traj.values, "symmetric")


def transform_from_flat(traj: Trajectory, frame: str,
                        solver: SolverParams = SolverParams()) -> Trajectory:
    """Pull a flat-coordinate trajectory back through the frame's inverse map.

    The Euclidean frame has no inverse (it never left the entry space); the
    SPD frame returns an SPD trajectory that still needs rescaling to be
    read as correlations.
    """
    frame = canonical_frame(frame)
    if frame == "offlog":
        values = offlog.ol_exp(traj.values, eps=solver.diag_eps,
                               max_iter=solver.diag_max_iter)
        return traj.with_values(values, "correlation")
    if frame == "logscaling":
        return traj.with_values(logscaling.ls_exp(traj.values), "correlation")
    if frame == "spd":
        return traj.with_values(baselines.spd_exp(traj.values), "spd")
    return traj


def regress_pullback(traj: Trajectory, frame: str, degree: int,
                     sample_count: int,
                     solver: SolverParams = SolverParams()
                     ) -> tuple[Trajectory, DiagnosticSeries]:
    """Smooth a correlation trajectory by regression in a frame's chart.

    Transforms the trajectory, fits a polynomial of the given degree on the
    given number of evenly spaced samples, evaluates it at every original
    time, and pulls the curve back. Returns the smoothed trajectory and a
    diagnostic series: minimum eigenvalues everywhere, plus the rescaling
    factors and relative deviations for the SPD frame (whose output must be
    rescaled to regain a unit diagonal). In the off-log and log-scaling
    frames the output trajectory validates as correlation matrices at every
    single time point; in the Euclidean frame indefinite output is reported,
    not raised.
    """
    frame = canonical_frame(frame)
    flat = transform_to_flat(traj, frame, solver)
    curve = fit_polynomial(subsample(flat, sample_count), degree)
    fitted = flat.with_values(curve.evaluate(flat.times), flat.space_tag)
    mse_flat = mse(curve, flat)

    if frame == "spd":
        spd_traj = transform_from_flat(fitted, frame)
        rescaled = np.empty_like(spd_traj.values)
        scales = np.empty((len(spd_traj), spd_traj.n))
        deviations = np.empty(len(spd_traj))
        for i, a in enumerate(spd_traj.values):
            rescaled[i], scales[i] = baselines.cor_rescale(a)
            deviations[i] = baselines.scaling_deviation(a, rescaled[i])
        out = traj.with_values(rescaled, "correlation")
        diag = baselines.min_eigenvalue_series(out)
        diag.scaling_factors = scales
        diag.relative_deviations = deviations
        diag.max_relative_deviation = float(deviations.max())
    else:
        out = transform_from_flat(fitted, frame, solver)
        diag = baselines.min_eigenvalue_series(out)

    diag.mse_flat = mse_flat
    pull_diff = out.values - traj.values
    diag.mse_pullback = float(np.mean(np.sum(pull_diff**2, axis=(-2, -1))))
    return out, diag
