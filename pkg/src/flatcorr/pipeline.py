"""Ingestion, sliding-window connectomes, synthetic data, PCA, and file I/O.

The entry point of real data is a region-by-sample table of averaged
signals; sliding-window Pearson correlation turns it into a trajectory of
full-rank correlation matrices. Synthetic trajectories (smooth random paths
in the hollow chart, pulled back) stand in for access-restricted imaging
data in tests and demos.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateCovariance,
    FileFormatError,
    RankDeficient,
    ValidationError,
    ZeroVariance,
)
from .offlog import ol_exp
from .symkernel import EIG_FLOOR_SCALE, symmetrize
from .trajectory import CODE_TO_TAG, TAG_TO_CODE, Trajectory

log = logging.getLogger(__name__)

# Windows whose eigenvalues stray outside this range are logged as suspect;
# far outside it the chart solvers slow down or the PD floor trips.
SPECTRAL_GUARD = (1e-3, 1e3)

MTRJ_MAGIC = b"MTRJ1"


@dataclass(frozen=True)
class RegionTimeSeries:
    """Region-averaged signals, one row per region, one column per sample."""

    data: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise ValidationError("expected a 2-D (regions x samples) array")
        if not np.all(np.isfinite(data)):
            raise ValidationError("time series contains non-finite values")
        if self.labels is not None and len(self.labels) != data.shape[0]:
            raise ValidationError("one label per region required")

    @property
    def n_regions(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window geometry: width and stride in samples."""

    width: int = 600
    offset: int = 1

    def __post_init__(self):
        if self.width < 2:
            raise ValidationError("window width must be at least 2")
        if self.offset < 1:
            raise ValidationError("window offset must be at least 1")


def _pearson_from_moments(sums: np.ndarray, cross: np.ndarray, width: int,
                          window_index: int) -> np.ndarray:
    cov = cross - np.outer(sums, sums) / width
    var = np.diagonal(cov)
    zero = np.flatnonzero(var <= 0.0)
    if zero.size:
        raise ZeroVariance(int(zero[0]), window_index)
    sd = np.sqrt(var)
    c = cov / np.outer(sd, sd)
    c = np.clip(symmetrize(c), -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return c


def _pearson_two_pass(segment: np.ndarray, window_index: int) -> np.ndarray:
    centered = segment - segment.mean(axis=1, keepdims=True)
    sq = np.sum(centered * centered, axis=1)
    zero = np.flatnonzero(sq == 0.0)
    if zero.size:
        raise ZeroVariance(int(zero[0]), window_index)
    sd = np.sqrt(sq)
    c = (centered @ centered.T) / np.outer(sd, sd)
    c = np.clip(symmetrize(c), -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return c


def sliding_window_correlation(ts: RegionTimeSeries, w: WindowSpec,
                               seam: int | None = None,
                               method: str = "two_pass") -> Trajectory:
    """Pearson correlation matrices over sliding windows.

    Produces floor((n_samples - width)/offset) + 1 windows starting at
    multiples of the offset; timestamps are the window start indices. With
    ``seam`` set (a concatenation boundary in the sample axis), windows
    straddling it are excluded.

    ``method`` selects the numerically stable two-pass evaluation (default)
    or an O(n^2)-per-step rolling moment update; the two agree to ~1e-10 on
    sane data and tests hold them to that.

    Raises
    ------
    ZeroVariance
        If some region is constant inside a window.
    RankDeficient
        If a window's matrix fails the positive-definiteness floor
        (collinear regions, or fewer samples than regions).
    """
    if w.width > ts.n_samples:
        raise ValidationError(
            f"window width {w.width} exceeds {ts.n_samples} samples"
        )
    if method not in ("two_pass", "rolling"):
        raise ValidationError(f"unknown method {method!r}")
    starts = list(range(0, ts.n_samples - w.width + 1, w.offset))
    if seam is not None:
        starts = [s for s in starts if not s < seam < s + w.width]
        if len(starts) < 2:
            raise ValidationError("seam exclusion leaves fewer than 2 windows")
    data = ts.data
    mats = np.empty((len(starts), ts.n_regions, ts.n_regions))
    if method == "rolling":
        sums = data[:, starts[0]:starts[0] + w.width].sum(axis=1)
        cross = data[:, starts[0]:starts[0] + w.width] @ \
            data[:, starts[0]:starts[0] + w.width].T
        prev = starts[0]
        for i, s in enumerate(starts):
            for col in range(prev, s):
                old = data[:, col]
                sums -= old
                cross -= np.outer(old, old)
            for col in range(prev + w.width, s + w.width):
                new = data[:, col]
                sums += new
                cross += np.outer(new, new)
            prev = s
            mats[i] = _pearson_from_moments(sums, cross, w.width, i)
    else:
        for i, s in enumerate(starts):
            mats[i] = _pearson_two_pass(data[:, s:s + w.width], i)

    eigvals = np.linalg.eigvalsh(mats)
    floors = EIG_FLOOR_SCALE * np.maximum(1.0, eigvals[:, -1])
    bad = np.flatnonzero(eigvals[:, 0] <= floors)
    if bad.size:
        raise RankDeficient(
            f"window {int(bad[0])} is rank deficient "
            f"(lambda_min = {eigvals[bad[0], 0]:.3e}); collinear regions "
            "or too few samples per region"
        )
    lo, hi = float(eigvals[:, 0].min()), float(eigvals[:, -1].max())
    if lo < SPECTRAL_GUARD[0] or hi > SPECTRAL_GUARD[1]:
        log.warning(
            "window spectra range [%.3e, %.3e] outside the guard band %s",
            lo, hi, SPECTRAL_GUARD,
        )
    else:
        log.info("window spectra range [%.3e, %.3e]", lo, hi)
    return Trajectory(np.asarray(starts, dtype=float), mats, "correlation")


def synthesize_trajectory(n: int, t: int, smoothness: float = 1.0,
                          noise: float = 0.0, seed: int = 0,
                          base_scale: float = 1.0,
                          n_harmonics: int = 3) -> Trajectory:
    """Deterministic smooth random correlation trajectory.

    A random hollow base matrix plus a few random low-frequency harmonics
    (amplitude proportional to ``smoothness``, damped as 1/frequency) and
    optional per-point hollow noise, pulled back through the inverse
    off-log map; every point is a valid correlation matrix by construction.
    ``smoothness = 0`` with ``noise = 0`` gives a constant trajectory.
    """
    if n < 2 or t < 2:
        raise ValidationError("need n >= 2 and t >= 2")
    rng = np.random.default_rng(seed)
    sigma0 = base_scale / np.sqrt(n)

    def hollow(scale, shape=()):
        m = symmetrize(rng.normal(0.0, 1.0, shape + (n, n))) * scale
        idx = np.arange(n)
        m[..., idx, idx] = 0.0
        return m

    u = np.linspace(0.0, 1.0, t)
    s = np.broadcast_to(hollow(sigma0), (t, n, n)).copy()
    for f in range(1, n_harmonics + 1):
        phase = 2.0 * np.pi * f * u
        s += np.sin(phase)[:, None, None] * hollow(smoothness * sigma0 / f)
        s += np.cos(phase)[:, None, None] * hollow(smoothness * sigma0 / f)
    if noise > 0.0:
        s += hollow(noise * sigma0, shape=(t,))
    return Trajectory(np.arange(t, dtype=float), ol_exp(s), "correlation")


def _vectorize(traj: Trajectory) -> np.ndarray:
    """Stack upper triangles; hollow trajectories drop the zero diagonal."""
    k = 1 if traj.space_tag == "hollow" else 0
    iu = np.triu_indices(traj.n, k=k)
    return traj.values[:, iu[0], iu[1]]


def pca3(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Project a trajectory on its top three principal directions.

    Matrices are vectorized by upper triangle (without the diagonal for
    hollow trajectories), centered, and decomposed; the explained-variance
    triple holds the top covariance eigenvalues. Signs are fixed by making
    each direction's largest-magnitude loading positive.

    Returns
    -------
    (ndarray, ndarray)
        Coordinates of shape (T, 3) and the three explained variances,
        non-increasing.
    """
    if len(traj) < 4:
        raise ValidationError("PCA projection needs at least 4 time points")
    vecs = _vectorize(traj)
    if len(np.unique(vecs, axis=0)) < 3:
        raise DegenerateCovariance(
            "fewer than 3 distinct points; no 3-D structure to project"
        )
    centered = vecs - vecs.mean(axis=0)
    # SVD of the centered data: an algebraically equal route to the
    # eigendecomposition of the covariance that never forms the D x D matrix.
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    explained = np.zeros(3)
    coords = np.zeros((len(traj), 3))
    m = min(3, len(svals))
    explained[:m] = svals[:m] ** 2 / (len(traj) - 1)
    for i in range(m):
        direction = vt[i]
        if direction[np.argmax(np.abs(direction))] < 0.0:
            direction = -direction
        coords[:, i] = centered @ direction
    return coords, explained


# ---------------------------------------------------------------------------
# File formats


def read_timeseries_csv(path) -> RegionTimeSeries:
    """Read a region time-series CSV: header row of names, one row per sample."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FileFormatError(f"{path}: empty file, missing header") from None
        if not header or any(not name.strip() for name in header):
            raise FileFormatError(f"{path}: malformed header {header!r}")
        try:
            [float(name) for name in header]
        except ValueError:
            pass
        else:
            raise FileFormatError(
                f"{path}: header row looks numeric; region names expected"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FileFormatError(
                    f"{path}:{lineno}: expected {len(header)} fields, "
                    f"got {len(row)}"
                )
            try:
                values = [float(x) for x in row]
            except ValueError as exc:
                raise FileFormatError(f"{path}:{lineno}: {exc}") from None
            if not all(np.isfinite(values)):
                raise FileFormatError(
                    f"{path}:{lineno}: non-finite value in row"
                )
            rows.append(values)
    if not rows:
        raise FileFormatError(f"{path}: no sample rows after the header")
    data = np.asarray(rows, dtype=float).T
    return RegionTimeSeries(data=data, labels=tuple(header))


def write_timeseries_csv(path, ts: RegionTimeSeries) -> None:
    """Write a region time series in the CSV layout of read_timeseries_csv."""
    labels = ts.labels or tuple(f"region_{i}" for i in range(ts.n_regions))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(labels)
        for row in ts.data.T:
            writer.writerow([repr(float(x)) for x in row])


def write_trajectory(path, traj: Trajectory) -> None:
    """Write the binary trajectory format (magic, dims, tag, values, times)."""
    with open(path, "wb") as fh:
        fh.write(MTRJ_MAGIC)
        fh.write(np.asarray([traj.n, len(traj)], dtype="<u4").tobytes())
        fh.write(bytes([TAG_TO_CODE[traj.space_tag]]))
        fh.write(np.ascontiguousarray(traj.values, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(traj.times, dtype="<f8").tobytes())


def read_trajectory(path) -> Trajectory:
    """Read the binary trajectory format written by :func:`write_trajectory`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MTRJ_MAGIC) + 9:
        raise FileFormatError(f"{path}: truncated before the header ends")
    if blob[:len(MTRJ_MAGIC)] != MTRJ_MAGIC:
        raise FileFormatError(
            f"{path}: bad magic {blob[:len(MTRJ_MAGIC)]!r} at offset 0"
        )
    n, t = np.frombuffer(blob, dtype="<u4", count=2, offset=len(MTRJ_MAGIC))
    tag_offset = len(MTRJ_MAGIC) + 8
    code = blob[tag_offset]
    if code not in CODE_TO_TAG:
        raise FileFormatError(
            f"{path}: unknown space tag {code} at offset {tag_offset}"
        )
    body = tag_offset + 1
    expect = body + 8 * int(t) * int(n) * int(n) + 8 * int(t)
    if len(blob) != expect:
        raise FileFormatError(
            f"{path}: expected {expect} bytes for n={n}, T={t}, "
            f"got {len(blob)}"
        )
    values = np.frombuffer(blob, dtype="<f8", count=int(t * n * n),
                           offset=body).reshape(int(t), int(n), int(n))
    times = np.frombuffer(blob, dtype="<f8", count=int(t),
                          offset=body + 8 * int(t * n * n))
    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(times)):
        raise FileFormatError(f"{path}: non-finite values in payload")
    try:
        return Trajectory(times.copy(), values.copy(), CODE_TO_TAG[code])
    except ValidationError as exc:
        raise FileFormatError(f"{path}: payload invalid: {exc}") from exc


def write_diagnostics_csv(path, diag) -> None:
    """Write a diagnostic series; columns depend on which fields are set."""
    header = ["t", "min_eigenvalue"]
    columns = [np.asarray(diag.times, dtype=float),
               np.asarray(diag.min_eigenvalues, dtype=float)]
    if diag.relative_deviations is not None:
        header.append("relative_deviation_pct")
        columns.append(np.asarray(diag.relative_deviations, dtype=float))
    if diag.scaling_factors is not None:
        scales = np.asarray(diag.scaling_factors, dtype=float)
        header.extend(f"scale_{i}" for i in range(scales.shape[1]))
        columns.extend(scales[:, i] for i in range(scales.shape[1]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if diag.max_relative_deviation is not None:
            fh.write(f"# max_relative_deviation_pct,"
                     f"{diag.max_relative_deviation!r}\n")
        if diag.mse_flat is not None:
            fh.write(f"# mse_flat,{diag.mse_flat!r}\n")
        if diag.mse_pullback is not None:
            fh.write(f"# mse_pullback,{diag.mse_pullback!r}\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(x)) for x in row])


def write_pca_csv(path, times, coords, explained) -> None:
    """Write PCA coordinates with the explained variances as a comment row."""
    times = np.asarray(times, dtype=float)
    coords = np.asarray(coords, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write("# explained_variance,"
                 + ",".join(repr(float(v)) for v in explained) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "pc1", "pc2", "pc3"])
        for ti, row in zip(times, coords):
            writer.writerow([repr(float(ti))] + [repr(float(x)) for x in row])
