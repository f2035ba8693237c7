"""Time-indexed sequences of same-shape square matrices.

A trajectory pairs strictly increasing timestamps with a stack of matrices
and a space tag naming the invariants every element must satisfy. The
constructor validates the tag's invariants, so holding a
``Trajectory(space_tag="correlation")`` is the certificate that every point
is a valid full-rank correlation matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .spaces import (
    check_correlation,
    check_hollow,
    check_rowzero,
    check_symmetric,
)
from .symkernel import check_spd

SPACE_TAGS = ("correlation", "spd", "symmetric", "hollow", "rowzero")
FLAT_TAGS = ("symmetric", "hollow", "rowzero")

# Stable on-disk codes for the binary trajectory format.
TAG_TO_CODE = {tag: i for i, tag in enumerate(SPACE_TAGS)}
CODE_TO_TAG = {i: tag for i, tag in enumerate(SPACE_TAGS)}

_VALIDATORS = {
    "correlation": check_correlation,
    "spd": lambda v: check_spd(check_symmetric(v), "spd trajectory"),
    "symmetric": check_symmetric,
    "hollow": check_hollow,
    "rowzero": check_rowzero,
}


@dataclass(frozen=True)
class Trajectory:
    """Timestamps, matrix stack ``(T, n, n)``, and the space they live in."""

    times: np.ndarray
    values: np.ndarray
    space_tag: str

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if self.space_tag not in SPACE_TAGS:
            raise ValidationError(f"unknown space tag {self.space_tag!r}")
        if times.ndim != 1 or values.ndim != 3:
            raise ValidationError("expected times (T,) and values (T, n, n)")
        if len(times) != len(values):
            raise ValidationError("times and values lengths disagree")
        if len(times) < 2:
            raise ValidationError("a trajectory needs at least two points")
        if not np.all(np.isfinite(times)):
            raise ValidationError("timestamps contain non-finite values")
        if np.any(np.diff(times) <= 0.0):
            raise ValidationError("timestamps must be strictly increasing")
        _VALIDATORS[self.space_tag](values)

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    def __len__(self) -> int:
        return len(self.times)

    def select(self, indices: np.ndarray) -> "Trajectory":
        """New trajectory restricted to the given time indices."""
        return Trajectory(self.times[indices], self.values[indices],
                          self.space_tag)

    def with_values(self, values: np.ndarray, space_tag: str) -> "Trajectory":
        """Same time axis, new matrices (revalidated under the new tag)."""
        return Trajectory(self.times, values, space_tag)
