"""Flat Riemannian geometries on full-rank correlation matrices.

Two diffeomorphic charts flatten the correlation manifold: the off-log map
(matrix log, diagonal dropped) onto hollow matrices and the log-scaling map
(optimal diagonal scaling, then matrix log) onto zero-row-sum matrices.
Polynomial regression in either chart, pulled back, smooths a trajectory of
correlation matrices while keeping every point a valid correlation matrix.
"""

from . import baselines, logscaling, offlog, pipeline, regression, symkernel
from .baselines import DiagnosticSeries
from .errors import (
    DegenerateCovariance,
    FileFormatError,
    FlatCorrError,
    LineSearchStalled,
    MaxIterationsExceeded,
    NonConvergence,
    NotPositiveDefinite,
    NumericalError,
    RankDeficient,
    ValidationError,
    ZeroVariance,
)
from .pipeline import RegionTimeSeries, WindowSpec
from .regression import GridSearchResult, PolynomialCurve, SolverParams
from .trajectory import Trajectory

__all__ = [
    "baselines", "logscaling", "offlog", "pipeline", "regression",
    "symkernel",
    "DiagnosticSeries", "GridSearchResult", "PolynomialCurve",
    "RegionTimeSeries", "SolverParams", "Trajectory", "WindowSpec",
    "FlatCorrError", "ValidationError", "NotPositiveDefinite",
    "ZeroVariance", "RankDeficient", "DegenerateCovariance",
    "FileFormatError", "NumericalError", "NonConvergence",
    "MaxIterationsExceeded", "LineSearchStalled",
]

__version__ = "0.1.0"
