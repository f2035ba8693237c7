"""Command-line driver: window -> transform -> regress -> diagnostics -> export.

Every command reads/writes the formats defined in :mod:`flatcorr.pipeline`,
prints progress and timing to standard error only, and is deterministic
given its inputs and seed. Exit codes: 0 success, 1 usage, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import pipeline, regression
from .errors import FlatCorrError, NumericalError
from .logscaling import default_rowzero_form, RowZeroQuadraticForm
from .offlog import default_hol_form, HolQuadraticForm
from .pipeline import WindowSpec
from .regression import SolverParams, canonical_frame
from .trajectory import Trajectory

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    """Raised instead of argparse's sys.exit so main can map exit codes."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# Keys accepted in a config file; every flag of every command maps to one.
CONFIG_KEYS = {
    "frame": str,
    "alpha": float,
    "beta": float,
    "gamma": float,
    "degree": int,
    "samples": int,
    "width": int,
    "offset": int,
    "seam": int,
    "diag_eps": float,
    "diag_max_iter": int,
    "newton_tol": float,
    "newton_max_iter": int,
    "seed": int,
    "n": int,
    "steps": int,
    "smoothness": float,
    "noise": float,
    "degrees": str,
    "samples_list": str,
}


@dataclass
class RunConfig:
    """Merged configuration: defaults, then config file, then flags."""

    frame: str = "offlog"
    alpha: float | None = None
    beta: float | None = None
    gamma: float | None = None
    degree: int = 6
    samples: int = 10
    width: int = 600
    offset: int = 1
    seam: int | None = None
    diag_eps: float = SolverParams.diag_eps
    diag_max_iter: int = SolverParams.diag_max_iter
    newton_tol: float = SolverParams.newton_tol
    newton_max_iter: int = SolverParams.newton_max_iter
    seed: int = 0
    n: int = 10
    steps: int = 200
    smoothness: float = 1.0
    noise: float = 0.0
    degrees: str = "1:10"
    samples_list: str = "4,6,8,10,15,20,30,50"

    def solver(self) -> SolverParams:
        return SolverParams(self.diag_eps, self.diag_max_iter,
                            self.newton_tol, self.newton_max_iter)

    def validate_form(self, n: int) -> None:
        """Check user-supplied form coefficients against the frame constraints."""
        given = [self.alpha, self.beta, self.gamma]
        if all(v is None for v in given):
            return
        frame = canonical_frame(self.frame)
        if frame in ("spd", "euclidean"):
            return
        cls = HolQuadraticForm if frame == "offlog" else RowZeroQuadraticForm
        default = default_hol_form(n) if frame == "offlog" \
            else default_rowzero_form(n)
        cls(
            self.alpha if self.alpha is not None else default.alpha,
            self.beta if self.beta is not None else default.beta,
            self.gamma if self.gamma is not None else default.gamma,
            n,
        )


def _load_config_file(path) -> dict:
    values = {}
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                values[key] = CONFIG_KEYS[key](value.strip())
            except ValueError:
                raise UsageError(
                    f"{path}:{lineno}: bad value for {key!r}"
                ) from None
    return values


def _merge_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, value in _load_config_file(args.config).items():
            setattr(cfg, key, value)
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, flag)
    return cfg


def _stderr(message: str) -> None:
    print(message, file=sys.stderr)


def _timed(label: str, func, *args, **kwargs):
    start = time.perf_counter()
    result = func(*args, **kwargs)
    _stderr(f"{label}: {time.perf_counter() - start:.2f} s")
    return result


def _parse_int_list(text: str, what: str) -> tuple[int, ...]:
    """Parse '1:10' ranges (inclusive) or '4,6,8' lists."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi = text.split(":")
            out = tuple(range(int(lo), int(hi) + 1))
        else:
            out = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"cannot parse {what} specification {text!r}") from None
    if not out:
        raise UsageError(f"empty {what} specification")
    return out


def cmd_window(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    ts = pipeline.read_timeseries_csv(args.input)
    if cfg.width > ts.n_samples:
        raise UsageError(
            f"window width {cfg.width} exceeds the {ts.n_samples} samples"
        )
    if cfg.width < 2 or cfg.offset < 1:
        raise UsageError("window width must be >= 2 and offset >= 1")
    spec = WindowSpec(width=cfg.width, offset=cfg.offset)
    traj = _timed("windowing", pipeline.sliding_window_correlation,
                  ts, spec, seam=cfg.seam)
    eigvals = np.linalg.eigvalsh(traj.values)
    _stderr(f"T = {len(traj)} windows of {traj.n} regions")
    _stderr(f"spectral range [{eigvals[:, 0].min():.3e}, "
            f"{eigvals[:, -1].max():.3e}]")
    pipeline.write_trajectory(args.output, traj)
    return EXIT_OK


def cmd_transform(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    traj = pipeline.read_trajectory(args.input)
    cfg.validate_form(traj.n)
    direction = "inverse" if args.inverse else "forward"
    if args.inverse:
        out = _timed(f"{cfg.frame} {direction} ({len(traj)} matrices)",
                     regression.transform_from_flat, traj, cfg.frame,
                     cfg.solver())
    else:
        out = _timed(f"{cfg.frame} {direction} ({len(traj)} matrices)",
                     regression.transform_to_flat, traj, cfg.frame,
                     cfg.solver())
    pipeline.write_trajectory(args.output, out)
    return EXIT_OK


def cmd_regress(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    traj = pipeline.read_trajectory(args.input)
    cfg.validate_form(traj.n)
    out, diag = _timed(
        f"{cfg.frame} regression (degree {cfg.degree}, {cfg.samples} samples)",
        regression.regress_pullback, traj, cfg.frame, cfg.degree,
        cfg.samples, cfg.solver())
    pipeline.write_trajectory(args.output, out)
    diag_path = args.diagnostics or f"{args.output}.diagnostics.csv"
    pipeline.write_diagnostics_csv(diag_path, diag)
    if out.space_tag == "correlation":
        _stderr(f"all {len(out)} regressed points are valid correlation "
                f"matrices (min eigenvalue {diag.min_eigenvalues.min():.3e})")
    else:
        _stderr(f"{diag.n_nonpositive} of {len(out)} regressed points have "
                f"a non-positive smallest eigenvalue")
    if diag.max_relative_deviation is not None:
        _stderr(f"max rescaling deviation "
                f"{diag.max_relative_deviation:.2f}%")
    return EXIT_OK


def cmd_gridsearch(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    degrees = _parse_int_list(cfg.degrees, "degrees")
    sample_counts = _parse_int_list(cfg.samples_list, "sample counts")
    traj = pipeline.read_trajectory(args.input)
    cfg.validate_form(traj.n)
    if traj.space_tag == "correlation":
        traj = regression.transform_to_flat(traj, cfg.frame, cfg.solver())
    result = _timed(
        f"grid search over {len(degrees)}x{len(sample_counts)} cells",
        regression.grid_search, traj, degrees, sample_counts)
    with open(args.output, "w", newline="") as fh:
        fh.write(f"# best_degree,{result.best[0]}\n")
        fh.write(f"# best_samples,{result.best[1]}\n")
        fh.write("degree," + ",".join(str(k) for k in result.sample_counts)
                 + "\n")
        for d, row in zip(result.degrees, result.mse_table):
            fh.write(str(d) + "," + ",".join(repr(float(x)) for x in row)
                     + "\n")
    _stderr(f"best cell: degree {result.best[0]}, {result.best[1]} samples")
    return EXIT_OK


def cmd_pca(args: argparse.Namespace) -> int:
    traj = pipeline.read_trajectory(args.input)
    coords, explained = _timed("pca projection", pipeline.pca3, traj)
    pipeline.write_pca_csv(args.output, traj.times, coords, explained)
    _stderr("explained variances: "
            + ", ".join(f"{v:.3e}" for v in explained))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    traj = _timed(
        f"synthesizing n={cfg.n}, T={cfg.steps}",
        pipeline.synthesize_trajectory, cfg.n, cfg.steps,
        smoothness=cfg.smoothness, noise=cfg.noise, seed=cfg.seed)
    pipeline.write_trajectory(args.output, traj)
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key = value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flatcorr",
                     description="flat correlation-matrix geometry toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("window", parents=[], help="sliding-window "
                            "Pearson correlation of a region time series")
    p.add_argument("input", help="region time-series CSV")
    p.add_argument("output", help="output trajectory (.mtrj)")
    p.add_argument("--width", type=int, help="window width in samples")
    p.add_argument("--offset", type=int, help="window stride in samples")
    p.add_argument("--seam", type=int,
                   help="exclude windows straddling this sample index")
    _add_common(p)
    p.set_defaults(func=cmd_window)

    p = commands.add_parser("transform",
                            help="apply a chart map pointwise")
    p.add_argument("input", help="input trajectory (.mtrj)")
    p.add_argument("output", help="output trajectory (.mtrj)")
    p.add_argument("--frame",
                   choices=("offlog", "logscaling", "spd", "euclidean"))
    p.add_argument("--inverse", action="store_true",
                   help="apply the inverse chart map")
    p.add_argument("--diag-eps", dest="diag_eps", type=float)
    p.add_argument("--diag-max-iter", dest="diag_max_iter", type=int)
    p.add_argument("--newton-tol", dest="newton_tol", type=float)
    p.add_argument("--newton-max-iter", dest="newton_max_iter", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_transform)

    p = commands.add_parser("regress",
                            help="smooth a correlation trajectory by "
                            "polynomial regression in a chart")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--frame",
                   choices=("offlog", "logscaling", "spd", "euclidean"))
    p.add_argument("--degree", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--diagnostics", help="diagnostics CSV path")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--diag-eps", dest="diag_eps", type=float)
    p.add_argument("--diag-max-iter", dest="diag_max_iter", type=int)
    p.add_argument("--newton-tol", dest="newton_tol", type=float)
    p.add_argument("--newton-max-iter", dest="newton_max_iter", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_regress)

    p = commands.add_parser("gridsearch",
                            help="log10-MSE table over degree x samples")
    p.add_argument("input")
    p.add_argument("output", help="heat-map CSV")
    p.add_argument("--frame",
                   choices=("offlog", "logscaling", "spd", "euclidean"))
    p.add_argument("--degrees", help="range '1:10' or list '2,4,6'")
    p.add_argument("--samples-list", dest="samples_list",
                   help="list '4,6,8,10'")
    _add_common(p)
    p.set_defaults(func=cmd_gridsearch)

    p = commands.add_parser("pca", help="3-D PCA projection for plotting")
    p.add_argument("input")
    p.add_argument("output", help="coordinates CSV")
    _add_common(p)
    p.set_defaults(func=cmd_pca)

    p = commands.add_parser("synth",
                            help="synthetic smooth correlation trajectory")
    p.add_argument("output")
    p.add_argument("--n", type=int, help="matrix dimension")
    p.add_argument("--steps", type=int, help="number of time points")
    p.add_argument("--smoothness", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        _stderr(f"usage error: {exc}")
        return EXIT_USAGE
    except NumericalError as exc:
        _stderr(f"numerical failure: {exc}")
        return EXIT_NUMERIC
    except (FlatCorrError, OSError) as exc:
        _stderr(f"data error: {exc}")
        return EXIT_DATA


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
