"""Command-line front end: ``piml <subcommand> [flags]``.

Every subcommand accepts ``--config FILE`` with ``key=value`` lines whose
keys are flag names without the leading dashes (``lambda=0.01``,
``n-max=256``). Precedence is flags > config file > built-in defaults.

Exit status: 0 on success, 2 on invalid arguments (the message names the
flag), 1 when the computation itself fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .io import atomic_write_text, csv_text, read_columns, write_csv

log = logging.getLogger("piml")


class UsageError(Exception):
    """Invalid user input; ``flag`` is reported in the message."""

    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


# --- parser ------------------------------------------------------------------

class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, except for flags whose default is unset or boolean."""

    def _get_help_string(self, action):
        if action.default is None or isinstance(action.default, bool):
            return action.help
        return super()._get_help_string(action)


def _add_common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--config", metavar="FILE", help="key=value file of defaults; explicit flags win")
    p.add_argument("--out", metavar="PATH", help=out_help)
    p.add_argument("--threads", type=int, metavar="N",
                   help="cap on BLAS threads and worker processes (default: $PIML_THREADS, else unlimited)")


def _add_reg(p: argparse.ArgumentParser, required_defaults: bool = True) -> None:
    default = 1.0 if required_defaults else None
    p.add_argument("--L", type=float, default=default,
                   help="half-width of omega = [-L, L]; the box is [-2L, 2L] (length units)")
    p.add_argument("--lambda", dest="lam", type=float, default=default,
                   help="Sobolev penalty weight lambda > 0 (dimensionless)")
    p.add_argument("--mu", type=float, default=default,
                   help="physics penalty weight mu >= 0 (dimensionless)")


def _add_backend(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("closed_form_1d", "spectral"), default="closed_form_1d",
                   help="kernel evaluation backend")
    p.add_argument("--n-max", dest="n_max", type=int, default=512,
                   help="Fourier modes for the spectral backend (count)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="piml",
        description="Physics-informed kernel regression: kernels, spectra, fits and rate experiments.",
        epilog="Flags override --config values, which override defaults.",
    )
    parser.add_argument("--version", action="version", version=f"piml {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True)
    fmt = _HelpFormatter

    p = sub.add_parser("kernel", help="tabulate K(x, y) on a grid over omega", formatter_class=fmt)
    _add_reg(p)
    _add_backend(p)
    p.add_argument("--grid", type=int, default=101, help="grid points per axis on [-L, L] (count)")
    _add_common(p, "CSV with columns x,y,K (default stdout)")

    p = sub.add_parser("spectrum", help="leading eigenvalues of the omega-restricted operator",
                       formatter_class=fmt)
    _add_reg(p)
    p.add_argument("--count", type=int, default=50, help="number of eigenvalues (count, >= 6 for exact)")
    p.add_argument("--method", choices=("exact", "galerkin"), default="exact",
                   help="exact 1D quantization roots or truncated Galerkin eigenvalues")
    p.add_argument("--n-max", dest="n_max", type=int, default=512, help="Fourier modes for --method galerkin")
    _add_common(p, "CSV with columns m,a_m,provenance (default stdout)")

    p = sub.add_parser("effdim", help="effective dimension of a spectrum file", formatter_class=fmt)
    p.add_argument("--spectrum", metavar="CSV", help="spectrum CSV with columns m,a_m,provenance (required)")
    p.add_argument("--kappa", type=float, default=1.0, help="density bound of P_X (1/length units)")
    _add_reg(p, required_defaults=False)
    p.add_argument("--s", type=int, default=None, help="Sobolev order for the decay tail bound")
    p.add_argument("--d", type=int, default=None, help="dimension for the decay tail bound")
    _add_common(p, "JSON report path (always printed to stdout)")

    p = sub.add_parser("fit", help="fit the estimator to x,y data", formatter_class=fmt)
    p.add_argument("--data", metavar="CSV", help="training data with columns x,y (required)")
    _add_reg(p)
    _add_backend(p)
    p.add_argument("--solver", choices=("auto", "dual", "lowrank"), default="auto",
                   help="dual Cholesky, low-rank normal equations, or auto (low-rank above 3000 samples)")
    _add_common(p, "model JSON path (default model.json)")

    p = sub.add_parser("predict", help="evaluate a fitted model", formatter_class=fmt)
    p.add_argument("--model", metavar="JSON", help="model written by 'piml fit' (required)")
    p.add_argument("--points", metavar="CSV", help="CSV with column x")
    p.add_argument("--x", type=float, nargs="+", help="evaluation points given inline")
    _add_common(p, "CSV with columns x,prediction (default stdout)")

    p = sub.add_parser("experiment", help="Monte Carlo convergence-rate study", formatter_class=fmt)
    p.add_argument("--scenario", choices=("perfect", "imperfect"), default="perfect",
                   help="f* = 1 (perfect) or f* = 1 + 0.1|x| (imperfect)")
    p.add_argument("--seed", type=int, default=0, help="root seed (non-negative integer)")
    p.add_argument("--replicates", type=int, default=10, help="datasets per sample size (count)")
    p.add_argument("--mc-eval", dest="mc_eval", type=int, default=500, help="Monte Carlo error points (count)")
    p.add_argument("--n-grid", dest="n_grid", default=None,
                   help="comma-separated sample sizes (default: 12 log-spaced sizes in [10, 10000])")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian noise standard deviation (units of y)")
    p.add_argument("--backend", choices=("closed_form_1d", "spectral"), default="closed_form_1d",
                   help="kernel evaluation backend")
    p.add_argument("--n-max", dest="n_max", type=int, default=513, help="Fourier modes for the spectral backend")
    p.add_argument("--workers", type=int, default=1, help="worker processes (count)")
    p.add_argument("--mean-of-logs", dest="mean_of_logs", action="store_true",
                   help="fit the rate to log-averaged replicate errors instead of log of the mean")
    p.add_argument("--summary", metavar="JSON", help="summary path (default: --out with .json suffix)")
    _add_common(p, "CSV with columns n,replicate,err,lambda,mu,seed (default results.csv)")
    return parser


# --- config files ----------------------------------------------------------

def read_config(path: str) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError("--config", f"cannot read {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError("--config", f"{path}:{lineno}: expected key=value")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.lstrip("-")] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    by_flag = {}
    for action in sub._actions:
        for opt in action.option_strings:
            by_flag[opt.lstrip("-")] = action
    defaults = {}
    for key, value in read_config(args.config).items():
        action = by_flag.get(key) or by_flag.get(key.replace("_", "-"))
        if action is None or action.dest in ("config", "help"):
            raise UsageError("--config", f"unknown key {key!r} for '{args.command}'")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = value.lower() in ("1", "true", "yes", "on")
        elif action.nargs in ("+", "*"):
            defaults[action.dest] = [action.type(v) if action.type else v for v in value.split()]
        else:
            try:
                converted = action.type(value) if action.type else value
            except ValueError:
                raise UsageError(f"--{key}", f"invalid value {value!r} in config") from None
            if action.choices and converted not in action.choices:
                raise UsageError(f"--{key}", f"{value!r} is not one of {sorted(action.choices)}")
            defaults[action.dest] = converted
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# --- validation ------------------------------------------------------------

def _positive(args, dest, flag, allow_none=False):
    v = getattr(args, dest)
    if v is None and allow_none:
        return
    if v is None or not np.isfinite(v) or v <= 0:
        raise UsageError(flag, f"must be > 0 (got {v})")


def _nonneg(args, dest, flag, allow_none=False):
    v = getattr(args, dest)
    if v is None and allow_none:
        return
    if v is None or not np.isfinite(v) or v < 0:
        raise UsageError(flag, f"must be >= 0 (got {v})")


def _reg_checks(args, optional=False):
    _positive(args, "L", "--L", optional)
    _positive(args, "lam", "--lambda", optional)
    _nonneg(args, "mu", "--mu", optional)


def _need(args, dest, flag):
    if not getattr(args, dest):
        raise UsageError(flag, "is required")


def validate(args: argparse.Namespace) -> None:
    """Check numeric preconditions first, then required inputs."""
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads", f"must be >= 1 (got {args.threads})")
    cmd = args.command
    if cmd in ("kernel", "spectrum", "fit"):
        _reg_checks(args)
    if cmd in ("kernel", "fit", "spectrum", "experiment") and args.n_max < 1:
        raise UsageError("--n-max", f"must be >= 1 (got {args.n_max})")
    if cmd == "kernel" and args.grid < 1:
        raise UsageError("--grid", f"must be >= 1 (got {args.grid})")
    if cmd == "spectrum":
        if args.method == "exact" and args.count < 6:
            raise UsageError("--count", f"must be >= 6 for the exact spectrum (got {args.count})")
        if args.count < 1:
            raise UsageError("--count", f"must be >= 1 (got {args.count})")
    if cmd == "effdim":
        _positive(args, "kappa", "--kappa")
        _reg_checks(args, optional=True)
        for flag in ("s", "d"):
            v = getattr(args, flag)
            if v is not None and v < 1:
                raise UsageError(f"--{flag}", f"must be >= 1 (got {v})")
        _need(args, "spectrum", "--spectrum")
    if cmd == "fit":
        _need(args, "data", "--data")
    if cmd == "predict":
        _need(args, "model", "--model")
        if (args.points is None) == (args.x is None):
            raise UsageError("--points", "give exactly one of --points or --x")
    if cmd == "experiment":
        if args.seed < 0:
            raise UsageError("--seed", f"must be >= 0 (got {args.seed})")
        if args.replicates < 1:
            raise UsageError("--replicates", f"must be >= 1 (got {args.replicates})")
        if args.mc_eval < 1:
            raise UsageError("--mc-eval", f"must be >= 1 (got {args.mc_eval})")
        if args.workers < 1:
            raise UsageError("--workers", f"must be >= 1 (got {args.workers})")
        _nonneg(args, "sigma", "--sigma")
        if args.n_grid is not None:
            try:
                grid = [int(v) for v in str(args.n_grid).split(",") if v.strip()]
            except ValueError:
                raise UsageError("--n-grid", f"expected comma-separated integers (got {args.n_grid!r})") from None
            if len(grid) < 1 or min(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
                raise UsageError("--n-grid", "sizes must be >= 2 and strictly increasing")
            args.n_grid = grid


def _thread_limit(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("PIML_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError("PIML_THREADS", f"expected an integer (got {env!r})") from None
        if value < 1:
            raise UsageError("PIML_THREADS", f"must be >= 1 (got {value})")
        return value
    return None


# --- subcommands -------------------------------------------------------------

def _emit(args, text: str) -> None:
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _cmd_kernel(args) -> None:
    from .kernels import KernelConfig, kernel_matrix

    cfg = KernelConfig.one_d(args.L, args.lam, args.mu, args.backend, args.n_max)
    grid = np.linspace(-args.L, args.L, args.grid)
    k = kernel_matrix(cfg, grid, grid)
    rows = [(x, y, k[i, j]) for i, x in enumerate(grid) for j, y in enumerate(grid)]
    _emit(args, csv_text(("x", "y", "K"), rows))


def _cmd_spectrum(args) -> None:
    from .eigen1d import exact_spectrum_1d
    from .fourier import DomainSpec
    from .operators import MultiIndexOperator, RegularizationParams, assemble_galerkin, truncated_spectrum

    reg = RegularizationParams(args.lam, args.mu)
    if args.method == "exact":
        spec = exact_spectrum_1d(reg, args.L, args.count)
    else:
        sys_ = assemble_galerkin(MultiIndexOperator.derivative(), reg, DomainSpec.centered(1, args.L), args.n_max)
        spec = truncated_spectrum(sys_)
        if len(spec) < args.count:
            raise RuntimeError(f"only {len(spec)} eigenvalues resolved; raise --n-max")
        from .spectrum import Spectrum

        spec = Spectrum(spec.eigenvalues[: args.count], spec.provenance[: args.count], spec.params)
    _emit(args, csv_text(("m", "a_m", "provenance"), spec.rows()))


def load_spectrum(path):
    from .spectrum import Spectrum

    cols = read_columns(path, ("m", "a_m", "provenance"))
    if list(cols["m"]) != list(range(len(cols["m"]))):
        raise ValueError(f"{path}: column m must run 0, 1, 2, ...")
    return Spectrum(np.asarray(cols["a_m"], dtype=float), tuple(str(p) for p in cols["provenance"]))


def _cmd_effdim(args) -> None:
    from .effdim import effective_dimension

    try:
        spec = load_spectrum(args.spectrum)
    except OSError as exc:
        raise UsageError("--spectrum", f"cannot read {args.spectrum}: {exc.strerror}") from None
    params = {k: v for k, v in (("L", args.L), ("lam", args.lam), ("mu", args.mu), ("s", args.s), ("d", args.d))
              if v is not None}
    if "lam" in params and "mu" not in params:
        params["mu"] = 0.0
    if "lam" in params and "s" not in params and "d" not in params:
        params.update(s=1, d=1)
    report = effective_dimension(spec, args.kappa, params)
    text = json.dumps(report.as_dict(), sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        atomic_write_text(args.out, text)


def _cmd_fit(args) -> None:
    from .kernels import KernelConfig
    from .regressor import Dataset, fit, save_model

    try:
        cols = read_columns(args.data, ("x", "y"))
    except OSError as exc:
        raise UsageError("--data", f"cannot read {args.data}: {exc.strerror}") from None
    cfg = KernelConfig.one_d(args.L, args.lam, args.mu, args.backend, args.n_max)
    try:
        data = Dataset(np.asarray(cols["x"], dtype=float), np.asarray(cols["y"], dtype=float))
    except ValueError as exc:
        raise UsageError("--data", f"{args.data}: {exc}") from None
    try:
        data.check_domain(cfg.dom)
    except ValueError as exc:
        raise UsageError("--data", str(exc)) from None
    model = fit(cfg, data, args.solver)
    save_model(model, args.out or "model.json")


def _cmd_predict(args) -> None:
    from .regressor import load_model, predict

    try:
        model = load_model(args.model)
    except OSError as exc:
        raise UsageError("--model", f"cannot read {args.model}: {exc.strerror}") from None
    if args.points:
        try:
            xs = np.asarray(read_columns(args.points, ("x",))["x"], dtype=float)
        except (OSError, ValueError) as exc:
            raise UsageError("--points", f"{args.points}: {exc}") from None
    else:
        xs = np.asarray(args.x, dtype=float)
    preds = predict(model, xs)
    _emit(args, csv_text(("x", "prediction"), zip(xs, preds)))


def _cmd_experiment(args) -> None:
    from .experiment import Scenario, run_experiment

    workers = args.workers
    limit = _thread_limit(args)
    if limit is not None:
        workers = min(workers, limit)
    result = run_experiment(
        Scenario.named(args.scenario, args.sigma),
        n_grid=args.n_grid,
        replicates=args.replicates,
        mc_eval=args.mc_eval,
        seed=args.seed,
        workers=workers,
        backend=args.backend,
        n_max=args.n_max,
        mean_of_logs=args.mean_of_logs,
    )
    out = args.out or "results.csv"
    rows = [(r.n, r.replicate, r.err, r.lam, r.mu, r.seed) for r in result.records]
    write_csv(out, ("n", "replicate", "err", "lambda", "mu", "seed"), rows)
    summary = args.summary or os.path.splitext(out)[0] + ".json"
    atomic_write_text(summary, json.dumps(result.summary(), indent=1, sort_keys=True) + "\n")
    print(f"slope {result.slope!r} intercept {result.intercept!r} r2 {result.r2!r} "
          f"failures {result.failures} ({result.wall_time:.1f} s)", file=sys.stderr)


COMMANDS = dict(kernel=_cmd_kernel, spectrum=_cmd_spectrum, effdim=_cmd_effdim, fit=_cmd_fit,
                predict=_cmd_predict, experiment=_cmd_experiment)


def main(argv: list[str] | None = None) -> int:
    """Parse, validate and dispatch; returns the process exit status."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    logging.basicConfig(level=logging.WARNING, format="piml: %(levelname)s: %(message)s")
    try:
        args = _apply_config(parser, argv)
        validate(args)
        limit = _thread_limit(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"piml: error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        directory = os.path.dirname(os.path.abspath(args.out))
        if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
            print(f"piml: error: --out: directory {directory} is not writable", file=sys.stderr)
            return 2
    try:
        if limit is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=limit):
                COMMANDS[args.command](args)
        else:
            COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"piml: error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, MemoryError, OSError) as exc:
        print(f"piml {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
