"""Command-line interface.

Every option can also come from an INI file passed with ``--config``; keys
live in a ``[fracbound]`` section and use the long option name with
underscores (``n_max = 18``, ``sum_threshold = 1e12``). Command-line flags
override the file.

Exit codes: 0 success, 1 failed self-test, 2 usage error,
3 integrity/version error, 4 resource failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
import warnings

import numpy as np

from . import __version__
from .engine import ClassifyMode, GDConfig, scan_learning_rates
from .errors import (FracBoundError, IntegrityError, ResourceError, UnsupportedOperationError,
                     UsageError, VersionError)
from .experiments import (ScanSettings, amplitude_wavelength_sweep, dimension_scan,
                          fmax_artifact_scan, initial_condition_scan, roughness_collapse,
                          two_cosine_sweep)
from .fractal import boxcount_curve, default_window, fit_fractal_dimension
from .landscape import Family, LossSpec
from .report import csv_rows, emit_csv, fmt, render_intensity_strip, to_csv
from .scanfile import atomic_write_bytes, read_scan, write_scan
from .verify import selftest

CONFIG_SECTION = "fracbound"


def float_list(text: str) -> list[float]:
    """``"0.1,0.2,0.3"`` or ``"linspace:START:STOP:COUNT"`` or ``"logspace:EXP0:EXP1:COUNT"``."""
    text = text.strip()
    try:
        if text.startswith(("linspace:", "logspace:")):
            kind, a, b, n = text.split(":")
            fn = np.linspace if kind == "linspace" else np.logspace
            return [float(v) for v in fn(float(a), float(b), int(n))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None


# name -> (type, default, help); defaults are applied after the config file
OPTIONS = {
    "family": (str, "additive", "loss family: " + ", ".join(f.value for f in Family)),
    "epsilon": (float, 0.2, "perturbation amplitude"),
    "lambda": (float, 0.1, "perturbation wavelength"),
    "epsilon2": (float, 0.0, "second amplitude (two_cosine)"),
    "lambda2": (float, 0.5, "second wavelength (two_cosine)"),
    "dim": (int, 1, "parameter dimension"),
    "x0": (float_list, None, "initial point, comma separated (default: all ones)"),
    "steps": (int, 1000, "gradient-descent steps per run"),
    "mode": (str, "sum_threshold", "sum_threshold or loss_cap"),
    "sum_threshold": (float, 1e16, "divergence threshold on the summed loss"),
    "loss_cap": (float, None, "loss cap for loss_cap mode"),
    "s_min": (float, 0.0, "smallest learning rate"),
    "s_max": (float, 1.5, "largest learning rate"),
    "n_max": (int, 20, "grid has 2**n_max + 1 learning rates"),
    "window": (int, 8, "number of finest levels in the dimension fit"),
}


def _add_options(parser: argparse.ArgumentParser, names) -> None:
    for name in names:
        typ, _, help_ = OPTIONS[name]
        parser.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None, help=help_)


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the config file, then from built-in defaults."""
    file_values = {}
    if getattr(args, "config", None):
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise UsageError(f"cannot read config file {args.config}")
        if cp.has_section(CONFIG_SECTION):
            file_values = dict(cp.items(CONFIG_SECTION))
    for name, (typ, default, _) in OPTIONS.items():
        if not hasattr(args, name) or getattr(args, name) is not None:
            continue
        if name in file_values:
            try:
                setattr(args, name, typ(file_values[name]))
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {name}: {exc}") from None
        else:
            setattr(args, name, default)
    return args


def _spec(args, family=None) -> LossSpec:
    return LossSpec(Family(family or args.family), args.epsilon, getattr(args, "lambda"),
                    args.epsilon2, args.lambda2, args.dim)


def _config(args) -> GDConfig:
    return GDConfig(x0=args.x0, steps=args.steps, mode=ClassifyMode(args.mode),
                    sum_threshold=args.sum_threshold, loss_cap=args.loss_cap)


def _settings(args) -> ScanSettings:
    return ScanSettings(_config(args), args.s_min, args.s_max, args.n_max, args.window)


def _print_fit(label: str, fit) -> None:
    print(f"{label}: alpha = {fit.alpha:.4f} +/- {fit.stderr:.4f} "
          f"(levels {fit.window[0]}..{fit.window[1]}, {fit.r_points} points)")


def _write_or_print(result, path) -> None:
    if path:
        emit_csv(result, path)
    else:
        sys.stdout.write(to_csv(result))


def cmd_scan(args):
    scan = scan_learning_rates(_spec(args), _config(args), args.s_min, args.s_max, args.n_max,
                               with_intensity=args.intensity)
    write_scan(scan, args.out)
    print(f"wrote {args.out}: {scan.size} learning rates, {int(scan.bits.sum())} divergent")


def cmd_boxcount(args):
    scan = read_scan(args.scan)
    curve = boxcount_curve(scan)
    fit = fit_fractal_dimension(curve, default_window(curve, args.window))
    _write_or_print(curve, args.csv)
    _print_fit("box dimension", fit)


def _sweep(args):
    return amplitude_wavelength_sweep(Family(args.family), args.eps, args.lambdas, _settings(args))


def cmd_sweep(args):
    _write_or_print(_sweep(args), args.csv)


def cmd_collapse(args):
    _write_or_print(roughness_collapse(_sweep(args)), args.csv)


def cmd_dimscan(args):
    family = Family(args.family)
    if family == Family.ADDITIVE:
        family = Family.ADDITIVE_ND
    elif family == Family.MULTIPLICATIVE:
        family = Family.MULTIPLICATIVE_ND
    result = dimension_scan(family, args.dims, _settings(args), args.epsilon, getattr(args, "lambda"))
    _write_or_print(result, args.csv)


def cmd_icscan(args):
    rng = np.random.default_rng(args.seed)
    x0s = rng.uniform(args.x0_low, args.x0_high, args.samples)
    result = initial_condition_scan(_spec(args), x0s, _settings(args))
    _write_or_print(result, args.csv)
    print(f"mean alpha = {result.mean:.4f}, std = {result.std:.4f} over {x0s.size} initial points")


def cmd_artifact(args):
    results = fmax_artifact_scan(args.fmax, args.eps, args.lambdas, _settings(args))
    header, rows = csv_rows(results[0])
    lines = [",".join(header)]
    for res in results:
        lines += [",".join(fmt(v) for v in row) for row in csv_rows(res)[1]]
    text = "\n".join(lines) + "\n"
    if args.csv:
        atomic_write_bytes(args.csv, text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def cmd_twocos(args):
    result = two_cosine_sweep(args.eps1, args.eps2, _settings(args), args.lambda1, args.lambda2)
    _write_or_print(result, args.csv)


def cmd_render(args):
    scan = read_scan(args.scan)
    render_intensity_strip(scan, args.out, height=args.height, width=args.width)
    print(f"wrote {args.out}")


def cmd_selftest(args):
    checks = selftest(n_max=args.n_max_selftest, samples=args.samples)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracbound", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    loss_opts = ["family", "epsilon", "lambda", "epsilon2", "lambda2", "dim"]
    run_opts = ["x0", "steps", "mode", "sum_threshold", "loss_cap", "s_min", "s_max", "n_max"]

    def command(name, func, help_, opts=(), with_config=True):
        p = sub.add_parser(name, help=help_)
        if with_config:
            p.add_argument("--config", help="INI file with a [fracbound] section")
        _add_options(p, opts)
        p.set_defaults(func=func)
        return p

    p = command("scan", cmd_scan, "scan learning rates for one loss", loss_opts + run_opts)
    p.add_argument("--intensity", action="store_true", help="also store per-point intensities")
    p.add_argument("-o", "--out", required=True)

    p = command("boxcount", cmd_boxcount, "box-count a scan file and fit its dimension", ["window"])
    p.add_argument("scan")
    p.add_argument("--csv")

    for name, func, help_ in (("sweep", cmd_sweep, "amplitude x wavelength sweep"),
                              ("collapse", cmd_collapse, "sweep flattened by roughness")):
        p = command(name, func, help_, ["family"] + run_opts + ["window"])
        p.add_argument("--eps", type=float_list, default=list(np.linspace(0.01, 0.2, 10)))
        p.add_argument("--lambdas", type=float_list, default=list(np.linspace(0.01, 1.0, 10)))
        p.add_argument("--csv")

    p = command("dimscan", cmd_dimscan, "box dimension versus parameter dimension",
                ["family", "epsilon", "lambda"] + run_opts + ["window"])
    p.add_argument("--dims", type=int_list, default=[1, 2, 5, 10, 30])
    p.add_argument("--csv")

    p = command("icscan", cmd_icscan, "box dimension versus initial point", loss_opts + run_opts + ["window"])
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x0-low", type=float, default=-5.0)
    p.add_argument("--x0-high", type=float, default=5.0)
    p.add_argument("--csv")

    p = command("artifact", cmd_artifact, "loss-cap sweeps of the multiplicative family",
                run_opts + ["window"])
    p.add_argument("--fmax", type=float_list, default=[1e3])
    p.add_argument("--eps", type=float_list, default=float_list("logspace:-8:-3:11"))
    p.add_argument("--lambdas", type=float_list, default=list(np.linspace(0.01, 1.0, 10)))
    p.add_argument("--csv")

    p = command("twocos", cmd_twocos, "two-cosine amplitude sweep", run_opts + ["window"])
    p.add_argument("--eps1", type=float_list, default=list(np.linspace(0.0, 0.02, 11)))
    p.add_argument("--eps2", type=float_list, default=list(np.linspace(0.0, 0.04, 11)))
    p.add_argument("--lambda1", type=float, default=0.3)
    p.add_argument("--lambda2", type=float, default=0.5)
    p.add_argument("--csv")

    p = command("render", cmd_render, "render a scan's intensity strip as PPM", with_config=False)
    p.add_argument("scan")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int)

    p = command("selftest", cmd_selftest, "quadratic and renormalization self-checks", with_config=False)
    p.add_argument("--n-max", dest="n_max_selftest", type=int, default=14)
    p.add_argument("--samples", type=int, default=20)
    return parser


def main(argv=None) -> int:
    # numba falls back to another threading layer when TBB is too old; the notice is noise here
    warnings.filterwarnings("ignore", message=".*TBB threading layer.*")
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _resolve(args)
        return args.func(args) or 0
    except (UsageError, UnsupportedOperationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IntegrityError, VersionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ResourceError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (FracBoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
