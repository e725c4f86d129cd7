"""Command-line front end.

Subcommands: ``denoise``, ``segment``, ``label``, ``solve`` and ``add-noise``.
Exit codes: 0 success, 1 invalid input or parameters, 2 file I/O failure,
3 solver failure. Solver parameters are resolved as command-line flags,
then a JSON ``--config`` file, then built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from . import __version__
from .apps import DegenerateInputError, chan_vese, denoise, image_spacing, multilabel
from .energy import SolverParams
from .io import (
    ImageFormatError,
    ensure_parent,
    is_csv,
    read_field,
    read_image,
    sha256_file,
    write_field,
    write_image,
    write_json,
    write_residual_csv,
)
from .recovery import recover_u, threshold
from .ssn import PCGBreakdown, solve
from .synthetic import add_noise
from .volume import solve_with_volume

log = logging.getLogger("tvrelax")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    """Bad command line; mapped to the validation exit code."""


class SolverFailure(Exception):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# flag name -> SolverParams field
_PARAM_FLAGS = {
    "beta": float,
    "c": float,
    "eps": float,
    "gamma": float,
    "alpha": float,
    "alpha_max": float,
    "div_weight": float,
    "threshold_t": float,
    "newton_reduction": float,
    "newton_stall": float,
    "newton_max_iters": int,
    "pcg_base_tol": float,
    "pcg_max_iters": int,
    "preconditioner": str,
}


def _add_solver_flags(sp):
    grp = sp.add_argument_group("solver parameters")
    for name, typ in _PARAM_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        grp.add_argument(flag, dest=name, type=typ, default=None)
    grp.add_argument("--no-line-search", dest="line_search", action="store_const", const=False,
                     default=None, help="take full Newton steps")
    grp.add_argument("--config", help="JSON file with solver parameters")
    grp.add_argument("--spacing", type=float, default=None,
                     help="grid spacing h (images default to 1/max(rows, cols), CSV grids to 1)")


def _add_outputs(sp, residuals=True):
    sp.add_argument("--report", help="JSON report path")
    if residuals:
        sp.add_argument("--residuals", help="residual history CSV path")


def build_parser():
    parser = _Parser(prog="tvrelax", description="Binary TV minimization by exact relaxation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("denoise", help="binary TV denoising of a grayscale image")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    _add_solver_flags(sp)
    _add_outputs(sp)

    sp = sub.add_parser("segment", help="two-phase piecewise-constant segmentation")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--u0", help="binary initial segmentation image")
    sp.add_argument("--truth", help="ground-truth mask; reports pixel agreement")
    sp.add_argument("--max-outer", type=int, default=50)
    sp.add_argument("--outer-tol", type=float, default=1e-4)
    _add_solver_flags(sp)
    _add_outputs(sp)

    sp = sub.add_parser("label", help="multi-phase labeling with M indicator fields")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True, help="piecewise-constant image")
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--indicators", help="path prefix for the indicator images")
    sp.add_argument("--max-sweeps", type=int, default=30)
    sp.add_argument("--outer-tol", type=float, default=1e-4)
    _add_solver_flags(sp)
    _add_outputs(sp)

    sp = sub.add_parser("solve", help="raw binary TV problem for a g-field (CSV or image)")
    sp.add_argument("--g", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--volume", type=float, help="target volume")
    sp.add_argument("--vol-tol", type=float, default=None,
                    help="volume tolerance (default: half a cell)")
    _add_solver_flags(sp)
    _add_outputs(sp)

    sp = sub.add_parser("add-noise", help="add seeded Gaussian noise to an image")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--level", type=float, required=True)
    sp.add_argument("--seed", type=int, default=None)
    _add_outputs(sp, residuals=False)
    return parser


def resolve_params(args):
    """Merge flags over an optional JSON config over the defaults."""
    values = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValueError(f"config {args.config} is not valid JSON: {exc}") from exc
        known = {f.name for f in fields(SolverParams)}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        values.update(cfg)
    for name in list(_PARAM_FLAGS) + ["line_search"]:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return SolverParams(**values)


def _spacing(args, field_, path):
    if args.spacing is not None:
        return args.spacing
    return 1.0 if is_csv(path) or field_.ndim != 2 else image_spacing(field_.shape)


def _base_report(args, params=None, h=None):
    rep = {"schema_version": SCHEMA_VERSION, "command": args.command, "version": __version__}
    if params is not None:
        rep["params"] = params.to_dict()
    if h is not None:
        rep["spacing"] = h
    return rep


def _emit(args, report, rows=None):
    if getattr(args, "report", None):
        ensure_parent(args.report)
        write_json(args.report, report)
    if rows is not None and getattr(args, "residuals", None):
        ensure_parent(args.residuals)
        write_residual_csv(args.residuals, rows)


def _check_solve(rep, report, args):
    if not rep.converged:
        report["status"] = "solver_failure"
        _emit(args, report, rep.csv_rows())
        raise SolverFailure(f"Newton iteration stopped: {rep.reason}")


def cmd_denoise(args):
    f = read_image(args.input)
    p = resolve_params(args)
    h = _spacing(args, f, args.input)
    res = denoise(f, p, h)
    ensure_parent(args.out)
    write_image(args.out, res.u)
    report = _base_report(args, p, h)
    report.update(input_sha256=sha256_file(args.input), solver=res.report.to_dict(),
                  energy=res.energy, status="ok")
    _check_solve(res.report, report, args)
    _emit(args, report, res.report.csv_rows())
    return EXIT_OK


def cmd_segment(args):
    f = read_image(args.input)
    p = resolve_params(args)
    h = _spacing(args, f, args.input)
    u0 = None
    report = _base_report(args, p, h)
    report["input_sha256"] = sha256_file(args.input)
    if args.u0:
        u0 = read_image(args.u0)
        if u0.shape != f.shape:
            raise ValueError(f"u0 shape {u0.shape} differs from image shape {f.shape}")
        report["init_sha256"] = sha256_file(args.u0)
    st = chan_vese(f, p, u0=u0, h=h, max_outer=args.max_outer, tol=args.outer_tol)
    ensure_parent(args.out)
    write_image(args.out, st.u)
    report.update(
        c1=st.c1, c2=st.c2, outer_iters=st.outer_iters, converged=st.converged,
        objective_history=st.objective_history, change_history=st.change_history,
        empty_phase=st.empty_phase, newton_iters=[r.newton_iters for r in st.reports],
        status="ok",
    )
    if args.truth:
        truth = threshold(read_image(args.truth), 0.5)
        if truth.shape != f.shape:
            raise ValueError("truth mask shape differs from image shape")
        report["agreement"] = float(np.mean(st.u == truth))
    last = st.reports[-1]
    for rep in st.reports:
        _check_solve(rep, report, args)
    _emit(args, report, last.csv_rows())
    return EXIT_OK


def cmd_label(args):
    if not 1 <= args.m <= 8:
        raise ValueError(f"--m must lie in 1..8, got {args.m}")
    f = read_image(args.input)
    p = resolve_params(args)
    h = _spacing(args, f, args.input)
    st = multilabel(f, p, args.m, h=h, max_sweeps=args.max_sweeps, tol=args.outer_tol)
    ensure_parent(args.out)
    write_image(args.out, st.piecewise_image)
    outputs = []
    if args.indicators:
        ext = os.path.splitext(args.out)[1] or ".pgm"
        for i, u in enumerate(st.indicators, start=1):
            path = f"{args.indicators}_{i}{ext}"
            ensure_parent(path)
            write_image(path, u)
            outputs.append(os.path.basename(path))
    report = _base_report(args, p, h)
    report.update(
        input_sha256=sha256_file(args.input), m=st.m, constants=st.constants,
        empty_phases=st.empty_phases, sweeps=st.sweeps, converged=st.converged,
        objective_history=st.objective_history, change_history=st.change_history,
        indicator_files=outputs, status="ok",
    )
    for rep in st.reports:
        _check_solve(rep, report, args)
    _emit(args, report, st.reports[-1].csv_rows())
    return EXIT_OK


def cmd_solve(args):
    g = read_field(args.g)
    p = resolve_params(args)
    h = _spacing(args, g, args.g)
    report = _base_report(args, p, h)
    report["input_sha256"] = sha256_file(args.g)
    if args.volume is None:
        q, rep = solve(g, p, h=h)
        u = threshold(recover_u(q, g, p, h), p.threshold_t)
        ensure_parent(args.out)
        write_field(args.out, u)
        report.update(solver=rep.to_dict(), status="ok")
        _check_solve(rep, report, args)
        _emit(args, report, rep.csv_rows())
        return EXIT_OK
    cell = float(np.prod([h] * g.ndim))
    vol_tol = 0.5 * cell if args.vol_tol is None else args.vol_tol
    res = solve_with_volume(g, p, args.volume, vol_tol, h=h)
    ensure_parent(args.out)
    write_field(args.out, res.u)
    report.update(volume=res.to_dict(), plateau=res.plateau, multiplier=res.multiplier,
                  status="ok" if res.converged else "solver_failure")
    _emit(args, report)
    if not res.converged:
        raise SolverFailure("an inner Newton solve did not converge")
    return EXIT_OK


def cmd_add_noise(args):
    if args.seed is None:
        raise UsageError("--seed is required")
    if args.level < 0:
        raise ValueError("--level must be nonnegative")
    f = read_image(args.input)
    noisy, sigma = add_noise(f, args.level, args.seed)
    ensure_parent(args.out)
    write_image(args.out, noisy)
    report = _base_report(args)
    report.update(
        input_sha256=sha256_file(args.input), level=args.level, seed=args.seed,
        target_sigma=args.level * float(f.max() - f.min()), empirical_sigma=sigma, status="ok",
    )
    _emit(args, report)
    return EXIT_OK


COMMANDS = {
    "denoise": cmd_denoise,
    "segment": cmd_segment,
    "label": cmd_label,
    "solve": cmd_solve,
    "add-noise": cmd_add_noise,
}


def _limit_threads():
    n = os.environ.get("TVRELAX_THREADS")
    if not n:
        return None
    try:
        n = int(n)
    except ValueError:
        raise UsageError(f"TVRELAX_THREADS must be an integer, got {n!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(n, 1))


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            raise UsageError("a subcommand is required")
        limiter = _limit_threads()
        try:
            return COMMANDS[args.command](args)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except UsageError as exc:
        print(f"tvrelax: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ImageFormatError, OSError) as exc:
        print(f"tvrelax: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DegenerateInputError, ValueError) as exc:
        print(f"tvrelax: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverFailure, PCGBreakdown, RuntimeError, ArithmeticError) as exc:
        print(f"tvrelax: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
