"""Command-line interface: ``dqhandeye <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 I/O error.
Failures are reported on stderr as one JSON object ``{"error": {...}}``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .dataset_io import DatasetFormatError, pose_record, read_dataset, write_dataset
from .errors import CalibrationError, UnderConstrainedError
from .metrics import (
    METHODS,
    calib_error,
    run_comparison,
    sweep_parameters,
    write_comparison_csv,
    write_sweep_csv,
)
from .problem import cost_from_arrays, pairs_to_arrays
from .sensitivity import DELTA_R, DELTA_T, estimate_sensitivity, feedback_summary
from .solver import SolverOptions, certify, solve
from .synthgen import ScenarioConfig, generate
from .vq import vq_select
from .weighting import (
    C_GAMMA,
    D_R,
    ROTATION_THRESHOLD,
    S_GAMMA,
    WeightingParams,
    auto_weighted_calibrate,
    densities,
    rotation_weights,
    split_by_rotation,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4

DESK_N_UNEVEN = (100, 1000, 5000)
FULL_N_UNEVEN = (100, 1000, 10000)
SWEEP_VALUES = (0.05, 0.1, 0.15, 0.2, 0.25)


class CommandError(Exception):
    def __init__(self, message, code=EXIT_VALIDATION, kind="ValidationError"):
        super().__init__(message)
        self.code = code
        self.kind = kind


# -- argument helpers --------------------------------------------------------

def _positive(x):
    v = float(x)
    if not v > 0.0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {x!r}")
    return v


def _noise_pair(text):
    try:
        r, t = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"noise must look like SIGMA_R:SIGMA_T, got {text!r}") from None
    if r < 0 or t < 0:
        raise argparse.ArgumentTypeError("noise levels must be non-negative")
    return r, t


def _add_weighting_args(p):
    g = p.add_argument_group("weighting parameters")
    g.add_argument("--d-r", type=_positive, default=D_R, help="density kernel range in rad (default %(default)s)")
    g.add_argument("--threshold", type=float, default=math.degrees(ROTATION_THRESHOLD),
                   help="rotation/no-rotation split angle in deg (default %(default)s)")
    g.add_argument("--c-gamma", type=float, default=C_GAMMA, help="blend midpoint (default %(default)s)")
    g.add_argument("--s-gamma", type=float, default=S_GAMMA, help="blend slope (default %(default)s)")
    g.add_argument("--source", choices=("a", "b"), default="a", help="sensor whose axes give the densities")
    g.add_argument("--delta-t", type=_positive, default=DELTA_T, help="translation probe step in m")
    g.add_argument("--delta-r", type=_positive, default=math.degrees(DELTA_R), help="rotation probe step in deg")
    g.add_argument("--k-rel", type=float, default=0.2, help="relative codebook size of the vq method")
    d = SolverOptions()
    g = p.add_argument_group("solver")
    g.add_argument("--gap-tol", type=_positive, default=d.gap_tol, help="relative duality gap tolerance (default %(default)s)")
    g.add_argument("--rank-tol", type=_positive, default=d.rank_tol, help="null-space eigenvalue threshold (default %(default)s)")
    g.add_argument("--max-iter", type=int, default=d.max_iter, help="dual iteration cap (default %(default)s)")


def _params(args) -> WeightingParams:
    if args.threshold < 0:
        raise CommandError("--threshold must be non-negative")
    if args.max_iter < 1:
        raise CommandError("--max-iter must be at least 1")
    return WeightingParams(
        d_r=args.d_r,
        threshold=math.radians(args.threshold),
        c_gamma=args.c_gamma,
        s_gamma=args.s_gamma,
        source=args.source,
        delta_t=args.delta_t,
        delta_r=math.radians(args.delta_r),
        solver=SolverOptions(gap_tol=args.gap_tol, rank_tol=args.rank_tol, max_iter=args.max_iter),
    )


def _add_scenario_args(p):
    d = ScenarioConfig()
    g = p.add_argument_group("scenario")
    g.add_argument("--config", help="JSON file with scenario fields; flags given explicitly override it")
    g.add_argument("--n-uneven", type=int, default=None, help=f"planar samples (default {d.n_uneven})")
    g.add_argument("--n-even", type=int, default=None, help=f"non-planar samples (default {d.n_even})")
    g.add_argument("--amplitude", type=float, default=None, help=f"elevation amplitude in m (default {d.amplitude})")
    g.add_argument("--wavelength", type=float, default=None, help=f"elevation wavelength in m (default {d.wavelength})")
    g.add_argument("--step", dest="step_translation", type=float, default=None,
                   help=f"translation per sample in m (default {d.step_translation})")
    g.add_argument("--yaw-rate-std", type=float, default=None, help=f"deg per sample (default {d.yaw_rate_std})")
    g.add_argument("--bank-gain", type=float, default=None, help=f"roll per yaw change (default {d.bank_gain})")
    g.add_argument("--sigma-r", type=float, default=None, help="rotation noise in deg/m (default 0)")
    g.add_argument("--sigma-t", type=float, default=None, help="translation noise in percent (default 0)")
    g.add_argument("--seed", type=int, default=None, help="random seed (default 0)")


_SCENARIO_FLAGS = ("n_uneven", "n_even", "amplitude", "wavelength", "step_translation",
                   "yaw_rate_std", "bank_gain", "sigma_r", "sigma_t", "seed")


def _scenario(args) -> ScenarioConfig:
    values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                values = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CommandError(f"invalid config file: {exc}") from exc
        if not isinstance(values, dict):
            raise CommandError("config file must contain a JSON object")
    for name in _SCENARIO_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    try:
        return ScenarioConfig.from_dict(values)
    except (TypeError, ValueError, KeyError) as exc:
        raise CommandError(f"invalid scenario: {exc}") from exc


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=False, default=_json_default)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _load(path):
    ds = read_dataset(path)
    if not ds.pairs:
        raise CommandError("dataset has no motion pairs")
    return ds


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


# -- commands ----------------------------------------------------------------

def cmd_simulate(args):
    cfg = _scenario(args)
    ds = generate(cfg)
    write_dataset(args.output, ds)
    print(json.dumps({"output": args.output, "pairs": len(ds.pairs), "seed": cfg.seed}))


def cmd_calibrate(args):
    params = _params(args)
    ds = _load(args.dataset)
    out = {"method": args.method, "pairs": len(ds.pairs)}
    if args.method == "density":
        res_all = auto_weighted_calibrate(ds.pairs, params)
        res, q = res_all.result, res_all.q_gamma
        out["c_t"] = res_all.sensitivity.c_t
        out["gamma"] = res_all.gamma
    else:
        pairs = ds.pairs
        if args.method == "vq":
            split = split_by_rotation(pairs, params.source, params.threshold)
            pairs, _ = vq_select(split, args.k_rel, seed=args.vq_seed)
            out["selected"] = len(pairs)
        a, b, w = pairs_to_arrays(pairs)
        q = cost_from_arrays(a, b, w)
        res = solve(q, params.solver)
        out["c_t"] = estimate_sensitivity(q, res.x, params.delta_t, params.delta_r).c_t
    out["calibration"] = pose_record(res.x)
    out["cost"] = res.cost
    out["gap"] = res.gap
    out["certified"] = bool(certify(q, res))
    if ds.ground_truth is not None:
        e = calib_error(res.x, ds.ground_truth)
        out["errors_vs_ground_truth"] = {"eps_r_deg": e.eps_r, "eps_t_m": e.eps_t}
    out["c_t"] = _finite(out["c_t"])
    _emit(out, args.output)


def cmd_sensitivity(args):
    params = _params(args)
    ds = _load(args.dataset)
    a, b, w = pairs_to_arrays(ds.pairs)
    q = cost_from_arrays(a, b, w)
    res = solve(q, params.solver)
    report = estimate_sensitivity(q, res.x, params.delta_t, params.delta_r)
    fb = feedback_summary(report, params.c_gamma, params.s_gamma)
    if args.json:
        d = fb.to_dict()
        d["c_t"], d["c_r"] = _finite(d["c_t"]), _finite(d["c_r"])
        _emit(d)
    else:
        print(f"c_t = {fb.c_t:.3f}")
        print(f"c_r = {fb.c_r:.3f}")
        print("dominant axis (sensor a) = [" + ", ".join(f"{c:.4f}" for c in fb.dominant_axis) + "]")
        print(f"{fb.advice_code}: {fb.advice}")


def cmd_density(args):
    params = _params(args)
    ds = _load(args.dataset)
    split = split_by_rotation(ds.pairs, params.source, params.threshold)
    if split.n_r == 0:
        raise CommandError("dataset has no rotation samples above the threshold")
    dens = densities(split, params.d_r)
    w = rotation_weights(dens)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write("index,axis_x,axis_y,axis_z,rho,w_rho,weight\n")
            for i, ax, r, wr, wi in zip(split.rotation_index, split.axes, dens.densities, dens.weights_rho, w):
                vals = [float(ax[0]), float(ax[1]), float(ax[2]), float(r), float(wr), float(wi)]
                fh.write(f"{int(i)}," + ",".join(repr(v) for v in vals) + "\n")
    _emit({
        "n_rotation": split.n_r,
        "n_no_rotation": split.n_nr,
        "d_r": params.d_r,
        "source": params.source,
        "rho_min": float(dens.densities.min()),
        "rho_max": float(dens.densities.max()),
        "sigma_rho": dens.sigma_rho,
        "weight_min": float(w.min()),
        "weight_max": float(w.max()),
        "weights_csv": args.output,
    })


def _grid(args):
    if args.n_uneven is not None and len(args.n_uneven) == 0:
        raise CommandError("grid is empty: --n-uneven needs at least one value")
    if args.noise is not None and len(args.noise) == 0:
        raise CommandError("grid is empty: --noise needs at least one value")
    n_values = args.n_uneven if args.n_uneven is not None else (FULL_N_UNEVEN if args.full else DESK_N_UNEVEN)
    noise = args.noise if args.noise is not None else [(0.02, 0.1)]
    base = ScenarioConfig(n_even=args.n_even, seed=args.seed)
    try:
        return [base.with_(n_uneven=n, sigma_r=r, sigma_t=t) for r, t in noise for n in n_values]
    except ValueError as exc:
        raise CommandError(f"invalid grid: {exc}") from exc


def _add_grid_args(p):
    p.add_argument("--n-uneven", type=int, nargs="*", default=None, help="planar sample counts (desk default 100 1000 5000)")
    p.add_argument("--n-even", type=int, default=100)
    p.add_argument("--full", action="store_true", help="use the full-scale count grid 100 1000 10000")
    p.add_argument("--runs", type=int, default=10, help="seeds per cell")
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--out-dir", default=".", help="directory for the CSV output")


def cmd_compare(args):
    params = _params(args)
    grid = _grid(args)
    if args.runs < 1:
        raise CommandError("--runs must be at least 1")
    report = run_comparison(grid, args.methods, args.runs, params, args.k_rel)
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "comparison.csv")
    write_comparison_csv(report, path)
    failures = sum(s.failures for c in report.cells for s in c.summaries.values())
    print(json.dumps({"output": path, "cells": len(report.cells), "runs": args.runs, "failures": failures}))


def cmd_sweep(args):
    params = _params(args)
    if args.runs < 1:
        raise CommandError("--runs must be at least 1")
    if not args.d_r and not args.k_rel_values:
        raise CommandError("sweep is empty: give --d-r-values or --k-rel-values")
    grid = _grid(args)
    if len({(c.sigma_r, c.sigma_t) for c in grid}) != 1:
        raise CommandError("sweep takes exactly one noise setting")
    base = grid[0]
    n_values = sorted({c.n_uneven for c in grid}, key=[c.n_uneven for c in grid].index)
    try:
        rows = sweep_parameters(args.d_r, args.k_rel_values, n_values, base, args.runs, params)
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "sweep.csv")
    write_sweep_csv(rows, path)
    print(json.dumps({"output": path, "rows": len(rows)}))


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqhandeye", description="Dual-quaternion hand-eye calibration with rotation-axis density weighting.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    _add_scenario_args(p)
    p.add_argument("-o", "--output", required=True, help="output JSONL file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="estimate the calibration of a dataset")
    p.add_argument("dataset")
    p.add_argument("--method", choices=METHODS, default="density")
    p.add_argument("--vq-seed", type=int, default=0)
    p.add_argument("-o", "--output", help="write the JSON result here instead of stdout")
    _add_weighting_args(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sensitivity", help="conditioning feedback for a dataset")
    p.add_argument("dataset")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    _add_weighting_args(p)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("density", help="rotation-axis densities and sample weights")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", help="per-sample CSV of axes, densities and weights")
    _add_weighting_args(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("compare", help="uniform vs vq vs density over a scenario grid")
    _add_grid_args(p)
    p.add_argument("--noise", type=_noise_pair, nargs="*", default=None,
                   help="SIGMA_R:SIGMA_T pairs in deg/m and percent (default 0.02:0.1)")
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    _add_weighting_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="d_r and k_rel parameter sweep")
    _add_grid_args(p)
    p.add_argument("--noise", type=_noise_pair, nargs=1, default=None, help="one SIGMA_R:SIGMA_T pair")
    p.add_argument("--d-r-values", dest="d_r", type=_positive, nargs="*", default=list(SWEEP_VALUES))
    p.add_argument("--k-rel-values", type=_positive, nargs="*", default=list(SWEEP_VALUES))
    _add_weighting_args(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def _fail(kind, message, code, **extra):
    err = {"type": kind, "message": message, "exit_code": code}
    err.update(extra)
    print(json.dumps({"error": err}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CommandError as exc:
        return _fail(exc.kind, str(exc), exc.code)
    except UnderConstrainedError as exc:
        return _fail("UnderConstrainedError", str(exc), EXIT_SOLVER, null_dim=exc.null_dim)
    except CalibrationError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_SOLVER)
    except DatasetFormatError as exc:
        return _fail("DatasetFormatError", str(exc), EXIT_IO)
    except OSError as exc:
        return _fail("IOError", str(exc), EXIT_IO)
    except ValueError as exc:
        return _fail("ValidationError", str(exc), EXIT_VALIDATION)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
