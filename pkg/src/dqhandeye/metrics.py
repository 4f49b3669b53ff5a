"""Calibration error metrics and the comparison / parameter-sweep harness."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .dq import DualQuaternion, dq_mul_arrays, quat_conj, quat_mul
from .errors import CalibrationError
from .problem import cost_from_arrays, pairs_to_arrays
from .solver import solve
from .synthgen import ScenarioConfig, generate
from .vq import codebook_size, vq_select
from .weighting import WeightingParams, split_by_rotation, unweighted_stage, weighted_stage


@dataclass(frozen=True)
class ErrorPair:
    eps_r: float  # deg
    eps_t: float  # m


def calib_error(estimate: DualQuaternion, truth: DualQuaternion) -> ErrorPair:
    """Rotation and translation error of ``q_eps = truth^-1 estimate``.

    The sign of ``q_eps`` is chosen with a non-negative real scalar. The
    angle ``2 arccos(s)`` is evaluated as ``2 atan2(|v|, s)``, which is the
    same value for unit quaternions but keeps full precision near zero.
    """
    r, d = dq_mul_arrays(quat_conj(truth.real), quat_conj(truth.dual), estimate.real, estimate.dual)
    if r[0] < 0.0:
        r, d = -r, -d
    eps_r = math.degrees(2.0 * math.atan2(float(np.linalg.norm(r[1:])), float(r[0])))
    t = 2.0 * quat_mul(d, quat_conj(r))[1:]
    return ErrorPair(eps_r=eps_r, eps_t=float(np.linalg.norm(t)))


# -- experiment harness ------------------------------------------------------

METHODS = ("uniform", "vq", "density")


@dataclass(frozen=True)
class RunRecord:
    seed: int
    method: str
    error: ErrorPair | None
    c_t: float | None
    failure: str | None = None


@dataclass(frozen=True)
class MethodSummary:
    eps_r: float  # mean deg, nan when every run failed
    eps_t: float
    c_t: float
    runs: int
    failures: int


@dataclass(frozen=True, eq=False)
class CellReport:
    config: ScenarioConfig
    summaries: dict  # method -> MethodSummary
    records: tuple

    @property
    def mean_c_t(self) -> float:
        return self.summaries[next(iter(self.summaries))].c_t


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    cells: tuple
    methods: tuple
    seeds: int


def _mean(values) -> float:
    values = list(values)
    # fsum is exactly rounded, so the mean does not depend on run order
    return math.fsum(values) / len(values) if values else math.nan


def summarize(records) -> MethodSummary:
    records = list(records)
    ok = [r for r in records if r.error is not None]
    return MethodSummary(
        eps_r=_mean(r.error.eps_r for r in ok),
        eps_t=_mean(r.error.eps_t for r in ok),
        c_t=_mean(r.c_t for r in records if r.c_t is not None),
        runs=len(records),
        failures=len(records) - len(ok),
    )


def _solve_pairs(pairs, opts=None):
    a, b, w = pairs_to_arrays(pairs)
    return solve(cost_from_arrays(a, b, w), opts)


def _run_methods(cfg: ScenarioConfig, methods, params: WeightingParams, k_rel: float):
    """Yield one RunRecord per method for a single generated dataset."""
    ds = generate(cfg)
    truth = cfg.calibration
    try:
        pairs = [p.with_weight(1.0) for p in ds.pairs]
        q, res, rep = unweighted_stage(pairs, params)
    except CalibrationError as exc:
        for m in methods:
            yield RunRecord(cfg.seed, m, None, None, f"{type(exc).__name__}: {exc}")
        return
    c_t = float(rep.c_t)
    for m in methods:
        try:
            if m == "uniform":
                x = res.x
            elif m == "density":
                x = weighted_stage(pairs, q, res, rep, params).result.x
            elif m == "vq":
                split = split_by_rotation(pairs, params.source, params.threshold)
                sel, _ = vq_select(split, k_rel, seed=cfg.seed)
                x = _solve_pairs(sel, params.solver).x
            else:
                raise ValueError(f"unknown method {m!r}")
        except CalibrationError as exc:
            yield RunRecord(cfg.seed, m, None, c_t, f"{type(exc).__name__}: {exc}")
            continue
        yield RunRecord(cfg.seed, m, calib_error(x, truth), c_t)


def _check_methods(methods):
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    methods = tuple(m for m in METHODS if m in set(methods))
    if not methods:
        raise ValueError(f"methods must be a non-empty subset of {METHODS}")
    return methods


def run_comparison(grid, methods=METHODS, seeds: int = 10, params: WeightingParams | None = None,
                   k_rel: float = 0.2) -> ExperimentReport:
    """Every method on every cell and seed; seeds run ``cfg.seed .. cfg.seed + seeds - 1``.

    Failed runs are kept as records, counted per method and left out of
    the means.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("comparison grid is empty")
    if seeds < 1:
        raise ValueError("need at least one seed")
    methods = _check_methods(methods)
    params = params or WeightingParams()
    cells = []
    for cfg in grid:
        records = []
        for s in range(seeds):
            records += _run_methods(cfg.with_(seed=cfg.seed + s), methods, params, k_rel)
        summaries = {m: summarize(r for r in records if r.method == m) for m in methods}
        cells.append(CellReport(config=cfg, summaries=summaries, records=tuple(records)))
    return ExperimentReport(cells=tuple(cells), methods=methods, seeds=seeds)


@dataclass(frozen=True)
class SweepRow:
    method: str
    parameter: str  # "d_r" or "k_rel"
    value: float
    n_uneven: int
    eps_r: float
    eps_t: float
    runs: int
    failures: int


def sweep_parameters(d_r_values, k_rel_values, n_uneven_values=(100, 1000, 5000),
                     base: ScenarioConfig | None = None, seeds: int = 10,
                     params: WeightingParams | None = None) -> list:
    """Density error per ``d_r`` and vq error per ``k_rel`` for each ``n_uneven``.

    ``base`` fixes the noise and the remaining scenario; the unweighted
    stage is shared by all ``d_r`` values of a dataset.
    """
    base = base or ScenarioConfig(sigma_r=0.02, sigma_t=0.1)
    params = params or WeightingParams()
    d_r_values = [float(v) for v in d_r_values]
    k_rel_values = [float(v) for v in k_rel_values]
    for v in d_r_values:
        if not v > 0.0:
            raise ValueError("d_r values must be positive")
    for v in k_rel_values:
        codebook_size(1, v)
    rows = []
    for nu in n_uneven_values:
        dens = {v: [] for v in d_r_values}
        vq = {v: [] for v in k_rel_values}
        for s in range(seeds):
            cfg = base.with_(n_uneven=int(nu), seed=base.seed + s)
            pairs = [p.with_weight(1.0) for p in generate(cfg).pairs]
            try:
                q, res, rep = unweighted_stage(pairs, params)
            except CalibrationError as exc:
                msg = f"{type(exc).__name__}: {exc}"
                for v in d_r_values:
                    dens[v].append(RunRecord(cfg.seed, "density", None, None, msg))
                for v in k_rel_values:
                    vq[v].append(RunRecord(cfg.seed, "vq", None, None, msg))
                continue
            for v in d_r_values:
                try:
                    out = weighted_stage(pairs, q, res, rep, replace(params, d_r=v))
                    dens[v].append(RunRecord(cfg.seed, "density", calib_error(out.result.x, cfg.calibration), rep.c_t))
                except CalibrationError as exc:
                    dens[v].append(RunRecord(cfg.seed, "density", None, rep.c_t, str(exc)))
            split = split_by_rotation(pairs, params.source, params.threshold)
            for v in k_rel_values:
                try:
                    sel, _ = vq_select(split, v, seed=cfg.seed)
                    x = _solve_pairs(sel, params.solver).x
                    vq[v].append(RunRecord(cfg.seed, "vq", calib_error(x, cfg.calibration), rep.c_t))
                except CalibrationError as exc:
                    vq[v].append(RunRecord(cfg.seed, "vq", None, rep.c_t, str(exc)))
        for method, name, table in (("density", "d_r", dens), ("vq", "k_rel", vq)):
            for v, recs in table.items():
                sm = summarize(recs)
                rows.append(SweepRow(method, name, v, int(nu), sm.eps_r, sm.eps_t, sm.runs, sm.failures))
    return rows


def relative_spread(values) -> float:
    """``(max - min) / min`` of a sequence of positive errors."""
    values = [float(v) for v in values]
    lo = min(values)
    if not lo > 0.0:
        raise ValueError("relative spread needs positive values")
    return (max(values) - lo) / lo


# -- CSV output --------------------------------------------------------------

COMPARISON_HEADER = ("n_uneven", "n_even", "sigma_r", "sigma_t", "amplitude", "wavelength",
                     "method", "eps_r_deg", "eps_t_m", "c_t", "runs", "failures")
SWEEP_HEADER = ("method", "parameter", "value", "n_uneven", "eps_r_deg", "eps_t_m", "runs", "failures")


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def comparison_rows(report: ExperimentReport):
    for cell in report.cells:
        c = cell.config
        for m in report.methods:
            s = cell.summaries[m]
            yield (c.n_uneven, c.n_even, c.sigma_r, c.sigma_t, c.amplitude, c.wavelength,
                   m, s.eps_r, s.eps_t, s.c_t, s.runs, s.failures)


def write_comparison_csv(report: ExperimentReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_HEADER)
        for row in comparison_rows(report):
            w.writerow([v if isinstance(v, str) else _num(v) for v in row])


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([r.method, r.parameter, _num(r.value), _num(r.n_uneven), _num(r.eps_r),
                        _num(r.eps_t), _num(r.runs), _num(r.failures)])
