"""Rotation-axis density weighting and the automatically weighted calibration.

Samples are split by rotation angle. Each rotating sample gets a local
density of its (sign-free) rotation axis, ``rho_i = sum_j G(d(n_i, n_j))``
with an unnormalised Gaussian kernel, and a weight ``1/sqrt(rho_i)``.
The weights are rescaled so the rotating samples keep their total share of
the cost, and the resulting matrix is blended with the unweighted one
according to the translation condition number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dq import quat_to_axis_angle
from .problem import CostMatrix, MotionPair, cost_from_arrays, pairs_to_arrays
from .sensitivity import DELTA_R, DELTA_T, SensitivityReport, estimate_sensitivity
from .solver import CalibrationResult, SolverOptions, solve

ROTATION_THRESHOLD = math.radians(0.1)
D_R = 0.2
C_GAMMA = 15.0
S_GAMMA = 0.2

_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class RotationSplit:
    no_rotation: list
    rotation: list  # (pair, axis, angle) triples
    threshold: float
    no_rotation_index: np.ndarray = field(repr=False)
    rotation_index: np.ndarray = field(repr=False)

    @property
    def n_nr(self) -> int:
        return len(self.no_rotation)

    @property
    def n_r(self) -> int:
        return len(self.rotation)

    @property
    def axes(self) -> np.ndarray:
        return np.array([ax for _, ax, _ in self.rotation], dtype=float).reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class DensityResult:
    densities: np.ndarray
    weights_rho: np.ndarray
    sigma_rho: float
    d_r: float


def split_by_rotation(pairs, source: str = "a", threshold: float = ROTATION_THRESHOLD) -> RotationSplit:
    """Partition pairs by the rotation angle of one sensor's motion."""
    if source not in ("a", "b", "sensor_a", "sensor_b"):
        raise ValueError(f"source must be 'a' or 'b', got {source!r}")
    use_a = source in ("a", "sensor_a")
    pairs = list(pairs)
    if not pairs:
        return RotationSplit([], [], threshold, np.zeros(0, int), np.zeros(0, int))
    real = np.array([(p.a if use_a else p.b).real for p in pairs])
    angle, axis = quat_to_axis_angle(real)
    rot = np.abs(angle) >= threshold
    rot_idx = np.flatnonzero(rot)
    nr_idx = np.flatnonzero(~rot)
    return RotationSplit(
        no_rotation=[pairs[i] for i in nr_idx],
        rotation=[(pairs[i], axis[i], float(angle[i])) for i in rot_idx],
        threshold=threshold,
        no_rotation_index=nr_idx,
        rotation_index=rot_idx,
    )


def axis_distance(n_i, n_j):
    """Angle between two rotation axes with ``n`` and ``-n`` identified; in ``[0, pi/2]``.

    Broadcasts over leading dimensions.
    """
    n_i = np.asarray(n_i, dtype=float)
    n_j = np.asarray(n_j, dtype=float)
    c = np.clip(np.sum(n_i * n_j, axis=-1), -1.0, 1.0)
    return 0.5 * np.pi - np.abs(np.arccos(c) - 0.5 * np.pi)


def kernel(x, d_r: float):
    """Unnormalised zero-mean Gaussian ``exp(-x^2 / (2 d_r^2))``."""
    if not d_r > 0.0:
        raise ValueError("kernel range d_r must be positive")
    x = np.asarray(x, dtype=float)
    return np.exp(-(x * x) / (2.0 * d_r * d_r))


def _dots(a, b):
    # explicit three-term products: independent of BLAS blocking
    return a[:, None, 0] * b[None, :, 0] + a[:, None, 1] * b[None, :, 1] + a[:, None, 2] * b[None, :, 2]


def _distance_from_dots(c):
    c = np.clip(c, -1.0, 1.0)
    return 0.5 * np.pi - np.abs(np.arccos(c) - 0.5 * np.pi)


def density_values(axes, d_r: float = D_R, block: int = _BLOCK) -> np.ndarray:
    """``rho_i`` for every axis, the self term counted as exactly 1.

    Rows are accumulated in blocks; the result does not depend on
    ``block``.
    """
    axes = np.asarray(axes, dtype=float).reshape(-1, 3)
    if not d_r > 0.0:
        raise ValueError("kernel range d_r must be positive")
    n = axes.shape[0]
    rho = np.empty(n)
    for start in range(0, n, block):
        stop = min(start + block, n)
        k = kernel(_distance_from_dots(_dots(axes[start:stop], axes)), d_r)
        rows = np.arange(stop - start)
        k[rows, rows + start] = 1.0
        rho[start:stop] = np.sum(k, axis=1)
    return rho


def densities(split: RotationSplit, d_r: float = D_R) -> DensityResult:
    if split.n_r == 0:
        raise ValueError("no rotation samples to compute densities from")
    rho = density_values(split.axes, d_r)
    w = 1.0 / np.sqrt(rho)
    return DensityResult(densities=rho, weights_rho=w, sigma_rho=math.fsum(w.tolist()), d_r=d_r)


class DensityAccumulator:
    """Streaming densities: each new axis adds one kernel term to every existing density.

    Sums are carried with Neumaier compensation so the running values agree
    with a batch recomputation to rounding.
    """

    def __init__(self, d_r: float = D_R):
        if not d_r > 0.0:
            raise ValueError("kernel range d_r must be positive")
        self.d_r = d_r
        self._axes = np.zeros((0, 3))
        self._sum = np.zeros(0)
        self._comp = np.zeros(0)

    def __len__(self):
        return self._axes.shape[0]

    def add(self, axis):
        axis = np.asarray(axis, dtype=float).reshape(1, 3)
        if len(self):
            g = kernel(_distance_from_dots(_dots(axis, self._axes))[0], self.d_r)
            # update existing densities
            t = self._sum + g
            big = np.abs(self._sum) >= np.abs(g)
            self._comp += np.where(big, (self._sum - t) + g, (g - t) + self._sum)
            self._sum = t
            own = _neumaier(np.concatenate([[1.0], g]))
        else:
            own = (1.0, 0.0)
        self._axes = np.vstack([self._axes, axis])
        self._sum = np.append(self._sum, own[0])
        self._comp = np.append(self._comp, own[1])

    @property
    def densities(self) -> np.ndarray:
        return self._sum + self._comp

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.densities)


def _neumaier(values):
    s, c = 0.0, 0.0
    for v in values:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s, c


def rotation_weights(dens: DensityResult) -> np.ndarray:
    """``n_r * w_rho_i / Sigma_rho``; sums to ``n_r``."""
    n_r = len(dens.weights_rho)
    return n_r * dens.weights_rho / dens.sigma_rho


def weighted_pairs(split: RotationSplit, dens: DensityResult) -> list:
    """Pairs in their original order with weights 1 (no rotation) or the density weights."""
    n = split.n_nr + split.n_r
    out = [None] * n
    for i, p in zip(split.no_rotation_index, split.no_rotation):
        out[i] = p.with_weight(1.0)
    for i, (p, _, _), w in zip(split.rotation_index, split.rotation, rotation_weights(dens)):
        out[i] = p.with_weight(float(w))
    return out


def weighted_cost(split: RotationSplit, dens: DensityResult) -> CostMatrix:
    a, b, w = pairs_to_arrays(weighted_pairs(split, dens))
    return cost_from_arrays(a, b, w)


def blend_gamma(c_t: float, c_gamma: float = C_GAMMA, s_gamma: float = S_GAMMA) -> float:
    """Sigmoid blend weight, 0.5 at ``c_t = c_gamma``."""
    z = s_gamma * (c_gamma - c_t)
    if z > 700.0:
        return 0.0
    return 1.0 / (1.0 + math.exp(z))


def combined_cost(q, q_w, gamma: float) -> CostMatrix:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma!r}")
    qa = q.q if isinstance(q, CostMatrix) else np.asarray(q, dtype=float)
    qb = q_w.q if isinstance(q_w, CostMatrix) else np.asarray(q_w, dtype=float)
    return CostMatrix((1.0 - gamma) * qa + gamma * qb)


@dataclass(frozen=True)
class WeightingParams:
    d_r: float = D_R
    threshold: float = ROTATION_THRESHOLD
    c_gamma: float = C_GAMMA
    s_gamma: float = S_GAMMA
    source: str = "a"
    delta_t: float = DELTA_T
    delta_r: float = DELTA_R
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass(frozen=True, eq=False)
class AutoWeightedResult:
    result: CalibrationResult
    sensitivity: SensitivityReport
    density: DensityResult
    gamma: float
    unweighted: CalibrationResult
    q: CostMatrix = field(repr=False)
    q_w: CostMatrix = field(repr=False)
    q_gamma: CostMatrix = field(repr=False)

    def __iter__(self):
        return iter((self.result, self.sensitivity, self.density))


def unweighted_stage(pairs, params: WeightingParams | None = None):
    """Uniform-weight solve and its sensitivity report."""
    params = params or WeightingParams()
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one motion pair")
    a, b, _ = pairs_to_arrays(pairs)
    q = cost_from_arrays(a, b, np.ones(len(pairs)))
    res = solve(q, params.solver)
    report = estimate_sensitivity(q, res.x, params.delta_t, params.delta_r)
    return q, res, report


def weighted_stage(pairs, q, unweighted: CalibrationResult, report: SensitivityReport,
                   params: WeightingParams | None = None) -> AutoWeightedResult:
    params = params or WeightingParams()
    split = split_by_rotation(pairs, params.source, params.threshold)
    dens = densities(split, params.d_r)
    q_w = weighted_cost(split, dens)
    gamma = blend_gamma(report.c_t, params.c_gamma, params.s_gamma)
    q_g = combined_cost(q, q_w, gamma)
    res = solve(q_g, params.solver)
    return AutoWeightedResult(
        result=res, sensitivity=report, density=dens, gamma=gamma,
        unweighted=unweighted, q=q, q_w=q_w, q_gamma=q_g,
    )


def auto_weighted_calibrate(pairs, params: WeightingParams | None = None) -> AutoWeightedResult:
    """Unweighted solve, sensitivity, densities, blend, and the final weighted solve.

    Unpacks as ``(result, sensitivity, density)``; the blend weight and the
    intermediate matrices are attributes.
    """
    params = params or WeightingParams()
    pairs = [p if isinstance(p, MotionPair) else MotionPair(*p) for p in pairs]
    q, res, report = unweighted_stage(pairs, params)
    return weighted_stage(pairs, q, res, report, params)
