"""Local quadratic models of the cost around the optimal calibration.

Pure translations and rotations are applied on the right of the optimum
``x_hat``; the resulting cost increase is modelled as ``t^T S_t t`` and
``r^T S_r r`` (``r`` in axis-angle form). Each 3x3 model is fitted exactly
from six probe directions, and the condition numbers of the models tell
how evenly the data excite the translation and rotation directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dq import DualQuaternion, dq_from_rotation, dq_from_translation, dq_mul
from .problem import CostMatrix

DELTA_T = 0.1  # m
DELTA_R = math.radians(0.1)
MAX_DELTA_T = 0.5
MAX_DELTA_R = math.radians(2.0)

_AXIS_NAMES = ("x", "y", "z")


def probe_deviations() -> np.ndarray:
    """The six unit probe directions as rows: three axes, three diagonals."""
    h = 1.0 / math.sqrt(2.0)
    return np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [h, h, 0.0],
            [h, 0.0, h],
            [0.0, h, h],
        ]
    )


def _perturbed(x_hat: DualQuaternion, kind: str, p, delta: float) -> DualQuaternion:
    p = np.asarray(p, dtype=float)
    if kind == "translation":
        return dq_mul(x_hat, dq_from_translation(delta * p))
    if kind == "rotation":
        return dq_mul(x_hat, dq_from_rotation(delta, p))
    raise ValueError(f"kind must be 'translation' or 'rotation', got {kind!r}")


def cost_deviation(q, x_hat: DualQuaternion, kind: str, p, delta: float) -> float:
    """``J(x_hat T(delta p)) - J(x_hat)`` for a pure translation or rotation.

    Evaluated as ``2 x^T Q e + e^T Q e`` with ``e`` the offset of the
    perturbed vector, which avoids cancelling two large costs.
    """
    p = np.asarray(p, dtype=float)
    if abs(np.linalg.norm(p) - 1.0) > 1e-9:
        raise ValueError("probe direction must be a unit vector")
    qm = q.q if isinstance(q, CostMatrix) else np.asarray(q, dtype=float)
    x = x_hat.vec()
    e = _perturbed(x_hat, kind, p, delta).vec() - x
    return float(2.0 * (x @ qm @ e) + e @ qm @ e)


def fit_quadratic(dj, delta: float) -> np.ndarray:
    """Symmetric ``S`` with ``delta^2 p_k^T S p_k = dj[k]`` for the six probes.

    Diagonal entries come straight from the axis probes; each diagonal
    probe ``(e_i + e_j)/sqrt(2)`` gives ``S_ii/2 + S_jj/2 + S_ij``.
    """
    g = np.asarray(dj, dtype=float) / (delta * delta)
    s = np.diag(g[:3])
    for k, (i, j) in enumerate(((0, 1), (0, 2), (1, 2)), start=3):
        s[i, j] = s[j, i] = g[k] - 0.5 * (g[i] + g[j])
    return s


def _sorted_eig(s):
    w, v = np.linalg.eigh(s)
    order = np.argsort(np.abs(w), kind="stable")
    return w[order], v[:, order]


def _condition(w) -> float:
    if w[0] == 0.0:
        return math.inf
    return float(abs(w[2] / w[0]))


@dataclass(frozen=True, eq=False)
class SensitivityReport:
    s_t: np.ndarray
    s_r: np.ndarray
    eig_t: tuple  # (eigenvalues sorted by |.|, eigenvectors as columns)
    eig_r: tuple
    c_t: float
    c_r: float
    dominant_axis: np.ndarray  # v_t1, in the frame of the right-hand perturbation (sensor b)
    dominant_axis_a: np.ndarray  # the same axis rotated into sensor a's frame
    axis_tie: bool = False


def estimate_sensitivity(q, x_hat: DualQuaternion, delta_t: float = DELTA_T,
                         delta_r: float = DELTA_R) -> SensitivityReport:
    """Fit ``S_t`` and ``S_r`` at ``x_hat`` and summarise their conditioning.

    ``x_hat`` should be the certified optimum of the uniformly weighted
    problem. Step sizes are clamped to 0.5 m and 2 deg.
    """
    if not delta_t > 0.0 or not delta_r > 0.0:
        raise ValueError("probe step sizes must be positive")
    delta_t = min(delta_t, MAX_DELTA_T)
    delta_r = min(delta_r, MAX_DELTA_R)
    probes = probe_deviations()
    dj_t = [cost_deviation(q, x_hat, "translation", p, delta_t) for p in probes]
    dj_r = [cost_deviation(q, x_hat, "rotation", p, delta_r) for p in probes]
    s_t = fit_quadratic(dj_t, delta_t)
    s_r = fit_quadratic(dj_r, delta_r)
    wt, vt = _sorted_eig(s_t)
    wr, vr = _sorted_eig(s_r)
    axis = vt[:, 0].copy()
    tie = bool(abs(abs(wt[1]) - abs(wt[0])) <= 1e-9 * max(abs(wt[1]), 1e-300))
    return SensitivityReport(
        s_t=s_t,
        s_r=s_r,
        eig_t=(wt, vt),
        eig_r=(wr, vr),
        c_t=_condition(wt),
        c_r=_condition(wr),
        dominant_axis=axis,
        dominant_axis_a=x_hat.rotation_matrix @ axis,
        axis_tie=tie,
    )


def axis_label(axis, tol: float = 0.99) -> str | None:
    """Name of the coordinate axis ``axis`` is (anti)parallel to, if any."""
    axis = np.asarray(axis, dtype=float)
    k = int(np.argmax(np.abs(axis)))
    return _AXIS_NAMES[k] if abs(axis[k]) >= tol else None


@dataclass(frozen=True)
class FeedbackText:
    c_t: float
    c_r: float
    dominant_axis: tuple
    advice_code: str
    advice: str
    axis_tie: bool = False

    def to_dict(self) -> dict:
        return {
            "c_t": self.c_t,
            "c_r": self.c_r,
            "axis": list(self.dominant_axis),
            "advice_code": self.advice_code,
            "advice": self.advice,
            "axis_tie": self.axis_tie,
        }


def feedback_summary(report, c_gamma: float = 15.0, s_gamma: float = 0.2) -> FeedbackText:
    """Turn a report into calibration-time advice.

    Above ``c_gamma`` the data are ill-conditioned and rotations about axes
    orthogonal to the dominant axis should be added. The band in which the
    blend weight lies in ``[0.25, 0.5]`` is reported as borderline. The
    dominant axis is given in sensor a's frame.
    """
    c_t = float(report.c_t)
    axis = np.asarray(report.dominant_axis_a, dtype=float)
    k = int(np.argmax(np.abs(axis)))
    if axis[k] < 0:
        axis = -axis
    label = axis_label(axis)
    axis_txt = f"{label} axis" if label else "axis [" + ", ".join(f"{c:.3f}" for c in axis) + "]"
    borderline_from = c_gamma - math.log(3.0) / s_gamma
    if c_t > c_gamma:
        code = "ill_conditioned"
        advice = (
            f"translation condition number {c_t:.1f} is high: rotations about the {axis_txt} "
            f"dominate; add rotations about axes orthogonal to the {axis_txt}"
        )
    elif c_t >= borderline_from:
        code = "borderline"
        advice = (
            f"translation condition number {c_t:.1f} is borderline; rotations about the "
            f"{axis_txt} are over-represented, consider adding rotations about orthogonal axes"
        )
    else:
        code = "well_conditioned"
        advice = f"translation condition number {c_t:.1f}: rotation axes are well spread"
    return FeedbackText(
        c_t=c_t,
        c_r=float(report.c_r),
        dominant_axis=tuple(float(c) for c in axis),
        advice_code=code,
        advice=advice,
        axis_tie=bool(report.axis_tie),
    )
