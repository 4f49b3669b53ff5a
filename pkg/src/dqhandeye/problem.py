"""Hand-eye QCQP assembly: per-sample matrices, cost matrix and constraints.

Every motion pair ``(V_a, V_b)`` of a calibration ``T`` obeys
``V_a T = T V_b``; with the 8x8 multiplication matrices this becomes
``M x = 0`` with ``M = Q+(V_a) - Q-(V_b)`` and ``x = vec(T)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dq import DualQuaternion, minus_matrix, plus_matrix
from .errors import NotPSDError

P_R = np.diag([-1.0, -1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0])
P_D = np.block([[np.zeros((4, 4)), np.eye(4)], [np.eye(4), np.zeros((4, 4))]])
P_R.flags.writeable = False
P_D.flags.writeable = False


@dataclass(frozen=True, eq=False)
class MotionPair:
    """One synchronized relative-motion sample of sensors a and b."""

    a: DualQuaternion
    b: DualQuaternion
    weight: float = 1.0

    def __post_init__(self):
        w = float(self.weight)
        if not math.isfinite(w) or w < 0.0:
            raise ValueError(f"sample weight must be finite and non-negative, got {self.weight!r}")
        object.__setattr__(self, "weight", w)

    def with_weight(self, weight: float) -> MotionPair:
        return replace(self, weight=weight)


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Symmetric PSD 8x8 matrix ``Q`` of the cost ``J(x) = x^T Q x``."""

    q: np.ndarray = field(repr=False)

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.shape != (8, 8):
            raise ValueError(f"cost matrix must be 8x8, got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise NotPSDError("cost matrix has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(q))))
        if np.max(np.abs(q - q.T)) > 1e-12 * scale:
            raise NotPSDError("cost matrix is not symmetric")
        q = 0.5 * (q + q.T)
        eig = np.linalg.eigvalsh(q)
        if eig[0] < -1e-9 * max(eig[-1], 0.0) - 1e-300:
            raise NotPSDError(f"cost matrix is not PSD (min eigenvalue {eig[0]:.3g})")
        q.flags.writeable = False
        object.__setattr__(self, "q", q)

    def __call__(self, x) -> float:
        return cost_value(self, x)

    def scaled(self, alpha: float) -> CostMatrix:
        return CostMatrix(alpha * self.q)


def pairs_to_arrays(pairs):
    """Stack a pair list into ``(A, B, w)`` with ``A, B`` of shape ``(n, 8)``."""
    a = np.array([np.concatenate([p.a.real, p.a.dual]) for p in pairs], dtype=float).reshape(-1, 8)
    b = np.array([np.concatenate([p.b.real, p.b.dual]) for p in pairs], dtype=float).reshape(-1, 8)
    w = np.array([p.weight for p in pairs], dtype=float)
    return a, b, w


def sample_matrix(pair: MotionPair) -> np.ndarray:
    return plus_matrix(pair.a.vec()) - minus_matrix(pair.b.vec())


def sample_matrices(a, b) -> np.ndarray:
    """Batched ``M_i = Q+(a_i) - Q-(b_i)`` for 8-vector stacks."""
    return plus_matrix(a) - minus_matrix(b)


def cost_from_arrays(a, b, w) -> CostMatrix:
    """``Q = sum_i w_i M_i^T M_i`` with correctly rounded per-entry sums.

    ``math.fsum`` makes every entry independent of the sample order, so the
    result is bit-identical for any permutation of the input.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 8)
    b = np.asarray(b, dtype=float).reshape(-1, 8)
    w = np.asarray(w, dtype=float).reshape(-1)
    if a.shape[0] == 0:
        raise ValueError("need at least one motion pair")
    m = sample_matrices(a, b)
    terms = w[:, None, None] * np.einsum("nki,nkj->nij", m, m)
    q = np.empty((8, 8))
    for i in range(8):
        for j in range(i, 8):
            q[i, j] = q[j, i] = math.fsum(terms[:, i, j].tolist())
    return CostMatrix(q)


def build_cost(pairs) -> CostMatrix:
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one motion pair")
    return cost_from_arrays(*pairs_to_arrays(pairs))


def _matrix(q):
    return q.q if isinstance(q, CostMatrix) else np.asarray(q, dtype=float)


def cost_value(q, x) -> float:
    x = x.vec() if isinstance(x, DualQuaternion) else np.asarray(x, dtype=float)
    return float(x @ _matrix(q) @ x)


def constraint_residuals(x) -> np.ndarray:
    """``(1 + x^T P_r x, x^T P_d x)``; both vanish exactly for unit DQ vectors."""
    x = x.vec() if isinstance(x, DualQuaternion) else np.asarray(x, dtype=float)
    return np.array([1.0 + x @ P_R @ x, x @ P_D @ x])
