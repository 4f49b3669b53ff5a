"""Quaternion and dual-quaternion algebra.

Quaternions are plain float arrays of shape ``(..., 4)`` in scalar-first
order ``(s, v1, v2, v3)``; the quaternion helpers broadcast over leading
dimensions so the same code serves single values and whole datasets.
A rigid transform is a :class:`DualQuaternion` ``q = r + eps d`` whose
8-vector form is ``[r; d]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-9
FILE_UNIT_TOL = 1e-6

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat_mul(a, b):
    """Hamilton product ``a b`` of (stacks of) quaternions."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sa, va = a[..., :1], a[..., 1:]
    sb, vb = b[..., :1], b[..., 1:]
    s = sa * sb - np.sum(va * vb, axis=-1, keepdims=True)
    v = sa * vb + sb * va + np.cross(va, vb)
    return np.concatenate([s, v], axis=-1)


def quat_conj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_left_matrix(q):
    """Matrix ``L`` with ``L(q) @ p == quat_mul(q, p)``."""
    q = np.asarray(q, dtype=float)
    s, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rows = [
        [s, -x, -y, -z],
        [x, s, -z, y],
        [y, z, s, -x],
        [z, -y, x, s],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def quat_right_matrix(q):
    """Matrix ``R`` with ``R(q) @ p == quat_mul(p, q)``."""
    q = np.asarray(q, dtype=float)
    s, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rows = [
        [s, -x, -y, -z],
        [x, s, z, -y],
        [y, -z, s, x],
        [z, y, -x, s],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def quat_from_axis_angle(phi, n):
    """Unit quaternion ``(cos(phi/2), n sin(phi/2))``; ``n`` must be unit."""
    phi = np.asarray(phi, dtype=float)
    n = np.asarray(n, dtype=float)
    half = 0.5 * phi[..., None]
    return np.concatenate([np.cos(half), n * np.sin(half)], axis=-1)


def quat_to_axis_angle(q):
    """Return ``(angle, axis)`` with angle in ``[0, pi]``.

    The sign of ``q`` is resolved so the scalar part is non-negative. For a
    vanishing rotation the axis is undefined and returned as ``(0, 0, 1)``.
    """
    q = np.asarray(q, dtype=float)
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    q = q * sign
    vnorm = np.linalg.norm(q[..., 1:], axis=-1)
    angle = 2.0 * np.arctan2(vnorm, q[..., 0])
    safe = np.where(vnorm > 0.0, vnorm, 1.0)[..., None]
    axis = np.where(vnorm[..., None] > 0.0, q[..., 1:] / safe, np.array([0.0, 0.0, 1.0]))
    return angle, axis


def quat_to_rotation_matrix(q):
    q = np.asarray(q, dtype=float)
    s, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - s * z), 2 * (x * z + s * y)], -1),
            np.stack([2 * (x * y + s * z), 1 - 2 * (x * x + z * z), 2 * (y * z - s * x)], -1),
            np.stack([2 * (x * z - s * y), 2 * (y * z + s * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )


def canonical_sign(x):
    """Flip ``x`` (one 8-vector or a stack) so the first nonzero real component is positive.

    Only meant for I/O and comparisons; the algebra never canonicalizes.
    """
    x = np.array(x, dtype=float)
    flat = x.reshape(-1, x.shape[-1])
    for row in flat:
        for c in row[:4]:
            if c != 0.0:
                if c < 0.0:
                    row *= -1.0
                break
    return flat.reshape(x.shape)


# -- dual quaternions on raw arrays ---------------------------------------

def dq_mul_arrays(ra, da, rb, db):
    """Product of dual quaternions given as (stacks of) real/dual arrays."""
    return quat_mul(ra, rb), quat_mul(ra, db) + quat_mul(da, rb)


def dq_translation_arrays(r, d):
    """Translation ``t`` encoded by ``d = 1/2 (0, t) r``."""
    return 2.0 * quat_mul(d, quat_conj(r))[..., 1:]


def plus_matrix(x):
    """8x8 left-multiplication matrix ``Q+`` of a DQ 8-vector (broadcasts)."""
    x = np.asarray(x, dtype=float)
    r = quat_left_matrix(x[..., :4])
    d = quat_left_matrix(x[..., 4:])
    zero = np.zeros_like(r)
    top = np.concatenate([r, zero], axis=-1)
    bottom = np.concatenate([d, r], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def minus_matrix(x):
    """8x8 right-multiplication matrix ``Q-`` of a DQ 8-vector (broadcasts)."""
    x = np.asarray(x, dtype=float)
    r = quat_right_matrix(x[..., :4])
    d = quat_right_matrix(x[..., 4:])
    zero = np.zeros_like(r)
    top = np.concatenate([r, zero], axis=-1)
    bottom = np.concatenate([d, r], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def unit_residuals(x):
    """``(|r|^2 - 1, <r, d>)`` for DQ 8-vectors; zero for unit DQs."""
    x = np.asarray(x, dtype=float)
    r, d = x[..., :4], x[..., 4:]
    return np.sum(r * r, axis=-1) - 1.0, np.sum(r * d, axis=-1)


def normalize_arrays(r, d):
    """Project onto unit dual quaternions: scale by ``1/|r|`` and remove the part of ``d`` along ``r``."""
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    nr = np.linalg.norm(r, axis=-1, keepdims=True)
    if np.any(nr <= 1e-12):
        raise ValueError("cannot normalize a dual quaternion with vanishing real part")
    r = r / nr
    d = d / nr
    d = d - np.sum(r * d, axis=-1, keepdims=True) * r
    return r, d


@dataclass(frozen=True, eq=False)
class DualQuaternion:
    """Unit dual quaternion ``r + eps d``.

    Construction validates both unit conditions at ``tol``; arrays are
    stored read-only.
    """

    real: np.ndarray
    dual: np.ndarray

    def __init__(self, real, dual, tol: float = UNIT_TOL):
        real = np.array(real, dtype=float).reshape(4)
        dual = np.array(dual, dtype=float).reshape(4)
        if not (np.all(np.isfinite(real)) and np.all(np.isfinite(dual))):
            raise ValueError("dual quaternion has non-finite entries")
        norm_err = abs(np.linalg.norm(real) - 1.0)
        ortho_err = abs(float(real @ dual))
        if norm_err > tol or ortho_err > tol:
            raise ValueError(
                f"not a unit dual quaternion (|r|-1 = {norm_err:.3g}, <r,d> = {ortho_err:.3g})"
            )
        real.flags.writeable = False
        dual.flags.writeable = False
        object.__setattr__(self, "real", real)
        object.__setattr__(self, "dual", dual)

    @classmethod
    def identity(cls) -> DualQuaternion:
        return cls(QUAT_IDENTITY, np.zeros(4))

    @classmethod
    def from_vector(cls, x, tol: float = UNIT_TOL) -> DualQuaternion:
        x = np.asarray(x, dtype=float).reshape(8)
        return cls(x[:4], x[4:], tol=tol)

    def vec(self) -> np.ndarray:
        return np.concatenate([self.real, self.dual])

    def canonical_vec(self) -> np.ndarray:
        return canonical_sign(self.vec())

    @property
    def translation(self) -> np.ndarray:
        return dq_translation_arrays(self.real, self.dual)

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_rotation_matrix(self.real)

    def axis_angle(self):
        angle, axis = quat_to_axis_angle(self.real)
        return float(angle), axis

    def __mul__(self, other: DualQuaternion) -> DualQuaternion:
        return dq_mul(self, other)

    def __neg__(self) -> DualQuaternion:
        return DualQuaternion(-self.real, -self.dual)

    def __repr__(self) -> str:
        return f"DualQuaternion(real={self.real.tolist()}, dual={self.dual.tolist()})"


def dq_mul(a: DualQuaternion, b: DualQuaternion) -> DualQuaternion:
    r, d = dq_mul_arrays(a.real, a.dual, b.real, b.dual)
    return DualQuaternion(r, d)


def dq_from_translation(t) -> DualQuaternion:
    t = np.asarray(t, dtype=float).reshape(3)
    return DualQuaternion(QUAT_IDENTITY, np.concatenate([[0.0], 0.5 * t]))


def _check_axis(n) -> np.ndarray:
    n = np.asarray(n, dtype=float).reshape(3)
    if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise ValueError(f"rotation axis must be a unit vector, got norm {np.linalg.norm(n):.12g}")
    return n


def dq_from_rotation(phi: float, n) -> DualQuaternion:
    n = _check_axis(n)
    return DualQuaternion(quat_from_axis_angle(phi, n), np.zeros(4))


def dq_from_pose(t, phi: float, n) -> DualQuaternion:
    """Rotation about ``n`` by ``phi`` followed by translation ``t``."""
    return dq_mul(dq_from_translation(t), dq_from_rotation(phi, n))


def dq_from_quat_translation(q, t, tol: float = UNIT_TOL) -> DualQuaternion:
    """Build from a unit rotation quaternion and a translation vector."""
    q = np.asarray(q, dtype=float).reshape(4)
    t = np.asarray(t, dtype=float).reshape(3)
    if abs(np.linalg.norm(q) - 1.0) > tol:
        raise ValueError(f"rotation quaternion is not unit (norm {np.linalg.norm(q):.12g})")
    q = q / np.linalg.norm(q)
    d = 0.5 * quat_mul(np.concatenate([[0.0], t]), q)
    return DualQuaternion(q, d)


def dq_conjugate(q: DualQuaternion) -> DualQuaternion:
    """Quaternion conjugate of both parts, ``r* + eps d*``."""
    return DualQuaternion(quat_conj(q.real), quat_conj(q.dual))


def dq_inverse(q: DualQuaternion) -> DualQuaternion:
    # for unit DQs the inverse is the quaternion conjugate
    return dq_conjugate(q)


def dq_normalize(real, dual=None) -> DualQuaternion:
    """Nearest-unit projection of ``real + eps dual`` (or of an 8-vector)."""
    if dual is None:
        x = np.asarray(real, dtype=float).reshape(8)
        real, dual = x[:4], x[4:]
    r, d = normalize_arrays(real, dual)
    return DualQuaternion(r, d)


def dq_translation(q: DualQuaternion) -> np.ndarray:
    return q.translation


@dataclass(frozen=True, eq=False)
class DQMatrixRep:
    plus: np.ndarray
    minus: np.ndarray


def matrix_reps(q: DualQuaternion) -> DQMatrixRep:
    x = q.vec()
    return DQMatrixRep(plus=plus_matrix(x), minus=minus_matrix(x))
