"""Synthetic vehicle-like motion data for hand-eye calibration experiments.

A dataset consists of two trajectory segments driven with the same
random yaw-rate process:

* ``n_uneven`` steps on a flat road, so every rotation axis is the
  vertical axis;
* ``n_even`` steps over a sine-shaped elevation profile whose pitch and
  banking tilt the rotation axes away from vertical.

Sensor b motions follow from ``V_b = T^-1 V_a T`` for the ground-truth
calibration ``T``. Noise is then drawn per motion, proportional to the
motion's translation length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dq import (
    DualQuaternion,
    dq_from_pose,
    dq_mul_arrays,
    quat_conj,
    quat_from_axis_angle,
    quat_mul,
)
from .problem import MotionPair


def default_calibration() -> DualQuaternion:
    axis = np.array([1.0, -2.0, 3.0]) / math.sqrt(14.0)
    return dq_from_pose([1.2, -0.6, 0.9], math.radians(40.0), axis)


@dataclass(frozen=True)
class ScenarioConfig:
    n_uneven: int = 1000
    n_even: int = 100
    amplitude: float = 1.0  # m, elevation sine of the even segment
    wavelength: float = 40.0  # m
    step_translation: float = 1.0  # m per sample
    # yaw change per sample follows an AR(1) process (discrete Ornstein-Uhlenbeck)
    yaw_rate_std: float = 1.0  # deg, stationary std
    yaw_rate_corr: float = 0.9
    yaw_rate_clip: float = 3.0  # deg
    bank_gain: float = 2.0  # roll angle per yaw change of the same sample
    sigma_r: float = 0.0  # deg per m of translation
    sigma_t: float = 0.0  # percent of translation
    calibration: DualQuaternion = field(default_factory=default_calibration)
    seed: int = 0

    def __post_init__(self):
        for name in ("n_uneven", "n_even"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("amplitude", "sigma_r", "sigma_t", "yaw_rate_std", "yaw_rate_clip", "bank_gain"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")
        for name in ("wavelength", "step_translation"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be positive, got {v!r}")
        if not 0.0 <= self.yaw_rate_corr < 1.0:
            raise ValueError(f"yaw_rate_corr must lie in [0, 1), got {self.yaw_rate_corr!r}")
        if self.n_uneven + self.n_even == 0:
            raise ValueError("scenario has no samples")
        if not isinstance(self.calibration, DualQuaternion):
            raise ValueError("calibration must be a DualQuaternion")

    def with_(self, **changes) -> ScenarioConfig:
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return ScenarioConfig(**values)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "calibration"}
        cal = self.calibration.canonical_vec()
        out["calibration"] = {
            "q": cal[:4].tolist(),
            "t": DualQuaternion.from_vector(cal).translation.tolist(),
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        from .dq import dq_from_quat_translation

        data = dict(data)
        cal = data.pop("calibration", None)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        if cal is not None:
            data["calibration"] = dq_from_quat_translation(cal["q"], cal["t"], tol=1e-6)
        return cls(**data)


@dataclass(frozen=True, eq=False)
class Dataset:
    pairs: list
    ground_truth: DualQuaternion
    config: ScenarioConfig | None = None

    def __len__(self):
        return len(self.pairs)


def _yaw_changes(cfg: ScenarioConfig, n: int, rng) -> np.ndarray:
    std = math.radians(cfg.yaw_rate_std)
    clip = math.radians(cfg.yaw_rate_clip)
    rho = cfg.yaw_rate_corr
    innov = std * math.sqrt(1.0 - rho * rho)
    out = np.empty(n)
    w = std * rng.standard_normal()
    for k in range(n):
        w = min(max(w, -clip), clip)
        out[k] = w
        w = rho * w + innov * rng.standard_normal()
    return out


def _euler_quat(yaw, pitch, roll):
    z = np.array([0.0, 0.0, 1.0])
    y = np.array([0.0, 1.0, 0.0])
    x = np.array([1.0, 0.0, 0.0])
    return quat_mul(
        quat_mul(quat_from_axis_angle(yaw, np.broadcast_to(z, yaw.shape + (3,))),
                 quat_from_axis_angle(pitch, np.broadcast_to(y, pitch.shape + (3,)))),
        quat_from_axis_angle(roll, np.broadcast_to(x, roll.shape + (3,))),
    )


def _segment(cfg: ScenarioConfig, n: int, rng, elevated: bool):
    """Relative motions ``W_k^-1 W_k+1`` of one trajectory segment, as (r, d) arrays."""
    if n == 0:
        return np.zeros((0, 4)), np.zeros((0, 4))
    dyaw = _yaw_changes(cfg, n, rng)
    yaw = np.concatenate([[0.0], np.cumsum(dyaw)])
    step = cfg.step_translation
    s = step * np.arange(n + 1)
    if elevated:
        k = 2.0 * math.pi / cfg.wavelength
        phase = rng.uniform(0.0, 2.0 * math.pi)
        z = cfg.amplitude * np.sin(k * s + phase)
        slope = cfg.amplitude * k * np.cos(k * s + phase)
        pitch = -np.arctan(slope)
        # banking follows the yaw change of the upcoming step
        roll = cfg.bank_gain * np.concatenate([dyaw, dyaw[-1:]])
    else:
        z = np.zeros(n + 1)
        pitch = np.zeros(n + 1)
        roll = np.zeros(n + 1)
    heading = yaw[:-1] + 0.5 * dyaw
    xy = np.zeros((n + 1, 2))
    xy[1:] = np.cumsum(step * np.stack([np.cos(heading), np.sin(heading)], axis=-1), axis=0)
    pos = np.concatenate([xy, z[:, None]], axis=-1)

    q = _euler_quat(yaw, pitch, roll)
    pure = np.concatenate([np.zeros((n + 1, 1)), pos], axis=-1)
    qd = 0.5 * quat_mul(pure, q)
    ri, di = quat_conj(q[:-1]), quat_conj(qd[:-1])
    return dq_mul_arrays(ri, di, q[1:], qd[1:])


def noise_arrays(r, d, sigma_r, sigma_t, rng):
    """Left-compose each motion with a random pose perturbation.

    The rotation angle has std ``sigma_r * L`` (deg) about a uniform random
    axis, each translation component std ``sigma_t / 100 * L / sqrt(3)``,
    where ``L`` is the motion's translation length.
    """
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    if sigma_r == 0.0 and sigma_t == 0.0:
        return r, d
    n = r.shape[0]
    length = np.linalg.norm(2.0 * quat_mul(d, quat_conj(r))[:, 1:], axis=-1)
    angle = np.radians(sigma_r) * length * rng.standard_normal(n)
    axis = rng.standard_normal((n, 3))
    axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
    offset = (sigma_t / 100.0) * (length / math.sqrt(3.0))[:, None] * rng.standard_normal((n, 3))
    nr = quat_from_axis_angle(angle, axis)
    nd = 0.5 * quat_mul(np.concatenate([np.zeros((n, 1)), offset], axis=-1), nr)
    return dq_mul_arrays(nr, nd, r, d)


def add_noise(motion: DualQuaternion, sigma_r: float, sigma_t: float, rng) -> DualQuaternion:
    if sigma_r < 0.0 or sigma_t < 0.0:
        raise ValueError("noise levels must be non-negative")
    r, d = noise_arrays(motion.real[None], motion.dual[None], sigma_r, sigma_t, rng)
    return DualQuaternion(r[0], d[0])


def _renormalize(r, d):
    # keep accumulated rounding far inside the unit tolerance
    nrm = np.linalg.norm(r, axis=-1, keepdims=True)
    r = r / nrm
    d = d / nrm
    return r, d - np.sum(r * d, axis=-1, keepdims=True) * r


def generate_arrays(cfg: ScenarioConfig):
    """Array form ``(A, B)`` of shape ``(n, 8)`` each; uneven samples first."""
    rng = np.random.default_rng(cfg.seed)
    r_u, d_u = _segment(cfg, cfg.n_uneven, rng, elevated=False)
    r_e, d_e = _segment(cfg, cfg.n_even, rng, elevated=True)
    ra = np.concatenate([r_u, r_e])
    da = np.concatenate([d_u, d_e])
    ra, da = _renormalize(ra, da)

    t = cfg.calibration
    ti_r, ti_d = quat_conj(t.real), quat_conj(t.dual)
    r1, d1 = dq_mul_arrays(ti_r, ti_d, ra, da)
    rb, db = dq_mul_arrays(r1, d1, t.real, t.dual)
    # same projection on both sides so an identity calibration gives a == b bit for bit
    ra, da = _renormalize(ra, da)
    rb, db = _renormalize(rb, db)

    ra, da = noise_arrays(ra, da, cfg.sigma_r, cfg.sigma_t, rng)
    rb, db = noise_arrays(rb, db, cfg.sigma_r, cfg.sigma_t, rng)
    a = np.concatenate([ra, da], axis=-1)
    b = np.concatenate([rb, db], axis=-1)
    return a, b


def generate(cfg: ScenarioConfig) -> Dataset:
    a, b = generate_arrays(cfg)
    pairs = [
        MotionPair(DualQuaternion(ai[:4], ai[4:]), DualQuaternion(bi[:4], bi[4:]))
        for ai, bi in zip(a, b)
    ]
    return Dataset(pairs=pairs, ground_truth=cfg.calibration, config=cfg)
