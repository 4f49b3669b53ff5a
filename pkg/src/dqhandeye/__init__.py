"""Certifiably optimal dual-quaternion hand-eye calibration with rotation-axis density weighting."""

__version__ = "0.1.0"

from .dq import DualQuaternion, dq_from_pose, dq_from_quat_translation, dq_from_rotation, dq_from_translation
from .errors import CalibrationError, ConvergenceError, NotPSDError, UnderConstrainedError
from .metrics import ErrorPair, calib_error, run_comparison, sweep_parameters
from .problem import CostMatrix, MotionPair, build_cost
from .sensitivity import SensitivityReport, estimate_sensitivity, feedback_summary
from .solver import CalibrationResult, SolverOptions, certify, solve
from .synthgen import Dataset, ScenarioConfig, generate
from .vq import vq_select
from .weighting import WeightingParams, auto_weighted_calibrate, densities, split_by_rotation

__all__ = [
    "CalibrationError",
    "CalibrationResult",
    "ConvergenceError",
    "CostMatrix",
    "Dataset",
    "DualQuaternion",
    "ErrorPair",
    "MotionPair",
    "NotPSDError",
    "ScenarioConfig",
    "SensitivityReport",
    "SolverOptions",
    "UnderConstrainedError",
    "WeightingParams",
    "auto_weighted_calibrate",
    "build_cost",
    "calib_error",
    "certify",
    "densities",
    "dq_from_pose",
    "dq_from_quat_translation",
    "dq_from_rotation",
    "dq_from_translation",
    "estimate_sensitivity",
    "feedback_summary",
    "generate",
    "run_comparison",
    "solve",
    "split_by_rotation",
    "sweep_parameters",
    "vq_select",
]
