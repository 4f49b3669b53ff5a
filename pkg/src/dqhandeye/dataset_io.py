"""JSON Lines storage of motion-pair datasets.

The first line is a header ``{"format_version": 1, "ground_truth": ...,
"config": ...}``; every further line is one pair ``{"a": {"q": [w, x, y, z],
"t": [x, y, z]}, "b": {...}, "w": weight}``. Floats are written with 17
significant digits, so reading a file back reproduces every stored number
exactly; the dual part is rebuilt from ``t`` and may differ in the last bit.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .dq import FILE_UNIT_TOL, DualQuaternion, dq_from_quat_translation
from .problem import MotionPair
from .synthgen import Dataset, ScenarioConfig

FORMAT_VERSION = 1


class DatasetFormatError(ValueError):
    """A dataset file is malformed."""


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x!r}")
    s = "%.17g" % x
    if s in ("0", "-0"):
        return s + ".0"
    return s if any(c in s for c in ".en") else s + ".0"


def _dump(obj) -> str:
    """Compact JSON with every float in ``%.17g``."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(json.dumps(str(k)) + ":" + _dump(v) for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_dump(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def pose_record(x: DualQuaternion) -> dict:
    v = x.canonical_vec()
    c = DualQuaternion.from_vector(v)
    return {"q": [float(e) for e in v[:4]], "t": [float(e) for e in c.translation]}


def pose_from_record(rec, tol: float = FILE_UNIT_TOL) -> DualQuaternion:
    try:
        q, t = rec["q"], rec["t"]
    except (KeyError, TypeError) as exc:
        raise DatasetFormatError(f"pose record needs 'q' and 't': {rec!r}") from exc
    if len(q) != 4 or len(t) != 3:
        raise DatasetFormatError("pose record needs a 4-element 'q' and a 3-element 't'")
    try:
        return dq_from_quat_translation(q, t, tol=tol)
    except ValueError as exc:
        raise DatasetFormatError(str(exc)) from exc


def dumps_dataset(pairs, ground_truth: DualQuaternion | None = None, config=None) -> str:
    header = {"format_version": FORMAT_VERSION}
    header["ground_truth"] = pose_record(ground_truth) if ground_truth is not None else None
    if isinstance(config, ScenarioConfig):
        config = config.to_dict()
    header["config"] = config
    lines = [_dump(header)]
    for p in pairs:
        lines.append(_dump({"a": pose_record(p.a), "b": pose_record(p.b), "w": float(p.weight)}))
    return "\n".join(lines) + "\n"


def write_dataset(path, data, ground_truth=None, config=None) -> None:
    """Write a :class:`Dataset` or a list of pairs."""
    if isinstance(data, Dataset):
        pairs, ground_truth, config = data.pairs, data.ground_truth, data.config
    else:
        pairs = data
    text = dumps_dataset(pairs, ground_truth, config)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def loads_dataset(text: str, tol: float = FILE_UNIT_TOL) -> Dataset:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DatasetFormatError("empty dataset file")
    try:
        records = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"invalid JSON: {exc}") from exc
    header = records[0]
    if not isinstance(header, dict) or header.get("format_version") != FORMAT_VERSION:
        raise DatasetFormatError("missing header or unsupported format_version")
    gt = header.get("ground_truth")
    ground_truth = pose_from_record(gt, tol) if gt is not None else None
    cfg = header.get("config")
    config = None
    if isinstance(cfg, dict):
        try:
            config = ScenarioConfig.from_dict(cfg)
        except (ValueError, TypeError, KeyError):
            config = None
    pairs = []
    for n, rec in enumerate(records[1:], start=2):
        if not isinstance(rec, dict) or "a" not in rec or "b" not in rec:
            raise DatasetFormatError(f"line {n}: pair record needs 'a' and 'b'")
        try:
            pairs.append(MotionPair(pose_from_record(rec["a"], tol), pose_from_record(rec["b"], tol),
                                    float(rec.get("w", 1.0))))
        except (ValueError, TypeError) as exc:
            raise DatasetFormatError(f"line {n}: {exc}") from exc
    return Dataset(pairs=pairs, ground_truth=ground_truth, config=config)


def read_dataset(path, tol: float = FILE_UNIT_TOL) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return loads_dataset(fh.read(), tol)
