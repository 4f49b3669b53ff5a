import math

import numpy as np
import pytest
from hypothesis import strategies as st

from dqhandeye.dq import DualQuaternion, dq_from_quat_translation

# -- shared strategies -----------------------------------------------------

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)


@st.composite
def unit_quats(draw):
    v = np.array(draw(st.tuples(*[st.floats(-1.0, 1.0, allow_nan=False)] * 4)))
    n = np.linalg.norm(v)
    if n < 1e-3:
        v, n = np.array([1.0, 0.0, 0.0, 0.0]), 1.0
    return v / n


@st.composite
def unit_dqs(draw, max_t=5.0):
    q = draw(unit_quats())
    t = np.array(draw(st.tuples(*[st.floats(-max_t, max_t, allow_nan=False)] * 3)))
    return dq_from_quat_translation(q, t)


@st.composite
def unit_axes(draw):
    v = np.array(draw(st.tuples(*[st.floats(-1.0, 1.0, allow_nan=False)] * 3)))
    n = np.linalg.norm(v)
    if n < 1e-3:
        return np.array([0.0, 0.0, 1.0])
    return v / n


def random_unit_quat(rng, size=None):
    shape = (4,) if size is None else (size, 4)
    q = rng.standard_normal(shape)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def random_dq(rng, max_t=2.0) -> DualQuaternion:
    return dq_from_quat_translation(random_unit_quat(rng), rng.uniform(-max_t, max_t, 3))


def homogeneous(x: DualQuaternion) -> np.ndarray:
    """4x4 matrix of a unit DQ, via scipy's independent rotation code."""
    from scipy.spatial.transform import Rotation

    s, v = x.real[0], x.real[1:]
    m = np.eye(4)
    m[:3, :3] = Rotation.from_quat([v[0], v[1], v[2], s]).as_matrix()  # scipy is scalar-last
    m[:3, 3] = x.translation
    return m


def same_transform(x, y, tol):
    a, b = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return min(np.max(np.abs(a - b)), np.max(np.abs(a + b))) <= tol


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ----------------------------------------------------

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_ac"):
        return
    crit = name[len("test_"):].split("_")[0].upper()
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        ok = report.outcome == "passed" and not hasattr(report, "wasxfail")
        detail = dict(report.user_properties).get("detail", "")
        prev = _ACCEPTANCE.get(crit)
        lines = (prev[1] + "; " if prev and prev[1] else "") + detail
        _ACCEPTANCE[crit] = ((prev[0] if prev else True) and ok, lines)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE, key=lambda c: int(c[2:])):
        ok, detail = _ACCEPTANCE[crit]
        terminalreporter.write_line(f"{crit} {'PASS' if ok else 'FAIL'}  {detail}")


def isclose_rel(a, b, rel):
    return abs(a - b) <= rel * max(abs(a), abs(b), math.ulp(1.0))
