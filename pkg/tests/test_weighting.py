import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy import testing

from dqhandeye.dq import DualQuaternion, dq_from_rotation, dq_from_translation
from dqhandeye.problem import CostMatrix, MotionPair, build_cost
from dqhandeye.sensitivity import estimate_sensitivity
from dqhandeye.synthgen import ScenarioConfig, generate
from dqhandeye.weighting import (
    DensityAccumulator,
    WeightingParams,
    auto_weighted_calibrate,
    axis_distance,
    blend_gamma,
    combined_cost,
    densities,
    density_values,
    kernel,
    rotation_weights,
    split_by_rotation,
    weighted_cost,
    weighted_pairs,
)

from conftest import unit_axes


@pytest.fixture(scope="module")
def noiseless():
    return generate(ScenarioConfig(n_uneven=400, n_even=60, seed=21))


@pytest.fixture(scope="module")
def planar_noisy():
    return generate(ScenarioConfig(n_uneven=3000, n_even=100, sigma_r=0.02, sigma_t=0.1, seed=22))


def test_kernel_values():
    assert kernel(0.0, 0.2) == 1.0
    assert kernel(0.2, 0.2) == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert kernel(-0.4, 0.2) == pytest.approx(math.exp(-2.0), rel=1e-15)
    assert kernel(math.pi / 2, 0.2) < 1e-13
    with pytest.raises(ValueError):
        kernel(0.1, 0.0)


def test_axis_distance():
    z = np.array([0.0, 0, 1])
    assert axis_distance(z, z) == 0.0
    assert axis_distance(z, -z) == pytest.approx(0.0, abs=1e-15)
    assert axis_distance(z, [1.0, 0, 0]) == pytest.approx(math.pi / 2)
    s = math.sqrt(0.5)
    assert axis_distance(z, [0, s, -s]) == pytest.approx(math.pi / 4)


@settings(max_examples=300, deadline=None)
@given(unit_axes(), unit_axes())
def test_axis_distance_range_and_symmetry(a, b):
    d = axis_distance(a, b)
    assert 0.0 <= d <= math.pi / 2 + 1e-15
    assert d == axis_distance(b, a)
    assert d == pytest.approx(axis_distance(a, -b), abs=1e-7)


def test_density_examples():
    z = np.array([[0.0, 0, 1]])
    testing.assert_array_equal(density_values(z), [1.0])
    testing.assert_array_equal(density_values(np.repeat(z, 7, axis=0)), np.full(7, 7.0))
    testing.assert_array_equal(density_values(np.vstack([z, -z])), [2.0, 2.0])
    ortho = density_values([[1.0, 0, 0], [0, 0, 1.0]])
    expect = 1.0 + math.exp(-(math.pi / 2) ** 2 / (2 * 0.2**2))
    testing.assert_allclose(ortho, [expect, expect], rtol=1e-15)
    assert ortho[0] - 1.0 == pytest.approx(4.3e-14, rel=0.05)


def test_density_block_independent(rng):
    axes = rng.standard_normal((300, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    testing.assert_array_equal(density_values(axes, block=7), density_values(axes, block=1024))


def test_density_naive_oracle(rng):
    axes = rng.standard_normal((60, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    ref = []
    for i in range(60):
        s = 1.0
        for j in range(60):
            if i != j:
                ang = math.acos(min(1.0, abs(float(axes[i] @ axes[j]))))
                s += math.exp(-ang * ang / (2 * 0.3**2))
        ref.append(s)
    testing.assert_allclose(density_values(axes, d_r=0.3), ref, rtol=1e-12)


def test_accumulator_matches_batch(rng):
    axes = rng.standard_normal((500, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    acc = DensityAccumulator()
    for a in axes:
        acc.add(a)
    assert len(acc) == 500
    batch = density_values(axes)
    assert np.max(np.abs(acc.densities - batch) / batch) <= 1e-12
    testing.assert_allclose(acc.weights, 1.0 / np.sqrt(batch), rtol=1e-12)


def test_blend_gamma():
    assert blend_gamma(15.0) == 0.5
    assert blend_gamma(1.0) == pytest.approx(0.0573, abs=1e-4)
    assert blend_gamma(40.0) == pytest.approx(0.9933, abs=1e-4)
    assert blend_gamma(1e6) == 1.0
    assert blend_gamma(-1e6) == 0.0
    cs = np.linspace(1, 60, 50)
    assert np.all(np.diff([blend_gamma(c) for c in cs]) > 0)


def test_combined_cost(rng):
    a, b = rng.standard_normal((2, 8, 8))
    q, q_w = CostMatrix(a @ a.T), CostMatrix(b @ b.T)
    testing.assert_array_equal(combined_cost(q, q_w, 0.0).q, q.q)
    testing.assert_array_equal(combined_cost(q, q_w, 1.0).q, q_w.q)
    testing.assert_allclose(combined_cost(q, q_w, 0.25).q, 0.75 * q.q + 0.25 * q_w.q, rtol=1e-15)
    with pytest.raises(ValueError):
        combined_cost(q, q_w, 1.5)


def test_split_by_rotation():
    ident = DualQuaternion.identity()
    pairs = [
        MotionPair(dq_from_translation([1.0, 0, 0]), dq_from_translation([1.0, 0, 0])),
        MotionPair(dq_from_rotation(0.3, [0, 0, 1.0]), ident),
        MotionPair(dq_from_rotation(math.radians(0.05), [0, 1.0, 0]), ident),
    ]
    s = split_by_rotation(pairs)
    assert (s.n_nr, s.n_r) == (2, 1)
    testing.assert_array_equal(s.rotation_index, [1])
    testing.assert_allclose(s.axes, [[0, 0, 1.0]], atol=1e-15)
    assert split_by_rotation(pairs, source="b").n_r == 0
    with pytest.raises(ValueError):
        split_by_rotation(pairs, source="c")


def test_sources_agree_on_noiseless(noiseless):
    sa = split_by_rotation(noiseless.pairs, "a")
    sb = split_by_rotation(noiseless.pairs, "b")
    testing.assert_array_equal(sa.rotation_index, sb.rotation_index)
    testing.assert_allclose(densities(sa).densities, densities(sb).densities, rtol=1e-9)


def test_weights_sum_to_rotation_count(planar_noisy):
    s = split_by_rotation(planar_noisy.pairs)
    w = rotation_weights(densities(s))
    assert math.fsum(w) == pytest.approx(s.n_r, rel=1e-12)
    wp = weighted_pairs(s, densities(s))
    assert len(wp) == len(planar_noisy.pairs)
    for i in s.no_rotation_index:
        assert wp[i].weight == 1.0


def test_uniform_axes_give_unweighted_cost(rng):
    # every axis appears equally often: all densities equal, all weights 1
    axes = [[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]]
    pairs = []
    for k in range(30):
        m = dq_from_rotation(0.2 + 0.01 * k, axes[k % 3]) * dq_from_translation(rng.standard_normal(3))
        pairs.append(MotionPair(m, m))
    s = split_by_rotation(pairs)
    testing.assert_allclose(rotation_weights(densities(s)), 1.0, rtol=1e-14)
    testing.assert_allclose(weighted_cost(s, densities(s)).q, build_cost(pairs).q, rtol=1e-12, atol=1e-13)


def test_weighting_lowers_condition(planar_noisy):
    aw = auto_weighted_calibrate(planar_noisy.pairs)
    c_q = aw.sensitivity.c_t
    c_g = estimate_sensitivity(aw.q_gamma, aw.unweighted.x).c_t
    assert c_g <= c_q
    assert aw.gamma == blend_gamma(c_q)


def test_pipeline_noiseless_keeps_solution(noiseless):
    aw = auto_weighted_calibrate(noiseless.pairs)
    res, rep, dens = aw
    assert aw.gamma < 0.2
    x, y = res.x.vec(), aw.unweighted.x.vec()
    assert min(np.linalg.norm(x - y), np.linalg.norm(x + y)) < 1e-8
    assert len(dens.densities) == split_by_rotation(noiseless.pairs).n_r


def test_pipeline_rejects_empty():
    with pytest.raises(ValueError):
        auto_weighted_calibrate([])


def test_params_are_used(planar_noisy):
    p = WeightingParams(c_gamma=1e6)
    aw = auto_weighted_calibrate(planar_noisy.pairs, p)
    assert aw.gamma == 0.0
    testing.assert_array_equal(aw.q_gamma.q, aw.q.q)


@settings(max_examples=100, deadline=None)
@given(st.lists(unit_axes(), min_size=1, max_size=30), st.floats(0.05, 1.0))
def test_density_bounds(axes, d_r):
    rho = density_values(np.array(axes), d_r)
    assert np.all(rho >= 1.0)
    assert np.all(rho <= len(axes) + 1e-12)


def test_density_permutation_invariant(rng):
    axes = rng.standard_normal((200, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    perm = rng.permutation(200)
    testing.assert_allclose(density_values(axes[perm]), density_values(axes)[perm], rtol=1e-14)


def test_weight_bounds(planar_noisy):
    s = split_by_rotation(planar_noisy.pairs)
    dens = densities(s)
    assert np.all((dens.weights_rho > 0) & (dens.weights_rho <= 1.0))
    w = rotation_weights(dens)
    assert np.all((w > 0) & (w <= s.n_r))


def test_density_weighted_cost_lowers_condition(planar_noisy):
    aw = auto_weighted_calibrate(planar_noisy.pairs)
    x = aw.unweighted.x
    assert estimate_sensitivity(aw.q_w, x).c_t < estimate_sensitivity(aw.q, x).c_t
