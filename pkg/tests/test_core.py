import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spatialrank.core import (
    DiagScale,
    FixedPointConfig,
    as_sample,
    estimate_diag_scale,
    mc_bilinear_moment4,
    mc_quadform_moment2,
    pairwise_sign_block,
    spatial_rank,
    spatial_ranks,
    spatial_sign,
    sphere_bilinear_moment4,
    sphere_quadform_moment2,
)
from spatialrank.errors import ConvergenceError, DegenerateInputError, InvalidInputError

from _oracles import sign

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_sign_of_zero_is_zero():
    assert np.array_equal(spatial_sign(np.zeros(4)), np.zeros(4))


def test_sign_examples():
    assert np.allclose(spatial_sign([3.0, 4.0]), [0.6, 0.8])
    assert np.allclose(spatial_sign([-2.0]), [-1.0])


def test_sign_rejects_nan():
    with pytest.raises(InvalidInputError):
        spatial_sign([1.0, np.nan])


@given(arrays(float, st.integers(1, 12), elements=finite))
def test_sign_has_unit_norm_or_is_zero(v):
    u = spatial_sign(v)
    nrm = np.linalg.norm(u)
    if np.any(v != 0):
        assert abs(nrm - 1) < 1e-12
    else:
        assert nrm == 0


@given(arrays(float, st.integers(1, 8), elements=finite), st.floats(1e-3, 1e3))
def test_sign_is_scale_free(v, c):
    assert np.allclose(spatial_sign(c * v), spatial_sign(v), atol=1e-12)


def test_as_sample_shapes_and_errors():
    assert as_sample([1.0, 2.0, 3.0]).shape == (3, 1)
    with pytest.raises(InvalidInputError):
        as_sample(np.zeros((2, 2, 2)))
    with pytest.raises(InvalidInputError):
        as_sample([[1.0, np.inf], [0.0, 1.0]])
    with pytest.raises(InvalidInputError):
        as_sample([[1.0, 2.0]], min_rows=2)


def test_pairwise_block_matches_loop():
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
    scale = DiagScale(np.array([0.5, 1.0, 1.5]))
    g = pairwise_sign_block(a, b, scale)
    for i in range(4):
        for s in range(5):
            assert np.allclose(g[i, s], sign((a[i] - b[s]) / scale.sqrt_d))


def test_rank_one_dimension_counts():
    # sample {1,2,3}: rank of 1 is (0 - 1 - 1)/3
    x = np.array([[1.0], [2.0], [3.0]])
    assert np.allclose(spatial_ranks(x)[:, 0], [-2 / 3, 0.0, 2 / 3])
    assert np.allclose(spatial_rank(x, 2), [2 / 3])


def test_ranks_sum_to_zero():
    x = np.random.default_rng(0).standard_normal((9, 4))
    assert np.allclose(spatial_ranks(x).sum(axis=0), 0.0, atol=1e-12)


def test_rank_index_out_of_range():
    with pytest.raises(InvalidInputError):
        spatial_rank(np.ones((3, 2)) * np.arange(3)[:, None], 5)


def test_diag_scale_normalizes_and_validates():
    s = DiagScale(np.array([1.0, 3.0]))
    assert np.allclose(s.d, [0.5, 1.5]) and s.p == 2
    with pytest.raises(InvalidInputError):
        DiagScale(np.array([1.0, 0.0]))
    pooled = DiagScale.pooled(DiagScale(np.array([1.0, 1.0])), DiagScale(np.array([0.5, 1.5])), 1, 3)
    g = np.sqrt(0.75)
    raw = 0.25 + 0.75 * np.array([0.5, 1.5]) / g
    assert np.allclose(pooled.d, 2 * raw / raw.sum())


@given(arrays(float, 3, elements=st.floats(0.1, 10)), arrays(float, 3, elements=st.floats(0.1, 10)),
       arrays(float, 3, elements=st.floats(0.1, 10)))
def test_pooled_scale_is_equivariant(d1, d2, lam):
    a = DiagScale.pooled(DiagScale(d1), DiagScale(d2), 4, 7).d
    b = DiagScale.pooled(DiagScale(d1 * lam), DiagScale(d2 * lam), 4, 7).d
    expected = a * lam
    assert np.allclose(b, expected * (3 / expected.sum()), rtol=1e-9)


def test_fixed_point_config_validation():
    with pytest.raises(InvalidInputError):
        FixedPointConfig(tol=0)
    with pytest.raises(InvalidInputError):
        FixedPointConfig(max_iter=0)
    with pytest.raises(InvalidInputError):
        FixedPointConfig(init="median")


def test_scale_recursion_reaches_fixed_point():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((30, 6)) * np.array([1, 2, 3, 1, 5, 0.5])
    s = estimate_diag_scale(x)
    r = spatial_ranks(x, s)
    m = np.mean(r ** 2, axis=0)
    assert np.max(np.abs(m / m.mean() - 1)) < 1e-8
    assert abs(s.d.sum() - 6) < 1e-12
    # larger spread gets larger scale
    assert np.argmax(s.d) == 4 and np.argmin(s.d) == 5


def test_scale_recursion_init_does_not_matter():
    x = np.random.default_rng(2).standard_normal((25, 5)) * np.arange(1, 6)
    a = estimate_diag_scale(x, FixedPointConfig(init="variance"))
    b = estimate_diag_scale(x, FixedPointConfig(init="unit"))
    assert np.allclose(a.d, b.d, rtol=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), arrays(float, 4, elements=st.floats(0.1, 10)),
       arrays(float, 4, elements=st.floats(-5, 5)))
def test_scale_is_equivariant(seed, lam, shift):
    x = np.random.default_rng(seed).standard_normal((12, 4))
    a = estimate_diag_scale(x)
    b = estimate_diag_scale(x * lam + shift)
    expected = a.d * lam ** 2
    assert np.allclose(b.d, expected * (4 / expected.sum()), rtol=1e-6)


def test_scale_errors():
    with pytest.raises(DegenerateInputError):
        estimate_diag_scale(np.ones((2, 3)))
    x = np.random.default_rng(0).standard_normal((6, 3))
    x[:, 1] = 2.0
    with pytest.raises(DegenerateInputError):
        estimate_diag_scale(x)
    y = np.random.default_rng(0).standard_normal((10, 4)) * [1, 10, 100, 1000]
    with pytest.raises(ConvergenceError) as info:
        estimate_diag_scale(y, FixedPointConfig(max_iter=2))
    assert info.value.iterations == 2 and isinstance(info.value.last, DiagScale)


def test_scale_one_column_is_one():
    assert np.array_equal(estimate_diag_scale(np.arange(5.0)).d, [1.0])


# --- sphere moments ---

def test_sphere_moment_closed_forms_at_p2():
    assert sphere_quadform_moment2(np.eye(2)) == 1.0
    assert sphere_bilinear_moment4(np.eye(2)) == 3 / 8
    assert sphere_bilinear_moment4(np.diag([1.0, -1.0])) == 3 / 8


def test_sphere_moments_reject_asymmetric():
    with pytest.raises(InvalidInputError):
        sphere_quadform_moment2(np.array([[1.0, 2.0], [0.0, 1.0]]))


@pytest.mark.parametrize("p", [2, 3, 5])
def test_sphere_moments_match_monte_carlo(p):
    rng = np.random.default_rng(100 + p)
    a = rng.standard_normal((p, p))
    m = (a + a.T) / 2
    val, se = mc_quadform_moment2(m, 200_000, rng)
    assert abs(val - sphere_quadform_moment2(m)) < 4 * se
    val, se = mc_bilinear_moment4(m, 200_000, rng)
    assert abs(val - sphere_bilinear_moment4(m)) < 4 * se


def test_quadform_moment_identity_matrix_any_p():
    for p in (1, 3, 10):
        assert np.isclose(sphere_quadform_moment2(np.eye(p)), 1.0)
