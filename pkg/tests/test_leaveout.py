import numpy as np
import pytest

from spatialrank.core import FixedPointConfig, estimate_diag_scale
from spatialrank.errors import InvalidInputError
from spatialrank.leaveout import leave_out_scales, subsets

from _oracles import onestep_without, refit_without


def test_subsets_order_and_count():
    s = subsets(5, 2)
    assert s.shape == (10, 2)
    assert s[0].tolist() == [0, 1] and s[-1].tolist() == [3, 4]
    assert subsets(7, 4).shape == (35, 4)


@pytest.mark.parametrize("k", [2, 4])
def test_onestep_matches_reduced_sample_step(k):
    x = np.random.default_rng(5).standard_normal((8, 5)) * [1, 2, 0.5, 3, 1]
    full = estimate_diag_scale(x)
    subs, d = leave_out_scales(x, k, "onestep", full=full)
    for q in (0, 7, len(subs) - 1):
        assert np.allclose(d[q], onestep_without(x, subs[q], full.d), rtol=1e-10)


def test_refit_matches_reduced_fit():
    cfg = FixedPointConfig(tol=1e-10)
    x = np.random.default_rng(6).standard_normal((7, 3)) * [1, 4, 2]
    subs, d = leave_out_scales(x, 2, "refit", cfg)
    for q in range(len(subs)):
        assert np.allclose(d[q], refit_without(x, subs[q], cfg), rtol=1e-12)


def test_onestep_is_close_to_refit():
    cfg = FixedPointConfig(tol=1e-10)
    x = np.random.default_rng(7).standard_normal((15, 6)) * np.linspace(1, 3, 6)
    full = estimate_diag_scale(x, cfg)
    _, fast = leave_out_scales(x, 2, "onestep", cfg, full=full)
    _, exact = leave_out_scales(x, 2, "refit", cfg)
    moved = np.abs(exact - full.d).max()
    assert np.abs(fast - exact).max() < 0.2 * moved


def test_scales_sum_to_p():
    x = np.random.default_rng(8).standard_normal((9, 4))
    for method in ("onestep", "refit"):
        _, d = leave_out_scales(x, 4, method)
        assert np.allclose(d.sum(axis=1), 4)


def test_leave_out_errors():
    x = np.random.default_rng(0).standard_normal((5, 2))
    with pytest.raises(InvalidInputError, match="n >= 7"):
        leave_out_scales(x, 4)
    with pytest.raises(InvalidInputError):
        leave_out_scales(x, 2, "median")


def test_one_column_is_trivial():
    _, d = leave_out_scales(np.arange(8.0)[:, None], 2)
    assert np.array_equal(d, np.ones((28, 1)))
