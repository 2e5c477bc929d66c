import numpy as np
import pytest

from vidplan.forcing import ForcingPlan, noised_batch, plan_to_grid, sample_forcing_plan
from vidplan.schedule import interpolate_noise


def test_clean_frequency_and_support():
    rng = np.random.default_rng(0)
    plans = [sample_forcing_plan(rng, 13) for _ in range(10_000)]
    clean = np.mean([p.clean_history for p in plans])
    assert 0.48 <= clean <= 0.52
    assert {p.history_len for p in plans} == set(range(7))
    counts = np.bincount([p.history_len for p in plans])
    assert counts.min() > 10_000 / 7 * 0.9


def test_short_clip_caps_history():
    rng = np.random.default_rng(1)
    assert {sample_forcing_plan(rng, 3).history_len for _ in range(500)} == {0, 1, 2}
    assert {sample_forcing_plan(rng, 1).history_len for _ in range(50)} == {0}


def test_deterministic():
    a = [sample_forcing_plan(np.random.default_rng(5), 13) for _ in range(3)]
    b = [sample_forcing_plan(np.random.default_rng(5), 13) for _ in range(3)]
    assert a == b


def test_clean_plans_have_zero_history_level():
    rng = np.random.default_rng(2)
    for _ in range(200):
        p = sample_forcing_plan(rng, 13)
        if p.clean_history:
            assert p.k_hist == 0.0


def test_grids():
    np.testing.assert_array_equal(plan_to_grid(ForcingPlan(0, 0.2, 0.7, False), 4), [0.7] * 4)
    np.testing.assert_array_equal(plan_to_grid(ForcingPlan(1, 0.0, 0.4, True), 3), [0, 0.4, 0.4])
    np.testing.assert_array_equal(plan_to_grid(ForcingPlan(6, 0.3, 0.9, False), 13),
                                  [0.3] * 6 + [0.9] * 7)


def test_grid_too_long_history():
    with pytest.raises(ValueError):
        plan_to_grid(ForcingPlan(5, 0.1, 0.2, False), 3)


def test_invalid_plans():
    with pytest.raises(ValueError):
        ForcingPlan(-1, 0.0, 0.5, False)
    with pytest.raises(ValueError):
        ForcingPlan(1, 0.3, 0.5, True)
    with pytest.raises(ValueError):
        ForcingPlan(1, 0.3, 1.5, False)


def test_noised_batch_clean_first_frame():
    rng = np.random.default_rng(3)
    z0, eps = rng.standard_normal((2, 5, 3, 2, 2))
    zn, grid = noised_batch(z0, eps, ForcingPlan(1, 0.0, 0.6, True))
    np.testing.assert_array_equal(zn[0], z0[0])


def test_equal_levels_collapse_to_uniform():
    rng = np.random.default_rng(4)
    z0, eps = rng.standard_normal((2, 5, 3))
    zn, _ = noised_batch(z0, eps, ForcingPlan(2, 0.4, 0.4, False))
    np.testing.assert_array_equal(zn, interpolate_noise(z0, eps, 0.4))


def test_noised_batch_matches_per_frame_oracle():
    rng = np.random.default_rng(5)
    z0, eps = rng.standard_normal((2, 13, 4, 2, 2))
    plan = sample_forcing_plan(rng, 13)
    zn, grid = noised_batch(z0, eps, plan)
    for f in range(13):
        np.testing.assert_array_equal(zn[f], interpolate_noise(z0[f], eps[f], grid[f]))
