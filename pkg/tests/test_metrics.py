"""Transport distances, trajectory statistics, and order fitting."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

import smallmass as sm


def test_w2_1d_two_point_example():
    a = np.array([-1.0, 1.0])
    b = np.array([0.0, 0.0])
    assert sm.w2_1d_exact(a, b) == 1.0


def test_w2_1d_translation_and_identity():
    rng = np.random.default_rng(2)
    a = rng.normal(0.0, 1.0, size=50)
    assert sm.w2_1d_exact(a, a) == 0.0
    assert sm.w2_1d_exact(a, a + 0.7) == pytest.approx(0.7, rel=1e-12)
    assert sm.w2_1d_exact(a, a - 1.3) == pytest.approx(1.3, rel=1e-12)


def test_w2_1d_requires_equal_sizes():
    with pytest.raises(sm.ConfigError) as err:
        sm.w2_1d_exact(np.zeros(4), np.zeros(5))
    assert "subsample" in str(err.value)


def test_matching_oracle_agrees_with_the_1d_formula():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        a = rng.normal(0.0, 2.0, size=n)
        b = rng.normal(0.5, 1.0, size=n)
        assert abs(sm.w2_matching_oracle(a, b) - sm.w2_1d_exact(a, b)) < 1e-12


def test_matching_oracle_agrees_with_hungarian_assignment():
    rng = np.random.default_rng(8)
    for d in (1, 2, 3):
        for _ in range(20):
            n = int(rng.integers(1, 9))
            a = rng.normal(0.0, 1.0, size=(n, d))
            b = rng.normal(0.3, 1.2, size=(n, d))
            cost = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
            rows, cols = linear_sum_assignment(cost)
            hungarian = math.sqrt(cost[rows, cols].mean())
            assert abs(sm.w2_matching_oracle(a, b) - hungarian) < 1e-12


def test_matching_oracle_is_permutation_invariant():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(6, 2))
    b = rng.normal(size=(6, 2))
    base = sm.w2_matching_oracle(a, b)
    for _ in range(5):
        pa, pb = rng.permutation(6), rng.permutation(6)
        assert abs(sm.w2_matching_oracle(a[pa], b[pb]) - base) < 1e-12


def test_matching_oracle_refuses_large_clouds():
    with pytest.raises(sm.ConfigError):
        sm.w2_matching_oracle(np.zeros((11, 1)), np.zeros((11, 1)))


@settings(max_examples=60, deadline=None)
@given(data=st.data(), n=st.integers(min_value=1, max_value=5))
def test_metric_axioms_on_random_triples(data, n):
    coords = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
    cloud = st.lists(coords, min_size=n, max_size=n).map(lambda v: np.asarray(v))
    a, b, c = data.draw(cloud), data.draw(cloud), data.draw(cloud)
    dab = sm.w2_matching_oracle(a, b)
    dba = sm.w2_matching_oracle(b, a)
    dac = sm.w2_matching_oracle(a, c)
    dcb = sm.w2_matching_oracle(c, b)
    assert abs(dab - dba) < 1e-12
    assert sm.w2_matching_oracle(a, a) == 0.0
    assert dab <= dac + dcb + 1e-9


def test_w2_scale_equivariance():
    rng = np.random.default_rng(10)
    a = rng.normal(size=(7, 2))
    b = rng.normal(size=(7, 2))
    base = sm.w2_matching_oracle(a, b)
    for s in (0.01, 3.0, 250.0):
        assert sm.w2_matching_oracle(s * a, s * b) == pytest.approx(s * base, rel=1e-12)
    x = rng.normal(size=30)
    y = rng.normal(size=30)
    assert sm.w2_1d_exact(2.5 * x, 2.5 * y) == pytest.approx(
        2.5 * sm.w2_1d_exact(x, y), rel=1e-12
    )


def test_sliced_w2_needs_at_least_two_dimensions():
    with pytest.raises(sm.ConfigError):
        sm.sliced_w2(np.zeros((5, 1)), np.zeros((5, 1)))


def test_sliced_w2_determinism_and_bounds():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(8, 2))
    b = rng.normal(0.4, 1.0, size=(8, 2))
    s1 = sm.sliced_w2(a, b, n_projections=128, seed=5)
    s2 = sm.sliced_w2(a, b, n_projections=128, seed=5)
    s3 = sm.sliced_w2(a, b, n_projections=128, seed=np.random.default_rng(5))
    assert s1 == s2 == s3
    assert sm.sliced_w2(a, a, n_projections=32, seed=0) == 0.0
    # every projection contracts transport cost, so the sliced value
    # cannot exceed the exact matching distance
    assert s1 <= sm.w2_matching_oracle(a, b) + 1e-12


def test_second_moment_sup_hand_example():
    traj = np.array(
        [
            [[0.0], [1.0], [-2.0]],
            [[2.0], [0.0], [1.0]],
        ]
    )
    # per-particle running maxima of |x|^2 are 4, 1, 4; their mean is 3
    assert sm.second_moment_sup(traj) == pytest.approx(3.0)


def test_second_moment_sup_uses_the_norm_in_two_dimensions():
    traj = np.array([[[3.0, 4.0]]])  # one time, one particle
    assert sm.second_moment_sup(traj) == pytest.approx(25.0)


def test_holder_curve_quadratic_for_ballistic_motion():
    dt = 0.05
    times = np.arange(21) * dt
    speeds = np.array([0.5, -1.0, 2.0])
    traj = (speeds[None, :] * times[:, None])[:, :, None]  # (n_times, 3, 1)
    lags = (0.05, 0.1, 0.2, 0.4)
    lags_out, msd = sm.holder_curve(traj, dt, lags)
    assert np.array_equal(lags_out, np.asarray(lags))
    expected = np.mean(speeds**2) * np.asarray(lags) ** 2
    assert np.allclose(msd, expected, rtol=1e-12)
    fit = sm.order_fit(lags_out, msd)
    assert fit.slope == pytest.approx(2.0, abs=1e-9)


def test_holder_curve_validates_lags():
    traj = np.zeros((6, 2, 1))
    with pytest.raises(sm.ConfigError):
        sm.holder_curve(traj, 0.1, (0.15,))  # not a multiple of the spacing
    with pytest.raises(sm.ConfigError):
        sm.holder_curve(traj, 0.1, (0.7,))  # beyond the horizon
    with pytest.raises(sm.ConfigError):
        sm.holder_curve(traj, 0.1, (0.0,))


def test_holder_curve_brownian_slope_is_near_one():
    rng = np.random.default_rng(12)
    dt = 0.01
    n_steps, n_particles = 400, 400
    incr = rng.normal(0.0, math.sqrt(dt), size=(n_steps, n_particles, 1))
    traj = np.concatenate([np.zeros((1, n_particles, 1)), np.cumsum(incr, axis=0)])
    lags_out, msd = sm.holder_curve(traj, dt, (0.05, 0.1, 0.2, 0.4))
    fit = sm.order_fit(lags_out, msd)
    assert abs(fit.slope - 1.0) < 0.15


def test_order_fit_recovers_a_power_law():
    h = np.array([0.1, 0.2, 0.4])
    err = 3.0 * h**2
    fit = sm.order_fit(h, err)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert math.exp(fit.intercept) == pytest.approx(3.0, abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_order_fit_input_validation():
    with pytest.raises(sm.ConfigError):
        sm.order_fit(np.array([0.1, 0.2]), np.array([1.0, 2.0]))
    with pytest.raises(sm.ConfigError):
        sm.order_fit(np.array([0.1, 0.2, 0.3]), np.array([1.0, -2.0, 3.0]))
    with pytest.raises(sm.ConfigError):
        sm.order_fit(np.array([0.0, 0.2, 0.3]), np.array([1.0, 2.0, 3.0]))


def test_order_fit_constant_errors_have_slope_zero():
    h = np.array([0.1, 0.2, 0.4])
    fit = sm.order_fit(h, np.full(3, 0.37))
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == 1.0  # zero total variance counts as a perfect fit
