import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from roful.linalg import (
    REFACTOR_EVERY,
    NotPositiveDefiniteError,
    RidgeState,
    cholesky_factor,
    mahalanobis_sq,
    posterior_update,
    sample_posterior,
)


def direct_state(actions, rewards, lam, sigma):
    """Batch ridge solution by explicit inversion."""
    d = actions.shape[1]
    precision = np.eye(d) / lam + actions.T @ actions / sigma**2
    cov = np.linalg.inv(precision)
    return precision, cov, cov @ (actions.T @ rewards) / sigma**2


def state_with_cov(cov):
    cov = np.asarray(cov, dtype=float)
    d = cov.shape[0]
    return RidgeState(d, 1.0, 1.0, np.linalg.inv(cov), cov, np.zeros(d))


# -- cholesky ------------------------------------------------------------------

def test_cholesky_identity():
    np.testing.assert_array_equal(cholesky_factor(np.eye(3)), np.eye(3))


def test_cholesky_diagonal():
    np.testing.assert_allclose(cholesky_factor(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_cholesky_two_by_two_by_hand():
    # l11 = sqrt(2), l21 = 1/sqrt(2), l22 = sqrt(2 - 1/2)
    expected = np.array([[math.sqrt(2), 0.0], [1 / math.sqrt(2), math.sqrt(1.5)]])
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    L = cholesky_factor(m)
    np.testing.assert_allclose(L, expected, atol=1e-15)
    assert np.abs(L @ L.T - m).max() <= 1e-9


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_rejects_asymmetric():
    with pytest.raises(ValueError):
        cholesky_factor(np.array([[2.0, 1.0], [0.0, 2.0]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31))
def test_cholesky_reconstructs(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    m = a @ a.T + 0.1 * np.eye(d)
    L = cholesky_factor(m)
    assert np.allclose(L, np.tril(L))
    assert np.abs(L @ L.T - m).max() <= 1e-9


# -- mahalanobis ---------------------------------------------------------------

def test_mahalanobis_identity():
    assert mahalanobis_sq(RidgeState.fresh(2), [3.0, 4.0]) == pytest.approx(25.0)


def test_mahalanobis_zero():
    assert mahalanobis_sq(RidgeState.fresh(4), np.zeros(4)) == 0.0


def test_mahalanobis_diagonal():
    assert mahalanobis_sq(state_with_cov(np.diag([2.0, 0.5])), [1.0, 1.0]) == pytest.approx(2.5)


def test_mahalanobis_dimension_mismatch():
    with pytest.raises(ValueError):
        mahalanobis_sq(RidgeState.fresh(3), [1.0, 2.0])


# -- fresh state and updates ---------------------------------------------------

def test_fresh_state():
    s = RidgeState.fresh(3, lam=2.0, sigma=0.5)
    np.testing.assert_array_equal(s.inv_cov, np.eye(3) / 2.0)
    np.testing.assert_array_equal(s.theta_hat, np.zeros(3))
    assert s.count == 0
    assert np.abs(s.inv_cov @ s.cov - np.eye(3)).max() <= 1e-8


def test_update_by_hand():
    s = posterior_update(RidgeState.fresh(2, 1.0, 1.0), [1.0, 0.0], 1.0)
    np.testing.assert_allclose(s.inv_cov, np.diag([2.0, 1.0]))
    np.testing.assert_allclose(s.cov, np.diag([0.5, 1.0]))
    np.testing.assert_allclose(s.theta_hat, [0.5, 0.0])
    assert s.count == 1


def test_update_does_not_mutate_input():
    s = RidgeState.fresh(2)
    posterior_update(s, [1.0, 2.0], 3.0)
    np.testing.assert_array_equal(s.cov, np.eye(2))
    assert s.count == 0


def test_update_in_place():
    s = RidgeState.fresh(2)
    out = posterior_update(s, [1.0, 2.0], 3.0, in_place=True)
    assert out is s and s.count == 1


def test_zero_reward_keeps_zero_estimate():
    s = posterior_update(RidgeState.fresh(3), [0.0, 2.0, 0.0], 0.0)
    np.testing.assert_array_equal(s.theta_hat, np.zeros(3))
    np.testing.assert_allclose(np.diag(s.cov), [1.0, 0.2, 1.0])


def test_update_dimension_mismatch():
    with pytest.raises(ValueError):
        posterior_update(RidgeState.fresh(3), [1.0], 1.0)


def test_fifty_updates_match_direct_inverse():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((50, 8))
    r = rng.standard_normal(50)
    s = RidgeState.fresh(8, 1.3, 0.7)
    for a, y in zip(X, r):
        s = posterior_update(s, a, y)
    prec, cov, theta = direct_state(X, r, 1.3, 0.7)
    assert np.abs(s.cov - cov).max() <= 1e-8
    assert np.abs(s.inv_cov - prec).max() <= 1e-8
    assert np.abs(s.theta_hat - theta).max() <= 1e-8


def test_refactor_cadence_keeps_equivalence():
    rng = np.random.default_rng(3)
    n = REFACTOR_EVERY + 40
    X = rng.standard_normal((n, 5))
    r = rng.standard_normal(n)
    s = RidgeState.fresh(5)
    for a, y in zip(X, r):
        posterior_update(s, a, y, in_place=True)
    _, cov, theta = direct_state(X, r, 1.0, 1.0)
    assert np.abs(s.cov - cov).max() <= 1e-8
    assert np.abs(s.theta_hat - theta).max() <= 1e-8


def test_covariance_stays_exactly_symmetric():
    rng = np.random.default_rng(11)
    s = RidgeState.fresh(17)
    for _ in range(600):
        posterior_update(s, rng.standard_normal(17), rng.standard_normal(), in_place=True)
        assert np.array_equal(s.cov, s.cov.T)
    np.linalg.cholesky(s.cov)


@settings(max_examples=40, deadline=None)
@given(
    d=st.integers(1, 20),
    length=st.integers(0, 200),
    lam=st.floats(0.1, 10),
    sigma=st.floats(0.3, 3),
    seed=st.integers(0, 2**31),
)
def test_incremental_equals_direct(d, length, lam, sigma, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((length, d))
    r = rng.standard_normal(length) * 2
    s = RidgeState.fresh(d, lam, sigma)
    for a, y in zip(X, r):
        posterior_update(s, a, y, in_place=True)
    _, cov, theta = direct_state(X, r, lam, sigma)
    assert np.abs(s.cov - cov).max() <= 1e-8
    assert np.abs(s.theta_hat - theta).max() <= 1e-8
    assert np.abs(s.inv_cov @ s.cov - np.eye(d)).max() <= 1e-8


@settings(max_examples=30, deadline=None)
@given(d=st.integers(1, 10), seed=st.integers(0, 2**31))
def test_quadratic_form_never_grows(d, seed):
    rng = np.random.default_rng(seed)
    probes = rng.standard_normal((5, d))
    s = RidgeState.fresh(d)
    before = [mahalanobis_sq(s, p) for p in probes]
    for _ in range(30):
        posterior_update(s, rng.standard_normal(d) * 3, rng.standard_normal(), in_place=True)
        after = [mahalanobis_sq(s, p) for p in probes]
        assert all(b2 <= b1 + 1e-12 for b1, b2 in zip(before, after))
        before = after


# -- sampling ------------------------------------------------------------------

def test_sample_zero_inflation_is_mean():
    s = posterior_update(RidgeState.fresh(3), [1.0, 2.0, 0.5], 2.0)
    np.testing.assert_array_equal(sample_posterior(s, 0.0, np.random.default_rng(0)), s.theta_hat)


def test_sample_rejects_negative_inflation():
    with pytest.raises(ValueError):
        sample_posterior(RidgeState.fresh(2), -1.0, np.random.default_rng(0))


def test_sample_standard_moments():
    draws = sample_posterior(RidgeState.fresh(3), 1.0, np.random.default_rng(1), size=100_000)
    assert np.abs(draws.mean(axis=0)).max() < 0.02
    assert np.abs(draws.var(axis=0) - 1.0).max() < 0.05


def test_sample_inflated_variance():
    s = state_with_cov(np.diag([4.0, 1.0]))
    draws = sample_posterior(s, 2.0, np.random.default_rng(2), size=100_000)
    assert abs(draws[:, 0].var() / 16.0 - 1.0) < 0.05


def test_single_draws_match_batch_distribution():
    rng = np.random.default_rng(5)
    s = RidgeState.fresh(4)
    for _ in range(10):
        posterior_update(s, rng.standard_normal(4), rng.standard_normal(), in_place=True)
    a = np.array([1.0, -0.5, 0.3, 2.0])
    proj = np.array([sample_posterior(s, 1.5, rng) @ a for _ in range(5000)])
    scale = 1.5 * math.sqrt(mahalanobis_sq(s, a))
    res = stats.kstest((proj - s.theta_hat @ a) / scale, "norm")
    assert res.pvalue > 0.01
