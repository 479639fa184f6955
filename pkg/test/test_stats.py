from math import lgamma, log, pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from guidedsl.stats import (EIGEN_FLOOR, JointMoments, estimate_moments,
                            gaussian_conditional, gaussian_logpdf,
                            ghurye_olkin_logdensity, repair_spd,
                            shrink_covariance)
from guidedsl.utils import (DegenerateCovarianceError, InvalidInputError)

from conftest import random_spd


def two_pass(x):
    x = np.asarray(x, dtype=float)
    m, d = x.shape
    mu = [sum(x[i, j] for i in range(m)) / m for j in range(d)]
    cov = np.empty((d, d))
    for a in range(d):
        for b in range(d):
            cov[a, b] = sum((x[i, a] - mu[a]) * (x[i, b] - mu[b])
                            for i in range(m)) / (m - 1)
    return np.array(mu), cov


moments_testcases = [
    ([[0.0], [2.0]], [1.0], [[2.0]]),
    ([[1.0, 2.0]] * 4, [1.0, 2.0], [[0.0, 0.0], [0.0, 0.0]]),
    ([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [2 / 3, 2 / 3],
     [[1 / 3, -1 / 6], [-1 / 6, 1 / 3]]),
]


@pytest.mark.parametrize('rows, mu, sigma', moments_testcases)
def test_estimate_moments(rows, mu, sigma):
    mu_hat, sigma_hat = estimate_moments(rows)
    np.testing.assert_allclose(mu_hat, mu, atol=1e-14)
    np.testing.assert_allclose(sigma_hat, sigma, atol=1e-14)
    assert np.array_equal(sigma_hat, sigma_hat.T)


@pytest.mark.parametrize('seed', range(100))
def test_estimate_moments_two_pass(seed):
    rng = np.random.default_rng(seed)
    m, d = rng.integers(2, 20), rng.integers(1, 6)
    x = rng.normal(size=(m, d)) * rng.uniform(0.1, 10, size=d)
    mu_hat, sigma_hat = estimate_moments(x)
    mu, sigma = two_pass(x)
    np.testing.assert_allclose(mu_hat, mu, rtol=0, atol=1e-10)
    np.testing.assert_allclose(sigma_hat, sigma, rtol=0, atol=1e-10)


@pytest.mark.parametrize('rows', [[[1.0, 2.0]], [[1.0], [np.nan]],
                                  [[1.0], [np.inf]]])
def test_estimate_moments_invalid(rows):
    with pytest.raises(InvalidInputError):
        estimate_moments(rows)


def test_repair_identity_untouched():
    out, repaired = repair_spd(np.eye(3))
    assert not repaired
    assert np.array_equal(out, np.eye(3))


repair_testcases = [
    ([[1.0, 0.0], [0.0, -0.1]], [EIGEN_FLOOR, 1.0]),
    ([[1.0, 2.0], [2.0, 1.0]], [3e-8, 3.0]),
    ([[0.0, 0.0], [0.0, 0.0]], [EIGEN_FLOOR, EIGEN_FLOOR]),
]


@pytest.mark.parametrize('sigma, eigenvalues', repair_testcases)
def test_repair_clips_eigenvalues(sigma, eigenvalues):
    out, repaired = repair_spd(sigma)
    assert repaired
    assert np.array_equal(out, out.T)
    np.testing.assert_allclose(np.linalg.eigvalsh(out), eigenvalues,
                               rtol=1e-6, atol=1e-14)
    np.linalg.cholesky(out)


@pytest.mark.parametrize('seed', range(20))
def test_repair_idempotent(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 4))
    a = a + a.T
    once, _ = repair_spd(a)
    twice, repaired = repair_spd(once)
    assert not repaired
    assert np.array_equal(once, twice)


@pytest.mark.parametrize('sigma, error', [
    ([[1.0, 2.0], [0.0, 1.0]], InvalidInputError),
    ([[1.0, np.nan], [np.nan, 1.0]], DegenerateCovarianceError),
])
def test_repair_invalid(sigma, error):
    with pytest.raises(error):
        repair_spd(sigma)


def test_shrinkage():
    sigma = np.array([[1.0, 1.6], [1.6, 4.0]])
    np.testing.assert_array_equal(shrink_covariance(sigma, 1.0), sigma)
    np.testing.assert_array_equal(shrink_covariance(sigma, 0.0),
                                  np.diag([1.0, 4.0]))
    out = shrink_covariance(sigma, 0.95)
    assert out[0, 1] == pytest.approx(0.8 * 0.95 * 2.0)
    np.testing.assert_allclose(np.diag(out), [1.0, 4.0])


@pytest.mark.parametrize('sigma, gamma, error', [
    ([[0.0, 0.0], [0.0, 1.0]], 0.5, DegenerateCovarianceError),
    ([[1.0, 0.0], [0.0, 1.0]], 1.5, InvalidInputError),
])
def test_shrinkage_invalid(sigma, gamma, error):
    with pytest.raises(error):
        shrink_covariance(sigma, gamma)


gaussian_testcases = [
    ([0.0], [0.0], [[1.0]], -0.5 * log(2 * pi)),
    ([0.5, -0.5], [0.5, -0.5], np.eye(2), -log(2 * pi)),
    # explicit inverse of [[2, 1], [1, 2]] is [[2, -1], [-1, 2]] / 3
    ([1.0, 0.0], [0.0, 0.0], [[2.0, 1.0], [1.0, 2.0]],
     -log(2 * pi) - 0.5 * log(3.0) - 0.5 * 2.0 / 3.0),
]


@pytest.mark.parametrize('s, mu, sigma, expected', gaussian_testcases)
def test_gaussian_logpdf(s, mu, sigma, expected):
    assert gaussian_logpdf(s, mu, sigma) == pytest.approx(expected,
                                                          abs=1e-12)


def test_gaussian_logpdf_not_pd():
    with pytest.raises(DegenerateCovarianceError):
        gaussian_logpdf([0.0, 0.0], [0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


def go_scalar(s, mu, sigma, m):
    """Direct transcription for d = 1."""
    def log_c(v):
        return -v / 2 * log(2.0) - lgamma(v / 2)
    psi = (m - 1) * sigma - (s - mu) ** 2 / (1 - 1 / m)
    if psi <= 0:
        return -np.inf
    return (-0.5 * log(2 * pi) + log_c(m - 2) - log_c(m - 1)
            - 0.5 * log(1 - 1 / m) - (m - 3) / 2 * log((m - 1) * sigma)
            + (m - 4) / 2 * log(psi))


go_testcases = [
    (0.3, 0.1, 0.9, 10),
    (0.0, 0.0, 1.0, 5),
    (-2.0, 1.5, 3.0, 40),
    (1.0, 0.9, 0.01, 200),
]


@pytest.mark.parametrize('s, mu, sigma, m', go_testcases)
def test_ghurye_olkin_scalar(s, mu, sigma, m):
    got = ghurye_olkin_logdensity([s], [mu], [[sigma]], m)
    assert got == pytest.approx(go_scalar(s, mu, sigma, m), abs=1e-10)


def test_ghurye_olkin_psi_not_pd():
    # (M-1) sigma = 9 but the outer product term is 100 / 0.9
    assert ghurye_olkin_logdensity([10.0], [0.0], [[1.0]], 10) == -np.inf


@pytest.mark.parametrize('d, m', [(1, 4), (2, 5), (4, 7)])
def test_ghurye_olkin_needs_enough_simulations(d, m):
    with pytest.raises(InvalidInputError):
        ghurye_olkin_logdensity(np.zeros(d), np.zeros(d), np.eye(d), m)


def test_ghurye_olkin_large_m_finite():
    d, m = 20, 5000
    value = ghurye_olkin_logdensity(np.zeros(d), np.zeros(d), np.eye(d), m)
    assert np.isfinite(value)
    assert value == pytest.approx(gaussian_logpdf(np.zeros(d), np.zeros(d),
                                                  np.eye(d)), abs=0.05)


@pytest.mark.slow
@pytest.mark.parametrize('s', [[0.0, 0.0], [1.0, 1.0], [0.5, -1.0]])
def test_ghurye_olkin_unbiased(s):
    rng = np.random.default_rng(2024)
    d, m, n = 2, 20, 100_000
    mu_hat = rng.normal(size=(n, d)) / np.sqrt(m)
    scatter = sps.wishart(df=m - 1, scale=np.eye(d)).rvs(size=n,
                                                         random_state=rng)
    sigma_hat = scatter / (m - 1)
    values = np.exp([ghurye_olkin_logdensity(s, mu_hat[i], sigma_hat[i], m)
                     for i in range(n)])
    truth = sps.multivariate_normal(np.zeros(d), np.eye(d)).pdf(s)
    se = values.std(ddof=1) / np.sqrt(n)
    assert abs(values.mean() - truth) < 3 * se


conditional_testcases = [
    ([0.0, 0.0], [[2.0, 1.0], [1.0, 2.0]], 1, [1.0], [0.5], [[1.5]]),
    ([1.0, 2.0, 3.0], [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
     1, [0.0, 0.0], [1.0], [[2.0]]),
    ([1.0, -1.0, 0.5], [[1.0, 0.2, 0.3], [0.2, 1.0, 0.0], [0.3, 0.0, 2.0]],
     2, [0.5], [1.0, -1.0], None),
]


@pytest.mark.parametrize('m, S, d_theta, s_obs, m_cond, S_cond',
                         conditional_testcases)
def test_gaussian_conditional(m, S, d_theta, s_obs, m_cond, S_cond):
    got_m, got_S = gaussian_conditional(JointMoments(m, S, d_theta), s_obs)
    np.testing.assert_allclose(got_m, m_cond, atol=1e-12)
    if S_cond is not None:
        np.testing.assert_allclose(got_S, S_cond, atol=1e-12)
    assert np.array_equal(got_S, got_S.T)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d_theta=st.integers(1, 4),
       d_s=st.integers(1, 5))
def test_conditional_at_summary_mean(seed, d_theta, d_s):
    rng = np.random.default_rng(seed)
    d = d_theta + d_s
    S = random_spd(rng, d)
    m = rng.normal(size=d)
    moments = JointMoments(m, S, d_theta)
    m_cond, S_cond = gaussian_conditional(moments, moments.m_s,
                                          repair=False)
    np.testing.assert_allclose(m_cond, moments.m_theta, atol=1e-12)
    schur = moments.S_theta - moments.S_theta_s @ np.linalg.solve(
        moments.S_s, moments.S_s_theta)
    assert np.linalg.eigvalsh(schur).min() > 0
    np.testing.assert_allclose(S_cond, schur, atol=1e-10)
    assert np.all(np.diag(schur) <= np.diag(moments.S_theta) + 1e-12)


def test_joint_moments_blocks():
    S = np.arange(16.0).reshape(4, 4)
    S = S + S.T
    jm = JointMoments(np.arange(4.0), S, 1)
    assert np.array_equal(jm.S_s_theta, jm.S_theta_s.T)
    assert jm.S_s.shape == (3, 3)
    with pytest.raises(InvalidInputError):
        JointMoments(np.zeros(3), np.eye(3), 3)
