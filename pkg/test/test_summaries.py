import numpy as np
import pytest
from scipy import stats

from guidedsl.simulators import MixtureParams, mixture_simulate
from guidedsl.summaries import (SummarySpec, boombust_summaries,
                                gk_summaries, mcculloch_summaries,
                                mixture_em, mixture_summaries,
                                sort_mixture_means, supernova_summaries)
from guidedsl.utils import DegenerateSummaryError, InvalidInputError

SIGMA1 = [[16.0, 0.0], [0.0, 16.0]]
SIGMA2 = [[16.0, 12.0], [12.0, 16.0]]


def test_gk_summaries_hand_quantiles():
    s = gk_summaries(np.arange(1.0, 100.0))
    np.testing.assert_allclose(s, [50.0, 49.5, 0.0, 1.0], atol=1e-12)


def test_gk_summaries_symmetric(rng):
    x = rng.standard_normal(500)
    s = gk_summaries(np.concatenate([x, -x]))
    assert s[0] == pytest.approx(0.0, abs=1e-12)
    assert s[2] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize('shift', [-3.0, 0.5, 100.0])
def test_gk_summaries_shift(shift, rng):
    x = rng.standard_normal(300)
    np.testing.assert_allclose(gk_summaries(x + shift),
                               gk_summaries(x) + [shift, 0, 0, 0],
                               atol=1e-10)


def test_gk_summaries_stacked(rng):
    x = rng.standard_normal((3, 50))
    np.testing.assert_allclose(gk_summaries(x),
                               [gk_summaries(row) for row in x])


gk_invalid_testcases = [
    (np.ones(20), DegenerateSummaryError),
    (np.arange(5.0), InvalidInputError),
]


@pytest.mark.parametrize('data, error', gk_invalid_testcases)
def test_gk_summaries_invalid(data, error):
    with pytest.raises(error):
        gk_summaries(data)


def _moments_oracle(x):
    n = len(x)
    mean = sum(x) / n
    m2 = sum((v - mean) ** 2 for v in x) / n
    m3 = sum((v - mean) ** 3 for v in x) / n
    m4 = sum((v - mean) ** 4 for v in x) / n
    var = m2 * n / (n - 1)
    if m2 == 0:
        return [mean, var, 0.0, 0.0]
    return [mean, var, m3 / m2 ** 1.5, m4 / m2 ** 2]


def _boombust_oracle(y):
    diff = [b - a for a, b in zip(y[:-1], y[1:])]
    ratio = [(b + 1) / (a + 1) for a, b in zip(y[:-1], y[1:])]
    return _moments_oracle(y) + _moments_oracle(diff) + \
        _moments_oracle(ratio)


boombust_testcases = [
    ([5] * 10, [5, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0]),
    ([0, 1, 3], _boombust_oracle([0, 1, 3])),
]


@pytest.mark.parametrize('y, expected', boombust_testcases)
def test_boombust_summaries(y, expected):
    np.testing.assert_allclose(boombust_summaries(y), expected, atol=1e-12)


def test_boombust_summaries_small_example():
    s = boombust_summaries([0, 1, 3])
    np.testing.assert_allclose(s[:2], [4 / 3, 7 / 3])
    np.testing.assert_allclose(s[4:], [1.5, 0.5, 0.0, 1.0, 2.0, 0.0, 0.0,
                                       0.0], atol=1e-12)


def test_boombust_summaries_oracle(rng):
    y = rng.poisson(20, size=250)
    np.testing.assert_allclose(boombust_summaries(y),
                               _boombust_oracle(y.tolist()), rtol=1e-9)


def test_boombust_summaries_order(rng):
    y = rng.poisson(20, size=250)
    shuffled = rng.permutation(y)
    a, b = boombust_summaries(y), boombust_summaries(shuffled)
    np.testing.assert_allclose(a[:4], b[:4])
    assert not np.allclose(a[4:8], b[4:8])


def test_sort_mixture_means():
    np.testing.assert_array_equal(sort_mixture_means([[3, -1], [1, 2]]),
                                  [1, -1, 3, 2])
    np.testing.assert_array_equal(sort_mixture_means([[3, -1, 1, 2],
                                                      [0, 0, 1, 1]]),
                                  [[1, -1, 3, 2], [0, 0, 1, 1]])


def test_mixture_summaries_separated():
    rng = np.random.default_rng(3)
    n = 5000
    points = mixture_simulate(MixtureParams((-5.0, 10.0), (30.0, 20.0)),
                              rng.standard_normal((n, 2)), rng.random(n))
    fit = mixture_em(points, SIGMA1, SIGMA2)
    assert fit.converged
    np.testing.assert_allclose(mixture_summaries(points, SIGMA1, SIGMA2),
                               [-5.0, 10.0, 30.0, 20.0], atol=0.5)


def test_mixture_summaries_single_location():
    points = np.tile([2.0, -1.0], (30, 1))
    np.testing.assert_allclose(mixture_summaries(points, SIGMA1, SIGMA2),
                               [2.0, -1.0, 2.0, -1.0])


def test_mixture_summaries_stacked(rng):
    points = rng.normal(size=(2, 40, 2))
    out = mixture_summaries(points, SIGMA1, SIGMA2)
    assert out.shape == (2, 4)
    np.testing.assert_allclose(out[1], mixture_summaries(points[1], SIGMA1,
                                                         SIGMA2))


def test_mixture_summaries_convergence_flags(rng):
    points = rng.normal(size=(3, 40, 2))
    out, converged = mixture_summaries(points, SIGMA1, SIGMA2, max_iter=1,
                                       return_converged=True)
    assert out.shape == (3, 4)
    assert converged.shape == (3,)
    assert not converged.any()
    np.testing.assert_array_equal(
        out, mixture_summaries(points, SIGMA1, SIGMA2, max_iter=1))
    _, single = mixture_summaries(np.tile([2.0, -1.0], (30, 1)), SIGMA1,
                                  SIGMA2, return_converged=True)
    assert single.shape == () and single


def test_mixture_too_small():
    with pytest.raises(InvalidInputError):
        mixture_em(np.zeros((5, 2)), SIGMA1, SIGMA2)


def test_mcculloch_hand_quantiles():
    s = mcculloch_summaries(np.arange(1.0, 100.0))
    np.testing.assert_allclose(s, [1.8, 0.0, 49.5, 50.0], atol=1e-12)


def test_mcculloch_gamma_true(rng):
    y = rng.standard_cauchy(500)
    a = mcculloch_summaries(y)
    b = mcculloch_summaries(y, gamma_true=2.0)
    assert b[2] == pytest.approx(a[2] / 2)
    np.testing.assert_array_equal(a[[0, 1, 3]], b[[0, 1, 3]])


def test_mcculloch_symmetric(rng):
    x = rng.standard_cauchy(400)
    s = mcculloch_summaries(np.concatenate([x, -x]))
    assert s[1] == pytest.approx(0.0, abs=1e-12)
    assert s[3] == pytest.approx(0.0, abs=1e-9)


def test_mcculloch_gaussian_ratio(rng):
    s = mcculloch_summaries(rng.standard_normal(100_000))
    expected = (stats.norm.ppf(0.95) - stats.norm.ppf(0.05)) / \
        (stats.norm.ppf(0.75) - stats.norm.ppf(0.25))
    assert s[0] == pytest.approx(expected, rel=0.02)


def test_supernova_summaries():
    mu = np.linspace(38, 44, 20)
    out = supernova_summaries(mu)
    np.testing.assert_array_equal(out, mu)
    out[0] = 0
    assert mu[0] == 38
    with pytest.raises(InvalidInputError):
        supernova_summaries(mu[:19])


def test_summary_spec():
    spec = SummarySpec('gk', ('s_A', 's_B', 's_g', 's_k'))
    assert spec.d_s == 4
    assert spec.quantile_method == 'hazen'


def _hazen(values, percent):
    x = sorted(values)
    n = len(x)
    pos = percent / 100 * n - 0.5
    if pos <= 0:
        return x[0]
    if pos >= n - 1:
        return x[-1]
    i = int(pos)
    return x[i] + (pos - i) * (x[i + 1] - x[i])


@pytest.mark.parametrize('seed', range(100))
def test_quantile_summaries_oracle(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_t(3, size=int(rng.integers(20, 200))).tolist()
    q = {p: _hazen(x, p) for p in (5, 12.5, 25, 37.5, 50, 62.5, 75, 87.5,
                                   95)}
    iqr = q[75] - q[25]
    gk = [q[50], iqr, (q[75] + q[25] - 2 * q[50]) / iqr,
          (q[87.5] - q[62.5] + q[37.5] - q[12.5]) / iqr]
    spread = q[95] - q[5]
    mc = [spread / iqr, (q[95] + q[5] - 2 * q[50]) / spread, iqr / 1.5,
          sum(x) / len(x)]
    np.testing.assert_allclose(gk_summaries(x), gk, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(mcculloch_summaries(x, gamma_true=1.5), mc,
                               rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize('seed', range(100))
def test_boombust_summaries_random_oracle(seed):
    rng = np.random.default_rng(seed)
    y = rng.poisson(rng.uniform(0.5, 40), size=int(rng.integers(3, 60)))
    np.testing.assert_allclose(boombust_summaries(y),
                               _boombust_oracle(y.tolist()), rtol=1e-10,
                               atol=1e-10)


def test_mixture_summaries_far_clusters(rng):
    points = np.concatenate([rng.normal(0, 1, size=(500, 2)),
                             rng.normal(100, 1, size=(500, 2))])
    expected = np.concatenate([points[:500].mean(axis=0),
                               points[500:].mean(axis=0)])
    np.testing.assert_allclose(
        mixture_summaries(rng.permutation(points), SIGMA1, SIGMA2),
        expected, atol=0.5)
