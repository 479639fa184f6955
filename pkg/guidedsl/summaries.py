"""
Summary statistics for the benchmark models.

Each function maps a dataset (or a stack of datasets along leading
axes) to a summary vector. Empirical percentiles use one convention
throughout: linear interpolation with plotting position ``(i - 0.5)/n``
(numpy's ``'hazen'`` method).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy import stats
from scipy.spatial import ConvexHull, QhullError
from scipy.special import expit

from guidedsl.utils import DegenerateSummaryError, InvalidInputError

__all__ = ['QUANTILE_METHOD', 'SummarySpec', 'MixtureFit', 'quantiles',
           'gk_summaries', 'boombust_summaries', 'mixture_em',
           'mixture_summaries', 'sort_mixture_means', 'mcculloch_summaries',
           'supernova_summaries']

logger = logging.getLogger(__name__)

QUANTILE_METHOD = 'hazen'


@dataclass(frozen=True)
class SummarySpec:
    """Identity and layout of a model's summary vector."""
    model_id: str
    labels: Tuple[str, ...]
    quantile_method: Optional[str] = QUANTILE_METHOD

    @property
    def d_s(self) -> int:
        return len(self.labels)


def quantiles(x, percents) -> np.ndarray:
    """Percentiles along the last axis, stacked on a new leading axis."""
    return np.percentile(np.asarray(x, dtype=float), percents, axis=-1,
                         method=QUANTILE_METHOD)


def gk_summaries(data) -> np.ndarray:
    """
    Robust quantile summaries of g-and-k data [DP2011]_.

    Parameters
    ----------
    data : array_like
        Observations along the last axis, at least 8 of them.

    Returns
    -------
    np.ndarray
        ``(s_A, s_B, s_g, s_k)`` along the last axis, where
        ``s_A = P50``, ``s_B = P75 - P25``,
        ``s_g = (P75 + P25 - 2 s_A) / s_B`` and
        ``s_k = (P87.5 - P62.5 + P37.5 - P12.5) / s_B``.

    Raises
    ------
    DegenerateSummaryError
        If the interquartile range is zero.
    """
    x = np.asarray(data, dtype=float)
    if x.shape[-1] < 8:
        raise InvalidInputError('g-and-k summaries need at least 8 points')
    q125, q25, q375, q50, q625, q75, q875 = quantiles(
        x, [12.5, 25, 37.5, 50, 62.5, 75, 87.5])
    s_b = q75 - q25
    if np.any(s_b == 0):
        raise DegenerateSummaryError('zero interquartile range')
    return np.stack([q50, s_b, (q75 + q25 - 2 * q50) / s_b,
                     (q875 - q625 + q375 - q125) / s_b], axis=-1)


def _four_moments(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1)
    var = x.var(axis=-1, ddof=1)
    flat = x.var(axis=-1) <= 0
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RuntimeWarning)
        skew = stats.skew(x, axis=-1, bias=True)
        kurt = stats.kurtosis(x, axis=-1, fisher=False, bias=True)
    skew = np.where(flat, 0.0, skew)
    kurt = np.where(flat, 0.0, kurt)
    return np.stack([mean, var, skew, kurt], axis=-1)


def boombust_summaries(y) -> np.ndarray:
    """
    Moment summaries of a boom-and-bust series.

    For the series itself, its first differences and the shifted ratios
    ``(y_i + 1) / (y_{i-1} + 1)``, returns mean, variance (``n - 1``
    divisor), skewness ``m3 / m2^1.5`` and kurtosis ``m4 / m2^2``
    (central moments with ``1/n``). A series with zero variance gets
    skewness and kurtosis 0.

    Parameters
    ----------
    y : array_like
        Counts in time order along the last axis, length at least 3.

    Returns
    -------
    np.ndarray
        12 summaries along the last axis.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] < 3:
        raise InvalidInputError('boom-and-bust summaries need a series of '
                                'length >= 3')
    diff = np.diff(y, axis=-1)
    ratio = (y[..., 1:] + 1) / (y[..., :-1] + 1)
    return np.concatenate([_four_moments(y), _four_moments(diff),
                           _four_moments(ratio)], axis=-1)


class MixtureFit(NamedTuple):
    """Result of :func:`mixture_em`."""
    means: np.ndarray
    n_iter: int
    converged: bool


def _farthest_pair(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    try:
        candidates = x[ConvexHull(x).vertices]
    except (QhullError, ValueError):
        # collinear or repeated points: two sweeps of farthest-point search
        p = x[np.argmax(np.sum((x - x[0]) ** 2, axis=1))]
        q = x[np.argmax(np.sum((x - p) ** 2, axis=1))]
        return p, q
    d2 = np.sum((candidates[:, None, :] - candidates[None, :, :]) ** 2,
                axis=-1)
    i, j = np.unravel_index(np.argmax(d2), d2.shape)
    return candidates[i], candidates[j]


def mixture_em(points, sigma1, sigma2, max_iter: int = 200,
               tol: float = 1e-8) -> MixtureFit:
    """
    Fit the two means of an equal-weight Gaussian mixture with known
    covariances by expectation-maximisation.

    The means start at the two sample points farthest apart.

    Parameters
    ----------
    points : array_like
        ``(n, 2)`` sample.
    sigma1, sigma2 : array_like
        Known component covariances.
    max_iter : int
        Iteration cap (default: 200).
    tol : float
        Convergence threshold on the largest mean movement
        (default: 1e-8).

    Returns
    -------
    MixtureFit
        Unsorted means of shape ``(2, 2)``, iterations used and whether
        the tolerance was met.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] < 10:
        raise InvalidInputError('mixture summaries need an (n, 2) sample '
                                'with n >= 10')
    precisions = [np.linalg.inv(np.asarray(s, dtype=float))
                  for s in (sigma1, sigma2)]
    half_logdet = [0.5 * np.linalg.slogdet(np.asarray(s, dtype=float))[1]
                   for s in (sigma1, sigma2)]
    means = np.array(_farthest_pair(x))
    for it in range(1, max_iter + 1):
        logp = []
        for k in range(2):
            r = x - means[k]
            logp.append(-0.5 * np.einsum('ij,jk,ik->i', r, precisions[k], r)
                        - half_logdet[k])
        resp1 = expit(logp[0] - logp[1])
        new = means.copy()
        for k, w in enumerate((resp1, 1 - resp1)):
            total = w.sum()
            if total > 0:
                new[k] = w @ x / total
        step = np.max(np.abs(new - means))
        means = new
        if step < tol:
            return MixtureFit(means, it, True)
    return MixtureFit(means, max_iter, False)


def sort_mixture_means(means) -> np.ndarray:
    """
    Coordinate-wise sort of two 2-d means, returned flat as
    ``(mu1_x, mu1_y, mu2_x, mu2_y)`` with ``mu1_x < mu2_x`` and
    ``mu1_y < mu2_y``. Works along the last axis of ``(..., 4)`` input.
    """
    m = np.asarray(means, dtype=float)
    if m.shape[-1] == 4:
        m = m.reshape(m.shape[:-1] + (2, 2))
    m = np.sort(m, axis=-2)
    return m.reshape(m.shape[:-2] + (4,))


def mixture_summaries(points, sigma1, sigma2, max_iter: int = 200,
                      tol: float = 1e-8, return_converged: bool = False):
    """
    Sorted EM estimates of the two component means.

    A sample whose EM run hits ``max_iter`` contributes its last iterate.

    Parameters
    ----------
    points : array_like
        ``(..., n, 2)`` samples; leading axes are looped over.
    sigma1, sigma2 : array_like
        Known component covariances.
    return_converged : bool
        Also return whether each EM run met ``tol``.

    Returns
    -------
    np.ndarray
        ``(..., 4)`` summaries; see :func:`sort_mixture_means`.
    np.ndarray of bool
        Convergence flags of shape ``(...)``, only if ``return_converged``.
    """
    x = np.asarray(points, dtype=float)
    lead = x.shape[:-2]
    flat = x.reshape((-1,) + x.shape[-2:])
    out = np.empty((flat.shape[0], 4))
    converged = np.empty(flat.shape[0], dtype=bool)
    for i, sample in enumerate(flat):
        fit = mixture_em(sample, sigma1, sigma2, max_iter, tol)
        if not fit.converged:
            logger.debug('mixture EM stopped after %d iterations without '
                         'meeting tol=%g', fit.n_iter, tol)
        out[i] = sort_mixture_means(fit.means)
        converged[i] = fit.converged
    out = out.reshape(lead + (4,))
    if return_converged:
        return out, converged.reshape(lead)
    return out


def mcculloch_summaries(y, gamma_true: float = 1.0) -> np.ndarray:
    """
    Quantile summaries for alpha-stable data [McC1986]_.

    Parameters
    ----------
    y : array_like
        Observations along the last axis, at least 20.
    gamma_true : float
        Scale used to normalise the interquartile range.

    Returns
    -------
    np.ndarray
        ``(S_alpha, S_beta, S_gamma, S_delta)`` with
        ``S_alpha = (q95 - q5) / (q75 - q25)``,
        ``S_beta = (q95 + q5 - 2 q50) / (q95 - q5)``,
        ``S_gamma = (q75 - q25) / gamma_true`` and ``S_delta`` the mean.

    Raises
    ------
    DegenerateSummaryError
        If either quantile spread is zero.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] < 20:
        raise InvalidInputError('McCulloch summaries need at least 20 points')
    q5, q25, q50, q75, q95 = quantiles(y, [5, 25, 50, 75, 95])
    iqr, spread = q75 - q25, q95 - q5
    if np.any(iqr == 0) or np.any(spread == 0):
        raise DegenerateSummaryError('zero quantile spread')
    return np.stack([spread / iqr, (q95 + q5 - 2 * q50) / spread,
                     iqr / gamma_true, y.mean(axis=-1)], axis=-1)


def supernova_summaries(mu_vector, n_bins: int = 20) -> np.ndarray:
    """The distance moduli are their own summaries."""
    mu = np.asarray(mu_vector, dtype=float)
    if mu.shape[-1] != n_bins:
        raise InvalidInputError(f'expected {n_bins} distance moduli, '
                                f'got {mu.shape[-1]}')
    return mu.copy()
