"""
Dense Gaussian kernel shared by the likelihood estimator and the
guided proposal: moment estimation, covariance repair and shrinkage,
plain and unbiased Gaussian log-densities, and Gaussian conditioning.

All functions are pure. Covariance-producing steps symmetrize their
result as ``(A + A.T) / 2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from guidedsl.utils import (DegenerateCovarianceError, InvalidInputError,
                            as_matrix, as_vector, symmetrize)

__all__ = ['EIGEN_FLOOR', 'SLEstimate', 'JointMoments', 'estimate_moments',
           'repair_spd', 'shrink_covariance', 'gaussian_logpdf',
           'ghurye_olkin_logdensity', 'gaussian_conditional']

logger = logging.getLogger(__name__)

#: Relative eigenvalue floor used by :func:`repair_spd`.
EIGEN_FLOOR = 1e-8

_LOG_2PI = np.log(2 * np.pi)


@dataclass
class SLEstimate:
    """
    Synthetic-likelihood estimate at one parameter value.

    Attributes
    ----------
    mu_hat : np.ndarray
        Mean of the simulated summaries.
    sigma_hat : np.ndarray
        Covariance of the simulated summaries, after any shrinkage and
        repair.
    log_density : float
        Log synthetic likelihood of the observed summaries; ``-inf`` when
        the estimator is undefined or a simulation failed.
    m_used : int
        Number of simulations behind the estimate.
    repaired : bool
        True if ``sigma_hat`` needed eigenvalue clipping.
    summaries : np.ndarray or None
        The ``(M, d_s)`` matrix of simulated summaries.
    failed : bool
        True if a simulation or summary raised and the estimate was
        replaced by ``-inf``.
    """
    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    log_density: float
    m_used: int
    repaired: bool = False
    summaries: Optional[np.ndarray] = field(default=None, repr=False)
    failed: bool = False

    @staticmethod
    def failure(d_s: int, m: int) -> SLEstimate:
        """An estimate that rejects whatever it is compared against."""
        return SLEstimate(np.full(d_s, np.nan), np.full((d_s, d_s), np.nan),
                          -np.inf, m, failed=True)


@dataclass
class JointMoments:
    """
    Mean and covariance of stacked ``(theta, s)`` vectors.

    Attributes
    ----------
    m : np.ndarray
        Joint mean of length ``d_theta + d_s``.
    S : np.ndarray
        Joint covariance, symmetric.
    d_theta : int
        Number of leading parameter coordinates.
    """
    m: np.ndarray
    S: np.ndarray
    d_theta: int

    def __post_init__(self):
        self.m = as_vector(self.m, 'joint mean')
        self.S = as_matrix(self.S, 'joint covariance')
        if self.S.shape[0] != self.m.shape[0]:
            raise InvalidInputError('joint mean and covariance disagree '
                                    'in dimension')
        if not 0 < self.d_theta < self.m.shape[0]:
            raise InvalidInputError(f'd_theta={self.d_theta} must split '
                                    f'a joint of size {self.m.shape[0]}')

    @property
    def m_theta(self) -> np.ndarray:
        return self.m[:self.d_theta]

    @property
    def m_s(self) -> np.ndarray:
        return self.m[self.d_theta:]

    @property
    def S_theta(self) -> np.ndarray:
        return self.S[:self.d_theta, :self.d_theta]

    @property
    def S_theta_s(self) -> np.ndarray:
        return self.S[:self.d_theta, self.d_theta:]

    @property
    def S_s_theta(self) -> np.ndarray:
        return self.S_theta_s.T

    @property
    def S_s(self) -> np.ndarray:
        return self.S[self.d_theta:, self.d_theta:]


def estimate_moments(summaries) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample mean and unbiased sample covariance of replicate summaries.

    Parameters
    ----------
    summaries : array_like
        An ``(M, d_s)`` matrix, one simulated summary vector per row.

    Returns
    -------
    mu_hat : np.ndarray
        Column means.
    sigma_hat : np.ndarray
        Covariance with the ``1/(M-1)`` divisor, exactly symmetric.

    Raises
    ------
    InvalidInputError
        If fewer than two rows are given or any entry is not finite.
    """
    x = np.asarray(summaries, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InvalidInputError('summaries must be an (M, d_s) matrix')
    if x.shape[0] < 2:
        raise InvalidInputError(f'need at least 2 summaries, got {x.shape[0]}')
    if not np.all(np.isfinite(x)):
        raise InvalidInputError('summaries contain non-finite entries')
    mu = x.mean(axis=0)
    centred = x - mu
    sigma = centred.T @ centred / (x.shape[0] - 1)
    return mu, symmetrize(sigma)


def _is_pd(a: np.ndarray) -> bool:
    try:
        linalg.cholesky(a, lower=True)
    except linalg.LinAlgError:
        return False
    return True


def repair_spd(sigma, floor: float = EIGEN_FLOOR
               ) -> Tuple[np.ndarray, bool]:
    """
    Return a positive-definite version of a symmetric matrix.

    Matrices that already admit a Cholesky factorisation are returned
    unchanged. Otherwise the eigenvalues are clipped from below at
    ``floor * max(lambda_max, 1)`` and the matrix is rebuilt.

    Parameters
    ----------
    sigma : array_like
        A symmetric matrix.
    floor : float
        Relative eigenvalue floor (default: 1e-8).

    Returns
    -------
    sigma_pd : np.ndarray
        Symmetric positive-definite matrix.
    repaired : bool
        False if ``sigma`` was returned as is.

    Raises
    ------
    InvalidInputError
        If ``sigma`` is not symmetric.
    """
    a = as_matrix(sigma, 'sigma')
    if not np.all(np.isfinite(a)):
        raise DegenerateCovarianceError('covariance has non-finite entries')
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-10 * scale):
        raise InvalidInputError('repair_spd needs a symmetric matrix')
    if _is_pd(a):
        return a, False
    w, v = linalg.eigh(symmetrize(a))
    eps = floor * max(w[-1], 1.0)
    repaired = symmetrize((v * np.maximum(w, eps)) @ v.T)
    logger.debug('clipped %d eigenvalue(s) to %.3g',
                 int(np.sum(w < eps)), eps)
    return repaired, True


def shrink_covariance(sigma, gamma: float) -> np.ndarray:
    """
    Convex shrinkage of a covariance towards its diagonal [War2008]_.

    Computes ``D^1/2 [gamma C + (1 - gamma) I] D^1/2`` where ``C`` is the
    correlation matrix of ``sigma`` and ``D`` its diagonal, which equals
    ``gamma * sigma + (1 - gamma) * diag(sigma)``.

    Parameters
    ----------
    sigma : array_like
        Symmetric matrix with a strictly positive diagonal.
    gamma : float
        Weight on the off-diagonal structure, in ``[0, 1]``.

    Returns
    -------
    np.ndarray
        The shrunk covariance.

    Raises
    ------
    InvalidInputError
        If ``gamma`` is outside ``[0, 1]``.
    DegenerateCovarianceError
        If a diagonal entry is zero or negative.
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError(f'gamma must lie in [0, 1], got {gamma}')
    a = as_matrix(sigma, 'sigma')
    d = np.diag(a)
    if np.any(d <= 0):
        raise DegenerateCovarianceError('cannot shrink a covariance with '
                                        'a non-positive variance')
    return symmetrize(gamma * a + (1.0 - gamma) * np.diag(d))


def _cholesky(a: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(a, lower=True)
    except linalg.LinAlgError as err:
        raise DegenerateCovarianceError(str(err)) from err


def gaussian_logpdf(s, mu, sigma) -> float:
    """
    Multivariate normal log-density evaluated through a Cholesky factor.

    Parameters
    ----------
    s : array_like
        Point of evaluation.
    mu : array_like
        Mean.
    sigma : array_like
        Positive-definite covariance.

    Returns
    -------
    float
        ``log N(s; mu, sigma)``.

    Raises
    ------
    DegenerateCovarianceError
        If ``sigma`` is not positive definite.
    """
    s, mu = as_vector(s, 's'), as_vector(mu, 'mu')
    chol = _cholesky(as_matrix(sigma, 'sigma'))
    z = linalg.solve_triangular(chol, s - mu, lower=True)
    return float(-0.5 * s.shape[0] * _LOG_2PI
                 - np.sum(np.log(np.diag(chol))) - 0.5 * z @ z)


def _log_c(k: int, v: float) -> float:
    i = np.arange(1, k + 1)
    return float(-k * v / 2 * np.log(2.0) - k * (k - 1) / 4 * np.log(np.pi)
                 - np.sum(gammaln(0.5 * (v - i + 1))))


def _logdet_pd(a: np.ndarray) -> Optional[float]:
    try:
        chol = linalg.cholesky(a, lower=True)
    except linalg.LinAlgError:
        return None
    return float(2 * np.sum(np.log(np.diag(chol))))


def ghurye_olkin_logdensity(s, mu_hat, sigma_hat, M: int) -> float:
    """
    Log of the unbiased estimator of a Gaussian density [GO1969]_.

    Given the sample mean and covariance of ``M`` Gaussian draws, the
    estimator is unbiased for ``N(s; mu, Sigma)`` for every ``M``; this
    is what makes the synthetic-likelihood chain exact when summaries
    are Gaussian [PDK2018]_.

    Parameters
    ----------
    s : array_like
        Observed summaries, length ``d``.
    mu_hat : array_like
        Sample mean of the simulated summaries.
    sigma_hat : array_like
        Sample covariance (``1/(M-1)`` divisor).
    M : int
        Number of simulations, with ``M > d + 3``.

    Returns
    -------
    float
        The log estimate, ``-inf`` when
        ``(M-1) sigma_hat - (s - mu_hat)(s - mu_hat)' / (1 - 1/M)``
        is not positive definite.

    Raises
    ------
    InvalidInputError
        If ``M <= d + 3``.

    Notes
    -----
    Everything is evaluated with log-gamma and Cholesky log-determinants
    so large ``M`` and ``d`` do not overflow.
    """
    s, mu_hat = as_vector(s, 's'), as_vector(mu_hat, 'mu_hat')
    sigma_hat = as_matrix(sigma_hat, 'sigma_hat')
    d = s.shape[0]
    if M <= d + 3:
        raise InvalidInputError(f'unbiased density needs M > d + 3 = {d + 3},'
                                f' got M={M}')
    scatter = (M - 1) * sigma_hat
    logdet_scatter = _logdet_pd(scatter)
    if logdet_scatter is None:
        return -np.inf
    diff = s - mu_hat
    psi_arg = symmetrize(scatter - np.outer(diff, diff) / (1.0 - 1.0 / M))
    logdet_psi = _logdet_pd(psi_arg)
    if logdet_psi is None:
        return -np.inf
    return (-d / 2 * _LOG_2PI + _log_c(d, M - 2) - _log_c(d, M - 1)
            - d / 2 * np.log(1.0 - 1.0 / M)
            - (M - d - 2) / 2 * logdet_scatter
            + (M - d - 3) / 2 * logdet_psi)


def gaussian_conditional(moments: JointMoments, s_obs, repair: bool = True
                         ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Conditional distribution of ``theta`` given ``s = s_obs`` under a
    joint Gaussian.

    Parameters
    ----------
    moments : JointMoments
        Joint mean and covariance of ``(theta, s)``.
    s_obs : array_like
        Conditioning value of the summaries.
    repair : bool
        If True (default) the conditional covariance is passed through
        :func:`repair_spd`.

    Returns
    -------
    m_cond : np.ndarray
        ``m_theta + S_theta_s S_s^-1 (s_obs - m_s)``.
    S_cond : np.ndarray
        ``S_theta - S_theta_s S_s^-1 S_s_theta``.

    Raises
    ------
    DegenerateCovarianceError
        If ``S_s`` cannot be factorised even after repair.
    """
    s_obs = as_vector(s_obs, 's_obs')
    if s_obs.shape != moments.m_s.shape:
        raise InvalidInputError('s_obs does not match the summary block')
    S_s, _ = repair_spd(moments.S_s)
    try:
        factor = linalg.cho_factor(S_s, lower=True)
    except linalg.LinAlgError as err:
        raise DegenerateCovarianceError(str(err)) from err
    m_cond = moments.m_theta + moments.S_theta_s @ linalg.cho_solve(
        factor, s_obs - moments.m_s)
    S_cond = symmetrize(moments.S_theta - moments.S_theta_s @ linalg.cho_solve(
        factor, moments.S_s_theta))
    if repair:
        S_cond, _ = repair_spd(S_cond)
    return m_cond, S_cond
