"""
Proposal kernels for the Metropolis-Hastings engine.

Every proposal exposes ``propose(theta, rng)`` and
``log_ratio(theta_cur, theta_prop)``, the latter returning
``log g(theta_cur | theta_prop) - log g(theta_prop | theta_cur)``, the
proposal correction entering the acceptance probability.

Three kernels are provided:

- :class:`RandomWalkProposal`, a Gaussian random walk with fixed
  covariance;
- :class:`HaarioState`, the adaptive random walk of [HST2001]_;
- :class:`GuidedProposalState`, the guided independence sampler built
  from the conditional distribution of parameters given the observed
  summaries, estimated from an accumulating set of
  ``(theta, mean summary)`` pairs.
"""
from __future__ import annotations

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from guidedsl.stats import (JointMoments, gaussian_conditional,
                            gaussian_logpdf, repair_spd)
from guidedsl.utils import (InvalidInputError, InvalidStateError, as_matrix,
                            as_vector, matrix_sqrt, symmetrize)

__all__ = ['random_walk_propose', 'RandomWalkProposal', 'HaarioState',
           'GuidedProposalState', 'bootstrap_rejection_summary',
           'HAARIO_SCALE', 'GUIDED_MODES', 'DEFAULT_STUDENT_NU']

logger = logging.getLogger(__name__)

#: Optimal random-walk scaling constant, divided by the dimension.
HAARIO_SCALE = 2.4 ** 2

GUIDED_MODES = ('gaussian', 'student')

#: Degrees of freedom of the Student guided proposal when none are given.
DEFAULT_STUDENT_NU = 5.0


def random_walk_propose(theta, C, rng: np.random.Generator,
                        z: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Gaussian random-walk proposal ``theta + C^1/2 z``.

    Parameters
    ----------
    theta : array_like
        Current position.
    C : array_like
        Positive semi-definite proposal covariance.
    rng : np.random.Generator
        Source of the standard normal ``z`` when it is not given.
    z : np.ndarray, optional
        Injected standard normal vector.

    Returns
    -------
    np.ndarray
        The proposed position.
    """
    theta = as_vector(theta, 'theta')
    if z is None:
        z = rng.standard_normal(theta.shape[0])
    return theta + matrix_sqrt(C) @ np.asarray(z, dtype=float)


class RandomWalkProposal:
    """Symmetric Gaussian random walk with a fixed covariance."""
    def __init__(self, cov):
        self.cov = as_matrix(cov, 'cov')
        self._sqrt = matrix_sqrt(self.cov)

    def propose(self, theta, rng: np.random.Generator) -> np.ndarray:
        theta = as_vector(theta, 'theta')
        return theta + self._sqrt @ rng.standard_normal(theta.shape[0])

    def log_ratio(self, theta_cur, theta_prop) -> float:
        return 0.0


class HaarioState:
    """
    Adaptive Metropolis random walk [HST2001]_.

    For iterations ``r <= burnin`` the proposal covariance is ``c_init``.
    Afterwards it is ``(2.4^2/d) cov(history) + (2.4^2/d) epsilon I``,
    recomputed when ``r`` is a multiple of ``update_interval`` and cached
    in between.

    Parameters
    ----------
    c_init : array_like
        Fixed covariance used up to and including ``burnin``.
    burnin : int
        Number of leading iterations that use ``c_init``.
    epsilon : float
        Ridge keeping the adapted covariance positive definite
        (default: 1e-8).
    update_interval : int
        Recompute period of the adapted covariance (default: 30).
    history : sequence of array_like, optional
        Positions known before the first iteration, e.g. the draws of a
        previous stage.
    """
    def __init__(self, c_init, burnin: int, epsilon: float = 1e-8,
                 update_interval: int = 30, history=None):
        self.c_init = as_matrix(c_init, 'c_init')
        if burnin < 0 or update_interval < 1:
            raise InvalidInputError('burnin must be >= 0 and '
                                    'update_interval >= 1')
        self.burnin = burnin
        self.epsilon = epsilon
        self.update_interval = update_interval
        self.dim = self.c_init.shape[0]
        self.history: List[np.ndarray] = []
        for theta in history if history is not None else []:
            self.record(theta)
        self.iteration = 0
        self._cached: Optional[np.ndarray] = None
        self._cached_sqrt: Optional[np.ndarray] = None

    def record(self, theta) -> None:
        theta = as_vector(theta, 'theta')
        if theta.shape[0] != self.dim:
            raise InvalidInputError('theta does not match c_init')
        self.history.append(theta.copy())

    def covariance(self, r: int) -> np.ndarray:
        """
        Proposal covariance at iteration ``r`` (1-based).

        Raises
        ------
        InvalidStateError
            If ``r`` is past burnin and fewer than two positions have
            been recorded.
        """
        if r < 1:
            raise InvalidInputError(f'iteration index must be >= 1, got {r}')
        if r <= self.burnin:
            return self.c_init
        if len(self.history) < 2:
            raise InvalidStateError('adaptive covariance needs at least two '
                                    'recorded positions past burnin')
        if self._cached is None or r % self.update_interval == 0:
            hist = np.asarray(self.history)
            cov = np.atleast_2d(np.cov(hist.T, ddof=1))
            scale = HAARIO_SCALE / self.dim
            self._cached = symmetrize(
                scale * cov + scale * self.epsilon * np.eye(self.dim))
            self._cached_sqrt = None
            logger.debug('adapted proposal covariance at r=%d from %d '
                         'positions', r, hist.shape[0])
        return self._cached

    def propose(self, theta, rng: np.random.Generator) -> np.ndarray:
        self.iteration += 1
        cov = self.covariance(self.iteration)
        if cov is self.c_init:
            return random_walk_propose(theta, cov, rng)
        if self._cached_sqrt is None:
            self._cached_sqrt = matrix_sqrt(cov)
        theta = as_vector(theta, 'theta')
        return theta + self._cached_sqrt @ rng.standard_normal(self.dim)

    def log_ratio(self, theta_cur, theta_prop) -> float:
        return 0.0


class GuidedProposalState:
    """
    Guided independence sampler built from ``(theta, s_bar)`` pairs.

    The pairs are stacked into vectors ``x = (theta, s_bar)`` whose mean
    and covariance are accumulated in streaming form. The proposal is
    the conditional of ``theta`` given ``s = s_obs`` under the Gaussian
    with those moments, or the matching multivariate Student
    distribution [Din2016]_ in ``student`` mode.

    Parameters
    ----------
    s_obs : array_like
        Observed summaries.
    d_theta : int
        Parameter dimension.
    nu : float, optional
        Degrees of freedom of the Student form (default:
        :data:`DEFAULT_STUDENT_NU` in ``student`` mode).
    batch_size : int
        Number of appended pairs between refreshes of the conditional
        (default: 1, i.e. after every append).
    mode : {'gaussian', 'student'}, optional
        Proposal family; inferred from ``nu`` when omitted.
    """
    def __init__(self, s_obs, d_theta: int, nu: Optional[float] = None,
                 batch_size: int = 1, mode: Optional[str] = None):
        self.s_obs = as_vector(s_obs, 's_obs')
        self.d_theta = d_theta
        self.d_s = self.s_obs.shape[0]
        if mode is None:
            mode = 'gaussian' if nu is None else 'student'
        if mode not in GUIDED_MODES:
            raise InvalidInputError(f'mode must be one of {GUIDED_MODES}, '
                                    f'got {mode!r}')
        if mode == 'gaussian' and nu is not None:
            raise InvalidInputError('nu is only used in student mode')
        if mode == 'student' and nu is None:
            nu = DEFAULT_STUDENT_NU
        if nu is not None and nu <= 0:
            raise InvalidInputError(f'nu must be positive, got {nu}')
        if batch_size < 1:
            raise InvalidInputError('batch_size must be >= 1')
        self.mode = mode
        self.nu = nu
        self.batch_size = batch_size
        self.history: List[Tuple[np.ndarray, np.ndarray]] = []
        d = d_theta + self.d_s
        self._mean = np.zeros(d)
        self._m2 = np.zeros((d, d))
        self._pending = 0
        self.m_cond: Optional[np.ndarray] = None
        self.S_cond: Optional[np.ndarray] = None
        self.delta = 0.0
        self._sqrt: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.history)

    def append(self, theta, s_bar) -> None:
        """
        Add one pair and refresh the conditional once ``batch_size``
        pairs are pending.

        Raises
        ------
        InvalidInputError
            If the pair's dimensions do not match the state.
        """
        theta, s_bar = as_vector(theta, 'theta'), as_vector(s_bar, 's_bar')
        if theta.shape[0] != self.d_theta or s_bar.shape[0] != self.d_s:
            raise InvalidInputError(
                f'expected a ({self.d_theta}, {self.d_s}) pair, '
                f'got ({theta.shape[0]}, {s_bar.shape[0]})')
        self.history.append((theta.copy(), s_bar.copy()))
        # Welford update
        x = np.concatenate([theta, s_bar])
        delta = x - self._mean
        self._mean = self._mean + delta / len(self.history)
        self._m2 = self._m2 + np.outer(delta, x - self._mean)
        self._pending += 1
        if len(self.history) >= 2 and self._pending >= self.batch_size:
            self.refresh()

    @property
    def moments(self) -> JointMoments:
        n = len(self.history)
        if n < 2:
            raise InvalidStateError('need at least two pairs for the '
                                    'joint moments')
        return JointMoments(self._mean.copy(), symmetrize(self._m2 / (n - 1)),
                            self.d_theta)

    def refresh(self) -> None:
        """Recompute the conditional mean and covariance."""
        moments = self.moments
        self.m_cond, self.S_cond = gaussian_conditional(moments, self.s_obs)
        S_s, _ = repair_spd(moments.S_s)
        resid = self.s_obs - moments.m_s
        self.delta = float(resid @ np.linalg.solve(S_s, resid))
        self._sqrt = matrix_sqrt(self.S_cond)
        self._pending = 0

    def _require_conditional(self):
        if self.m_cond is None:
            raise InvalidStateError('guided proposal used before two pairs '
                                    'were appended')

    @property
    def student_scale(self) -> float:
        return (self.nu + self.delta) / (self.nu + self.d_s)

    def draw(self, rng: np.random.Generator, z: Optional[np.ndarray] = None,
             chi2: Optional[float] = None) -> np.ndarray:
        """
        Draw from the current proposal.

        Parameters
        ----------
        rng : np.random.Generator
            Source of the standard normal and chi-square variates.
        z : np.ndarray, optional
            Injected standard normal vector of length ``d_theta``.
        chi2 : float, optional
            Injected chi-square variate with ``nu + d_s`` degrees of
            freedom (Student form only).

        Returns
        -------
        np.ndarray
            The proposed parameter; independent of the chain position.
        """
        self._require_conditional()
        if z is None:
            z = rng.standard_normal(self.d_theta)
        step = self._sqrt @ np.asarray(z, dtype=float)
        if self.nu is None:
            return self.m_cond + step
        df = self.nu + self.d_s
        if chi2 is None:
            chi2 = rng.chisquare(df)
        return self.m_cond + np.sqrt(self.student_scale) * step / np.sqrt(
            chi2 / df)

    def logpdf(self, theta) -> float:
        """Log-density of the current proposal at ``theta``."""
        self._require_conditional()
        if self.nu is None:
            return gaussian_logpdf(theta, self.m_cond, self.S_cond)
        return float(stats.multivariate_t.logpdf(
            as_vector(theta, 'theta'), loc=self.m_cond,
            shape=self.student_scale * self.S_cond, df=self.nu + self.d_s))

    def propose(self, theta, rng: np.random.Generator) -> np.ndarray:
        return self.draw(rng)

    def log_ratio(self, theta_cur, theta_prop) -> float:
        return self.logpdf(theta_cur) - self.logpdf(theta_prop)


def bootstrap_rejection_summary(summaries, rng: np.random.Generator,
                                indices=None) -> np.ndarray:
    """
    Mean of a with-replacement resample of the rows of ``summaries``.

    Appended to the guided history in place of a fresh mean summary
    when the guided proposal is rejected.

    Parameters
    ----------
    summaries : array_like
        The ``(M, d_s)`` summaries simulated at the last accepted
        parameter.
    rng : np.random.Generator
        Source of the resample indices.
    indices : array_like of int, optional
        Injected resample indices of length ``M``.

    Raises
    ------
    InvalidInputError
        If ``summaries`` has no rows.
    """
    x = np.asarray(summaries, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] == 0:
        raise InvalidInputError('cannot resample an empty summary matrix')
    if indices is None:
        indices = rng.integers(x.shape[0], size=x.shape[0])
    return x[np.asarray(indices)].mean(axis=0)
