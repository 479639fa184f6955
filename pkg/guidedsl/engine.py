"""
The Metropolis-Hastings engine for synthetic-likelihood posteriors.

A chain runs up to three stages:

1. ``burnin``: a fixed-covariance random walk, optionally with
   Markov-chain-within-Metropolis re-estimation of the current point;
2. ``asl``: the guided independence sampler, initialised from the
   burnin ``(theta, mean summary)`` pairs and refreshed after every
   iteration;
3. ``adaptive``: the adaptive random walk of [HST2001]_, seeded with the
   guided-stage draws, optionally with fewer simulations per estimate.

Likelihoods are estimated either from fresh variates at every call or,
when a block count is configured, from a :class:`VariateStore` of which
one block is redrawn per iteration and committed only on acceptance
[DDP2018]_, [TK2016]_.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np

from guidedsl.models import Model
from guidedsl.priors import PriorSpec
from guidedsl.proposals import (DEFAULT_STUDENT_NU, GUIDED_MODES,
                                GuidedProposalState, HaarioState,
                                RandomWalkProposal,
                                bootstrap_rejection_summary)
from guidedsl.stats import (SLEstimate, estimate_moments,
                            gaussian_logpdf, ghurye_olkin_logdensity,
                            repair_spd, shrink_covariance)
from guidedsl.traces import ChainTrace
from guidedsl.utils import (ChainAbortedError, DegenerateCovarianceError,
                            GuidedSLError, InvalidConfigError,
                            InvalidInputError,
                            as_matrix, as_vector)

__all__ = ['VariateStore', 'csl_refresh', 'LikelihoodConfig',
           'SyntheticLikelihood', 'estimate_synthetic_loglik',
           'FreshEstimator', 'CorrelatedEstimator', 'StepResult', 'mh_step',
           'mcwm_step', 'StageSchedule', 'ProposalConfig', 'run_chain',
           'LIKELIHOOD_METHODS']

logger = logging.getLogger(__name__)

LIKELIHOOD_METHODS = ('ghurye_olkin', 'gaussian')


class VariateStore:
    """
    Uniform variates for ``M`` simulations, partitioned into ``G`` blocks.

    The variates are held as an ``(M,) + per_sim`` array. Blocks are
    contiguous, near-equal runs of its flattened (row-major) form, so a
    block can cut across simulations.

    Parameters
    ----------
    variates : np.ndarray
        Uniforms on ``[0, 1)`` of shape ``(M,) + per_sim``.
    n_blocks : int
        Number of blocks ``G``, between 1 and ``variates.size``.
    """
    def __init__(self, variates: np.ndarray, n_blocks: int):
        self.variates = np.asarray(variates, dtype=float)
        if not 1 <= n_blocks <= self.variates.size:
            raise InvalidInputError(f'need 1 <= G <= {self.variates.size}, '
                                    f'got G={n_blocks}')
        self.n_blocks = n_blocks
        sizes = np.full(n_blocks, self.variates.size // n_blocks)
        sizes[:self.variates.size % n_blocks] += 1
        self.bounds = np.concatenate([[0], np.cumsum(sizes)])

    @property
    def G(self) -> int:
        return self.n_blocks

    @property
    def M(self) -> int:
        return self.variates.shape[0]

    @property
    def per_sim(self) -> int:
        return self.variates.size // self.M

    def block(self, k: int) -> np.ndarray:
        """Copy of block ``k`` (0-based)."""
        return self.variates.reshape(-1)[self.bounds[k]:self.bounds[k + 1]
                                         ].copy()

    def locate(self, sim: int, offset: int = 0) -> Tuple[int, int]:
        """
        Block index and position within the block of a simulation's
        ``offset``-th variate.
        """
        if not 0 <= sim < self.M or not 0 <= offset < self.per_sim:
            raise InvalidInputError('simulation or offset out of range')
        flat = sim * self.per_sim + offset
        k = int(np.searchsorted(self.bounds, flat, side='right')) - 1
        return k, int(flat - self.bounds[k])

    def refresh(self, k: int, rng: np.random.Generator) -> VariateStore:
        """A new store with block ``k`` redrawn; this one is untouched."""
        flat = self.variates.reshape(-1).copy()
        lo, hi = self.bounds[k], self.bounds[k + 1]
        flat[lo:hi] = rng.random(hi - lo)
        return VariateStore(flat.reshape(self.variates.shape), self.n_blocks)

    @staticmethod
    def draw(rng: np.random.Generator, m: int, per_sim: Tuple[int, ...],
             n_blocks: int) -> VariateStore:
        return VariateStore(rng.random((m,) + tuple(per_sim)), n_blocks)

    @staticmethod
    def from_params(model: Model, m: int, n_blocks: int,
                    rng: np.random.Generator,
                    verbose: bool = True) -> VariateStore:
        """
        Draw a store sized for ``m`` simulations of ``model``.

        Parameters
        ----------
        model : Model
            Must have a fixed variate shape.
        m : int
            Number of simulations per estimate.
        n_blocks : int
            Number of blocks ``G``.
        rng : np.random.Generator
            Source of the uniforms.
        verbose : bool
            If True, logs the store layout (default: True).

        Raises
        ------
        InvalidConfigError
            If the model consumes a random stream.
        """
        if not model.supports_csl:
            raise InvalidConfigError([
                ('likelihood.blocks',
                 f'model {model.model_id!r} has no fixed variate budget, '
                 f'correlated estimation is unavailable')])
        store = VariateStore.draw(rng, m, model.variate_shape, n_blocks)
        if verbose:
            logger.info('variate store: M=%d, %d variates per simulation, '
                        'G=%d blocks of about %d', m, store.per_sim,
                        n_blocks, store.variates.size // n_blocks)
        return store


def csl_refresh(store: VariateStore, rng: np.random.Generator
                ) -> Tuple[VariateStore, int]:
    """
    Pick a block uniformly at random and redraw it.

    Returns
    -------
    proposed : VariateStore
        The store with block ``k`` replaced; the input is unchanged.
    k : int
        The refreshed block, 0-based. No random number is spent on
        ``k`` when ``G = 1``.
    """
    k = int(rng.integers(store.G)) if store.G > 1 else 0
    return store.refresh(k, rng), k


@dataclass(frozen=True)
class LikelihoodConfig:
    """
    How a synthetic likelihood is estimated.

    Attributes
    ----------
    n_sims : int
        Simulations per estimate, ``M``.
    method : str
        ``'ghurye_olkin'`` (unbiased, default) or ``'gaussian'``.
    shrinkage : float or None
        Weight ``gamma`` of :func:`~guidedsl.stats.shrink_covariance`.
    n_blocks : int or None
        Block count ``G`` for correlated estimation; fresh variates
        when None.
    """
    n_sims: int
    method: str = 'ghurye_olkin'
    shrinkage: Optional[float] = None
    n_blocks: Optional[int] = None

    def validate(self, d_s: int) -> None:
        problems = []
        if self.method not in LIKELIHOOD_METHODS:
            problems.append(('likelihood.method',
                             f'expected one of {LIKELIHOOD_METHODS}'))
        if self.n_sims < 2:
            problems.append(('likelihood.n_sims', 'need M >= 2'))
        elif self.method == 'ghurye_olkin' and self.n_sims <= d_s + 3:
            problems.append(('likelihood.n_sims',
                             f'unbiased density needs M > d_s + 3 = '
                             f'{d_s + 3}, got {self.n_sims}'))
        if self.shrinkage is not None and not 0 <= self.shrinkage <= 1:
            problems.append(('likelihood.shrinkage', 'must lie in [0, 1]'))
        if self.n_blocks is not None and self.n_blocks < 1:
            problems.append(('likelihood.blocks', 'need G >= 1'))
        if problems:
            raise InvalidConfigError(problems)


def _log_density(s_obs, mu, sigma, m, method) -> float:
    if method == 'gaussian':
        return gaussian_logpdf(s_obs, mu, sigma)
    return ghurye_olkin_logdensity(s_obs, mu, sigma, m)


def estimate_synthetic_loglik(theta, model: Model, s_obs,
                              config: LikelihoodConfig,
                              store: Optional[VariateStore] = None,
                              rng: Optional[np.random.Generator] = None
                              ) -> SLEstimate:
    """
    Estimate the synthetic log-likelihood at one parameter.

    Runs the simulations (driven by ``store`` if given, otherwise by
    fresh variates from ``rng``), summarises them, estimates their
    moments, applies optional shrinkage and the SPD repair, then
    evaluates the plain or unbiased Gaussian log-density at ``s_obs``.

    Parameters
    ----------
    theta : array_like
        Sampling-scale parameter.
    model : Model
        Simulator and summaries.
    s_obs : array_like
        Observed summaries.
    config : LikelihoodConfig
        Estimator settings; ``config.n_sims`` is ignored when a store is
        given.
    store : VariateStore, optional
        Fixed variates for the correlated estimator.
    rng : np.random.Generator, optional
        Needed without a store.

    Returns
    -------
    SLEstimate
        ``log_density`` is ``-inf`` with ``failed=True`` if any
        simulation or summary could not be computed, or if shrinkage is
        configured and a summary has zero sample variance.
    """
    s_obs = as_vector(s_obs, 's_obs')
    m = store.M if store is not None else config.n_sims
    try:
        summaries = model.simulate_summaries(
            theta, variates=None if store is None else store.variates,
            rng=rng, m=m)
        summaries = np.asarray(summaries, dtype=float).reshape(m, -1)
        mu, sigma = estimate_moments(summaries)
    except GuidedSLError as err:
        logger.debug('simulation failed at theta=%s: %s', theta, err)
        return SLEstimate.failure(s_obs.shape[0], m)
    if config.shrinkage is not None:
        try:
            sigma = shrink_covariance(sigma, config.shrinkage)
        except DegenerateCovarianceError as err:
            logger.debug('shrinkage failed at theta=%s: %s', theta, err)
            return SLEstimate.failure(s_obs.shape[0], m)
    sigma, repaired = repair_spd(sigma)
    try:
        logdens = _log_density(s_obs, mu, sigma, m, config.method)
    except GuidedSLError as err:
        logger.debug('density failed at theta=%s: %s', theta, err)
        logdens = -np.inf
    return SLEstimate(mu, sigma, float(logdens), m, repaired, summaries)


class SyntheticLikelihood:
    """
    A model, its observed summaries and estimator settings bundled into
    a callable.

    Attributes
    ----------
    n_calls : int
        Number of estimates computed so far.
    """
    def __init__(self, model: Model, s_obs, config: LikelihoodConfig):
        self.model = model
        self.s_obs = as_vector(s_obs, 's_obs')
        if self.s_obs.shape[0] != model.d_s:
            raise InvalidInputError(f'{model.model_id} has {model.d_s} '
                                    f'summaries, s_obs has '
                                    f'{self.s_obs.shape[0]}')
        config.validate(model.d_s)
        self.config = config
        self.n_calls = 0

    def __call__(self, theta, store: Optional[VariateStore] = None,
                 rng: Optional[np.random.Generator] = None) -> SLEstimate:
        self.n_calls += 1
        return estimate_synthetic_loglik(theta, self.model, self.s_obs,
                                         self.config, store=store, rng=rng)

    def with_n_sims(self, n_sims: int) -> SyntheticLikelihood:
        return SyntheticLikelihood(self.model, self.s_obs,
                                   replace(self.config, n_sims=n_sims))


class FreshEstimator:
    """Estimates from fresh variates on every call."""
    def __init__(self, likelihood: SyntheticLikelihood):
        self.likelihood = likelihood
        self.last_block = -1

    def __call__(self, theta, rng: np.random.Generator) -> SLEstimate:
        return self.likelihood(theta, rng=rng)

    def current(self, theta, rng: np.random.Generator) -> SLEstimate:
        return self.likelihood(theta, rng=rng)

    def commit(self) -> None:
        pass


class CorrelatedEstimator:
    """
    Estimates from a variate store; each call proposes a store with one
    refreshed block, which :meth:`commit` makes current.
    """
    def __init__(self, likelihood: SyntheticLikelihood, store: VariateStore):
        self.likelihood = likelihood
        self.store = store
        self.last_block = -1
        self._proposed: Optional[VariateStore] = None

    def __call__(self, theta, rng: np.random.Generator) -> SLEstimate:
        self._proposed, self.last_block = csl_refresh(self.store, rng)
        return self.likelihood(theta, store=self._proposed)

    def current(self, theta, rng: np.random.Generator) -> SLEstimate:
        """Estimate with the committed store; ``rng`` is not used."""
        return self.likelihood(theta, store=self.store)

    def commit(self) -> None:
        if self._proposed is None:
            raise InvalidInputError('nothing to commit')
        self.store = self._proposed
        self._proposed = None


class StepResult(NamedTuple):
    """
    Outcome of one Metropolis-Hastings iteration.

    ``estimate`` belongs to ``theta`` (the proposal's estimate after an
    acceptance, the current one otherwise); ``proposed`` is the
    proposal's estimate, None when the prior rejected it outright.
    """
    theta: np.ndarray
    estimate: Optional[SLEstimate]
    accepted: bool
    log_alpha: float
    proposed: Optional[SLEstimate] = None
    theta_proposed: Optional[np.ndarray] = None


def _finite_or_neg_inf(x: float) -> float:
    return x if np.isfinite(x) or x == np.inf else -np.inf


def mh_step(theta_cur, loglik_cur: float, proposal, estimator,
            prior: Callable, rng: np.random.Generator,
            canonicalize: Optional[Callable] = None,
            current_estimate: Optional[SLEstimate] = None) -> StepResult:
    """
    One Metropolis-Hastings iteration with an estimated likelihood.

    The proposal is accepted with probability
    ``min(1, exp(l_prop - l_cur + log g(cur|prop) - log g(prop|cur)
    + log prior(prop) - log prior(cur)))``.

    Parameters
    ----------
    theta_cur : array_like
        Current sampling-scale state.
    loglik_cur : float
        Its stored log synthetic likelihood, possibly ``-inf``.
    proposal
        Object with ``propose(theta, rng)`` and
        ``log_ratio(theta_cur, theta_prop)``.
    estimator
        Callable ``(theta, rng) -> SLEstimate`` with a ``commit()``
        method called on acceptance.
    prior : callable
        Sampling-scale log prior density.
    rng : np.random.Generator
        Random stream, consumed in the order proposal, estimator,
        acceptance uniform.
    canonicalize : callable, optional
        Applied to the raw proposal.
    current_estimate : SLEstimate, optional
        Returned as ``estimate`` on rejection.

    Returns
    -------
    StepResult

    Notes
    -----
    A proposal outside the prior support is rejected without
    simulating. A proposal whose estimate is ``-inf`` or failed is
    rejected. A finite proposal is always accepted against a current
    ``-inf``.
    """
    theta_cur = as_vector(theta_cur, 'theta_cur')
    theta_prop = proposal.propose(theta_cur, rng)
    if canonicalize is not None:
        theta_prop = canonicalize(theta_prop)
    lp_prop = prior(theta_prop)
    if not np.isfinite(lp_prop):
        return StepResult(theta_cur, current_estimate, False, -np.inf, None,
                          theta_prop)
    est = estimator(theta_prop, rng)
    l_prop = _finite_or_neg_inf(est.log_density)
    loglik_cur = _finite_or_neg_inf(loglik_cur)
    if l_prop == -np.inf:
        log_alpha = -np.inf
    elif loglik_cur == -np.inf:
        log_alpha = np.inf
    else:
        log_alpha = (l_prop - loglik_cur
                     + proposal.log_ratio(theta_cur, theta_prop)
                     + lp_prop - prior(theta_cur))
    if log_alpha == -np.inf:
        accepted = False
    else:
        accepted = bool(np.log(rng.random()) < log_alpha)
    if accepted:
        estimator.commit()
        return StepResult(theta_prop, est, True, log_alpha, est, theta_prop)
    return StepResult(theta_cur, current_estimate, False, log_alpha, est,
                      theta_prop)


def mcwm_step(theta_cur, proposal, estimator, prior: Callable,
              rng: np.random.Generator,
              canonicalize: Optional[Callable] = None) -> StepResult:
    """
    Markov-chain-within-Metropolis iteration [AR2009]_.

    The current state's likelihood is re-estimated before the usual
    :func:`mh_step`, so each iteration costs two estimates.
    """
    current = estimator(theta_cur, rng)
    estimator.commit()
    return mh_step(theta_cur, current.log_density, proposal, estimator,
                   prior, rng, canonicalize=canonicalize,
                   current_estimate=current)


@dataclass(frozen=True)
class StageSchedule:
    """
    Stage lengths and simulation budget of one chain.

    Attributes
    ----------
    burnin : int
        ``K``, fixed-covariance random-walk iterations.
    mcwm_in_burnin : bool
        Re-estimate the current point during burnin.
    asl : int
        ``T``, guided-proposal iterations.
    adaptive : int
        ``R``, adaptive random-walk iterations.
    n_sims : int
        ``M``, simulations per estimate.
    n_sims_post : int or None
        Reduced ``M`` for the adaptive stage.
    """
    burnin: int
    asl: int
    adaptive: int
    n_sims: int
    mcwm_in_burnin: bool = False
    n_sims_post: Optional[int] = None

    def __post_init__(self):
        problems = []
        for name in ('burnin', 'asl', 'adaptive'):
            if getattr(self, name) < 0:
                problems.append((f'schedule.{name}', 'must be >= 0'))
        if self.asl > 0 and self.burnin < 2:
            problems.append(('schedule.burnin', 'the guided stage needs at '
                             'least 2 burnin iterations'))
        if self.n_sims < 2:
            problems.append(('schedule.n_sims', 'need M >= 2'))
        if self.n_sims_post is not None and self.n_sims_post < 2:
            problems.append(('schedule.n_sims_post', 'need M >= 2'))
        if problems:
            raise InvalidConfigError(problems)

    @property
    def length(self) -> int:
        return self.burnin + self.asl + self.adaptive


@dataclass(frozen=True)
class ProposalConfig:
    """
    Proposal settings.

    Attributes
    ----------
    burnin_cov : np.ndarray
        ``C_init`` on the sampling scale; used during burnin and until
        the adaptive covariance takes over.
    update_interval : int
        Recompute period of the adaptive covariance.
    epsilon : float
        Ridge of the adaptive covariance.
    mode : {'gaussian', 'student'}
        Family of the guided proposal.
    nu : float or None
        Student degrees of freedom; :data:`DEFAULT_STUDENT_NU` when None
        in ``student`` mode, and must be None in ``gaussian`` mode.
    batch_size : int
        Pairs appended between refreshes of the guided proposal.
    bootstrap_on_rejection : bool
        Append a bootstrapped mean summary after a guided rejection.
    """
    burnin_cov: np.ndarray = field(default=None)
    update_interval: int = 30
    epsilon: float = 1e-8
    mode: str = 'gaussian'
    nu: Optional[float] = None
    batch_size: int = 1
    bootstrap_on_rejection: bool = True

    def __post_init__(self):
        problems = []
        if self.mode not in GUIDED_MODES:
            problems.append(('proposal.mode',
                             f'expected one of {GUIDED_MODES}'))
        elif self.mode == 'gaussian' and self.nu is not None:
            problems.append(('proposal.nu', 'only used in student mode'))
        elif self.mode == 'student' and self.nu is None:
            object.__setattr__(self, 'nu', DEFAULT_STUDENT_NU)
        if self.nu is not None and self.nu <= 0:
            problems.append(('proposal.nu', 'must be > 0'))
        if problems:
            raise InvalidConfigError(problems)

    @staticmethod
    def from_sd(sd, **kwargs) -> ProposalConfig:
        """Diagonal ``C_init`` from per-coordinate standard deviations."""
        return ProposalConfig(np.diag(np.asarray(sd, dtype=float) ** 2),
                              **kwargs)


class _Recorder:
    def __init__(self, model: Model):
        self.model = model
        self.rows: List[tuple] = []

    def add(self, step: StepResult, stage: str, estimator):
        theta = step.theta
        try:
            natural = self.model.to_natural(theta)
        except GuidedSLError:
            natural = np.full(len(theta), np.nan)
        # no block was refreshed when the prior rejected outright
        block = estimator.last_block if step.proposed is not None else -1
        self.rows.append((natural, np.array(theta, dtype=float),
                          step.estimate.log_density, step.accepted, stage,
                          block))

    def trace(self) -> ChainTrace:
        names = self.model.param_names
        d = len(names)
        if not self.rows:
            empty = np.empty((0, d))
            return ChainTrace(names, empty, empty, [], [], [], [])
        nat, tr, ll, acc, st, bl = zip(*self.rows)
        return ChainTrace(names, np.array(nat), np.array(tr), ll, acc, st, bl)


def run_chain(schedule: StageSchedule, model: Model, prior: PriorSpec,
              rng_seed, s_obs, theta0, proposal: ProposalConfig,
              likelihood: LikelihoodConfig) -> ChainTrace:
    """
    Run one staged synthetic-likelihood chain.

    Parameters
    ----------
    schedule : StageSchedule
        Stage lengths and ``M``.
    model : Model
        Simulator, summaries and parameter transform.
    prior : PriorSpec
        Prior on the natural or sampling scale.
    rng_seed : int, np.random.SeedSequence or np.random.Generator
        Seed of the chain's only random stream.
    s_obs : array_like
        Observed summaries.
    theta0 : array_like
        Starting point on the sampling scale.
    proposal : ProposalConfig
        Random-walk and guided proposal settings.
    likelihood : LikelihoodConfig
        Estimator settings; its ``n_sims`` is overridden by
        ``schedule.n_sims``.

    Returns
    -------
    ChainTrace
        ``schedule.length`` rows labelled by stage.

    Raises
    ------
    ChainAbortedError
        If the start has zero prior density, or the burnin never moved
        so the guided proposal cannot be built.
    InvalidConfigError
        If correlated estimation is combined with re-estimation of the
        current point, or requested for a stream-driven model.
    """
    rng = np.random.default_rng(rng_seed)
    c_init = as_matrix(proposal.burnin_cov, 'burnin_cov')
    if c_init.shape[0] != model.d_theta:
        raise InvalidConfigError([('proposal.burnin_sd',
                                   f'expected {model.d_theta} entries')])
    if likelihood.n_blocks is not None and schedule.mcwm_in_burnin \
            and schedule.burnin > 0:
        raise InvalidConfigError([('schedule.mcwm', 'cannot re-estimate the '
                                   'current point with a shared variate '
                                   'store')])
    lik = SyntheticLikelihood(model, s_obs,
                              replace(likelihood, n_sims=schedule.n_sims))

    def log_prior(theta):
        return prior.sampling_logpdf(theta, model)

    def make_estimator(lk: SyntheticLikelihood):
        if likelihood.n_blocks is None:
            return FreshEstimator(lk)
        store = VariateStore.from_params(model, lk.config.n_sims,
                                         likelihood.n_blocks, rng)
        return CorrelatedEstimator(lk, store)

    theta = model.canonicalize(as_vector(theta0, 'theta0').copy())
    if not np.isfinite(log_prior(theta)):
        raise ChainAbortedError(f'starting point {theta} has zero prior '
                                f'density')
    estimator = make_estimator(lik)
    current = estimator.current(theta, rng)
    logger.info('chain start at %s, log SL %.4g', theta, current.log_density)
    rec = _Recorder(model)
    visited: List[np.ndarray] = []
    started = time.perf_counter()

    # burnin
    pairs: List[Tuple[np.ndarray, np.ndarray]] = []
    walk = RandomWalkProposal(c_init)
    for _ in range(schedule.burnin):
        if schedule.mcwm_in_burnin:
            step = mcwm_step(theta, walk, estimator, log_prior, rng,
                             model.canonicalize)
        else:
            step = mh_step(theta, current.log_density, walk, estimator,
                           log_prior, rng, model.canonicalize, current)
        theta, current = step.theta, step.estimate
        rec.add(step, 'burnin', estimator)
        visited.append(theta)
        pairs.append((theta, current.mu_hat))
    if schedule.burnin:
        logger.info('burnin done: %d iterations, acceptance %.3f',
                    schedule.burnin,
                    np.mean([r[3] for r in rec.rows[-schedule.burnin:]]))

    # guided proposal
    asl_draws: List[np.ndarray] = []
    if schedule.asl:
        guided = GuidedProposalState(s_obs, model.d_theta, nu=proposal.nu,
                                     batch_size=proposal.batch_size,
                                     mode=proposal.mode)
        for th, s_bar in pairs:
            if np.all(np.isfinite(s_bar)):
                guided.append(th, s_bar)
        if len(guided) < 2 or np.all(np.diag(guided.moments.S_theta) == 0):
            raise ChainAbortedError(
                'burnin never moved: the parameter covariance of the '
                f'{len(guided)} burnin pairs is degenerate, so the guided '
                'proposal cannot be built; lengthen the burnin or widen '
                'its random walk')
        guided.refresh()
        last_summaries = current.summaries
        for _ in range(schedule.asl):
            step = mh_step(theta, current.log_density, guided, estimator,
                           log_prior, rng, model.canonicalize, current)
            theta, current = step.theta, step.estimate
            if step.accepted:
                last_summaries = current.summaries
                s_bar = current.mu_hat
            elif (proposal.bootstrap_on_rejection
                  and last_summaries is not None):
                s_bar = bootstrap_rejection_summary(last_summaries, rng)
            else:
                s_bar = current.mu_hat
            if np.all(np.isfinite(s_bar)):
                guided.append(theta, s_bar)
            rec.add(step, 'asl', estimator)
            visited.append(theta)
            asl_draws.append(theta)
        logger.info('guided stage done: %d iterations, acceptance %.3f, '
                    'last proposal mean %s', schedule.asl,
                    np.mean([r[3] for r in rec.rows[-schedule.asl:]]),
                    guided.m_cond)

    # adaptive random walk
    if schedule.adaptive:
        if schedule.n_sims_post is not None \
                and schedule.n_sims_post != schedule.n_sims:
            lik = lik.with_n_sims(schedule.n_sims_post)
            estimator = make_estimator(lik)
            current = estimator.current(theta, rng)
            logger.info('switched to M=%d, log SL %.4g at current state',
                        schedule.n_sims_post, current.log_density)
        done = schedule.burnin + schedule.asl
        if len(asl_draws) >= 2:
            haario = HaarioState(c_init, burnin=done,
                                 epsilon=proposal.epsilon,
                                 update_interval=proposal.update_interval,
                                 history=asl_draws)
        else:
            haario = HaarioState(c_init,
                                 burnin=max(schedule.burnin,
                                            proposal.update_interval, 2),
                                 epsilon=proposal.epsilon,
                                 update_interval=proposal.update_interval,
                                 history=visited)
        haario.iteration = done
        for _ in range(schedule.adaptive):
            step = mh_step(theta, current.log_density, haario, estimator,
                           log_prior, rng, model.canonicalize, current)
            theta, current = step.theta, step.estimate
            haario.record(theta)
            rec.add(step, 'adaptive', estimator)
        logger.info('adaptive stage done: %d iterations, acceptance %.3f',
                    schedule.adaptive,
                    np.mean([r[3] for r in rec.rows[-schedule.adaptive:]]))
    logger.info('chain finished in %.1f s', time.perf_counter() - started)
    return rec.trace()
