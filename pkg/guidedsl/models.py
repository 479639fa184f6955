"""
Model bundles: a simulator, its summary statistics and the bijection
between natural parameters and the unconstrained sampling scale.

Chains move on the sampling scale. A model turns a sampling-scale
parameter into ``M`` simulated summary vectors, either from a block of
uniform variates (which the correlated estimator can hold fixed) or,
for simulators without a fixed variate budget, from a random stream.

Models are registered under short string ids in :data:`MODELS`.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import Dict, Optional, Tuple, Type

import numpy as np

from guidedsl.simulators import (BoomBustParams, GkParams, MixtureParams,
                                 StableParams, SupernovaParams,
                                 boombust_simulate, distance_moduli,
                                 draw_redshift_sample, gk_simulate,
                                 mixture_simulate, redshift_bin_centers,
                                 stable_draw, stable_inverse,
                                 stable_transform, uniform_to_normal)
from guidedsl.summaries import (SummarySpec, boombust_summaries,
                                gk_summaries, mcculloch_summaries,
                                mixture_summaries, sort_mixture_means,
                                supernova_summaries)
from guidedsl.utils import InvalidInputError, as_vector

__all__ = ['Model', 'GkModel', 'BoomBustModel', 'MixtureModel',
           'StableModel', 'SupernovaModel', 'MODELS', 'make_model']

logger = logging.getLogger(__name__)

_TINY = np.finfo(float).tiny


class Model(ABC):
    """
    A simulator with summaries and a parameter transform.

    Subclasses set :attr:`model_id`, :attr:`param_names` and
    :attr:`summary_spec`, and implement :meth:`params` and either
    :meth:`data_from_variates` (with a ``variate_shape``) or
    :meth:`data_from_stream`.
    """
    model_id: str = ''
    param_names: Tuple[str, ...] = ()
    summary_spec: SummarySpec

    #: Per-simulation shape of the uniform variates; None when the
    #: simulator consumes a random stream.
    variate_shape: Optional[Tuple[int, ...]] = None

    #: Summaries returned from an iterative fit that hit its iteration
    #: cap, counted over the lifetime of the instance.
    n_unconverged: int = 0

    @property
    def d_theta(self) -> int:
        return len(self.param_names)

    @property
    def d_s(self) -> int:
        return self.summary_spec.d_s

    @property
    def supports_csl(self) -> bool:
        return self.variate_shape is not None

    # transforms; identity unless overridden
    def to_natural(self, theta) -> np.ndarray:
        return as_vector(theta, 'theta').copy()

    def to_transformed(self, natural) -> np.ndarray:
        return as_vector(natural, 'natural').copy()

    def log_jacobian(self, theta) -> float:
        """``log |d natural / d theta|`` at a sampling-scale point."""
        return 0.0

    def canonicalize(self, theta) -> np.ndarray:
        """Map a sampling-scale point to its canonical representative."""
        return theta

    @abstractmethod
    def params(self, natural):
        """The simulator's parameter object for a natural-scale vector."""

    def data_from_variates(self, natural, variates) -> np.ndarray:
        raise NotImplementedError(f'{self.model_id} has no variate form')

    def data_from_stream(self, natural, rng: np.random.Generator,
                         m: int) -> np.ndarray:
        raise NotImplementedError(f'{self.model_id} has no stream form')

    @abstractmethod
    def summarize(self, data) -> np.ndarray:
        """Summaries of one dataset, or of stacked datasets."""

    def draw_variates(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """Fresh uniforms for ``m`` simulations."""
        if self.variate_shape is None:
            raise InvalidInputError(f'{self.model_id} draws from a stream')
        return rng.random((m,) + self.variate_shape)

    def simulate_data(self, natural, rng: np.random.Generator,
                      m: Optional[int] = None) -> np.ndarray:
        """
        Raw datasets at a natural-scale parameter.

        Returns one dataset when ``m`` is None, else ``m`` stacked.
        """
        k = 1 if m is None else m
        if self.variate_shape is None:
            data = self.data_from_stream(natural, rng, k)
        else:
            data = self.data_from_variates(natural, self.draw_variates(rng, k))
        return data[0] if m is None else data

    def simulate_summaries(self, theta, variates=None,
                           rng: Optional[np.random.Generator] = None,
                           m: Optional[int] = None) -> np.ndarray:
        """
        ``(M, d_s)`` simulated summaries at a sampling-scale parameter.

        Parameters
        ----------
        theta : array_like
            Sampling-scale parameter.
        variates : np.ndarray, optional
            Uniforms of shape ``(M,) + variate_shape``. When absent they
            are drawn from ``rng``.
        rng : np.random.Generator, optional
            Needed when ``variates`` is absent.
        m : int, optional
            Number of simulations when ``variates`` is absent.
        """
        natural = self.to_natural(theta)
        if variates is None:
            if rng is None or m is None:
                raise InvalidInputError('need either variates or (rng, m)')
            if self.variate_shape is None:
                return self.summarize(self.data_from_stream(natural, rng, m))
            variates = self.draw_variates(rng, m)
        return self.summarize(self.data_from_variates(natural, variates))

    def observed_summaries(self, natural,
                           rng: np.random.Generator) -> np.ndarray:
        """Summaries of one dataset simulated at ``natural``."""
        return self.summarize(self.simulate_data(natural, rng))

    def __repr__(self):
        return f'{type(self).__name__}()'


class GkModel(Model):
    """g-and-k distribution, all parameters on log scale."""
    model_id = 'gk'
    param_names = ('A', 'B', 'g', 'k')
    summary_spec = SummarySpec('gk', ('s_A', 's_B', 's_g', 's_k'))

    def __init__(self, n_obs: int = 1000, c: float = 0.8):
        self.n_obs = n_obs
        self.c = c
        self.variate_shape = (n_obs,)

    def to_natural(self, theta) -> np.ndarray:
        return np.exp(as_vector(theta, 'theta'))

    def to_transformed(self, natural) -> np.ndarray:
        natural = as_vector(natural, 'natural')
        if np.any(natural <= 0):
            raise InvalidInputError('log-scale parameters must be positive')
        return np.log(natural)

    def log_jacobian(self, theta) -> float:
        return float(np.sum(theta))

    def params(self, natural) -> GkParams:
        a, b, g, k = as_vector(natural, 'natural')
        return GkParams(a, b, g, k, c=self.c)

    def data_from_variates(self, natural, variates) -> np.ndarray:
        return gk_simulate(self.params(natural), uniform_to_normal(variates))

    def summarize(self, data) -> np.ndarray:
        return gk_summaries(data)


class BoomBustModel(Model):
    """Boom-and-bust population counts; simulated from a stream."""
    model_id = 'boombust'
    param_names = ('r', 'kappa', 'alpha', 'beta')
    summary_spec = SummarySpec(
        'boombust', tuple(f'{stat}_{series}'
                          for series in ('y', 'diff', 'ratio')
                          for stat in ('mean', 'var', 'skew', 'kurt')), None)

    def __init__(self, n1: int = 10, n_steps: int = 300, n_discard: int = 50):
        self.n1 = n1
        self.n_steps = n_steps
        self.n_discard = n_discard

    def params(self, natural) -> BoomBustParams:
        r, kappa, alpha, beta = as_vector(natural, 'natural')
        return BoomBustParams(r, kappa, alpha, beta, n1=self.n1)

    def data_from_stream(self, natural, rng, m) -> np.ndarray:
        return boombust_simulate(self.params(natural), rng, size=m,
                                 n_steps=self.n_steps,
                                 n_discard=self.n_discard)

    def summarize(self, data) -> np.ndarray:
        return boombust_summaries(data)


class MixtureModel(Model):
    """
    Two-component bivariate Gaussian mixture; the parameters are the
    two means, canonicalised by coordinate-wise sorting.
    """
    model_id = 'mixture'
    param_names = ('mu1_x', 'mu1_y', 'mu2_x', 'mu2_y')
    summary_spec = SummarySpec('mixture', param_names, None)

    def __init__(self, n_obs: int = 5000, sigma1=((16.0, 0.0), (0.0, 16.0)),
                 sigma2=((16.0, 12.0), (12.0, 16.0)), max_iter: int = 200,
                 tol: float = 1e-8):
        self.n_obs = n_obs
        self.sigma1 = np.asarray(sigma1, dtype=float)
        self.sigma2 = np.asarray(sigma2, dtype=float)
        self.max_iter = max_iter
        self.tol = tol
        self.variate_shape = (n_obs, 3)

    def canonicalize(self, theta) -> np.ndarray:
        return sort_mixture_means(theta)

    def params(self, natural) -> MixtureParams:
        return MixtureParams.from_vector(natural, self.sigma1, self.sigma2)

    def data_from_variates(self, natural, variates) -> np.ndarray:
        v = np.asarray(variates, dtype=float)
        return mixture_simulate(self.params(natural),
                                uniform_to_normal(v[..., :2]), v[..., 2])

    def summarize(self, data) -> np.ndarray:
        out, converged = mixture_summaries(data, self.sigma1, self.sigma2,
                                           self.max_iter, self.tol,
                                           return_converged=True)
        self.n_unconverged += int(converged.size - converged.sum())
        return out


class StableModel(Model):
    """
    Univariate alpha-stable law on the transformed scale of
    :func:`~guidedsl.simulators.stable_transform`.
    """
    model_id = 'stable'
    param_names = ('alpha', 'beta', 'gamma', 'delta')
    summary_spec = SummarySpec('stable', ('S_alpha', 'S_beta', 'S_gamma',
                                          'S_delta'))

    def __init__(self, n_obs: int = 500, perturbed: bool = True,
                 gamma_true: float = 1.0):
        self.n_obs = n_obs
        self.perturbed = perturbed
        self.gamma_true = gamma_true
        self.variate_shape = (n_obs, 2)

    def to_natural(self, theta) -> np.ndarray:
        return stable_inverse(theta)

    def to_transformed(self, natural) -> np.ndarray:
        return stable_transform(natural)

    def log_jacobian(self, theta) -> float:
        # d theta / d natural for the two log-ratio maps, inverted
        a, b, g, _ = self.to_natural(theta)
        da = (1 / (a - 0.5) + np.log(a - 0.5) / (2 - a)) / (2 - a)
        db = (1 / (b + 1) + np.log(b + 1) / (1 - b)) / (1 - b)
        return float(-np.log(da) - np.log(db) + np.log(g))

    def params(self, natural) -> StableParams:
        a, b, g, d = as_vector(natural, 'natural')
        return StableParams(a, b, g, d, perturbed=self.perturbed)

    def data_from_variates(self, natural, variates) -> np.ndarray:
        v = np.asarray(variates, dtype=float)
        u1 = 1.0 - v[..., 0]
        u2 = np.pi * (np.clip(v[..., 1], _TINY, None) - 0.5)
        return stable_draw(self.params(natural), u1, u2)

    def summarize(self, data) -> np.ndarray:
        return mcculloch_summaries(data, self.gamma_true)


class SupernovaModel(Model):
    """
    Distance moduli at 20 binned redshifts of a flat CPL cosmology.

    The sampling scale is ``(log omega_m, w0)``. Only the extreme
    redshifts of a sample set the bins, and the truncated-normal map is
    increasing, so each simulation reads the smallest and largest of its
    uniforms.
    """
    model_id = 'supernova'
    param_names = ('omega_m', 'w0')

    def __init__(self, n_draws: int = 10_000, n_bins: int = 20,
                 wa: float = 0.0, h0: float = 0.7):
        self.n_draws = n_draws
        self.n_bins = n_bins
        self.wa = wa
        self.h0 = h0
        self.variate_shape = (n_draws,)
        self.summary_spec = SummarySpec(
            'supernova', tuple(f'mu_{j}' for j in range(n_bins)), None)

    def to_natural(self, theta) -> np.ndarray:
        theta = as_vector(theta, 'theta')
        return np.array([np.exp(theta[0]), theta[1]])

    def to_transformed(self, natural) -> np.ndarray:
        natural = as_vector(natural, 'natural')
        if natural[0] <= 0:
            raise InvalidInputError('omega_m must be positive')
        return np.array([np.log(natural[0]), natural[1]])

    def log_jacobian(self, theta) -> float:
        return float(as_vector(theta, 'theta')[0])

    def params(self, natural) -> SupernovaParams:
        om, w0 = as_vector(natural, 'natural')
        return SupernovaParams(om, w0, wa=self.wa, h0=self.h0)

    def bin_centers(self, variates) -> np.ndarray:
        u = np.asarray(variates, dtype=float)
        return redshift_bin_centers(draw_redshift_sample(u.min(axis=-1)),
                                    draw_redshift_sample(u.max(axis=-1)),
                                    self.n_bins)

    def data_from_variates(self, natural, variates) -> np.ndarray:
        return distance_moduli(self.bin_centers(variates),
                               self.params(natural))

    def summarize(self, data) -> np.ndarray:
        return supernova_summaries(data, self.n_bins)


#: Registered model classes by id.
MODELS: Dict[str, Type[Model]] = {
    'gk': GkModel,
    'boombust': BoomBustModel,
    'mixture': MixtureModel,
    'stable': StableModel,
    'supernova': SupernovaModel,
}


def make_model(model_id: str, **options) -> Model:
    """
    Instantiate a registered model.

    Raises
    ------
    InvalidInputError
        If ``model_id`` is unknown or an option is not accepted.
    """
    try:
        cls = MODELS[model_id]
    except KeyError:
        raise InvalidInputError(f'unknown model {model_id!r}; expected one '
                                f'of {sorted(MODELS)}') from None
    try:
        return cls(**options)
    except TypeError as err:
        raise InvalidInputError(f'bad options for {model_id}: {err}') from err
