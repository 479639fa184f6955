"""
Raw generators for the five benchmark models.

Every generator except boom-and-bust is a deterministic function of
its parameters and of externally supplied variates, which is what lets
the correlated estimator hold those variates fixed between iterations.
Generators broadcast over leading axes so ``M`` replicates can be
simulated in one call.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr, ndtri

from guidedsl.utils import (InvalidInputError, NumericFailureError,
                            as_vector)

__all__ = ['GkParams', 'BoomBustParams', 'MixtureParams', 'StableParams',
           'SupernovaParams', 'gk_simulate', 'boombust_step',
           'boombust_simulate', 'mixture_simulate', 'stable_draw',
           'stable_transform', 'stable_inverse', 'draw_redshift_sample',
           'redshift_bin_centers', 'supernova_redshifts', 'hubble_rate',
           'comoving_integral', 'supernova_mu', 'distance_moduli',
           'uniform_to_normal', 'C_LIGHT', 'PERTURBED_WINDOW']

logger = logging.getLogger(__name__)

#: Speed of light in km/s.
C_LIGHT = 299792.458

#: Range of alpha in which the perturbed stable sampler uses the
#: alpha = 1 formula.
PERTURBED_WINDOW = (0.97, 1.03)

_TINY = np.finfo(float).tiny


def uniform_to_normal(u) -> np.ndarray:
    """Standard normals from uniforms on ``[0, 1)`` by inversion."""
    return ndtri(np.clip(u, _TINY, None))


# -- g-and-k ---------------------------------------------------------------

@dataclass(frozen=True)
class GkParams:
    """
    Parameters of the g-and-k quantile distribution [RM2002]_.

    ``c`` is customarily held at 0.8.
    """
    A: float
    B: float
    g: float
    k: float
    c: float = 0.8

    def __post_init__(self):
        if not self.B > 0:
            raise InvalidInputError(f'g-and-k needs B > 0, got {self.B}')
        if not self.k > -0.5:
            raise InvalidInputError(f'g-and-k needs k > -0.5, got {self.k}')


def gk_simulate(params: GkParams, normals) -> np.ndarray:
    """
    Apply the g-and-k quantile function to standard normals.

    Parameters
    ----------
    params : GkParams
        Distribution parameters.
    normals : array_like
        Standard normal variates, any shape.

    Returns
    -------
    np.ndarray
        ``A + B [1 + c (1 - e^{-gu}) / (1 + e^{-gu})] (1 + u^2)^k u``
        elementwise, with the shape of ``normals``.
    """
    u = np.asarray(normals, dtype=float)
    skew = 1 + params.c * np.tanh(params.g * u / 2)
    return params.A + params.B * skew * (1 + u ** 2) ** params.k * u


# -- boom-and-bust -----------------------------------------------------------

@dataclass(frozen=True)
class BoomBustParams:
    """Growth rate, threshold, survival probability and immigration rate."""
    r: float
    kappa: float
    alpha: float
    beta: float
    n1: int = 10

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise InvalidInputError(f'alpha must lie in [0, 1], '
                                    f'got {self.alpha}')
        if not self.beta >= 0:
            raise InvalidInputError(f'beta must be >= 0, got {self.beta}')
        if not self.kappa > 0:
            raise InvalidInputError(f'kappa must be > 0, got {self.kappa}')
        if not self.r >= -1:
            raise InvalidInputError(f'r must be >= -1, got {self.r}')


def boombust_step(n, params: BoomBustParams,
                  rng: np.random.Generator) -> np.ndarray:
    """
    One transition of the boom-and-bust population.

    Below or at the threshold the population grows as
    ``Poisson(n (1 + r))``; above it each individual survives with
    probability ``alpha``. Immigration ``Poisson(beta)`` is added in both
    regimes.
    """
    n = np.asarray(n, dtype=np.int64)
    boom = n <= params.kappa
    grown = rng.poisson(np.where(boom, n * (1 + params.r), 0.0))
    survived = rng.binomial(np.where(boom, 0, n), params.alpha)
    return grown + survived + rng.poisson(params.beta, size=n.shape)


def boombust_simulate(params: BoomBustParams, rng: np.random.Generator,
                      size: Optional[int] = None, n_steps: int = 300,
                      n_discard: int = 50) -> np.ndarray:
    """
    Simulate boom-and-bust population counts.

    The chain starts at ``params.n1`` and runs for ``n_steps`` values;
    the first ``n_discard`` are dropped as transient.

    Parameters
    ----------
    params : BoomBustParams
        Model parameters.
    rng : np.random.Generator
        Random stream; the number of variates consumed depends on the
        path, so there is no fixed-variate form of this simulator.
    size : int, optional
        Number of independent replicates.
    n_steps : int
        Length of the simulated series including the start (default: 300).
    n_discard : int
        Leading values discarded (default: 50).

    Returns
    -------
    np.ndarray
        Integer counts of shape ``(n_steps - n_discard,)``, or
        ``(size, n_steps - n_discard)`` when ``size`` is given.
    """
    shape = () if size is None else (size,)
    out = np.empty(shape + (n_steps,), dtype=np.int64)
    n = np.full(shape, params.n1, dtype=np.int64)
    out[..., 0] = n
    for t in range(1, n_steps):
        n = boombust_step(n, params, rng)
        out[..., t] = n
    return out[..., n_discard:]


# -- Gaussian mixture --------------------------------------------------------

@dataclass(frozen=True)
class MixtureParams:
    """
    Two-component bivariate Gaussian mixture with known covariances and
    equal weights.
    """
    mu1: Tuple[float, float]
    mu2: Tuple[float, float]
    sigma1: Tuple[Tuple[float, float], Tuple[float, float]] = \
        ((16.0, 0.0), (0.0, 16.0))
    sigma2: Tuple[Tuple[float, float], Tuple[float, float]] = \
        ((16.0, 12.0), (12.0, 16.0))

    @staticmethod
    def from_vector(theta, sigma1=None, sigma2=None) -> MixtureParams:
        theta = as_vector(theta, 'theta')
        kwargs = {}
        if sigma1 is not None:
            kwargs['sigma1'] = tuple(map(tuple, np.asarray(sigma1)))
        if sigma2 is not None:
            kwargs['sigma2'] = tuple(map(tuple, np.asarray(sigma2)))
        return MixtureParams((theta[0], theta[1]), (theta[2], theta[3]),
                             **kwargs)


def mixture_simulate(params: MixtureParams, normals, picks) -> np.ndarray:
    """
    Draw points from a two-component mixture given its variates.

    Parameters
    ----------
    params : MixtureParams
        Means and covariances.
    normals : array_like
        Standard normals of shape ``(..., n, 2)``.
    picks : array_like
        Uniforms of shape ``(..., n)``; a value below 0.5 selects the
        first component.

    Returns
    -------
    np.ndarray
        Points of shape ``(..., n, 2)``.
    """
    z = np.asarray(normals, dtype=float)
    first = np.asarray(picks)[..., None] < 0.5
    l1 = np.linalg.cholesky(np.asarray(params.sigma1, dtype=float))
    l2 = np.linalg.cholesky(np.asarray(params.sigma2, dtype=float))
    x1 = np.asarray(params.mu1, dtype=float) + z @ l1.T
    x2 = np.asarray(params.mu2, dtype=float) + z @ l2.T
    return np.where(first, x1, x2)


# -- alpha-stable ------------------------------------------------------------

@dataclass(frozen=True)
class StableParams:
    """
    Parameters of a univariate alpha-stable law.

    When ``perturbed`` is True the sampler switches to the ``alpha = 1``
    formula anywhere inside :data:`PERTURBED_WINDOW`.
    """
    alpha: float
    beta: float
    gamma: float = 1.0
    delta: float = 0.0
    perturbed: bool = False

    def __post_init__(self):
        if not 0.5 < self.alpha <= 2:
            raise InvalidInputError(f'alpha must lie in (0.5, 2], '
                                    f'got {self.alpha}')
        if not -1 <= self.beta <= 1:
            raise InvalidInputError(f'beta must lie in [-1, 1], '
                                    f'got {self.beta}')
        if not self.gamma > 0:
            raise InvalidInputError(f'gamma must be > 0, got {self.gamma}')

    @property
    def uses_unit_branch(self) -> bool:
        if self.perturbed:
            lo, hi = PERTURBED_WINDOW
            return lo <= self.alpha <= hi
        return self.alpha == 1


def stable_draw(params: StableParams, u1, u2) -> np.ndarray:
    """
    Chambers-Mallows-Stuck sampler [CMS1976]_ with the ``alpha = 1``
    branch as corrected in [Wer1996]_.

    Parameters
    ----------
    params : StableParams
        Distribution parameters.
    u1 : array_like
        Uniforms on ``(0, 1]``; ``w = -log(u1)`` is standard exponential.
    u2 : array_like
        Uniforms on ``(-pi/2, pi/2)``.

    Returns
    -------
    np.ndarray
        Stable variates, broadcast from ``u1`` and ``u2``.
    """
    w = -np.log(np.asarray(u1, dtype=float))
    u2 = np.asarray(u2, dtype=float)
    a, b = params.alpha, params.beta
    if params.uses_unit_branch:
        # Weron form: w cos(u2) / (pi/2 + b u2) under the log, with no
        # leading pi/2 factor, also in the perturbed window
        half_pi_bu = np.pi / 2 + b * u2
        y = 2 / np.pi * (half_pi_bu * np.tan(u2)
                         - b * np.log(w * np.cos(u2) / half_pi_bu))
        return (params.gamma * y
                + 2 / np.pi * b * params.gamma * np.log(params.gamma)
                + params.delta)
    t = b * np.tan(np.pi * a / 2)
    shift = np.arctan(t) / a
    scale = (1 + t ** 2) ** (1 / (2 * a))
    y = (scale * np.sin(a * (u2 + shift)) / np.cos(u2) ** (1 / a)
         * (np.cos(u2 - a * (u2 + shift)) / w) ** ((1 - a) / a))
    return params.gamma * y + params.delta


def _log_ratio_map(x, c):
    return np.log(x) / (c - x)


def _invert_log_ratio(y: float, c: float) -> float:
    """Solve ``log(x) / (c - x) = y`` for ``x`` in ``(0, c)``; c > 1."""
    if y == 0:
        return 1.0
    try:
        if y < 0:
            # t = log x lies in [c y, 0]
            t = optimize.brentq(lambda t: t - y * (c - np.exp(t)), c * y, 0.0,
                                xtol=1e-15, maxiter=200)
            return float(np.exp(t))
        # v = c - x lies in (0, c - 1]
        v = optimize.brentq(lambda v: np.log(c - v) - y * v, 0.0, c - 1,
                            xtol=1e-300, maxiter=200)
        return float(c - v)
    except (ValueError, RuntimeError) as err:
        raise NumericFailureError(f'cannot invert transform at {y}: '
                                  f'{err}') from err


def stable_transform(natural) -> np.ndarray:
    """
    Map ``(alpha, beta, gamma, delta)`` to the unconstrained scale.

    Uses ``log(alpha - 0.5) / (2 - alpha)``,
    ``log(beta + 1) / (1 - beta)``, ``log(gamma)`` and ``delta``; the
    first two are strictly increasing.
    """
    alpha, beta, gamma, delta = as_vector(natural, 'natural')
    if not (0.5 < alpha < 2 and -1 < beta < 1 and gamma > 0):
        raise InvalidInputError(f'{natural} is outside the transformable box')
    return np.array([_log_ratio_map(alpha - 0.5, 1.5),
                     _log_ratio_map(beta + 1, 2.0), np.log(gamma), delta])


def stable_inverse(transformed) -> np.ndarray:
    """
    Inverse of :func:`stable_transform`.

    The first two coordinates have no closed-form inverse and are solved
    with Brent's method.

    Raises
    ------
    NumericFailureError
        If the root finder does not converge.
    """
    a_t, b_t, g_t, d_t = as_vector(transformed, 'transformed')
    return np.array([0.5 + _invert_log_ratio(a_t, 1.5),
                     _invert_log_ratio(b_t, 2.0) - 1,
                     np.exp(g_t), d_t])


# -- supernova cosmology -----------------------------------------------------

@dataclass(frozen=True)
class SupernovaParams:
    """
    Flat-universe cosmology with a CPL dark-energy equation of state.
    """
    omega_m: float
    w0: float
    wa: float = 0.0
    h0: float = 0.7

    def __post_init__(self):
        if not 0 < self.omega_m <= 1:
            raise InvalidInputError(f'omega_m must lie in (0, 1], '
                                    f'got {self.omega_m}')

    @property
    def hubble_constant(self) -> float:
        return 100.0 * self.h0


def hubble_rate(z, params: SupernovaParams) -> np.ndarray:
    """Dimensionless expansion rate ``E(z)``."""
    zp1 = 1 + np.asarray(z, dtype=float)
    om = params.omega_m
    de = ((1 - om) * zp1 ** (3 * (1 + params.w0 + params.wa))
          * np.exp(-3 * params.wa * (zp1 - 1) / zp1))
    return np.sqrt(om * zp1 ** 3 + de)


def comoving_integral(z: float, params: SupernovaParams,
                      epsrel: float = 1e-8) -> float:
    """
    ``int_0^z dz' / E(z')`` by adaptive quadrature.

    Raises
    ------
    NumericFailureError
        If the quadrature reports a problem.
    """
    res = integrate.quad(lambda zp: 1.0 / hubble_rate(zp, params), 0.0, z,
                         epsrel=epsrel, full_output=1)
    if len(res) > 3:
        raise NumericFailureError(f'quadrature failed at z={z}: {res[3]}')
    return float(res[0])


def supernova_mu(z: float, params: SupernovaParams) -> float:
    """
    Distance modulus at redshift ``z``.

    Parameters
    ----------
    z : float
        Redshift, strictly positive.
    params : SupernovaParams
        Cosmology.

    Returns
    -------
    float
        ``5 log10(c (1 + z) / H0 * int_0^z dz'/E(z')) + 25``, the
        luminosity distance being in Mpc.

    Raises
    ------
    InvalidInputError
        If ``z <= 0``.
    NumericFailureError
        If the quadrature does not converge.
    """
    if not z > 0:
        raise InvalidInputError(f'redshift must be positive, got {z}')
    d_l = C_LIGHT * (1 + z) / params.hubble_constant * comoving_integral(
        z, params)
    return float(5 * np.log10(d_l) + 25)


def distance_moduli(z, params: SupernovaParams,
                    epsrel: float = 1e-8) -> np.ndarray:
    """
    Vectorised :func:`supernova_mu` for an array of redshifts.

    Substituting ``z' = z t`` puts every integral on ``[0, 1]`` so a single
    vector-valued quadrature covers all redshifts.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise InvalidInputError('redshifts must be positive')
    flat = z.ravel()
    res, _, info = integrate.quad_vec(
        lambda t: flat / hubble_rate(flat * t, params), 0.0, 1.0,
        epsrel=epsrel, full_output=True)
    if not info.success:
        raise NumericFailureError(f'vector quadrature failed: {info.message}')
    d_l = C_LIGHT * (1 + flat) / params.hubble_constant * res
    return (5 * np.log10(d_l) + 25).reshape(z.shape)


def draw_redshift_sample(uniforms, lower: float = 0.01, upper: float = 1.2,
                         mean: float = 0.5, sd: float = 0.05) -> np.ndarray:
    """
    Truncated normal redshifts by inversion of uniforms on ``[0, 1)``.

    The map is increasing in the uniform, so the smallest and largest
    redshifts of a sample come from its smallest and largest uniforms.
    """
    pa = ndtr((lower - mean) / sd)
    pb = ndtr((upper - mean) / sd)
    u = np.asarray(uniforms, dtype=float)
    z = mean + sd * ndtri(pa + u * (pb - pa))
    return np.clip(z, lower, upper)


def redshift_bin_centers(z_min, z_max, n_bins: int = 20) -> np.ndarray:
    """Centres of ``n_bins`` equal-width bins spanning ``[z_min, z_max]``."""
    z_min = np.asarray(z_min, dtype=float)[..., None]
    width = (np.asarray(z_max, dtype=float)[..., None] - z_min) / n_bins
    return z_min + (np.arange(n_bins) + 0.5) * width


def supernova_redshifts(rng: np.random.Generator, n_draws: int = 10_000,
                        n_bins: int = 20) -> np.ndarray:
    """
    Redshift bin centres for one synthetic supernova survey.

    Draws ``n_draws`` truncated normal redshifts and returns the centres
    of ``n_bins`` equal-width bins spanning their range, ascending.
    """
    z = draw_redshift_sample(rng.random(n_draws))
    return redshift_bin_centers(z.min(), z.max(), n_bins)
