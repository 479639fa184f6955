"""
Independent product priors over model parameters.

A prior is declared either on the natural parameter scale or on the
unconstrained sampling scale. The engine always evaluates it on the
sampling scale; natural-scale priors pick up the log-Jacobian of the
model's inverse transform.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
from scipy import stats

from guidedsl.utils import GuidedSLError, InvalidInputError, as_vector

__all__ = ['PriorComponent', 'PriorSpec', 'PRIOR_KINDS']


def _uniform(a, b):
    if not b > a:
        raise InvalidInputError(f'uniform({a}, {b}) needs b > a')
    return stats.uniform(loc=a, scale=b - a)


def _normal(mean, sd):
    if not sd > 0:
        raise InvalidInputError(f'normal sd must be positive, got {sd}')
    return stats.norm(loc=mean, scale=sd)


def _beta(a, b):
    if not (a > 0 and b > 0):
        raise InvalidInputError(f'beta({a}, {b}) needs positive shapes')
    return stats.beta(a, b)


#: Supported component kinds and the number of hyperparameters each takes.
PRIOR_KINDS: Dict[str, Tuple[int, Callable]] = {
    'uniform': (2, _uniform),
    'normal': (2, _normal),
    'beta': (2, _beta),
    'std_normal': (0, lambda: stats.norm()),
}


@dataclass(frozen=True)
class PriorComponent:
    """
    One marginal of a product prior.

    Attributes
    ----------
    kind : str
        One of ``uniform``, ``normal``, ``beta``, ``std_normal``.
    params : tuple of float
        Hyperparameters: ``(a, b)`` for uniform and beta,
        ``(mean, sd)`` for normal, nothing for std_normal.
    """
    kind: str
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise InvalidInputError(f'unknown prior kind {self.kind!r}; '
                                    f'expected one of {sorted(PRIOR_KINDS)}')
        n_params, _ = PRIOR_KINDS[self.kind]
        if len(self.params) != n_params:
            raise InvalidInputError(f'{self.kind} prior takes {n_params} '
                                    f'parameter(s), got {len(self.params)}')

    def frozen(self):
        return PRIOR_KINDS[self.kind][1](*self.params)


class PriorSpec:
    """
    Product of independent marginals.

    Parameters
    ----------
    components : sequence of PriorComponent
        One marginal per parameter, in model order.
    scale : str
        ``'natural'`` or ``'transformed'``: the parameter scale the
        marginals refer to.
    """
    def __init__(self, components: Sequence[PriorComponent],
                 scale: str = 'natural'):
        if scale not in ('natural', 'transformed'):
            raise InvalidInputError(f'prior scale must be natural or '
                                    f'transformed, got {scale!r}')
        self.components = list(components)
        self.scale = scale
        self._dists = [c.frozen() for c in self.components]

    def __len__(self):
        return len(self.components)

    def logpdf(self, theta) -> float:
        """Log-density on the prior's own scale; ``-inf`` off support."""
        theta = as_vector(theta, 'theta')
        if theta.shape[0] != len(self._dists):
            raise InvalidInputError(f'prior has {len(self._dists)} '
                                    f'components, got {theta.shape[0]}')
        total = 0.0
        for dist, x in zip(self._dists, theta):
            lp = dist.logpdf(x)
            if not np.isfinite(lp):
                return -np.inf
            total += lp
        return float(total)

    def sampling_logpdf(self, theta, model) -> float:
        """
        Log-density of the induced prior on ``model``'s sampling scale.

        Natural-scale priors add the log-Jacobian of the inverse
        transform. Points the model cannot map back get ``-inf``.
        """
        if self.scale == 'transformed':
            return self.logpdf(theta)
        try:
            natural = model.to_natural(theta)
        except GuidedSLError:
            return -np.inf
        if not np.all(np.isfinite(natural)):
            return -np.inf
        lp = self.logpdf(natural)
        if not np.isfinite(lp):
            return -np.inf
        return lp + model.log_jacobian(theta)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One draw on the prior's own scale."""
        return np.array([d.rvs(random_state=rng) for d in self._dists])

    def bounds(self) -> np.ndarray:
        """``(d, 2)`` array of support endpoints on the prior's scale."""
        return np.array([d.support() for d in self._dists], dtype=float)

    @staticmethod
    def from_params(entries: Sequence, scale: str = 'natural') -> PriorSpec:
        """
        Build a prior from plain ``[kind, *params]`` lists.

        Parameters
        ----------
        entries : sequence of sequence
            E.g. ``[['uniform', -30, 30], ['beta', 3, 3]]``.
        scale : str
            Parameter scale of the marginals.
        """
        comps = []
        for entry in entries:
            if isinstance(entry, str):
                entry = [entry]
            kind, *params = entry
            comps.append(PriorComponent(str(kind),
                                        tuple(float(p) for p in params)))
        return PriorSpec(comps, scale=scale)
