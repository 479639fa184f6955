"""
Posterior diagnostics computed from chain traces: effective sample
size, highest-posterior-density intervals, thinning and the per-chain
report.
"""
from __future__ import annotations

import logging
from math import ceil
from typing import Dict, NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy import fft

from guidedsl.traces import STAGES, ChainTrace
from guidedsl.utils import InvalidInputError

__all__ = ['EssReport', 'autocorrelation', 'ess', 'ess_min',
           'hpd_interval', 'thin', 'retained', 'chain_report',
           'report_frame']

logger = logging.getLogger(__name__)

MIN_DRAWS = 100


class EssReport(NamedTuple):
    """
    Effective sample sizes of the columns of a trace.

    Attributes
    ----------
    min_ess : float
        Smallest per-parameter ESS.
    ess : np.ndarray
        Per-parameter ESS.
    degenerate : np.ndarray
        True for constant columns, whose ESS is set to 1.
    """
    min_ess: float
    ess: np.ndarray
    degenerate: np.ndarray


def autocorrelation(x) -> np.ndarray:
    """Sample autocorrelation at every lag, computed by FFT."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    centred = x - x.mean()
    size = fft.next_fast_len(2 * n)
    f = fft.rfft(centred, n=size)
    acov = fft.irfft(f * np.conjugate(f), n=size)[:n] / n
    return acov / acov[0]


def ess(x) -> float:
    """
    Effective sample size of one column [Gey1992]_.

    Computes ``n / (1 + 2 sum_k rho_k)`` where the sum is truncated by
    Geyer's initial positive sequence: autocorrelations are added in
    pairs ``rho_2m + rho_2m+1`` while the pair sum stays positive.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if np.ptp(x) == 0:
        return 1.0
    rho = autocorrelation(x)
    if n % 2:
        rho = rho[:-1]
    pair_sums = rho[0::2] + rho[1::2]
    stop = np.argmax(pair_sums <= 0) if np.any(pair_sums <= 0) \
        else pair_sums.shape[0]
    tau = -1.0 + 2.0 * np.sum(pair_sums[:stop])
    return float(n / max(tau, 1.0 / n))


def _columns(draws) -> np.ndarray:
    if isinstance(draws, ChainTrace):
        return draws.theta
    if isinstance(draws, pd.DataFrame):
        return draws.to_numpy(dtype=float)
    x = np.asarray(draws, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def ess_min(draws) -> EssReport:
    """
    Per-parameter ESS and their minimum.

    Parameters
    ----------
    draws : ChainTrace, pandas.DataFrame or array_like
        ``(n, d)`` post-burnin draws; a trace contributes its
        natural-scale parameters.

    Returns
    -------
    EssReport

    Raises
    ------
    InvalidInputError
        With fewer than 100 draws.
    """
    x = _columns(draws)
    if x.shape[0] < MIN_DRAWS:
        raise InvalidInputError(f'ESS needs at least {MIN_DRAWS} draws, '
                                f'got {x.shape[0]}')
    values = np.array([ess(col) for col in x.T])
    degenerate = np.ptp(x, axis=0) == 0
    if degenerate.any():
        logger.warning('%d constant column(s); their ESS is set to 1',
                       int(degenerate.sum()))
    return EssReport(float(values.min()), values, degenerate)


def hpd_interval(samples, level: float = 0.95):
    """
    Shortest interval holding ``ceil(level * n)`` of the sorted samples.

    Ties go to the interval with the lowest lower end.

    Parameters
    ----------
    samples : array_like
        At least 100 draws of one parameter.
    level : float
        Probability content, in ``(0, 1]`` (default: 0.95).

    Returns
    -------
    (float, float)
        Lower and upper ends.
    """
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    n = x.shape[0]
    if n < MIN_DRAWS:
        raise InvalidInputError(f'HPD needs at least {MIN_DRAWS} samples, '
                                f'got {n}')
    if not 0 < level <= 1:
        raise InvalidInputError(f'level must lie in (0, 1], got {level}')
    k = max(int(ceil(level * n - 1e-9)), 1)
    widths = x[k - 1:] - x[:n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def thin(trace, stride: int):
    """
    Keep rows ``0, stride, 2 stride, ...``.

    Works on :class:`ChainTrace`, DataFrames and arrays.
    """
    if stride < 1:
        raise InvalidInputError(f'stride must be >= 1, got {stride}')
    if isinstance(trace, (pd.DataFrame, pd.Series)):
        return trace.iloc[::stride]
    return trace[::stride]


def retained(trace: ChainTrace, last: Optional[int] = None,
             stride: int = 1) -> ChainTrace:
    """
    Draws that enter a report: the final ``last`` iterations (default:
    the final stage that ran), thinned by ``stride``.
    """
    if last is None:
        ran = [s for s in STAGES if np.any(trace.stage == s)]
        kept = trace.select(ran[-1]) if ran else trace
    else:
        kept = trace.last(last)
    return thin(kept, stride)


def chain_report(trace: ChainTrace, last: Optional[int] = None,
                 stride: int = 1, level: float = 0.95) -> Dict:
    """
    Posterior summary of one chain.

    Parameters
    ----------
    trace : ChainTrace
        A full chain.
    last : int, optional
        Keep only the final ``last`` iterations (default: all
        iterations of the final stage that ran).
    stride : int
        Thinning stride applied after ``last`` (default: 1).
    level : float
        HPD probability content (default: 0.95).

    Returns
    -------
    dict
        Posterior means, HPD intervals, per-parameter ESS, minESS,
        stage acceptance rates and the number of retained draws.
    """
    kept = retained(trace, last, stride)
    report = {
        'n_draws': len(kept),
        'acceptance': {s: trace.acceptance_rate(s) for s in STAGES
                       if np.any(trace.stage == s)},
        'mean': dict(zip(trace.param_names,
                         kept.theta.mean(axis=0).tolist()))
        if len(kept) else {},
    }
    if len(kept) >= MIN_DRAWS:
        er = ess_min(kept)
        report['hpd'] = {name: list(hpd_interval(kept.theta[:, j], level))
                         for j, name in enumerate(trace.param_names)}
        report['ess'] = dict(zip(trace.param_names, er.ess.tolist()))
        report['min_ess'] = er.min_ess
        if er.degenerate.any():
            report['constant'] = [n for n, flag in
                                  zip(trace.param_names, er.degenerate)
                                  if flag]
    else:
        logger.warning('only %d retained draws; HPD and ESS skipped',
                       len(kept))
    return report


def report_frame(reports: Dict[str, Dict]) -> pd.DataFrame:
    """
    Tabulate chain reports as ``mean (lo, hi)`` cells, one row per chain.
    """
    rows = {}
    for chain, rep in reports.items():
        row = {}
        for name, mean in rep.get('mean', {}).items():
            lo, hi = rep.get('hpd', {}).get(name, (np.nan, np.nan))
            row[name] = f'{mean:.3f} ({lo:.3f}, {hi:.3f})'
        row['minESS'] = rep.get('min_ess', np.nan)
        for stage, rate in rep.get('acceptance', {}).items():
            row[f'acc_{stage}'] = rate
        rows[chain] = row
    return pd.DataFrame.from_dict(rows, orient='index')
