"""
Batch runs of configured experiments and offline diagnosis of traces.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from guidedsl.config import ExperimentConfig
from guidedsl.diagnostics import MIN_DRAWS, chain_report, hpd_interval, \
    retained
from guidedsl.engine import run_chain
from guidedsl.models import Model
from guidedsl.priors import PriorSpec
from guidedsl.traces import ChainTrace, read_trace, write_trace
from guidedsl.utils import ChainAbortedError, InvalidConfigError, as_vector

__all__ = ['observed_summaries', 'start_points', 'run_experiment',
           'diagnose', 'pooled_report']

logger = logging.getLogger(__name__)


def observed_summaries(config: ExperimentConfig, model: Model,
                       seed) -> np.ndarray:
    """
    The observed summary vector of an experiment.

    Parameters
    ----------
    config : ExperimentConfig
        Experiment; its ``observed`` section picks the source.
    model : Model
        The experiment's model.
    seed : np.random.SeedSequence
        Used when the configuration gives no observed-data seed.
    """
    obs = config.observed
    if obs.source == 'summaries':
        s_obs = as_vector(obs.summaries, 'observed.summaries')
    elif obs.source == 'file':
        data = np.loadtxt(obs.path)
        s_obs = as_vector(model.summarize(data), 'observed summaries')
        logger.info('observed data: %d rows from %s', data.shape[0], obs.path)
    else:
        rng = np.random.default_rng(obs.seed if obs.seed is not None
                                    else seed)
        s_obs = as_vector(model.observed_summaries(np.asarray(config.truth),
                                                   rng),
                          'observed summaries')
        logger.info('observed data generated at %s', config.truth)
    if s_obs.shape[0] != model.d_s:
        raise InvalidConfigError([('observed', f'expected {model.d_s} '
                                   f'summaries, got {s_obs.shape[0]}')])
    return s_obs


def start_points(config: ExperimentConfig, model: Model,
                 seeds: Sequence[np.random.SeedSequence]) -> List[np.ndarray]:
    """One sampling-scale start per replicate."""
    start = config.start
    prior: PriorSpec = config.prior
    if start.mode == 'theta':
        return [model.to_transformed(start.theta) for _ in seeds]
    if start.mode == 'theta_transformed':
        return [np.asarray(start.theta, dtype=float) for _ in seeds]
    if start.mode == 'trace':
        if not Path(start.trace).is_file():
            raise InvalidConfigError([('start.trace', f'no trace file at '
                                       f'{start.trace}')])
        trace = read_trace(start.trace).select(start.stage)
        if len(trace) == 0:
            raise InvalidConfigError([('start.stage', f'no {start.stage!r} '
                                       f'rows in {start.trace}')])
        theta = trace.theta_transformed.mean(axis=0)
        logger.info('starting at the %s-stage mean %s of %s', start.stage,
                    model.to_natural(theta), start.trace)
        return [theta.copy() for _ in seeds]
    points = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        if start.mode == 'uniform_box':
            box = np.asarray(start.box, dtype=float)
            natural = rng.uniform(box[:, 0], box[:, 1])
            points.append(model.to_transformed(natural))
        else:
            draw = prior.sample(rng)
            points.append(model.to_transformed(draw)
                          if prior.scale == 'natural' else draw)
    return points


def _run_one(index: int, config: ExperimentConfig, s_obs: np.ndarray,
             theta0: np.ndarray, seed: np.random.SeedSequence):
    model = config.make_model()
    started = time.perf_counter()
    try:
        trace = run_chain(config.schedule, model, config.prior, seed, s_obs,
                          theta0, config.proposal, config.likelihood)
    except ChainAbortedError as err:
        return (index, None, str(err), time.perf_counter() - started,
                model.n_unconverged)
    return (index, trace, None, time.perf_counter() - started,
            model.n_unconverged)


def pooled_report(traces: Sequence[ChainTrace], last: Optional[int] = None,
                  stride: int = 1, level: float = 0.95) -> Dict:
    """Posterior mean and HPD of the retained draws of all chains."""
    kept = [retained(t, last, stride).theta for t in traces]
    draws = np.concatenate(kept) if kept else np.empty((0, 0))
    names = traces[0].param_names if traces else ()
    report = {'n_chains': len(traces), 'n_draws': int(draws.shape[0])}
    if draws.shape[0]:
        report['mean'] = dict(zip(names, draws.mean(axis=0).tolist()))
    if draws.shape[0] >= MIN_DRAWS:
        report['hpd'] = {name: list(hpd_interval(draws[:, j], level))
                         for j, name in enumerate(names)}
    return report


def run_experiment(config: ExperimentConfig, out_dir, threads: int = 1,
                   seed: Optional[int] = None) -> Dict:
    """
    Run every replicate chain of an experiment and write its artifacts.

    Writes ``trace_<i>.tsv`` for each chain that finished and
    ``report.json`` holding per-chain reports, the pooled report,
    aborted chains, counts of unconverged summary fits and the wall time.

    Parameters
    ----------
    config : ExperimentConfig
        Validated experiment.
    out_dir : str or Path
        Output directory, created if needed.
    threads : int
        Worker processes; chains run in this process when 1.
    seed : int, optional
        Overrides ``config.seed``.

    Returns
    -------
    dict
        The report that was written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    model = config.make_model()
    root = np.random.SeedSequence(config.seed if seed is None else seed)
    data_seed, start_seed, chain_seed = root.spawn(3)
    chain_seeds = chain_seed.spawn(config.replicates)
    s_obs = observed_summaries(config, model, data_seed)
    starts = start_points(config, model, start_seed.spawn(config.replicates))
    logger.info('%s: %d chain(s) of %d iterations, observed summaries %s',
                config.name, config.replicates, config.schedule.length, s_obs)

    jobs = [(i, config, s_obs, starts[i], chain_seeds[i])
            for i in range(config.replicates)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
    else:
        results = [_run_one(*job) for job in jobs]

    rep_cfg = config.report
    chains, traces, aborted, unconverged = {}, [], {}, {}
    for index, trace, error, wall, n_unconv in sorted(results,
                                                      key=lambda r: r[0]):
        unconverged[str(index)] = n_unconv
        if n_unconv:
            logger.warning('chain %d: %d summary fit(s) returned the last '
                           'iterate without converging', index, n_unconv)
        if trace is None:
            logger.error('chain %d aborted: %s', index, error)
            aborted[str(index)] = error
            continue
        write_trace(trace, out_dir / f'trace_{index}.tsv')
        report = chain_report(trace, rep_cfg.last, rep_cfg.thin,
                              rep_cfg.level)
        report['wall_time'] = wall
        chains[str(index)] = report
        traces.append(trace)
    report = {
        'experiment': config.name,
        'model': config.model_id,
        'observed_summaries': s_obs.tolist(),
        'chains': chains,
        'pooled': pooled_report(traces, rep_cfg.last, rep_cfg.thin,
                                rep_cfg.level),
        'aborted': aborted,
        'unconverged_summaries': unconverged,
        'wall_time': time.perf_counter() - started,
    }
    with open(out_dir / 'report.json', 'w') as fh:
        json.dump(report, fh, indent=2, default=float)
    logger.info('%s finished in %.1f s: %d chain(s) written to %s',
                config.name, report['wall_time'], len(traces), out_dir)
    return report


def diagnose(paths: Sequence, last: Optional[int] = None, stride: int = 1,
             level: float = 0.95) -> Dict:
    """
    Recompute chain and pooled reports from trace files.

    The numbers equal those :func:`run_experiment` wrote for the same
    traces and report settings, apart from wall times.
    """
    traces = [read_trace(p) for p in paths]
    return {
        'chains': {str(p): chain_report(t, last, stride, level)
                   for p, t in zip(paths, traces)},
        'pooled': pooled_report(traces, last, stride, level),
    }
