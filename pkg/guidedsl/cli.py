"""
Command-line entry point: run configured experiments, diagnose traces
and simulate from the bundled models.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from guidedsl import __version__
from guidedsl.config import StartConfig, load_config
from guidedsl.diagnostics import report_frame
from guidedsl.harness import diagnose, run_experiment
from guidedsl.models import MODELS, make_model
from guidedsl.utils import GuidedSLError

__all__ = ['build_parser', 'main', 'SMOKE_FACTOR']

logger = logging.getLogger(__name__)

SMOKE_FACTOR = 10


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='guidedsl',
        description='Synthetic-likelihood MCMC with guided and correlated '
                    'proposals.')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    parser.add_argument('--seed', type=int, default=None,
                        help='root seed, overrides the configuration')
    parser.add_argument('--threads', type=int, default=1,
                        help='worker processes for replicate chains')
    parser.add_argument('--out-dir', type=Path, default=Path('runs'),
                        help='directory for traces and reports')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for INFO, -vv for DEBUG')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='run an experiment configuration')
    run.add_argument('config', type=Path, help='TOML experiment file')
    run.add_argument('--smoke', action='store_true',
                     help=f'divide every stage length by {SMOKE_FACTOR}')
    run.add_argument('--start-trace', type=Path, default=None,
                     help='start at a stage mean of this trace file')
    run.add_argument('--start-stage', default='asl',
                     help='stage averaged by --start-trace')

    diag = sub.add_parser('diagnose', help='report on written trace files')
    diag.add_argument('traces', type=Path, nargs='+')
    diag.add_argument('--last', type=int, default=None,
                      help='keep only the final LAST iterations')
    diag.add_argument('--thin', type=int, default=1, help='thinning stride')
    diag.add_argument('--level', type=float, default=0.95,
                      help='HPD probability content')
    diag.add_argument('--json', action='store_true',
                      help='print JSON instead of a table')

    sim = sub.add_parser('simulate', help='simulate from a model')
    sim.add_argument('model', choices=sorted(MODELS))
    sim.add_argument('--params', type=float, nargs='+', required=True,
                     help='natural-scale parameters')
    sim.add_argument('--n', type=int, default=1,
                     help='number of datasets to summarise')
    sim.add_argument('--data', type=Path, default=None,
                     help='also save the first raw dataset here')
    return parser


def _run(args) -> int:
    config = load_config(args.config)
    if args.smoke:
        config = config.scaled(SMOKE_FACTOR)
    if args.start_trace is not None:
        config = replace(config, start=StartConfig(
            mode='trace', trace=args.start_trace, stage=args.start_stage))
    out_dir = args.out_dir / config.name
    report = run_experiment(config, out_dir, threads=args.threads,
                            seed=args.seed)
    print(report_frame(report['chains']).to_string())
    if report['aborted']:
        logger.error('%d chain(s) aborted', len(report['aborted']))
        return 1
    return 0


def _diagnose(args) -> int:
    report = diagnose(args.traces, args.last, args.thin, args.level)
    if args.json:
        print(json.dumps(report, indent=2, default=float))
    else:
        print(report_frame(report['chains']).to_string())
    return 0


def _simulate(args) -> int:
    model = make_model(args.model)
    rng = np.random.default_rng(args.seed)
    natural = np.asarray(args.params, dtype=float)
    if natural.shape[0] != model.d_theta:
        raise GuidedSLError(f'{args.model} takes {model.d_theta} parameters '
                            f'{model.param_names}, got {natural.shape[0]}')
    data = model.simulate_data(natural, rng, m=args.n)
    if args.data is not None:
        np.savetxt(args.data, data[0])
        logger.info('dataset written to %s', args.data)
    summaries = np.atleast_2d(model.summarize(data))
    for row in summaries:
        print('\t'.join(f'{v:.10g}' for v in row))
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[
        min(args.verbose, 2)]
    logging.basicConfig(level=level,
                        format='%(asctime)s - %(levelname)s - %(message)s')
    commands = {'run': _run, 'diagnose': _diagnose, 'simulate': _simulate}
    try:
        return commands[args.command](args)
    except GuidedSLError as err:
        logger.error('%s', err)
        return 2


if __name__ == '__main__':
    sys.exit(main())
