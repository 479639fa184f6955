"""
Experiment configuration files.

One TOML file describes one experiment: the model, how the observed
summaries are obtained, the prior, where chains start, the stage
schedule, the proposal and likelihood settings and how the report is
computed. :meth:`ExperimentConfig.from_dict` validates every field and
reports all problems at once, each with its dotted path.
"""
from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from guidedsl.engine import LIKELIHOOD_METHODS, LikelihoodConfig, \
    ProposalConfig, StageSchedule
from guidedsl.models import MODELS, Model, make_model
from guidedsl.priors import PRIOR_KINDS, PriorSpec
from guidedsl.utils import GuidedSLError, InvalidConfigError

__all__ = ['ObservedConfig', 'StartConfig', 'ReportConfig',
           'ExperimentConfig', 'load_config', 'OBSERVED_SOURCES',
           'START_MODES']

logger = logging.getLogger(__name__)

OBSERVED_SOURCES = ('generate', 'file', 'summaries')
START_MODES = ('theta', 'theta_transformed', 'uniform_box', 'prior', 'trace')
PROPOSAL_KEYS = ('burnin_sd', 'update_interval', 'epsilon', 'mode', 'nu',
                 'batch_size', 'bootstrap_on_rejection')


@dataclass(frozen=True)
class ObservedConfig:
    """
    Where the observed summaries come from.

    ``generate`` simulates one dataset at the truth with its own seed,
    ``file`` reads whitespace-delimited data and summarises it, and
    ``summaries`` gives the summary vector directly.
    """
    source: str = 'generate'
    seed: Optional[int] = None
    path: Optional[Path] = None
    summaries: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class StartConfig:
    """How each replicate chain picks its starting point."""
    mode: str = 'theta'
    theta: Optional[Tuple[float, ...]] = None
    box: Optional[Tuple[Tuple[float, float], ...]] = None
    trace: Optional[Path] = None
    stage: str = 'asl'


@dataclass(frozen=True)
class ReportConfig:
    """Which draws enter the report, and the HPD level."""
    last: Optional[int] = None
    thin: int = 1
    level: float = 0.95


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A validated experiment.

    Build one with :meth:`from_dict` or :func:`load_config`.
    """
    model_id: str
    model_options: Dict[str, Any]
    prior: PriorSpec
    observed: ObservedConfig
    start: StartConfig
    schedule: StageSchedule
    proposal: ProposalConfig
    likelihood: LikelihoodConfig
    report: ReportConfig = field(default_factory=ReportConfig)
    truth: Optional[Tuple[float, ...]] = None
    replicates: int = 1
    seed: int = 0
    name: str = 'experiment'

    def make_model(self) -> Model:
        return make_model(self.model_id, **self.model_options)

    def scaled(self, factor: int) -> ExperimentConfig:
        """
        The same experiment with every stage length divided by
        ``factor``, keeping the minimum each stage needs.
        """
        if factor < 1:
            raise InvalidConfigError([('smoke', 'factor must be >= 1')])
        s = self.schedule
        burnin = s.burnin if s.burnin == 0 else max(s.burnin // factor,
                                                   2 if s.asl else 1)
        asl = s.asl if s.asl == 0 else max(s.asl // factor, 1)
        adaptive = s.adaptive if s.adaptive == 0 else max(
            s.adaptive // factor, 1)
        report = self.report
        if report.last is not None:
            report = replace(report, last=max(report.last // factor, 1))
        return replace(self, schedule=replace(s, burnin=burnin, asl=asl,
                                              adaptive=adaptive),
                       report=report, name=f'{self.name}-smoke{factor}')

    @staticmethod
    def from_dict(raw: Dict[str, Any], base_dir: Optional[Path] = None,
                  name: str = 'experiment') -> ExperimentConfig:
        """
        Validate a parsed configuration.

        Parameters
        ----------
        raw : dict
            Parsed TOML.
        base_dir : Path, optional
            Directory that relative paths are resolved against.
        name : str
            Experiment name used for output files.

        Raises
        ------
        InvalidConfigError
            Listing every problem found.
        """
        return _Validator(raw, base_dir or Path('.'), name).build()


def load_config(path) -> ExperimentConfig:
    """Read and validate a TOML experiment file."""
    path = Path(path)
    try:
        with open(path, 'rb') as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as err:
        raise InvalidConfigError([(str(path), str(err))]) from err
    logger.info('loaded configuration %s', path)
    return ExperimentConfig.from_dict(raw, path.parent, path.stem)


_MISSING = object()


class _Validator:
    def __init__(self, raw: Dict[str, Any], base_dir: Path, name: str):
        self.raw = raw
        self.base_dir = base_dir
        self.name = name
        self.problems: List[Tuple[str, str]] = []

    def fail(self, path: str, message: str) -> None:
        self.problems.append((path, message))

    def unknown(self, table: Dict, section: str, known) -> None:
        for key in table:
            if key not in known:
                self.fail(f'{section}.{key}', 'unknown key')

    def section(self, key: str) -> Dict[str, Any]:
        value = self.raw.get(key, {})
        if not isinstance(value, dict):
            self.fail(key, 'must be a table')
            return {}
        return value

    def get(self, table: Dict, path: str, kind, default=_MISSING):
        key = path.rsplit('.', 1)[-1]
        if key not in table:
            if default is _MISSING:
                self.fail(path, 'is required')
                return None
            return default
        value = table[key]
        if kind is float and isinstance(value, int) \
                and not isinstance(value, bool):
            value = float(value)
        if kind is not None and not isinstance(value, kind) \
                or isinstance(value, bool) and kind in (int, float):
            self.fail(path, f'expected {getattr(kind, "__name__", kind)}, '
                            f'got {value!r}')
            return None
        return value

    def vector(self, table: Dict, path: str, length: Optional[int],
               default=_MISSING) -> Optional[Tuple[float, ...]]:
        value = self.get(table, path, list, default)
        if value is None:
            return None
        try:
            vec = tuple(float(v) for v in value)
        except (TypeError, ValueError):
            self.fail(path, 'must be a list of numbers')
            return None
        if length is not None and len(vec) != length:
            self.fail(path, f'expected {length} values, got {len(vec)}')
            return None
        return vec

    def build(self) -> ExperimentConfig:
        raw = self.raw
        model_id = self.get(raw, 'model', str)
        options = self.section('model_options')
        model = None
        if model_id is not None:
            if model_id not in MODELS:
                self.fail('model', f'unknown model {model_id!r}; expected '
                                   f'one of {sorted(MODELS)}')
            else:
                try:
                    model = make_model(model_id, **options)
                except GuidedSLError as err:
                    self.fail('model_options', str(err))
        d = model.d_theta if model else None
        d_s = model.d_s if model else None

        replicates = self.get(raw, 'replicates', int, 1)
        if replicates is not None and replicates < 1:
            self.fail('replicates', 'must be >= 1')
        seed = self.get(raw, 'seed', int, 0)
        truth = self.vector(self.section('truth'), 'truth.theta', d, None)

        observed = self.observed(d_s, truth)
        prior = self.prior(d)
        start = self.start(d)
        schedule = self.schedule()
        proposal = self.proposal(d)
        likelihood = self.likelihood(schedule, model)
        report = self.report()

        if self.problems:
            raise InvalidConfigError(self.problems)
        return ExperimentConfig(
            model_id=model_id, model_options=dict(options), prior=prior,
            observed=observed, start=start, schedule=schedule,
            proposal=proposal, likelihood=likelihood, report=report,
            truth=truth, replicates=replicates, seed=seed, name=self.name)

    def observed(self, d_s, truth) -> Optional[ObservedConfig]:
        table = self.section('observed')
        source = self.get(table, 'observed.source', str, 'generate')
        if source not in OBSERVED_SOURCES:
            self.fail('observed.source', f'expected one of {OBSERVED_SOURCES}')
            return None
        seed = self.get(table, 'observed.seed', int, None)
        path = self.get(table, 'observed.path', str, None)
        summaries = self.vector(table, 'observed.summaries', d_s, None)
        if source == 'generate' and truth is None:
            self.fail('truth.theta', 'is required to generate observed data')
        if source == 'file':
            if path is None:
                self.fail('observed.path', 'is required for source "file"')
            else:
                path = self.base_dir / path
        if source == 'summaries' and summaries is None:
            self.fail('observed.summaries',
                      'is required for source "summaries"')
        return ObservedConfig(source, seed, Path(path) if path else None,
                              summaries)

    def prior(self, d) -> Optional[PriorSpec]:
        table = self.section('prior')
        scale = self.get(table, 'prior.scale', str, 'natural')
        comps = self.get(table, 'prior.components', list)
        if comps is None:
            return None
        if d is not None and len(comps) != d:
            self.fail('prior.components', f'expected {d} entries, '
                                          f'got {len(comps)}')
        for i, entry in enumerate(comps):
            kind = entry if isinstance(entry, str) else (
                entry[0] if isinstance(entry, list) and entry else None)
            if kind not in PRIOR_KINDS:
                self.fail(f'prior.components[{i}]',
                          f'unknown kind; expected one of '
                          f'{sorted(PRIOR_KINDS)}')
        try:
            return PriorSpec.from_params(comps, scale=scale)
        except (GuidedSLError, TypeError, ValueError) as err:
            self.fail('prior', str(err))
            return None

    def start(self, d) -> Optional[StartConfig]:
        table = self.section('start')
        mode = self.get(table, 'start.mode', str, 'theta')
        if mode not in START_MODES:
            self.fail('start.mode', f'expected one of {START_MODES}')
            return None
        theta = self.vector(table, 'start.theta', d, None)
        if mode in ('theta', 'theta_transformed') and theta is None:
            self.fail('start.theta', f'is required for mode {mode!r}')
        box = None
        if mode == 'uniform_box':
            rows = self.get(table, 'start.box', list)
            if rows is not None:
                try:
                    box = tuple((float(lo), float(hi)) for lo, hi in rows)
                except (TypeError, ValueError):
                    self.fail('start.box', 'must be a list of [lo, hi] pairs')
                if box is not None and d is not None and len(box) != d:
                    self.fail('start.box', f'expected {d} pairs')
                if box is not None and any(hi <= lo for lo, hi in box):
                    self.fail('start.box', 'every pair needs hi > lo')
        trace = None
        if mode == 'trace':
            path = self.get(table, 'start.trace', str)
            trace = self.base_dir / path if path else None
        stage = self.get(table, 'start.stage', str, 'asl')
        return StartConfig(mode, theta, box, trace, stage)

    def schedule(self) -> Optional[StageSchedule]:
        table = self.section('schedule')
        values = {
            'burnin': self.get(table, 'schedule.burnin', int, 0),
            'asl': self.get(table, 'schedule.asl', int, 0),
            'adaptive': self.get(table, 'schedule.adaptive', int, 0),
            'n_sims': self.get(table, 'schedule.n_sims', int),
            'mcwm_in_burnin': self.get(table, 'schedule.mcwm', bool, False),
            'n_sims_post': self.get(table, 'schedule.n_sims_post', int, None),
        }
        if any(values[k] is None for k in ('burnin', 'asl', 'adaptive',
                                           'n_sims', 'mcwm_in_burnin')):
            return None
        try:
            return StageSchedule(**values)
        except InvalidConfigError as err:
            self.problems.extend(err.problems)
            return None

    def proposal(self, d) -> Optional[ProposalConfig]:
        table = self.section('proposal')
        self.unknown(table, 'proposal', PROPOSAL_KEYS)
        sd = self.vector(table, 'proposal.burnin_sd', d)
        interval = self.get(table, 'proposal.update_interval', int, 30)
        epsilon = self.get(table, 'proposal.epsilon', float, 1e-8)
        mode = self.get(table, 'proposal.mode', str, 'gaussian')
        nu = self.get(table, 'proposal.nu', float, None)
        batch = self.get(table, 'proposal.batch_size', int, 1)
        bootstrap = self.get(table, 'proposal.bootstrap_on_rejection', bool,
                             True)
        if sd is not None and any(v < 0 for v in sd):
            self.fail('proposal.burnin_sd', 'must be non-negative')
        if interval is not None and interval < 1:
            self.fail('proposal.update_interval', 'must be >= 1')
        if epsilon is not None and epsilon <= 0:
            self.fail('proposal.epsilon', 'must be > 0')
        if batch is not None and batch < 1:
            self.fail('proposal.batch_size', 'must be >= 1')
        if batch is not None and batch > 1:
            logger.warning('guided proposal refreshed every %d iterations',
                           batch)
        if sd is None or mode is None:
            return None
        try:
            return ProposalConfig.from_sd(
                sd, update_interval=interval or 30, epsilon=epsilon or 1e-8,
                mode=mode, nu=nu, batch_size=batch or 1,
                bootstrap_on_rejection=bool(bootstrap))
        except InvalidConfigError as err:
            self.problems.extend(err.problems)
            return None

    def likelihood(self, schedule, model) -> Optional[LikelihoodConfig]:
        table = self.section('likelihood')
        method = self.get(table, 'likelihood.method', str, 'ghurye_olkin')
        shrinkage = self.get(table, 'likelihood.shrinkage', float, None)
        blocks = self.get(table, 'likelihood.blocks', int, None)
        if method not in LIKELIHOOD_METHODS:
            self.fail('likelihood.method',
                      f'expected one of {LIKELIHOOD_METHODS}')
            return None
        if blocks is not None and model is not None \
                and not model.supports_csl:
            self.fail('likelihood.blocks',
                      f'model {model.model_id!r} consumes a random stream '
                      f'and cannot use correlated estimation')
        if blocks is not None and schedule is not None \
                and schedule.mcwm_in_burnin and schedule.burnin > 0:
            self.fail('schedule.mcwm', 'cannot be combined with '
                                       'likelihood.blocks')
        if schedule is None:
            return None
        config = LikelihoodConfig(schedule.n_sims, method, shrinkage, blocks)
        if model is not None:
            for n_sims, path in ((schedule.n_sims, 'schedule.n_sims'),
                                 (schedule.n_sims_post,
                                  'schedule.n_sims_post')):
                if n_sims is None:
                    continue
                try:
                    replace(config, n_sims=n_sims).validate(model.d_s)
                except InvalidConfigError as err:
                    for where, msg in err.problems:
                        where = path if where == 'likelihood.n_sims' \
                            else where
                        if (where, msg) not in self.problems:
                            self.fail(where, msg)
            if blocks is not None and model.variate_shape is not None:
                m = min(schedule.n_sims,
                        schedule.n_sims_post or schedule.n_sims)
                size = m * int(np.prod(model.variate_shape))
                if blocks > size:
                    self.fail('likelihood.blocks',
                              f'at most {size} blocks for this model')
        return config

    def report(self) -> ReportConfig:
        table = self.section('report')
        last = self.get(table, 'report.last', int, None)
        stride = self.get(table, 'report.thin', int, 1)
        level = self.get(table, 'report.level', float, 0.95)
        if last is not None and last < 1:
            self.fail('report.last', 'must be >= 1')
        if stride is not None and stride < 1:
            self.fail('report.thin', 'must be >= 1')
        if level is not None and not 0 < level <= 1:
            self.fail('report.level', 'must lie in (0, 1]')
        return ReportConfig(last, stride or 1, level or 0.95)
