__all__ = [
    'config',
    'diagnostics',
    'engine',
    'harness',
    'models',
    'priors',
    'proposals',
    'simulators',
    'stats',
    'summaries',
    'traces',
    'utils',
    'ChainTrace',
    'ExperimentConfig',
    'GuidedProposalState',
    'HaarioState',
    'LikelihoodConfig',
    'PriorSpec',
    'ProposalConfig',
    'StageSchedule',
    'VariateStore',
    'estimate_synthetic_loglik',
    'ess_min',
    'hpd_interval',
    'load_config',
    'make_model',
    'read_trace',
    'run_chain',
    'run_experiment',
    'thin',
    'write_trace',
]

__version__ = '0.1.0'

from guidedsl import (config, diagnostics, engine, harness, models, priors,
                      proposals, simulators, stats, summaries, traces, utils)
from guidedsl.config import ExperimentConfig, load_config
from guidedsl.diagnostics import ess_min, hpd_interval, thin
from guidedsl.engine import (LikelihoodConfig, ProposalConfig, StageSchedule,
                             VariateStore, estimate_synthetic_loglik,
                             run_chain)
from guidedsl.harness import run_experiment
from guidedsl.models import make_model
from guidedsl.priors import PriorSpec
from guidedsl.proposals import GuidedProposalState, HaarioState
from guidedsl.traces import ChainTrace, read_trace, write_trace
