"""
End-to-end runs of the bundled experiment configurations.

These take minutes to tens of minutes and are deselected by default;
run them with ``pytest -m slow``.
"""
import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from guidedsl.config import StartConfig, load_config
from guidedsl.harness import run_experiment
from guidedsl.traces import read_trace

pytestmark = pytest.mark.slow

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'configs'
THREADS = min(5, os.cpu_count() or 1)
GK_TRUTH = np.array([3.0, 1.0, 2.0, 0.5])


def covers(hpd, names, truth):
    return all(hpd[n][0] <= t <= hpd[n][1] for n, t in zip(names, truth))


@pytest.fixture(scope='module')
def gk_asl_run(tmp_path_factory):
    out = tmp_path_factory.mktemp('gk_asl')
    config = load_config(CONFIG_DIR / 'gk_asl.toml')
    run_experiment(config, out, threads=THREADS)
    return out, config


def test_gk_guided_stage_jumps_to_truth(gk_asl_run):
    out, config = gk_asl_run
    hits = 0
    for i in range(config.replicates):
        asl = read_trace(out / f'trace_{i}.tsv').select('asl')
        err = np.abs(asl.theta.mean(axis=0) - GK_TRUTH)
        hits += bool(np.all(err[:3] <= 0.5) and err[3] <= 0.3)
    assert hits >= 4


def test_gk_reduced_simulations(gk_asl_run, tmp_path):
    out, _ = gk_asl_run
    config = load_config(CONFIG_DIR / 'gk_reduced_m.toml')
    config = replace(config, start=StartConfig(
        'trace', trace=out / 'trace_0.tsv', stage='asl'))
    report = run_experiment(config, tmp_path)
    chain = report['chains']['0']
    assert 0.10 <= chain['acceptance']['adaptive'] <= 0.35
    assert covers(chain['hpd'], ('A', 'B', 'g', 'k'), GK_TRUTH)


def test_supernova_smoke_profile(tmp_path):
    config = load_config(CONFIG_DIR / 'supernova_acsl.toml').scaled(4)
    report = run_experiment(config, tmp_path)
    assert covers(report['chains']['0']['hpd'], ('omega_m', 'w0'),
                  (0.3, -1.0))


def test_supernova_posterior(tmp_path):
    config = load_config(CONFIG_DIR / 'supernova_acsl.toml')
    chain = run_experiment(config, tmp_path)['chains']['0']
    assert chain['n_draws'] == 1000
    assert 0.22 < chain['mean']['omega_m'] < 0.42
    assert -1.35 < chain['mean']['w0'] < -0.70
    assert covers(chain['hpd'], ('omega_m', 'w0'), (0.3, -1.0))
    assert chain['min_ess'] >= 200


def test_boombust_posterior(tmp_path):
    config = load_config(CONFIG_DIR / 'boombust_asl.toml')
    chain = run_experiment(config, tmp_path)['chains']['0']
    assert chain['n_draws'] == 1000
    assert covers(chain['hpd'], ('r', 'kappa', 'alpha', 'beta'),
                  (0.4, 50.0, 0.09, 0.05))
    assert chain['min_ess'] >= 25


def test_mixture_guided_jump(tmp_path):
    config = load_config(CONFIG_DIR / 'mixture_modes.toml')
    report = run_experiment(config, tmp_path, threads=THREADS)
    assert not report['aborted']
    truth = np.array([-5.0, 10.0, 30.0, 20.0])
    first_jump = config.schedule.burnin
    landed = [np.linalg.norm(read_trace(tmp_path / f'trace_{i}.tsv')
                             .theta[first_jump] - truth) < 5
              for i in range(config.replicates)]
    assert np.mean(landed) >= 0.8


def test_stable_blocks_raise_acceptance(tmp_path):
    plain = load_config(CONFIG_DIR / 'stable_bsl.toml')
    blocked = load_config(CONFIG_DIR / 'stable_csl.toml')
    wins = 0
    for seed in range(5):
        rates = []
        for config in (plain, blocked):
            report = run_experiment(config, tmp_path / f'{config.name}{seed}',
                                    seed=seed)
            rates.append(report['chains']['0']['acceptance']['adaptive'])
        wins += rates[1] >= 2 * rates[0]
    assert wins >= 3
