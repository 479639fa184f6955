import json
from dataclasses import replace

import numpy as np
import pytest

from guidedsl.config import ObservedConfig, StartConfig, load_config
from guidedsl.harness import (diagnose, observed_summaries, run_experiment,
                              start_points)
from guidedsl.traces import read_trace
from guidedsl.utils import InvalidConfigError


def test_run_experiment_artifacts(tiny_config, tmp_path):
    config = load_config(tiny_config)
    out = tmp_path / 'out'
    report = run_experiment(config, out)
    assert sorted(p.name for p in out.iterdir()) == [
        'report.json', 'trace_0.tsv', 'trace_1.tsv']
    assert report['aborted'] == {}
    assert report['unconverged_summaries'] == {'0': 0, '1': 0}
    assert set(report['chains']) == {'0', '1'}
    assert report['pooled']['n_draws'] == 300
    written = json.loads((out / 'report.json').read_text())
    assert written['experiment'] == 'tiny'
    assert written['pooled']['mean'] == pytest.approx(
        report['pooled']['mean'])
    trace = read_trace(out / 'trace_0.tsv')
    assert len(trace) == config.schedule.length
    assert list(np.unique(trace.stage)) == ['adaptive', 'asl', 'burnin']


def test_diagnose_matches_run(tiny_config, tmp_path):
    config = load_config(tiny_config)
    report = run_experiment(config, tmp_path)
    paths = [tmp_path / 'trace_0.tsv', tmp_path / 'trace_1.tsv']
    offline = diagnose(paths)
    for index, path in enumerate(paths):
        chain = dict(report['chains'][str(index)])
        chain.pop('wall_time')
        assert offline['chains'][str(path)] == chain
    assert offline['pooled'] == report['pooled']


def test_run_is_reproducible(tiny_config, tmp_path):
    config = load_config(tiny_config)
    run_experiment(config, tmp_path / 'a')
    run_experiment(config, tmp_path / 'b')
    run_experiment(config, tmp_path / 'c', seed=8)
    a = read_trace(tmp_path / 'a' / 'trace_1.tsv')
    assert a == read_trace(tmp_path / 'b' / 'trace_1.tsv')
    assert a != read_trace(tmp_path / 'c' / 'trace_1.tsv')
    assert a != read_trace(tmp_path / 'a' / 'trace_0.tsv')


@pytest.mark.slow
def test_worker_processes_match_serial(tiny_config, tmp_path):
    config = load_config(tiny_config)
    run_experiment(config, tmp_path / 'serial')
    run_experiment(config, tmp_path / 'pool', threads=2)
    for name in ('trace_0.tsv', 'trace_1.tsv'):
        assert read_trace(tmp_path / 'serial' / name) == \
            read_trace(tmp_path / 'pool' / name)


def test_observed_sources(tiny_config, tmp_path):
    config = load_config(tiny_config)
    model = config.make_model()
    seed = np.random.SeedSequence(0)
    generated = observed_summaries(config, model, seed)
    assert generated.shape == (4,)
    np.testing.assert_array_equal(
        generated, observed_summaries(config, model,
                                      np.random.SeedSequence(99)))

    data = model.simulate_data(np.array(config.truth),
                               np.random.default_rng(3))
    np.savetxt(tmp_path / 'data.txt', data)
    from_file = replace(config, observed=ObservedConfig(
        'file', path=tmp_path / 'data.txt'))
    np.testing.assert_allclose(observed_summaries(from_file, model, seed),
                               model.summarize(data))

    given = replace(config, observed=ObservedConfig(
        'summaries', summaries=(1.0, 2.0, 3.0, 4.0)))
    np.testing.assert_array_equal(observed_summaries(given, model, seed),
                                  [1, 2, 3, 4])
    wrong = replace(config, observed=ObservedConfig(
        'summaries', summaries=(1.0, 2.0)))
    with pytest.raises(InvalidConfigError):
        observed_summaries(wrong, model, seed)


def test_start_points(tiny_config, tmp_path):
    config = load_config(tiny_config)
    model = config.make_model()
    seeds = np.random.SeedSequence(1).spawn(3)

    fixed = start_points(config, model, seeds)
    np.testing.assert_allclose(fixed[2], np.log([3.0, 1.0, 2.0, 0.5]))

    box = replace(config, start=StartConfig(
        'uniform_box', box=((1, 2), (1, 2), (1, 2), (1, 2))))
    points = np.exp(start_points(box, model, seeds))
    assert np.all((points >= 1) & (points <= 2))
    assert not np.allclose(points[0], points[1])

    prior = replace(config, start=StartConfig('prior'))
    points = np.exp(start_points(prior, model, seeds))
    assert np.all((points > 0) & (points < 30))

    run_experiment(config, tmp_path / 'run')
    trace_path = tmp_path / 'run' / 'trace_0.tsv'
    from_trace = replace(config, start=StartConfig('trace', trace=trace_path,
                                                   stage='asl'))
    expected = read_trace(trace_path).select('asl').theta_transformed.mean(
        axis=0)
    np.testing.assert_allclose(start_points(from_trace, model, seeds)[1],
                               expected)

    missing = replace(config, start=StartConfig(
        'trace', trace=tmp_path / 'nothing.tsv'))
    with pytest.raises(InvalidConfigError):
        start_points(missing, model, seeds)
