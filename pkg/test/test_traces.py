import io

import numpy as np
import pytest

from guidedsl.traces import ChainTrace, read_trace, write_trace
from guidedsl.utils import InvalidInputError, TraceFormatError

NAMES = ('A', 'B')


def make_trace(rng, stages=(('burnin', 5), ('asl', 5), ('adaptive', 20))):
    n = sum(k for _, k in stages)
    theta_t = rng.normal(size=(n, 2)) * np.array([1e-7, 1e5])
    loglik = rng.normal(size=n) * 100
    loglik[0] = -np.inf
    stage = np.concatenate([[s] * k for s, k in stages])
    block = rng.integers(-1, 50, size=n)
    return ChainTrace(NAMES, 3 * theta_t + 1, theta_t, loglik,
                      rng.random(n) < 0.3, stage, block)


def test_round_trip(rng, tmp_path):
    trace = make_trace(rng)
    path = tmp_path / 'trace.tsv'
    write_trace(trace, path)
    assert read_trace(path) == trace


def test_round_trip_buffer(rng):
    trace = make_trace(rng)
    buf = io.StringIO()
    write_trace(trace, buf)
    text = buf.getvalue()
    assert text.splitlines()[0].split('\t') == [
        'iteration', 'stage', 'accepted', 'loglik', 'block', 'A', 'B',
        'A_t', 'B_t']
    assert '\t-inf\t' in text.splitlines()[1]
    assert read_trace(io.StringIO(text)) == trace


def test_round_trip_non_finite(tmp_path):
    theta_t = np.array([[8.0, 0.1], [0.2, 0.3]])
    natural = np.exp(theta_t)
    natural[0, 0] = np.nan
    trace = ChainTrace(NAMES, natural, theta_t, [-np.inf, -np.inf],
                       [False, True], ['burnin', 'burnin'], [-1, 0])
    path = tmp_path / 'trace.tsv'
    write_trace(trace, path)
    assert path.read_text().splitlines()[1].split('\t')[5] == 'nan'
    back = read_trace(path)
    assert back == trace
    assert np.isnan(back.theta[0, 0])
    assert np.all(back.loglik == -np.inf)


def test_empty_trace(tmp_path):
    empty = ChainTrace(NAMES, np.empty((0, 2)), np.empty((0, 2)), [], [],
                       [], [])
    path = tmp_path / 'empty.tsv'
    write_trace(empty, path)
    assert len(path.read_text().strip().splitlines()) == 1
    back = read_trace(path)
    assert len(back) == 0
    assert back.param_names == NAMES


def _corrupt(rng, row, field, value):
    buf = io.StringIO()
    write_trace(make_trace(rng), buf)
    lines = buf.getvalue().splitlines()
    cells = lines[row].split('\t')
    cells[field] = value
    lines[row] = '\t'.join(cells)
    return io.StringIO('\n'.join(lines) + '\n')


malformed_testcases = [
    (2, 3, 'abc', 3),
    (5, 0, '1.5', 6),
    (1, 2, 'yes', 2),
    (7, 1, 'warmup', 8),
    (4, 6, '', 5),
]


@pytest.mark.parametrize('row, field, value, line', malformed_testcases)
def test_malformed_line_number(row, field, value, line, rng):
    with pytest.raises(TraceFormatError) as err:
        read_trace(_corrupt(rng, row, field, value))
    assert err.value.line == line
    assert f'line {line}' in str(err.value)


@pytest.mark.parametrize('text', [
    '',
    'iteration\tstage\taccepted\tloglik\n',
    'iteration\tstage\taccepted\tloglik\tblock\tA\n',
])
def test_bad_header(text):
    with pytest.raises(TraceFormatError) as err:
        read_trace(io.StringIO(text))
    assert err.value.line == 1


def test_select_last_and_rates(rng):
    trace = make_trace(rng)
    assert len(trace.select('asl')) == 5
    assert np.all(trace.select('adaptive').stage == 'adaptive')
    assert len(trace.last(7)) == 7
    assert len(trace.last(100)) == len(trace)
    assert trace.acceptance_rate() == pytest.approx(trace.accepted.mean())
    assert np.isnan(trace.select('asl').acceptance_rate('burnin'))
    assert len(trace[3]) == 1
    assert len(trace[-1]) == 1


def test_concatenate(rng):
    trace = make_trace(rng)
    assert ChainTrace.concatenate([trace[:10], trace[10:]]) == trace


def test_invalid_trace():
    with pytest.raises(InvalidInputError):
        ChainTrace(NAMES, np.zeros((3, 2)), np.zeros((2, 2)), np.zeros(3),
                   np.zeros(3), ['asl'] * 3)
    with pytest.raises(InvalidInputError):
        ChainTrace(NAMES, np.zeros((1, 2)), np.zeros((1, 2)), [0.0], [True],
                   ['warmup'])
