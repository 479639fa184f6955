"""
Chain traces and their delimited-text persistence.

A trace file is tab-separated with a header row. Floats are written with
17 significant digits so a write/read round trip is exact, and an
infinite log-likelihood is written as ``-inf``.
"""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from guidedsl.utils import InvalidInputError, TraceFormatError

__all__ = ['STAGES', 'ChainTrace', 'write_trace', 'read_trace']

logger = logging.getLogger(__name__)

#: Stage labels in chain order.
STAGES = ('burnin', 'asl', 'adaptive')

_FIXED_COLUMNS = ('iteration', 'stage', 'accepted', 'loglik', 'block')


@dataclass
class ChainTrace:
    """
    Per-iteration record of one chain.

    Attributes
    ----------
    param_names : tuple of str
        Parameter names, in column order.
    theta : np.ndarray
        ``(n, d)`` states on the natural scale.
    theta_transformed : np.ndarray
        ``(n, d)`` states on the sampling scale.
    loglik : np.ndarray
        Log synthetic likelihood attached to each state.
    accepted : np.ndarray
        Boolean acceptance flags.
    stage : np.ndarray
        Stage label of each iteration, one of :data:`STAGES`.
    block : np.ndarray
        Refreshed variate block (0-based) for correlated runs, -1
        otherwise.
    """
    param_names: Tuple[str, ...]
    theta: np.ndarray
    theta_transformed: np.ndarray
    loglik: np.ndarray
    accepted: np.ndarray
    stage: np.ndarray
    block: np.ndarray = field(default=None)

    def __post_init__(self):
        self.param_names = tuple(self.param_names)
        d = len(self.param_names)
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1, d)
        self.theta_transformed = np.asarray(
            self.theta_transformed, dtype=float).reshape(-1, d)
        self.loglik = np.asarray(self.loglik, dtype=float).reshape(-1)
        self.accepted = np.asarray(self.accepted, dtype=bool).reshape(-1)
        self.stage = np.asarray(self.stage, dtype=object).reshape(-1)
        n = self.theta.shape[0]
        if self.block is None:
            self.block = np.full(n, -1, dtype=np.int64)
        self.block = np.asarray(self.block, dtype=np.int64).reshape(-1)
        lengths = {len(a) for a in (self.theta_transformed, self.loglik,
                                    self.accepted, self.stage, self.block)}
        if lengths != {n}:
            raise InvalidInputError('trace columns differ in length')
        unknown = set(self.stage) - set(STAGES)
        if unknown:
            raise InvalidInputError(f'unknown stage label(s) {unknown}')

    def __len__(self):
        return self.theta.shape[0]

    def __getitem__(self, index) -> ChainTrace:
        if isinstance(index, (int, np.integer)):
            index = slice(index, index + 1 or None)
        return ChainTrace(self.param_names, self.theta[index],
                          self.theta_transformed[index], self.loglik[index],
                          self.accepted[index], self.stage[index],
                          self.block[index])

    def __eq__(self, other):
        if not isinstance(other, ChainTrace):
            return NotImplemented
        return (self.param_names == other.param_names
                and np.array_equal(self.theta, other.theta, equal_nan=True)
                and np.array_equal(self.theta_transformed,
                                   other.theta_transformed, equal_nan=True)
                and np.array_equal(self.loglik, other.loglik, equal_nan=True)
                and np.array_equal(self.accepted, other.accepted)
                and np.array_equal(self.stage, other.stage)
                and np.array_equal(self.block, other.block))

    def select(self, stage: str) -> ChainTrace:
        """Rows belonging to one stage."""
        return self[self.stage == stage]

    def last(self, n: int) -> ChainTrace:
        return self[max(len(self) - n, 0):]

    def acceptance_rate(self, stage: Optional[str] = None) -> float:
        acc = self.accepted if stage is None else self.accepted[
            self.stage == stage]
        return float(acc.mean()) if acc.size else float('nan')

    @staticmethod
    def concatenate(traces: Sequence[ChainTrace]) -> ChainTrace:
        names = traces[0].param_names
        return ChainTrace(names,
                          np.concatenate([t.theta for t in traces]),
                          np.concatenate([t.theta_transformed
                                          for t in traces]),
                          np.concatenate([t.loglik for t in traces]),
                          np.concatenate([t.accepted for t in traces]),
                          np.concatenate([t.stage for t in traces]),
                          np.concatenate([t.block for t in traces]))

    def to_frame(self) -> pd.DataFrame:
        """One row per iteration; natural then transformed columns."""
        frame = pd.DataFrame({
            'iteration': np.arange(1, len(self) + 1),
            'stage': self.stage.astype(str),
            'accepted': self.accepted.astype(np.int64),
            'loglik': self.loglik,
            'block': self.block,
        })
        for j, name in enumerate(self.param_names):
            frame[name] = self.theta[:, j]
        for j, name in enumerate(self.param_names):
            frame[f'{name}_t'] = self.theta_transformed[:, j]
        return frame

    @staticmethod
    def from_frame(frame: pd.DataFrame) -> ChainTrace:
        names = tuple(c for c in frame.columns
                      if c not in _FIXED_COLUMNS and not c.endswith('_t'))
        return ChainTrace(
            names,
            frame[list(names)].to_numpy(dtype=float),
            frame[[f'{n}_t' for n in names]].to_numpy(dtype=float),
            frame['loglik'].to_numpy(dtype=float),
            frame['accepted'].to_numpy(dtype=np.int64) != 0,
            frame['stage'].to_numpy(dtype=object),
            frame['block'].to_numpy(dtype=np.int64))


PathOrBuffer = Union[str, Path, io.TextIOBase]


def write_trace(trace: ChainTrace, path: PathOrBuffer) -> None:
    """
    Write a trace as tab-separated text with a header row.

    An empty trace produces a header-only file. Natural-scale values that
    could not be mapped back from the sampling scale are written as
    ``nan``.
    """
    trace.to_frame().to_csv(path, sep='\t', index=False,
                            float_format='%.17g', na_rep='nan',
                            lineterminator='\n')


def _check_int(frame: pd.DataFrame, column: str) -> None:
    values = pd.to_numeric(frame[column], errors='coerce')
    bad = values.isna() | (values != np.floor(values))
    if bad.any():
        row = int(np.argmax(bad.to_numpy()))
        raise TraceFormatError(f'{column!r} must be an integer, got '
                               f'{frame[column].iloc[row]!r}', line=row + 2)


def read_trace(path: PathOrBuffer) -> ChainTrace:
    """
    Read a trace written by :func:`write_trace`.

    Raises
    ------
    TraceFormatError
        With the 1-based line number of the first malformed row.
    """
    try:
        frame = pd.read_csv(path, sep='\t', dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as err:
        raise TraceFormatError('missing header row', line=1) from err
    except pd.errors.ParserError as err:
        raise TraceFormatError(str(err)) from err
    missing = [c for c in _FIXED_COLUMNS if c not in frame.columns]
    if missing:
        raise TraceFormatError(f'header lacks column(s) {missing}', line=1)
    names = [c for c in frame.columns
             if c not in _FIXED_COLUMNS and not c.endswith('_t')]
    for name in names:
        if f'{name}_t' not in frame.columns:
            raise TraceFormatError(f'header lacks column {name}_t', line=1)
    for column in ('iteration', 'accepted', 'block'):
        _check_int(frame, column)
    float_cols = ['loglik'] + names + [f'{n}_t' for n in names]
    for column in float_cols:
        values = pd.to_numeric(frame[column], errors='coerce')
        bad = values.isna()
        if column in names:
            bad &= frame[column].str.lower() != 'nan'
        bad = bad.to_numpy()
        if bad.any():
            row = int(np.argmax(bad))
            raise TraceFormatError(f'{column!r} is not a number: '
                                   f'{frame[column].iloc[row]!r}',
                                   line=row + 2)
        # python float parsing keeps 17-digit values exact
        frame[column] = frame[column].astype(float)
    for column in ('iteration', 'accepted', 'block'):
        frame[column] = pd.to_numeric(frame[column]).astype(np.int64)
    bad_stage = ~frame['stage'].isin(STAGES)
    if bad_stage.any():
        row = int(np.argmax(bad_stage.to_numpy()))
        raise TraceFormatError(f'unknown stage {frame["stage"].iloc[row]!r}',
                               line=row + 2)
    return ChainTrace.from_frame(frame)
