"""The Tetris process: an open system used to dominate the closed one.

Every round each non-empty bin loses one ball, then ``floor(3n/4)`` fresh
balls land in uniformly random bins.  Arrivals happen in every round
``t >= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import Configuration, Trajectory
from .rng import make_generator, uniform_index


def arrivals_per_round(n: int) -> int:
    return (3 * n) // 4


@dataclass(frozen=True)
class TetrisState:
    loads: np.ndarray
    last_empty: np.ndarray  # last round at which the bin was empty (0 if never)
    round: int = 0

    def __post_init__(self):
        loads = np.array(self.loads, dtype=np.int64).reshape(-1)
        if loads.size < 4:
            raise ValueError("the Tetris process needs n >= 4")
        if (loads < 0).any():
            raise ValueError("loads must be non-negative")
        last = np.array(self.last_empty, dtype=np.int64).reshape(-1)
        if last.shape != loads.shape or (last > self.round).any():
            raise ValueError("last_empty must have one entry per bin, none after the current round")
        loads.flags.writeable = False
        last.flags.writeable = False
        object.__setattr__(self, "loads", loads)
        object.__setattr__(self, "last_empty", last)

    @classmethod
    def from_loads(cls, loads) -> "TetrisState":
        loads = np.asarray(loads.loads if isinstance(loads, Configuration) else loads, dtype=np.int64)
        return cls(loads, np.zeros(loads.size, dtype=np.int64), 0)

    @property
    def n(self) -> int:
        return self.loads.size


def apply_arrivals(s: TetrisState, dest) -> TetrisState:
    """One round with the given arrival bins (departures first)."""
    dest = np.asarray(dest, dtype=np.int64)
    n = s.n
    if dest.size != arrivals_per_round(n):
        raise ValueError(f"a Tetris round has exactly {arrivals_per_round(n)} arrivals")
    if dest.size and (dest.min() < 0 or dest.max() >= n):
        raise ValueError("arrival bin out of range")
    loads = s.loads - (s.loads > 0)
    loads += np.bincount(dest, minlength=n)
    t = s.round + 1
    last = np.where(loads == 0, t, s.last_empty)
    return TetrisState(loads, last, t)


def tetris_step(s: TetrisState, rng) -> TetrisState:
    a = arrivals_per_round(s.n)
    return apply_arrivals(s, uniform_index(np.asarray(rng.random(a), dtype=np.float64), s.n))


class ArrivalCounter:
    """Per-round arrival counts for a set of recorded bins, rounds ``1..rounds``."""

    def __init__(self, bins, counts):
        self.bins = np.asarray(bins, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)  # (rounds + 1, len(bins)); row 0 unused
        self._col = {int(b): i for i, b in enumerate(self.bins)}

    @property
    def rounds(self) -> int:
        return self.counts.shape[0] - 1

    def series(self, u: int) -> np.ndarray:
        """Arrivals into ``u`` in rounds ``1..rounds``."""
        if u not in self._col:
            raise KeyError(f"bin {u} was not recorded")
        return self.counts[1:, self._col[u]]


def arrivals_in_window(counter: ArrivalCounter, u: int, tau1: int, tau2: int) -> int:
    """Arrivals into bin ``u`` during rounds ``tau1..tau2`` inclusive."""
    if counter.rounds < 1:
        raise ValueError("no rounds recorded")
    if tau1 > tau2:
        raise ValueError("window must satisfy tau1 <= tau2")
    if tau1 < 1 or tau2 > counter.rounds:
        raise ValueError(f"window [{tau1}, {tau2}] outside recorded rounds 1..{counter.rounds}")
    s = counter.series(u)
    return int(s[tau1 - 1:tau2].sum())


@dataclass
class TetrisRun:
    state: TetrisState
    trajectory: Trajectory
    first_empty: np.ndarray  # -1 where the bin never emptied
    counter: ArrivalCounter | None


def simulate(s0: TetrisState | Configuration, T: int, seed: int = 0, trial: int = 0,
             record_bins=None, stop_when_all_emptied: bool = False) -> TetrisRun:
    """Run up to ``T`` rounds with the ``tetris`` stream of ``(seed, trial)``."""
    if not isinstance(s0, TetrisState):
        s0 = TetrisState.from_loads(s0)
    if T < 0:
        raise ValueError("T must be non-negative")
    n = s0.n
    a = arrivals_per_round(n)
    loads = s0.loads.copy()
    last = s0.last_empty.copy()
    first = np.where(loads == 0, s0.round, -1).astype(np.int64)
    t0 = s0.round
    out_max = np.zeros(t0 + T + 1, dtype=np.int64)
    out_empty = np.zeros_like(out_max)
    out_max[t0] = loads.max()
    out_empty[t0] = np.count_nonzero(loads == 0)
    rec_col = np.full(n, -1, dtype=np.int64)
    if record_bins is None:
        rec = np.zeros((0, 0), dtype=np.int64)
        bins = np.zeros(0, dtype=np.int64)
    else:
        bins = np.unique(np.asarray(record_bins, dtype=np.int64))
        if bins.size and (bins[0] < 0 or bins[-1] >= n):
            raise ValueError("recorded bin out of range")
        rec_col[bins] = np.arange(bins.size)
        rec = np.zeros((t0 + T + 1, bins.size), dtype=np.int64)
    gen = make_generator(seed, trial, "tetris")
    if stop_when_all_emptied and (first >= 0).all():
        t = t0
    else:
        t, _ = _backend.kernels.tetris_rounds(loads, a, gen, t0, t0 + T, last, first, rec, rec_col,
                                              out_max, out_empty, bool(stop_when_all_emptied))
    e = t + 1
    traj = Trajectory(out_max[t0:e].copy(), out_empty[t0:e].copy(), None)
    counter = None if record_bins is None else ArrivalCounter(bins, rec[:e])
    return TetrisRun(TetrisState(loads, last, int(t)), traj, first, counter)


def first_empty_times(s0: TetrisState | Configuration, T: int, seed: int = 0, trial: int = 0) -> np.ndarray:
    """First round ``<= T`` at which each bin is empty (0 for initially empty bins, -1 for never)."""
    if T < 1:
        raise ValueError("T must be at least 1")
    return simulate(s0, T, seed, trial, stop_when_all_emptied=True).first_empty
