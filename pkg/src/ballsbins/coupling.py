"""Original and Tetris processes driven by shared randomness.

While at most ``3n/4`` bins are non-empty, the first ``|W|`` Tetris arrivals
go wherever the balls leaving the non-empty bins (ascending bin order) go and
the rest are free uniform draws.  Otherwise every Tetris arrival is free.
The original process reads the ``dest`` stream exactly as ``core.run`` does,
and the free arrivals come from the ``tetris`` stream, drawn every round.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import (Configuration, DestinationDraws, Topology, Trajectory, count_empty,
                   draw_destinations, step)
from .rng import make_generator, uniform_index
from .tetris import TetrisState, apply_arrivals, arrivals_per_round


@dataclass(frozen=True)
class CoupleFlags:
    coupled: bool  # case i: |W| <= 3n/4
    dominance: bool  # every Tetris bin holds at least as many balls as the original
    empty_event: bool  # at least n/4 empty bins in the original after the round
    matched: int
    free: int


def _check_n(n):
    if n % 4:
        raise ValueError(f"coupling needs n divisible by 4, got n={n}")


def couple_arrivals(q: Configuration, s: TetrisState, d: DestinationDraws, free):
    """Deterministic part of a coupled round given the original draws and free arrival bins."""
    n = q.n
    _check_n(n)
    if s.n != n:
        raise ValueError("both processes must have the same number of bins")
    a = arrivals_per_round(n)
    free = np.asarray(free, dtype=np.int64)
    if free.size != a:
        raise ValueError(f"expected {a} free arrival bins")
    k = d.sources.size
    case_i = k <= a
    dest = np.concatenate((d.targets, free[k:])) if case_i else free
    q1 = step(q, d)
    s1 = apply_arrivals(s, dest)
    flags = CoupleFlags(coupled=case_i, dominance=bool((s1.loads >= q1.loads).all()),
                        empty_event=4 * count_empty(q1) >= n,
                        matched=k if case_i else 0, free=a - k if case_i else a)
    return q1, s1, flags


def coupled_step(q: Configuration, s: TetrisState, dest_rng, free_rng):
    """One coupled round; returns ``(Configuration, TetrisState, CoupleFlags)``."""
    _check_n(q.n)
    d = draw_destinations(q, Topology.complete(q.n), dest_rng)
    free = uniform_index(np.asarray(free_rng.random(arrivals_per_round(q.n)), dtype=np.float64), q.n)
    return couple_arrivals(q, s, d, free)


@dataclass
class CoupledTrajectory:
    original: Trajectory  # carries tetris_max, coupled, dominance and empty_event columns
    tetris_max: np.ndarray
    final: Configuration
    tetris_final: np.ndarray
    case_ii_rounds: int
    non_dominated_rounds: int
    induction_violations: int  # dominance lost in a case-i round right after a dominated round

    @property
    def M_T(self) -> int:
        return int(self.original.max_load.max())

    @property
    def hat_M_T(self) -> int:
        return int(self.tetris_max.max())

    @property
    def dominance_held(self) -> bool:
        return self.non_dominated_rounds == 0


def coupled_run(q0: Configuration, T: int, seed: int = 0, trial: int = 0) -> CoupledTrajectory:
    n = q0.n
    _check_n(n)
    if q0.m != n:
        raise ValueError("coupled run needs exactly n balls")
    if 4 * count_empty(q0) < n:
        raise ValueError("coupled run needs at least n/4 empty bins initially")
    if T < 0:
        raise ValueError("T must be non-negative")
    q = q0.loads.copy()
    h = q0.loads.copy()
    cols = [np.zeros(T + 1, dtype=np.int64) for _ in range(7)]
    qmax, qempty, qover, hmax, coupled, dom, event = cols
    qmax[0] = hmax[0] = q.max()
    qempty[0] = count_empty(q0)
    qover[0] = np.count_nonzero(q > 1)
    coupled[0] = dom[0] = 1
    event[0] = 1
    counters = np.array([0, 0, 0, 1], dtype=np.int64)
    _backend.kernels.coupled_rounds(q, h, arrivals_per_round(n), make_generator(seed, trial, "dest"),
                                    make_generator(seed, trial, "tetris"), 0, T, qmax, qempty, qover,
                                    hmax, coupled, dom, event, counters)
    traj = Trajectory(qmax, qempty, qover, tetris_max=hmax, coupled=coupled, dominance=dom,
                      empty_event=event)
    return CoupledTrajectory(traj, hmax, Configuration(q), h, int(counters[0]), int(counters[1]),
                             int(counters[2]))
