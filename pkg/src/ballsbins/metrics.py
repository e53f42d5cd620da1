"""Legitimacy, self-stabilisation time, progress, cover time and faults."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _backend
from .core import (BallLedger, Configuration, Simulation, Strategy, Topology, Trajectory,
                   legitimacy_threshold, max_load)
from .rng import make_generator

DEFAULT_C = 10.0


def is_legitimate(q: Configuration, C: float = DEFAULT_C) -> bool:
    if not C > 0:
        raise ValueError("C must be positive")
    return max_load(q) <= C * math.log(q.n)


@dataclass
class StabilizeResult:
    time: int | None  # first legitimate round, None if not within T_max
    trajectory: Trajectory
    ledger: BallLedger
    overload_violations: int


def stabilize(q0: Configuration, C: float = DEFAULT_C, T_max: int = 0, seed: int = 0, trial: int = 0,
              strategy=Strategy.FIFO, track: bool = False) -> StabilizeResult:
    """Run until the first legitimate round (or ``T_max``)."""
    if not C > 0:
        raise ValueError("C must be positive")
    sim = Simulation(q0, strategy, seed=seed, trial=trial, track=track, capacity=min(T_max, 16 * q0.n) + 1)
    if is_legitimate(q0, C):
        t = 0
    else:
        hit = sim.advance(T_max, stop_max_le=legitimacy_threshold(q0.n, C))
        t = sim.t if hit else None
    return StabilizeResult(t, sim.trajectory(), sim.ledger, sim.overload_violations)


def convergence_time(q0: Configuration, C: float = DEFAULT_C, T_max: int = 0, seed: int = 0,
                     trial: int = 0) -> int | None:
    return stabilize(q0, C, T_max, seed, trial).time


class FaultKind(enum.Enum):
    ALL_IN_ONE = "all_in_one"
    PERMUTE = "permute"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, value) -> "FaultKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown fault kind {value!r}") from None


@dataclass(frozen=True)
class FaultSchedule:
    """Adversarial reassignment every ``period`` rounds (after rounds period, 2 period, ...)."""

    period: int | None = None
    kind: FaultKind = FaultKind.ALL_IN_ONE
    target: int = 0
    generator: Callable | None = None  # CUSTOM: (q, round, rng) -> load vector

    def __post_init__(self):
        object.__setattr__(self, "kind", FaultKind.parse(self.kind))
        if self.period is not None and self.period < 1:
            raise ValueError("fault period must be at least 1")
        if self.kind is FaultKind.CUSTOM and self.generator is None:
            raise ValueError("CUSTOM faults need a generator")

    @property
    def active(self) -> bool:
        return self.period is not None

    def due(self, t: int) -> bool:
        return self.active and t > 0 and t % self.period == 0

    def next_after(self, t: int) -> int | None:
        if not self.active:
            return None
        return (t // self.period + 1) * self.period


def _fill_by_identity(loads):
    return np.repeat(np.arange(loads.size, dtype=np.int64), loads)


def fault_placement(q: Configuration, f: FaultSchedule, round: int, rng, pos=None):
    """New loads and ball positions after the adversary acts."""
    if not f.due(round):
        raise ValueError(f"no fault scheduled at round {round}")
    n, m = q.n, q.m
    if f.kind is FaultKind.ALL_IN_ONE:
        if not 0 <= f.target < n:
            raise ValueError("fault target out of range")
        new = Configuration.all_in_one(n, m, f.target)
        return new, np.full(m, f.target, dtype=np.int64)
    if f.kind is FaultKind.PERMUTE:
        perm = rng.permutation(n)
        loads = np.zeros(n, dtype=np.int64)
        loads[perm] = q.loads
        src = _fill_by_identity(q.loads) if pos is None else np.asarray(pos)
        return Configuration(loads), perm[src].astype(np.int64)
    new = Configuration(f.generator(q, round, rng))
    if new.n != n or new.m != m:
        raise ValueError(f"custom fault produced n={new.n}, m={new.m}; expected n={n}, m={m}")
    return new, _fill_by_identity(new.loads)


def apply_fault(q: Configuration, f: FaultSchedule, round: int, rng, ledger: BallLedger | None = None) -> Configuration:
    new, pos = fault_placement(q, f, round, rng, None if ledger is None else ledger.pos)
    if ledger is not None:
        ledger.reposition(pos, round)
    return new


@dataclass
class CoverResult:
    per_ball: np.ndarray  # round each ball had seen every bin, -1 if not within T_max
    parallel: int | None
    ledger: BallLedger
    trajectory: Trajectory
    faults: int
    overload_violations: int


def cover_time(q0: Configuration, T_max: int, seed: int = 0, trial: int = 0,
               faults: FaultSchedule | None = None, strategy=Strategy.FIFO,
               topology: Topology | None = None) -> CoverResult:
    faults = faults or FaultSchedule()
    sim = Simulation(q0, strategy, topology, seed, trial, track_visits=True,
                     capacity=min(T_max, 64 * q0.n) + 1)
    frng = make_generator(seed, trial, "fault")
    injected = 0
    done = sim.ledger.covered == sim.m
    while not done and sim.t < T_max:
        nxt = faults.next_after(sim.t)
        stop = T_max if nxt is None else min(nxt, T_max)
        done = sim.advance(stop, stop_on_cover=True)
        if not done and faults.due(sim.t) and sim.t < T_max:
            new, pos = fault_placement(sim.configuration, faults, sim.t, frng, sim.ledger.pos)
            sim.replace_loads(new, pos)
            injected += 1
            done = sim.ledger.covered == sim.m
    led = sim.ledger
    per_ball = led.cover_round.copy()
    parallel = int(per_ball.max()) if (per_ball >= 0).all() else None
    return CoverResult(per_ball, parallel, led, sim.trajectory(), injected, sim.overload_violations)


def progress(ledger: BallLedger, ball: int, t: int | None = None) -> int:
    """Rounds in which ``ball`` was the one selected, through the ledger's round."""
    if t is not None and t != ledger.round:
        raise ValueError(f"ledger is at round {ledger.round}, not {t}")
    return int(ledger.progress[ball])


def waiting_time_max(ledger: BallLedger) -> int:
    """Longest observed stay of a ball in one queue (selection round minus arrival round)."""
    return ledger.max_wait


def single_ball_cover_times(n: int, trials: int, seed: int = 0, start: int = 0,
                            horizon: int | None = None, chunk: int = 20_000) -> np.ndarray:
    """Cover times of one ball on the complete graph, ``trials`` independent runs."""
    if n < 2 or trials < 1:
        raise ValueError("need n >= 2 and trials >= 1")
    if horizon is None:
        # P(not covered by horizon) <= n (1 - 1/n)^horizon < 1e-15
        horizon = math.ceil((math.log(n) + 35) / -math.log1p(-1 / n))
    out = np.empty(trials, dtype=np.int64)
    gen = make_generator(seed, 0, "batch")
    for lo in range(0, trials, chunk):
        hi = min(trials, lo + chunk)
        buf = gen.random((hi - lo, horizon))
        _backend.kernels.batch_single_cover(n, start, buf, out[lo:hi])
    return out
