"""Configurations and the repeated balls-into-bins round.

Bins are 0-indexed.  In every round each non-empty bin ejects one ball,
chosen by the queue strategy, to a uniformly random neighbour (on the
complete graph: any bin, itself included).  Destinations are drawn per bin in
ascending bin order, so under a fixed seed the load process does not depend
on the strategy; only ball identities do.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _backend
from .rng import make_generator, uniform_index


class Strategy(enum.IntEnum):
    FIFO = 0
    LIFO = 1
    RANDOM = 2

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ValueError(f"unknown strategy {value!r}") from None


class Configuration:
    """Immutable load vector of ``n`` bins holding ``m`` balls."""

    __slots__ = ("loads",)

    def __init__(self, loads):
        arr = np.array(loads, dtype=np.int64).reshape(-1)
        if arr.size < 2:
            raise ValueError("a configuration needs at least 2 bins")
        if (arr < 0).any():
            raise ValueError("loads must be non-negative")
        arr.flags.writeable = False
        self.loads = arr

    @property
    def n(self) -> int:
        return self.loads.size

    @property
    def m(self) -> int:
        return int(self.loads.sum())

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return np.array_equal(self.loads, other.loads)

    def __hash__(self):
        return hash(tuple(self.loads.tolist()))

    def __repr__(self):
        body = self.loads.tolist() if self.n <= 16 else f"n={self.n}, m={self.m}"
        return f"Configuration({body})"

    def as_tuple(self):
        return tuple(self.loads.tolist())

    @classmethod
    def flat(cls, n: int) -> "Configuration":
        return cls(np.ones(n, dtype=np.int64))

    @classmethod
    def all_in_one(cls, n: int, m: int | None = None, target: int = 0) -> "Configuration":
        loads = np.zeros(n, dtype=np.int64)
        loads[target] = n if m is None else m
        return cls(loads)

    @classmethod
    def random(cls, n: int, m: int | None = None, seed: int = 0, trial: int = 0) -> "Configuration":
        """Throw ``m`` balls (default ``n``) independently and uniformly."""
        gen = make_generator(seed, trial, "init")
        m = n if m is None else m
        dest = uniform_index(gen.random(m), n)
        return cls(np.bincount(dest, minlength=n))


def new_configuration(loads) -> Configuration:
    return Configuration(loads)


def count_empty(q: Configuration) -> int:
    return int(np.count_nonzero(q.loads == 0))


def count_singleton(q: Configuration) -> int:
    return int(np.count_nonzero(q.loads == 1))


def count_overloaded(q: Configuration) -> int:
    return int(np.count_nonzero(q.loads > 1))


def max_load(q: Configuration) -> int:
    return int(q.loads.max())


@dataclass(frozen=True)
class Topology:
    """Graph the balls move on.

    ``complete`` includes self-loops; ``ring`` and ``regular`` move to a
    neighbour other than the current bin.
    """

    kind: str
    n: int
    degree: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("complete", "ring", "regular"):
            raise ValueError(f"unknown topology {self.kind!r}")
        if self.n < 2:
            raise ValueError("topology needs n >= 2")
        if self.kind == "ring" and self.n < 3:
            raise ValueError("a ring needs n >= 3")
        if self.kind == "regular":
            d = self.degree
            if d is None or not 1 <= d < self.n or (d * self.n) % 2:
                raise ValueError(f"no simple {d}-regular graph on {self.n} vertices")

    @classmethod
    def complete(cls, n):
        return cls("complete", n)

    @classmethod
    def ring(cls, n):
        return cls("ring", n)

    @classmethod
    def regular(cls, n, d, seed=0):
        return cls("regular", n, d, seed)

    @property
    def deg(self) -> int:
        return {"complete": self.n, "ring": 2}.get(self.kind, self.degree)

    @cached_property
    def neighbors(self) -> np.ndarray:
        """``(n, deg)`` neighbour table; an empty ``(0, 0)`` array for the complete graph."""
        n = self.n
        if self.kind == "complete":
            return np.zeros((0, 0), dtype=np.int64)
        if self.kind == "ring":
            u = np.arange(n)
            return np.stack(((u - 1) % n, (u + 1) % n), axis=1).astype(np.int64)
        import networkx as nx

        s = self.seed
        while True:
            g = nx.random_regular_graph(self.degree, n, seed=s)
            if nx.is_connected(g):
                break
            s += 1
        return np.array([sorted(g.neighbors(u)) for u in range(n)], dtype=np.int64)

    def neighbor_set(self, u: int) -> np.ndarray:
        if self.kind == "complete":
            return np.arange(self.n)
        return self.neighbors[u]


@dataclass(frozen=True)
class DestinationDraws:
    sources: np.ndarray  # non-empty bins, ascending
    targets: np.ndarray

    def as_dict(self):
        return dict(zip(self.sources.tolist(), self.targets.tolist()))


def draw_destinations(q: Configuration, topology: Topology | None, rng) -> DestinationDraws:
    """One uniform neighbour per non-empty bin, in ascending bin order.

    ``rng`` only needs a ``random(size)`` method returning doubles in [0, 1).
    """
    topology = topology or Topology.complete(q.n)
    if topology.n != q.n:
        raise ValueError("topology and configuration disagree on n")
    src = np.flatnonzero(q.loads)
    r = uniform_index(np.asarray(rng.random(src.size), dtype=np.float64), topology.deg)
    dst = r if topology.kind == "complete" else topology.neighbors[src, r]
    return DestinationDraws(src, np.asarray(dst, dtype=np.int64))


def step(q: Configuration, d: DestinationDraws) -> Configuration:
    if not np.array_equal(d.sources, np.flatnonzero(q.loads)):
        raise ValueError("draws were not taken from this configuration")
    loads = q.loads.copy()
    loads[d.sources] -= 1
    loads += np.bincount(d.targets, minlength=q.n)
    return Configuration(loads)


def select_ball(queue: list, s: Strategy, rng=None):
    """Remove and return one ball from ``queue`` (oldest arrival first)."""
    if not queue:
        raise ValueError("cannot select from an empty queue")
    s = Strategy.parse(s)
    if s is Strategy.FIFO:
        return queue.pop(0)
    if s is Strategy.LIFO:
        return queue.pop()
    i = int(uniform_index(rng.random(1), len(queue))[0])
    return queue.pop(i)


@dataclass
class Trajectory:
    """Per-round summaries; index ``t`` holds the state after round ``t``."""

    max_load: np.ndarray
    empty: np.ndarray
    overloaded: np.ndarray | None
    tetris_max: np.ndarray | None = None
    coupled: np.ndarray | None = None
    dominance: np.ndarray | None = None
    empty_event: np.ndarray | None = None

    @property
    def rounds(self) -> int:
        return self.max_load.size - 1

    def running_max(self, start: int = 0) -> int:
        return int(self.max_load[start:].max())

    def rows(self):
        """Rows of the trajectory CSV schema (flags blank when absent)."""
        def col(a, t):
            return "" if a is None else int(a[t])

        for t in range(self.max_load.size):
            yield (t, int(self.max_load[t]), int(self.empty[t]), col(self.overloaded, t),
                   col(self.tetris_max, t), col(self.coupled, t), col(self.dominance, t))


@dataclass
class BallLedger:
    """Ball identities, queue order and per-ball bookkeeping.

    Queue order inside a bin is ascending ``stamp``: initial balls get
    ``id - m`` and a ball arriving in round ``t`` from bin ``u`` gets
    ``t * n + u``, so arrivals queue behind residents and among themselves by
    source bin.
    """

    n: int
    pos: np.ndarray
    stamp: np.ndarray
    progress: np.ndarray
    enq_round: np.ndarray
    enq_load: np.ndarray
    visited: np.ndarray
    visit_count: np.ndarray
    cover_round: np.ndarray
    counters: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    round: int = 0

    @classmethod
    def from_configuration(cls, q: Configuration, track_visits: bool = False) -> "BallLedger":
        n, m = q.n, q.m
        pos = np.repeat(np.arange(n, dtype=np.int64), q.loads)
        ids = np.arange(m, dtype=np.int64)
        if track_visits:
            visited = np.zeros((m, n), dtype=np.bool_)
            visited[ids, pos] = True
            visit_count = np.ones(m, dtype=np.int64)
        else:
            visited = np.zeros((0, 0), dtype=np.bool_)
            visit_count = np.zeros(m, dtype=np.int64)
        cover_round = np.full(m, -1, dtype=np.int64)
        led = cls(n=n, pos=pos, stamp=ids - m, progress=np.zeros(m, dtype=np.int64),
                  enq_round=np.zeros(m, dtype=np.int64), enq_load=q.loads[pos].copy(),
                  visited=visited, visit_count=visit_count, cover_round=cover_round)
        if track_visits:
            done = visit_count == n
            cover_round[done] = 0
            led.counters[2] = int(done.sum())
        return led

    @property
    def m(self) -> int:
        return self.pos.size

    @property
    def tracks_visits(self) -> bool:
        return self.visited.shape[0] > 0

    @property
    def max_wait(self) -> int:
        return int(self.counters[0])

    @property
    def wait_violations(self) -> int:
        return int(self.counters[1])

    @property
    def covered(self) -> int:
        return int(self.counters[2])

    def loads(self) -> np.ndarray:
        return np.bincount(self.pos, minlength=self.n)

    def queue(self, u: int) -> list:
        members = np.flatnonzero(self.pos == u)
        return members[np.argsort(self.stamp[members])].tolist()

    def reposition(self, new_pos: np.ndarray, t: int) -> None:
        """Move balls (adversary); queues restart in ascending ball id."""
        new_pos = np.asarray(new_pos, dtype=np.int64)
        if new_pos.shape != self.pos.shape:
            raise ValueError("reposition must place every ball")
        self.pos[:] = new_pos
        self.stamp[:] = t * self.n - self.m + np.arange(self.m)
        self.enq_round[:] = t
        self.enq_load[:] = self.loads()[new_pos]
        if self.tracks_visits:
            ids = np.arange(self.m)
            fresh = ~self.visited[ids, new_pos]
            self.visited[ids, new_pos] = True
            self.visit_count += fresh
            done = fresh & (self.visit_count == self.n)
            self.cover_round[done] = t
            self.counters[2] += int(done.sum())

    def check(self, loads) -> None:
        if not np.array_equal(self.loads(), np.asarray(loads)):
            raise AssertionError("ledger positions disagree with bin loads")
        if self.tracks_visits and not self.visited[np.arange(self.m), self.pos].all():
            raise AssertionError("a ball has not visited its current bin")


class Simulation:
    """Stateful driver for the compiled round kernel.

    ``track`` keeps the ball ledger (needed for progress, waiting times and
    cover time); loads alone are cheaper.
    """

    def __init__(self, q0: Configuration, strategy=Strategy.FIFO, topology: Topology | None = None,
                 seed: int = 0, trial: int = 0, track: bool = True, track_visits: bool = False,
                 capacity: int = 1024):
        self.n = q0.n
        self.m = q0.m
        self.topology = topology or Topology.complete(q0.n)
        if self.topology.n != q0.n:
            raise ValueError("topology and configuration disagree on n")
        self.strategy = Strategy.parse(strategy)
        self.track = bool(track or track_visits)
        self.loads = q0.loads.copy()
        self.ledger = BallLedger.from_configuration(q0, track_visits)
        self._dest = make_generator(seed, trial, "dest")
        self._sel = make_generator(seed, trial, "select")
        self.t = 0
        cap = max(int(capacity), 1) + 1
        self._max = np.zeros(cap, dtype=np.int64)
        self._empty = np.zeros(cap, dtype=np.int64)
        self._over = np.zeros(cap, dtype=np.int64)
        self._record0()

    def _record0(self):
        L = self.loads
        self._max[0] = L.max()
        self._empty[0] = np.count_nonzero(L == 0)
        self._over[0] = np.count_nonzero(L > 1)

    def _grow(self, t_end):
        if t_end < self._max.size:
            return
        size = max(t_end + 1, 2 * self._max.size)
        for name in ("_max", "_empty", "_over"):
            old = getattr(self, name)
            new = np.zeros(size, dtype=np.int64)
            new[:old.size] = old
            setattr(self, name, new)

    @property
    def configuration(self) -> Configuration:
        return Configuration(self.loads)

    def advance(self, t_end: int, stop_max_le: int = -1, stop_on_cover: bool = False) -> bool:
        """Run rounds up to ``t_end``; True if a stop condition fired first."""
        led = self.ledger
        if stop_on_cover and led.covered == self.m:
            return True
        if self.t >= t_end:
            return False
        self._grow(t_end)
        t, status = _backend.kernels.run_rounds(
            self.loads, self.topology.neighbors, int(self.strategy), self.track,
            led.pos, led.stamp, led.progress, led.enq_round, led.enq_load,
            led.visited, led.visit_count, led.cover_round, led.counters,
            self._dest, self._sel, self.t, int(t_end), self._max, self._empty, self._over,
            int(stop_max_le), bool(stop_on_cover))
        self.t = led.round = int(t)
        return status == 2

    def replace_loads(self, q: Configuration, new_pos: np.ndarray) -> None:
        """Overwrite the state (fault injection) after round ``self.t``."""
        self.loads[:] = q.loads
        self.ledger.reposition(new_pos, self.t)

    @property
    def overload_violations(self) -> int:
        return int(self.ledger.counters[3])

    def trajectory(self) -> Trajectory:
        e = self.t + 1
        return Trajectory(self._max[:e].copy(), self._empty[:e].copy(), self._over[:e].copy())


def run(q0: Configuration, s=Strategy.FIFO, topology: Topology | None = None, T: int = 0,
        seed: int = 0, trial: int = 0, track_visits: bool = False):
    """Run ``T`` rounds; returns ``(Trajectory, BallLedger)``."""
    if T < 0:
        raise ValueError("T must be non-negative")
    sim = Simulation(q0, s, topology, seed, trial, track=True, track_visits=track_visits, capacity=T)
    sim.advance(T)
    return sim.trajectory(), sim.ledger


def legitimacy_threshold(n: int, C: float) -> int:
    """Largest integer load that is still legitimate: floor(C ln n)."""
    return int(math.floor(C * math.log(n)))
