"""Exact rational answers for tiny instances by brute-force enumeration.

A configuration with ``k`` non-empty bins has ``n**k`` equally likely
destination assignments (self-loops included).  Everything here uses
``fractions.Fraction``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

MAX_WORK = 2_000_000


class OracleSizeError(ValueError):
    pass


def _guard(n, m):
    # states times assignments per state, worst case
    work = comb(n + m - 1, m) * n ** min(n, m)
    if work > MAX_WORK:
        raise OracleSizeError(f"n={n}, m={m} needs ~{work} transitions per round (limit {MAX_WORK})")


def _as_loads(q):
    loads = tuple(int(x) for x in getattr(q, "loads", q))
    if len(loads) < 2 or min(loads) < 0:
        raise ValueError("need at least 2 bins with non-negative loads")
    return loads


def _transitions(loads):
    """Yield ``(next_loads, arrivals)`` for each of the equally likely assignments."""
    n = len(loads)
    src = [u for u in range(n) if loads[u] > 0]
    base = [x - 1 if x > 0 else 0 for x in loads]
    for dest in itertools.product(range(n), repeat=len(src)):
        arr = [0] * n
        for v in dest:
            arr[v] += 1
        yield tuple(b + a for b, a in zip(base, arr)), arr


@dataclass
class ExactDistribution:
    n: int
    m: int
    probs: dict = field(default_factory=dict)  # loads tuple -> Fraction
    round: int = 0

    @classmethod
    def point(cls, q) -> "ExactDistribution":
        loads = _as_loads(q)
        return cls(len(loads), sum(loads), {loads: Fraction(1)}, 0)

    def total(self) -> Fraction:
        return sum(self.probs.values(), Fraction(0))

    def __getitem__(self, loads) -> Fraction:
        return self.probs.get(tuple(loads), Fraction(0))


def evolve_exact(d: ExactDistribution) -> ExactDistribution:
    _guard(d.n, d.m)
    out: dict = {}
    for loads, p in d.probs.items():
        k = sum(1 for x in loads if x > 0)
        w = p / d.n ** k
        for nxt, _ in _transitions(loads):
            out[nxt] = out.get(nxt, 0) + w
    return ExactDistribution(d.n, d.m, out, d.round + 1)


def distribution_after(q0, rounds: int) -> ExactDistribution:
    d = ExactDistribution.point(q0)
    for _ in range(rounds):
        d = evolve_exact(d)
    return d


def joint_event_probability(n: int, q0, events) -> Fraction:
    """Probability that every event holds.

    Each event is ``(round, bin, predicate)``: ``predicate`` is applied to the
    number of balls entering ``bin`` (0-indexed) during ``round`` (1-indexed),
    self-loops included.  An int predicate means equality.
    """
    loads = _as_loads(q0)
    if len(loads) != n:
        raise ValueError("q0 does not have n bins")
    _guard(n, sum(loads))
    by_round: dict = {}
    for r, u, pred in events:
        if r < 1 or not 0 <= u < n:
            raise ValueError(f"bad event ({r}, {u})")
        f = (lambda x, c=pred: x == c) if isinstance(pred, int) else pred
        by_round.setdefault(r, []).append((u, f))
    horizon = max(by_round, default=0)
    mass = {loads: Fraction(1)}
    for r in range(1, horizon + 1):
        checks = by_round.get(r, [])
        nxt: dict = {}
        for cur, p in mass.items():
            w = p / n ** sum(1 for x in cur if x > 0)
            for new, arr in _transitions(cur):
                if all(f(arr[u]) for u, f in checks):
                    nxt[new] = nxt.get(new, 0) + w
        mass = nxt
    return sum(mass.values(), Fraction(0))


def arrival_distribution(n: int, q0, u: int, r: int) -> dict:
    """Exact law of the number of arrivals into ``u`` in round ``r``."""
    m = sum(_as_loads(q0))
    return {c: joint_event_probability(n, q0, [(r, u, c)]) for c in range(m + 1)}


def _solve(a, b):
    # Gauss-Jordan over Fractions
    size = len(b)
    a = [row[:] + [b[i]] for i, row in enumerate(a)]
    for c in range(size):
        piv = next(r for r in range(c, size) if a[r][c] != 0)
        a[c], a[piv] = a[piv], a[c]
        inv = 1 / a[c][c]
        a[c] = [x * inv for x in a[c]]
        for r in range(size):
            if r != c and a[r][c] != 0:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return [a[i][size] for i in range(size)]


def single_ball_cover_mean(n: int, start: int = 0) -> Fraction:
    """Expected rounds until one ball, jumping uniformly (self-loop allowed), has seen every bin.

    Solved as an absorbing chain over visited sets, the start bin counting
    as visited.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if n > 8:
        raise OracleSizeError("state space too large; n <= 8")
    full = (1 << n) - 1
    states = [s for s in range(1, full) if s >> start & 1]
    index = {s: i for i, s in enumerate(states)}
    size = len(states)
    a = [[Fraction(0)] * size for _ in range(size)]
    b = [Fraction(1)] * size
    p = Fraction(1, n)
    for i, s in enumerate(states):
        a[i][i] += 1
        for w in range(n):
            s2 = s | 1 << w
            if s2 != full:
                a[i][index[s2]] -= p
    return _solve(a, b)[index[1 << start]]


def single_ball_cover_cdf(n: int, t: int, start: int = 0) -> Fraction:
    """P(one ball has seen all ``n`` bins by round ``t``)."""
    dist = {1 << start: Fraction(1)}
    full = (1 << n) - 1
    for _ in range(t):
        nxt: dict = {}
        for s, p in dist.items():
            for w in range(n):
                s2 = s | 1 << w
                nxt[s2] = nxt.get(s2, 0) + p / n
        dist = nxt
    return dist.get(full, Fraction(0))
