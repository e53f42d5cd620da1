import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from ballsbins import core
from ballsbins.core import (Configuration, DestinationDraws, Strategy, Topology, count_empty,
                            count_overloaded, count_singleton, max_load)
from ballsbins.rng import make_generator


class Forced:
    """Stream that returns preset uniforms."""

    def __init__(self, values):
        self.values = list(values)

    def random(self, size):
        out, self.values = self.values[:size], self.values[size:]
        return np.array(out, dtype=float)


def bins_to_uniforms(bins, n):
    return [(b + 0.5) / n for b in bins]


def loads_strategy(min_n=2, max_n=12, max_load=6):
    return st.lists(st.integers(0, max_load), min_size=min_n, max_size=max_n)


@pytest.mark.parametrize("loads,m", [((1, 1, 1, 1), 4), ((4, 0, 0, 0), 4)])
def test_new_configuration(loads, m):
    q = core.new_configuration(loads)
    assert (q.n, q.m) == (len(loads), m)


@pytest.mark.parametrize("bad", [(0, -1), (3,), ()])
def test_new_configuration_rejects(bad):
    with pytest.raises(ValueError):
        core.new_configuration(bad)


def test_configuration_is_immutable():
    q = Configuration((1, 2))
    with pytest.raises(ValueError):
        q.loads[0] = 5


@pytest.mark.parametrize("loads,expected", [
    ((0, 2, 1, 1), (1, 2, 1, 2)),
    ((4, 0, 0, 0), (3, 0, 1, 4)),
    ((1, 1), (0, 2, 0, 1)),
])
def test_counts(loads, expected):
    q = Configuration(loads)
    assert (count_empty(q), count_singleton(q), count_overloaded(q), max_load(q)) == expected


@given(loads_strategy())
def test_counts_partition_bins(loads):
    q = Configuration(loads)
    assert count_empty(q) + count_singleton(q) + count_overloaded(q) == q.n


def test_draw_destinations_forced():
    q = Configuration((1, 1))
    d = core.draw_destinations(q, Topology.complete(2), Forced(bins_to_uniforms([1, 1], 2)))
    assert d.as_dict() == {0: 1, 1: 1}


def test_draw_destinations_domain():
    q = Configuration((0, 3))
    d = core.draw_destinations(q, None, make_generator(1))
    assert set(d.as_dict()) == {1}


def test_destination_frequencies_uniform():
    n, N = 16, 10**6
    gen = make_generator(7)
    q = Configuration.flat(n)
    counts = np.zeros(n, dtype=np.int64)
    for _ in range(N // n):
        counts += np.bincount(core.draw_destinations(q, None, gen).targets, minlength=n)
    se = np.sqrt(N * (1 / n) * (1 - 1 / n))
    assert np.all(np.abs(counts - N / n) <= 5 * se)
    assert chisquare(counts).pvalue > 1e-4


@pytest.mark.parametrize("loads,dests,expected", [
    ((1, 1), {0: 1, 1: 1}, (0, 2)),
    ((2, 0), {0: 0}, (2, 0)),
    ((1, 1, 1, 0), {0: 3, 1: 3, 2: 3}, (0, 0, 0, 3)),
])
def test_step_examples(loads, dests, expected):
    src = np.array(sorted(dests))
    d = DestinationDraws(src, np.array([dests[u] for u in src]))
    assert core.step(Configuration(loads), d).as_tuple() == expected


def test_step_rejects_foreign_draws():
    d = DestinationDraws(np.array([0]), np.array([1]))
    with pytest.raises(ValueError):
        core.step(Configuration((1, 1)), d)


@given(loads_strategy(), st.integers(0, 2**32))
def test_step_conserves_and_drains(loads, seed):
    q = Configuration(loads)
    d = core.draw_destinations(q, None, make_generator(seed))
    q1 = core.step(q, d)
    assert q1.m == q.m
    arrivals = np.bincount(d.targets, minlength=q.n)
    assert np.array_equal(q1.loads - arrivals, np.maximum(q.loads - 1, 0))


@pytest.mark.parametrize("s,expected", [("FIFO", 7), ("LIFO", 9)])
def test_select_ball(s, expected):
    queue = [7, 3, 9]
    assert core.select_ball(queue, s) == expected
    assert len(queue) == 2


def test_select_ball_random_singleton_and_empty():
    assert core.select_ball([7], Strategy.RANDOM, make_generator(0, purpose="select")) == 7
    with pytest.raises(ValueError):
        core.select_ball([], Strategy.FIFO)


def test_strategy_parse():
    assert Strategy.parse("lifo") is Strategy.LIFO
    with pytest.raises(ValueError):
        Strategy.parse("oldest")


def test_run_zero_rounds():
    tr, led = core.run(Configuration.flat(4), "FIFO", T=0)
    assert tr.rounds == 0 and tr.max_load.size == 1
    assert led.round == 0


@pytest.mark.parametrize("start", ["flat", "all_in_one", "random"])
def test_run_conserves_balls(start):
    n = 32
    q0 = {"flat": Configuration.flat(n), "all_in_one": Configuration.all_in_one(n),
          "random": Configuration.random(n, seed=3)}[start]
    sim = core.Simulation(q0, "FIFO", seed=1)
    for t in range(1, 200):
        sim.advance(t)
        assert sim.loads.sum() == n
        sim.ledger.check(sim.loads)


def test_strategy_invariance_of_loads():
    q0 = Configuration.random(64, seed=2)
    trajs = [core.run(q0, s, T=500, seed=9)[0] for s in Strategy]
    for tr in trajs[1:]:
        assert np.array_equal(tr.max_load, trajs[0].max_load)
        assert np.array_equal(tr.empty, trajs[0].empty)


def test_run_is_deterministic():
    q0 = Configuration.random(50, seed=4)
    a, la = core.run(q0, "RANDOM", T=300, seed=5, trial=2)
    b, lb = core.run(q0, "RANDOM", T=300, seed=5, trial=2)
    assert np.array_equal(a.max_load, b.max_load) and np.array_equal(la.pos, lb.pos)
    c, _ = core.run(q0, "RANDOM", T=300, seed=5, trial=3)
    assert not np.array_equal(a.empty, c.empty)


def test_simulation_matches_reference_steps(backend):
    n = 24
    q = Configuration.random(n, seed=1)
    sim = core.Simulation(q, "FIFO", seed=11, track=False)
    gen = make_generator(11, 0, "dest")
    for t in range(1, 60):
        q = core.step(q, core.draw_destinations(q, None, gen))
        sim.advance(t)
        assert np.array_equal(sim.loads, q.loads)


def test_simulation_matches_reference_steps_on_ring(backend):
    topo = Topology.ring(10)
    q = Configuration.random(10, seed=2)
    sim = core.Simulation(q, "LIFO", topo, seed=3)
    gen = make_generator(3, 0, "dest")
    for t in range(1, 40):
        d = core.draw_destinations(q, topo, gen)
        assert all(v in topo.neighbor_set(u) for u, v in d.as_dict().items())
        q = core.step(q, d)
        sim.advance(t)
        assert np.array_equal(sim.loads, q.loads)


def test_overloaded_never_exceeds_empty(backend):
    for n in (4, 16, 100, 512):
        for start in (Configuration.flat(n), Configuration.all_in_one(n)):
            sim = core.Simulation(start, seed=n, track=False)
            sim.advance(2000)
            tr = sim.trajectory()
            assert np.all(tr.overloaded <= tr.empty)
            assert sim.overload_violations == 0


@settings(max_examples=30, deadline=None)
@given(loads_strategy(2, 10, 5), st.integers(0, 1000))
def test_overload_identity_any_m(loads, seed):
    q = Configuration(loads)
    if q.m == 0:
        return
    sim = core.Simulation(q, seed=seed, track=False)
    sim.advance(50)
    tr = sim.trajectory()
    assert np.all(tr.overloaded <= tr.empty + q.m - q.n)
    assert sim.overload_violations == 0


class TestTopology:
    def test_complete_includes_self(self):
        t = Topology.complete(5)
        assert t.deg == 5 and 2 in t.neighbor_set(2)

    def test_ring_excludes_self(self):
        t = Topology.ring(6)
        assert t.neighbors.tolist()[0] == [5, 1]
        assert all(u not in t.neighbors[u] for u in range(6))

    def test_regular_graph(self):
        import networkx as nx

        t = Topology.regular(40, 3, seed=1)
        nb = t.neighbors
        assert nb.shape == (40, 3)
        assert all(len(set(r)) == 3 and u not in r for u, r in enumerate(nb.tolist()))
        g = nx.Graph([(u, v) for u in range(40) for v in nb[u]])
        assert nx.is_connected(g)

    @pytest.mark.parametrize("args", [("regular", 5, 3), ("regular", 6, 6), ("ring", 2, None), ("torus", 4, None)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            Topology(*args)


def test_random_configuration_reproducible():
    a = Configuration.random(100, seed=3, trial=1)
    assert a == Configuration.random(100, seed=3, trial=1)
    assert a.m == 100


def test_legitimacy_threshold():
    assert core.legitimacy_threshold(1024, 10) == 69
