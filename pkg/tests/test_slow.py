"""Spec-scale Monte Carlo properties; minutes each."""

import numpy as np
import pytest

from ballsbins import bounds, tetris
from ballsbins.core import Configuration, Simulation
from ballsbins.harness import ExperimentSpec, run_experiment, wilson_interval

pytestmark = pytest.mark.slow

N = 1024


def test_tetris_max_load_over_n_squared():
    threshold = bounds.between_empty_threshold(2, N)
    worst = 0
    for trial in range(50):
        run = tetris.simulate(Configuration.random(N, seed=11, trial=trial), N * N, seed=11, trial=trial)
        worst = max(worst, int(run.trajectory.max_load.max()))
    assert worst <= threshold, (worst, threshold)


def test_between_empty_window():
    # every bin has emptied before the window opens, then 10^4 rounds per bin
    threshold = bounds.between_empty_threshold(2, N)
    exceed = 0
    for trial in range(4):
        warm = tetris.simulate(Configuration.random(N, seed=12, trial=trial), 5 * N, seed=12, trial=trial)
        assert (warm.first_empty >= 0).all()
        run = tetris.simulate(warm.state, 10**4, seed=13, trial=trial)
        exceed += int(run.trajectory.max_load.max() > threshold)
    assert exceed == 0
    assert bounds.between_empty_chernoff(2, 10**4, N) < bounds.between_empty_bound(2, 10**4, N)


def test_tetris_emptying_from_all_in_one():
    hits = 0
    for trial in range(100):
        first = tetris.first_empty_times(Configuration.all_in_one(N), 5 * N, seed=14, trial=trial)
        hits += bool((first >= 0).all())
    assert hits == 100


@pytest.mark.parametrize("start", ["random", "all_in_one"])
def test_empty_bins_ten_million_rounds(start):
    # 50 trials x 10^5 rounds per start, 10^7 rounds over both starts
    rep = run_experiment(ExperimentSpec(kind="empty_bins", n=N, T=10**5, trials=50, seed=15, start=start))
    violations = sum(r["empty_floor_violations"] for r in rep.per_trial)
    assert violations == 0
    low, high = wilson_interval(0, 50 * 10**5)
    assert high < 1e-6


def test_overload_bound_random_strategy_long_run():
    sim = Simulation(Configuration.all_in_one(N), "RANDOM", seed=16, capacity=10**5)
    sim.advance(10**5)
    tr = sim.trajectory()
    assert sim.overload_violations == 0
    assert np.all(tr.overloaded <= tr.empty)
