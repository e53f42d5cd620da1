"""Monte Carlo experiment engine.

An ``ExperimentSpec`` fixes everything about a run; ``run_experiment`` fans
its trials out over a thread pool (the compiled kernels release the GIL)
and folds the per-trial results in trial order, so the report does not
depend on scheduling.  ``BALLSBINS_WORKERS`` sets the pool size.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import norm

from . import _backend, bounds, oracle
from .core import Configuration, Simulation, Strategy, Topology
from .coupling import coupled_run
from .metrics import FaultKind, FaultSchedule, cover_time, single_ball_cover_times, stabilize
from .rng import make_generator
from .tetris import arrivals_per_round, simulate as tetris_simulate


class Kind(enum.Enum):
    STABILITY = "stability"
    STABILIZE = "stabilize"
    TETRIS = "tetris"
    COUPLE = "couple"
    COVER = "cover"
    EXACT_CHECK = "exact_check"
    EMPTY_BINS = "empty_bins"
    CONJECTURE = "conjecture"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown experiment kind {value!r}") from None


STARTS = ("random", "flat", "all_in_one")


@dataclass(frozen=True)
class ExperimentSpec:
    kind: Kind = Kind.STABILITY
    n: int = 64
    m: int | None = None
    T: int = 1000
    trials: int = 1
    strategy: Strategy = Strategy.FIFO
    topology: str = "complete"
    degree: int | None = None
    C: float = 10.0
    beta: float = 2.0
    fault_period: int | None = None
    fault_kind: FaultKind = FaultKind.ALL_IN_ONE
    fault_target: int = 0
    seed: int = 0
    start: str | None = None  # default depends on kind

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "kind", Kind.parse(self.kind))
        set_(self, "strategy", Strategy.parse(self.strategy))
        set_(self, "fault_kind", FaultKind.parse(self.fault_kind))
        if self.m is None:
            set_(self, "m", self.n)
        if self.start is None:
            set_(self, "start", "all_in_one" if self.kind is Kind.STABILIZE else "random")
        self.validate()

    def validate(self):
        k = self.kind
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.m < 1:
            raise ValueError("need at least one ball")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.start not in STARTS:
            raise ValueError(f"start must be one of {STARTS}")
        if self.start == "flat" and self.m != self.n:
            raise ValueError("a flat start needs m == n")
        if not self.C > 0 or not self.beta > 0:
            raise ValueError("C and beta must be positive")
        if self.fault_period is not None and self.fault_period < 1:
            raise ValueError("fault period must be at least 1")
        if self.fault_period is not None and self.fault_kind is FaultKind.CUSTOM:
            raise ValueError("custom faults need a generator and are library-only")
        if not 0 <= self.fault_target < self.n:
            raise ValueError("fault target out of range")
        self.make_topology()
        if k in (Kind.COUPLE, Kind.TETRIS, Kind.EXACT_CHECK) and self.topology != "complete":
            raise ValueError(f"{k.value} experiments run on the complete graph only")
        if k is Kind.COUPLE and (self.n % 4 or self.m != self.n):
            raise ValueError("coupling needs n divisible by 4 and m == n")
        if k is Kind.TETRIS and self.n < 4:
            raise ValueError("the Tetris process needs n >= 4")
        if k is Kind.EXACT_CHECK:
            oracle._guard(self.n, self.m)
        if k is Kind.CONJECTURE and self.topology == "complete":
            raise ValueError("conjecture experiments need a ring or regular topology")

    def make_topology(self) -> Topology:
        if self.topology == "complete":
            return Topology.complete(self.n)
        if self.topology == "ring":
            return Topology.ring(self.n)
        if self.topology == "regular":
            return Topology.regular(self.n, self.degree if self.degree is not None else 3, self.seed)
        raise ValueError(f"unknown topology {self.topology!r}")

    def initial(self, trial: int) -> Configuration:
        if self.start == "flat":
            return Configuration.flat(self.n)
        if self.start == "all_in_one":
            return Configuration.all_in_one(self.n, self.m)
        return Configuration.random(self.n, self.m, self.seed, trial)

    def fault_schedule(self) -> FaultSchedule:
        return FaultSchedule(self.fault_period, self.fault_kind, self.fault_target)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["strategy"] = self.strategy.name
        d["fault_kind"] = self.fault_kind.value
        return d


def wilson_interval(successes: int, trials: int, confidence: float = 0.95):
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    z = float(norm.ppf(0.5 + confidence / 2))
    p = successes / trials
    z2n = z * z / trials
    centre = (p + z2n / 2) / (1 + z2n)
    half = z * math.sqrt(p * (1 - p) / trials + z2n / (4 * trials)) / (1 + z2n)
    low = 0.0 if successes == 0 else max(0.0, centre - half)
    high = 1.0 if successes == trials else min(1.0, centre + half)
    return low, high


class Model(enum.Enum):
    LOG_N = "log_n"
    N_LOG2_N = "n_log2_n"
    LINEAR_N = "linear_n"

    def __call__(self, n):
        n = np.asarray(n, dtype=np.float64)
        if self is Model.LOG_N:
            return np.log(n)
        if self is Model.N_LOG2_N:
            return n * np.log(n) ** 2
        return n


@dataclass(frozen=True)
class ScalingFit:
    coefficient: float
    residual_norm: float
    relative: np.ndarray  # (value - fit) / value per point

    @property
    def max_relative(self) -> float:
        return float(np.abs(self.relative).max())


def scaling_fit(points, model) -> ScalingFit:
    """Fit ``value ~ a * model(n)`` minimising the squared relative residuals."""
    model = model if isinstance(model, Model) else Model(str(model).lower())
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (n, value) pairs")
    if np.unique(pts[:, 0]).size < 3:
        raise ValueError("need at least 3 distinct n values")
    if (pts[:, 0] < 2).any() or (pts[:, 1] <= 0).any():
        raise ValueError("need n >= 2 and positive values")
    n, y = pts[:, 0], pts[:, 1]
    r = model(n) / y
    a = float(r.sum() / (r * r).sum())
    resid = y - a * model(n)
    return ScalingFit(a, float(np.linalg.norm(resid)), resid / y)


@dataclass
class Aggregate:
    count: int
    min: float
    mean: float
    max: float
    q05: float
    q50: float
    q95: float

    @classmethod
    def of(cls, values) -> "Aggregate":
        v = np.asarray(values, dtype=np.float64)
        q = np.quantile(v, [0.05, 0.5, 0.95])
        return cls(int(v.size), float(v.min()), float(v.mean()), float(v.max()), *map(float, q))


@dataclass
class Tail:
    successes: int
    trials: int
    frequency: float
    low: float
    high: float
    bound: float | None = None  # analytic upper bound on the event probability, when one applies

    @classmethod
    def of(cls, successes, trials, bound=None) -> "Tail":
        low, high = wilson_interval(int(successes), int(trials))
        return cls(int(successes), int(trials), successes / trials, low, high, bound)


@dataclass
class SummaryReport:
    spec: ExperimentSpec
    metrics: dict = field(default_factory=dict)
    tails: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    per_trial: list = field(default_factory=list)
    trajectories: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def enc(x):
            if isinstance(x, Fraction):
                return {"num": x.numerator, "den": x.denominator}
            if isinstance(x, (np.integer,)):
                return int(x)
            if isinstance(x, (float, np.floating)):
                if math.isnan(x):
                    return None
                return float(x) if math.isfinite(x) else ("inf" if x > 0 else "-inf")
            if isinstance(x, (np.bool_,)):
                return bool(x)
            if isinstance(x, dict):
                return {str(k): enc(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [enc(v) for v in x]
            return x

        return enc({
            "spec": self.spec.as_dict(),
            "metrics": {k: asdict(v) for k, v in self.metrics.items()},
            "tails": {k: asdict(v) for k, v in self.tails.items()},
            "exact": self.exact,
            "checks": self.checks,
            "per_trial": self.per_trial,
        })


def worker_count() -> int:
    env = os.environ.get("BALLSBINS_WORKERS", "").strip()
    if env:
        w = int(env)
        if w < 1:
            raise ValueError("BALLSBINS_WORKERS must be at least 1")
        return w
    return os.cpu_count() or 1


def _fan_out(fn, trials, workers):
    if workers == 1 or trials == 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


# per-trial runners: each returns (scalar metrics dict, trajectory)

def _trial_stability(spec, topo, i, track=True):
    q0 = spec.initial(i)
    n = spec.n
    sim = Simulation(q0, spec.strategy, topo, spec.seed, i, track=track, capacity=spec.T)
    sim.advance(spec.T)
    tr = sim.trajectory()
    led = sim.ledger
    after = tr.max_load[1:] if spec.T else tr.max_load
    legit = np.flatnonzero(tr.max_load <= spec.C * math.log(n))
    settle = max(1, int(legit[0])) if legit.size else spec.T + 1
    empties = tr.empty[settle:]
    out = {
        "max_load": int(tr.max_load.max()),
        "max_load_after_start": int(after.max()),
        "exceeded_threshold": bool(tr.max_load[settle:].max(initial=0) > spec.C * math.log(n)),
        "settle_round": settle,
        "min_empty": int(empties.min()) if empties.size else -1,
        "empty_floor_violations": int(np.count_nonzero(4 * empties < n)),
        "overload_violations": sim.overload_violations,
    }
    if track:
        out.update(max_wait=led.max_wait, wait_violations=led.wait_violations,
                   min_progress=int(led.progress.min()) if led.m else 0)
    return out, tr


def _trial_empty_bins(spec, topo, i):
    return _trial_stability(spec, topo, i, track=False)


def _trial_stabilize(spec, topo, i):
    q0 = spec.initial(i)
    r = stabilize(q0, spec.C, spec.T, spec.seed, i, spec.strategy, track=True)
    n = spec.n
    drain = n - spec.C * math.log(n) if spec.start == "all_in_one" else 0
    out = {
        "time": -1 if r.time is None else r.time,
        "converged": r.time is not None,
        "time_over_n": float("nan") if r.time is None else r.time / n,
        "before_drain_bound": r.time is not None and r.time < drain,
        "max_wait": r.ledger.max_wait,
        "wait_violations": r.ledger.wait_violations,
        "overload_violations": r.overload_violations,
    }
    return out, r.trajectory


def _trial_tetris(spec, topo, i):
    n = spec.n
    warm = 5 * n
    q0 = spec.initial(i)
    rec = np.arange(min(n, 16))
    run = tetris_simulate(q0, warm + spec.T, spec.seed, i, record_bins=rec)
    first = run.first_empty
    emptied = bool((first >= 0).all() and first.max() <= warm)
    tail = run.trajectory.max_load[warm:]
    counts = run.counter.counts[1:]
    out = {
        "all_emptied_within_5n": emptied,
        "last_first_empty": int(first.max()) if (first >= 0).all() else -1,
        "max_load_after_5n": int(tail.max()) if tail.size else -1,
        "exceeds_threshold": bool(tail.size and tail.max() > bounds.between_empty_threshold(spec.beta, n)),
        "arrival_mean": float(counts.mean()) if counts.size else float("nan"),
        "arrival_var": float(counts.var()) if counts.size else float("nan"),
    }
    return out, run.trajectory


def _trial_couple(spec, topo, i):
    c = coupled_run(spec.initial(i), spec.T, spec.seed, i)
    out = {
        "case_ii_rounds": c.case_ii_rounds,
        "non_dominated_rounds": c.non_dominated_rounds,
        "induction_violations": c.induction_violations,
        "dominance_held": c.dominance_held,
        "M_T": c.M_T,
        "hat_M_T": c.hat_M_T,
        "event_failures": int(np.count_nonzero(c.original.empty_event[1:] == 0)),
    }
    return out, c.original


def _trial_cover(spec, topo, i):
    q0 = spec.initial(i)
    horizon = spec.T
    faults = spec.fault_schedule()
    r = cover_time(q0, horizon, spec.seed, i, faults, spec.strategy, topo)
    n = spec.n
    out = {
        "parallel_cover": -1 if r.parallel is None else r.parallel,
        "covered": r.parallel is not None,
        "within_4nlog2n": r.parallel is not None and r.parallel <= 4 * n * math.log(n) ** 2,
        "faults": r.faults,
        "max_wait": r.ledger.max_wait,
        "wait_violations": r.ledger.wait_violations,
        "overload_violations": r.overload_violations,
        "min_progress": int(r.ledger.progress.min()),
    }
    if faults.active:
        base = cover_time(q0, horizon, spec.seed, i, None, spec.strategy, topo)
        out["fault_free_cover"] = -1 if base.parallel is None else base.parallel
        ok = base.parallel is not None and r.parallel is not None
        out["slowdown"] = r.parallel / base.parallel if ok else float("nan")
        out["base_wait_violations"] = base.ledger.wait_violations
    return out, r.trajectory


_RUNNERS = {
    Kind.STABILITY: _trial_stability,
    Kind.CONJECTURE: _trial_stability,
    Kind.EMPTY_BINS: _trial_empty_bins,
    Kind.STABILIZE: _trial_stabilize,
    Kind.TETRIS: _trial_tetris,
    Kind.COUPLE: _trial_couple,
    Kind.COVER: _trial_cover,
}


def simulate_small(q0: Configuration, rounds: int, trials: int, seed: int = 0, chunk: int = 100_000):
    """Many independent short runs of a tiny instance on the complete graph.

    Returns ``(configs, arrivals)`` with shapes ``(trials, rounds + 1, n)``
    and ``(trials, rounds, n)``.
    """
    n = q0.n
    configs = np.zeros((trials, rounds + 1, n), dtype=np.int64)
    arrivals = np.zeros((trials, rounds, n), dtype=np.int64)
    gen = make_generator(seed, 0, "batch")
    for lo in range(0, trials, chunk):
        hi = min(trials, lo + chunk)
        buf = gen.random((hi - lo, rounds, n))
        _backend.kernels.batch_loads(q0.loads, buf, configs[lo:hi], arrivals[lo:hi])
    return configs, arrivals


def _exact_check(spec: ExperimentSpec) -> SummaryReport:
    # the default start for this kind is the flat configuration
    q0 = Configuration.flat(spec.n) if spec.start == "random" and spec.m == spec.n else spec.initial(0)
    n = spec.n
    rounds = 3
    events = {
        "P[X1=0]": [(1, 0, 0)],
        "P[X2=0]": [(2, 0, 0)],
        "P[X1=0,X2=0]": [(1, 0, 0), (2, 0, 0)],
    }
    exact = {k: oracle.joint_event_probability(n, q0, ev) for k, ev in events.items()}
    exact["P[X1=0]*P[X2=0]"] = exact["P[X1=0]"] * exact["P[X2=0]"]
    configs, arr = simulate_small(q0, rounds, spec.trials, spec.seed)
    N = spec.trials
    hits = {
        "P[X1=0]": arr[:, 0, 0] == 0,
        "P[X2=0]": arr[:, 1, 0] == 0,
        "P[X1=0,X2=0]": (arr[:, 0, 0] == 0) & (arr[:, 1, 0] == 0),
    }
    checks = {"negative_association_fails": exact["P[X1=0,X2=0]"] > exact["P[X1=0]*P[X2=0]"]}
    rep = SummaryReport(spec, exact=exact, checks=checks)
    for k, h in hits.items():
        p = float(exact[k])
        se = math.sqrt(p * (1 - p) / N)
        f = float(h.mean())
        rep.tails[k] = Tail.of(int(h.sum()), N)
        rep.checks[k + " z"] = (f - p) / se if se else 0.0
    # every configuration cell after 1..rounds rounds
    worst = 0.0
    d = oracle.ExactDistribution.point(q0)
    for r in range(1, rounds + 1):
        d = oracle.evolve_exact(d)
        keys, counts = np.unique(configs[:, r, :], axis=0, return_counts=True)
        seen = {tuple(k): c for k, c in zip(keys.tolist(), counts.tolist())}
        for cfg, p in d.probs.items():
            p = float(p)
            se = math.sqrt(p * (1 - p) / N)
            f = seen.pop(cfg, 0) / N
            if se:
                worst = max(worst, abs(f - p) / se)
        if seen:
            worst = math.inf  # a configuration the oracle gives probability 0
    rep.checks["max_cell_z"] = worst
    return rep


def _report(spec, results, keep):
    rep = SummaryReport(spec)
    rows = [r for r, _ in results]
    rep.per_trial = rows
    if keep:
        rep.trajectories = [t for _, t in results]
    for key in rows[0]:
        vals = [r[key] for r in rows]
        if all(isinstance(v, (bool, np.bool_)) for v in vals):
            rep.tails[key] = Tail.of(sum(bool(v) for v in vals), len(vals))
        else:
            finite = [v for v in vals if not (isinstance(v, float) and math.isnan(v))]
            if finite:
                rep.metrics[key] = Aggregate.of(finite)
    n, k = spec.n, spec.kind
    if k is Kind.TETRIS:
        T = 5 * n + spec.T
        rep.checks["not_emptied_bound"] = min(1.0, n * bounds.emptying_tail_bound(n))
        rep.tails["exceeds_threshold"].bound = min(1.0, n * bounds.between_empty_bound(spec.beta, T + 1, n))
        rep.checks["between_empty_threshold"] = bounds.between_empty_threshold(spec.beta, n)
        rep.checks["arrival_mean_expected"] = bounds.tetris_window_mean(0)
        rep.checks["arrivals_per_round"] = arrivals_per_round(n)
    if k in (Kind.STABILITY, Kind.CONJECTURE, Kind.EMPTY_BINS, Kind.STABILIZE):
        rep.checks["threshold"] = spec.C * math.log(n)
    if k is Kind.STABILIZE and spec.start == "all_in_one":
        rep.checks["drain_lower_bound"] = n - spec.C * math.log(n)
    if k is Kind.COVER:
        rep.checks["cover_bound_4nlog2n"] = 4 * n * math.log(n) ** 2
    return rep


def run_experiment(spec: ExperimentSpec, keep_trajectories: bool = False,
                   workers: int | None = None) -> SummaryReport:
    spec.validate()
    if spec.kind is Kind.EXACT_CHECK:
        return _exact_check(spec)
    topo = spec.make_topology()
    topo.neighbors  # build once before threads share it
    runner = _RUNNERS[spec.kind]
    results = _fan_out(lambda i: runner(spec, topo, i), spec.trials, workers or worker_count())
    return _report(spec, results, keep_trajectories)


def sweep(spec: ExperimentSpec, ns, **kw) -> list:
    """Same experiment over several ``n`` (``m`` follows ``n`` when it did in ``spec``)."""
    from dataclasses import replace

    follow = spec.m == spec.n
    return [run_experiment(replace(spec, n=n, m=n if follow else spec.m), **kw) for n in ns]


def coupon_check(n: int = 4, trials: int = 1_000_000, seed: int = 0):
    """Single-ball cover times against the exact mean: ``(exact, mean, standard error)``."""
    x = single_ball_cover_times(n, trials, seed)
    if (x < 0).any():
        raise RuntimeError("a single-ball run did not cover within the horizon")
    return oracle.single_ball_cover_mean(n), float(x.mean()), float(x.std(ddof=1) / math.sqrt(trials))
