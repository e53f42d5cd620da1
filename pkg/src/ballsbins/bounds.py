"""Closed-form tail bounds used as analytic baselines.

All logarithms are natural.  Values are plain doubles: the bounds are
conservative, so rounding direction does not matter at the magnitudes
reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def _check_delta(delta):
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _check_mu(mu):
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")


def chernoff_lower(mu_L: float, delta: float) -> float:
    """Bound on P(X <= (1 - delta) mu_L) for a sum of independent 0/1 variables."""
    _check_mu(mu_L)
    _check_delta(delta)
    return math.exp(-delta * delta * mu_L / 2)


def chernoff_upper(mu_H: float, delta: float) -> float:
    """Bound on P(X >= (1 + delta) mu_H)."""
    _check_mu(mu_H)
    _check_delta(delta)
    return math.exp(-delta * delta * mu_H / 3)


def _check_beta_n(beta, n):
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not n >= 2:
        raise ValueError(f"n must be at least 2, got {n}")


def between_empty_threshold(beta: float, n: float) -> float:
    """Tetris load level (192/5) beta ln n."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not n > 1:
        raise ValueError(f"n must exceed 1, got {n}")
    return 192 / 5 * beta * math.log(n)


def between_empty_bound(beta: float, window_len: int, n: float) -> float:
    """Bound on P(a bin empty at the window start exceeds the threshold inside the window).

    Not capped at 1, so it can be vacuous.
    """
    _check_beta_n(beta, n)
    if window_len < 1:
        raise ValueError("window_len must be at least 1")
    return window_len ** 2 / n ** beta


def window_mu_H(delta_len: int, beta: float, n: float) -> float:
    return max(0.75 * (delta_len + 1), 48 * beta * math.log(n))


def between_empty_chernoff(beta: float, window_len: int, n: float) -> float:
    """The same event bounded by the per-window Chernoff terms before they are
    relaxed to ``exp(-beta ln n)``; never larger than ``between_empty_bound``."""
    _check_beta_n(beta, n)
    if window_len < 1:
        raise ValueError("window_len must be at least 1")
    terms = [chernoff_upper(window_mu_H(d, beta, n), 0.25) for d in range(window_len)]
    # round t = tau1 + j sums the first j + 1 terms
    total = 0.0
    running = 0.0
    for x in terms:
        running += x
        total += running
    return total


def tetris_window_mean(delta_len: int) -> float:
    """Expected arrivals into one bin over ``delta_len + 1`` consecutive Tetris rounds."""
    if delta_len < 0:
        raise ValueError("window offset must be non-negative")
    return 0.75 * (delta_len + 1)


def emptying_exponent(delta: float = 1 / 15, rounds_factor: int = 5) -> float:
    """Rate r with P(more than ``4n`` arrivals in ``5n`` rounds) <= exp(-r n)."""
    mu_per_n = 0.75 * rounds_factor
    _check_delta(delta)
    return delta * delta * mu_per_n / 3


def emptying_tail_bound(n: int) -> float:
    """exp(-n/180): chance a bin stays non-empty for 5n Tetris rounds."""
    if n < 1:
        raise ValueError("n must be positive")
    return math.exp(-emptying_exponent() * n)


@dataclass(frozen=True)
class BoundParams:
    n: int
    delta: float = 0.25
    beta: float = 2.0
    mu_L: float | None = None
    mu_H: float | None = None
    window: int = 0  # Delta
    alpha: float | None = None
    gamma: float | None = None
    eps: float | None = None

    def __post_init__(self):
        _check_delta(self.delta)
        _check_beta_n(self.beta, self.n)
        for name in ("mu_L", "mu_H"):
            v = getattr(self, name)
            if v is not None:
                _check_mu(v)
        if self.window < 0:
            raise ValueError("window must be non-negative")

    def summary(self) -> dict:
        out = {
            "threshold": between_empty_threshold(self.beta, self.n),
            "window_mean": tetris_window_mean(self.window),
            "emptying_tail": emptying_tail_bound(self.n),
            "between_empty": between_empty_bound(self.beta, self.window + 1, self.n),
            "between_empty_chernoff": between_empty_chernoff(self.beta, self.window + 1, self.n),
        }
        if self.mu_L is not None:
            out["chernoff_lower"] = chernoff_lower(self.mu_L, self.delta)
        if self.mu_H is not None:
            out["chernoff_upper"] = chernoff_upper(self.mu_H, self.delta)
        return out
