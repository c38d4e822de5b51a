"""Adaptation controllers: data interarrival time at the source, and the
early-exit confidence threshold.

Both react to the combined queue size q = I_n + O_n with strict
threshold comparisons; q equal to T_Q1 or T_Q2 leaves the value
unchanged. After each update the controller sleeps for `sleep_s`
(realized by the engine as the next wake time).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

MODE_RATE = "rate"
MODE_THRESHOLD = "threshold"
MODE_NONE = "none"

SCOPE_PER_WORKER = "per-worker"
SCOPE_SOURCE_GLOBAL = "source-global"


@dataclass(frozen=True)
class ControllerConfig:
    mode: str = MODE_NONE
    alpha: float = 0.2
    beta: float = 0.1
    zeta: float = 0.2
    t_q1: int = 10
    t_q2: int = 30
    sleep_s: float = 1.0
    t_e_min: float = 0.5
    mu_min: float = 1e-4
    scope: str = SCOPE_PER_WORKER   # threshold mode only

    def __post_init__(self):
        if self.mode not in (MODE_RATE, MODE_THRESHOLD, MODE_NONE):
            raise ValueError(f"unknown controller mode {self.mode!r}")
        if not (0 < self.beta < self.alpha < 1):
            raise ValueError("need 0 < beta < alpha < 1")
        if not (0 < self.zeta < 1):
            raise ValueError("zeta must be in (0,1)")
        if self.t_q1 > self.t_q2:
            raise ValueError("T_Q1 must be <= T_Q2")
        if self.sleep_s <= 0:
            raise ValueError("sleep must be positive")
        if not (0 < self.t_e_min <= 1):
            raise ValueError("T_e_min must be in (0,1]")
        if self.scope not in (SCOPE_PER_WORKER, SCOPE_SOURCE_GLOBAL):
            raise ValueError(f"unknown scope {self.scope!r}")


def adapt_interarrival(q: int, mu: float, cfg: ControllerConfig) -> tuple[float, str]:
    """One interarrival-time update from queue size q.

    Short queues shrink mu aggressively (alpha), moderate queues shrink it
    gently (beta), long queues grow it (zeta). Returns (new mu, branch).
    """
    if q < cfg.t_q1:
        new = mu - cfg.alpha * mu
        branch = "alpha"
    elif cfg.t_q1 < q < cfg.t_q2:
        new = mu - cfg.beta * mu
        branch = "beta"
    elif q > cfg.t_q2:
        new = mu + cfg.zeta * mu
        branch = "zeta"
    else:
        return mu, "hold"
    return max(new, cfg.mu_min), branch


def adapt_threshold(q: int, t_e: float, cfg: ControllerConfig) -> tuple[float, str]:
    """One exit-threshold update from queue size q.

    Short queues raise the threshold (more accuracy), long queues lower it
    (more early exits), clamped into [T_e_min, 1]. Returns (new T_e, branch).
    """
    if q < cfg.t_q1:
        return min(1.0, t_e + cfg.alpha * t_e), "alpha"
    if cfg.t_q1 < q < cfg.t_q2:
        return min(1.0, t_e + cfg.beta * t_e), "beta"
    if q > cfg.t_q2:
        return max(cfg.t_e_min, t_e - cfg.zeta * t_e), "zeta"
    return t_e, "hold"


ARRIVAL_ADAPTIVE = "adaptive"
ARRIVAL_POISSON = "poisson"


@dataclass
class SourceState:
    arrival_mode: str
    mu: float = 1.0                # interarrival time, adaptive mode
    lam: float = 1.0               # mean rate, poisson mode
    admitted_count: int = 0

    def __post_init__(self):
        if self.arrival_mode not in (ARRIVAL_ADAPTIVE, ARRIVAL_POISSON):
            raise ValueError(f"unknown arrival mode {self.arrival_mode!r}")
        if self.mu <= 0 or self.lam <= 0:
            raise ValueError("mu and lambda must be positive")


def next_arrival_gap(source: SourceState, rng: random.Random) -> float:
    """Gap until the next datum: deterministic mu spacing in adaptive
    mode, exponential with mean 1/lambda in poisson mode."""
    if source.arrival_mode == ARRIVAL_ADAPTIVE:
        return source.mu
    return rng.expovariate(source.lam)
