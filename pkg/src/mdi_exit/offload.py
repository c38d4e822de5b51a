"""Queue/delay-based offloading: neighbor views and the decision rule.

A worker offloads the head-of-line output-queue task to a one-hop
neighbor m when m's (viewed) input queue is shorter than the local output
queue, deterministically if the local wait I_n*G_n beats the remote
D_nm + I_m*G_m, and otherwise with probability
min{I_n*G_n / (D_nm + I_m*G_m), 1}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional


@dataclass(frozen=True)
class LinkSpec:
    src: int
    dst: int
    latency: float                # seconds
    bandwidth: float              # bytes/second
    directed: bool = True
    control_only: bool = False    # usable for results/gossip but not tasks

    def __post_init__(self):
        if self.latency < 0:
            raise ValueError("latency must be >= 0")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")


def transmission_delay(link: LinkSpec, payload_bytes: float) -> float:
    return link.latency + payload_bytes / link.bandwidth


@dataclass
class NeighborView:
    """Snapshot of a one-hop neighbor, refreshed by gossip.

    `sent_since` counts tasks offloaded to the neighbor since the last
    snapshot; they are optimistically added to the viewed queue length so
    a burst of decisions between gossip ticks does not flood one target.
    """
    neighbor_id: int
    input_len: int
    compute_delay: float
    observed_at: float
    alive: bool = True
    sent_since: int = 0

    @property
    def effective_input_len(self) -> int:
        return self.input_len + self.sent_since


@dataclass(frozen=True)
class Decision:
    offload: bool
    branch: Optional[str] = None   # "det" | "prob" for offloads
    p: Optional[float] = None      # acceptance probability (prob branch)
    draw: Optional[float] = None   # the uniform draw used (prob branch)


def offload_decision(o_n: int, i_n: int, gamma_n: float,
                     view_input_len: int, gamma_m: float, d_nm: float,
                     draw: Callable[[], float]) -> Decision:
    """One offload decision toward a single neighbor.

    `draw` is invoked only when the probabilistic branch is reached, so
    the caller's random stream advances exactly once per probabilistic
    evaluation.
    """
    if o_n <= view_input_len:
        return Decision(False)
    local_wait = i_n * gamma_n
    remote_wait = d_nm + view_input_len * gamma_m
    if local_wait > remote_wait:
        return Decision(True, branch="det")
    p = min(local_wait / remote_wait, 1.0) if remote_wait > 0 else 1.0
    u = draw()
    if u < p:
        return Decision(True, branch="prob", p=p, draw=u)
    return Decision(False, branch="prob", p=p, draw=u)
