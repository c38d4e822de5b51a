"""Run-level measurement: result/queue/controller collectors and the
summary report (achieved rate, accuracy, exit histogram, latency stats).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .model import ResultRecord


@dataclass
class MetricsCollector:
    num_stages: int
    seed: int = 0
    config_hash: str = ""
    results: list[ResultRecord] = field(default_factory=list)
    queue_samples: list[tuple] = field(default_factory=list)   # (t, worker, I, O)
    controller_rows: list[tuple] = field(default_factory=list) # (t, worker, q, before, after, branch)
    offload_rows: list[tuple] = field(default_factory=list)    # (t, from, to, datum, stage, branch, p, draw)
    admitted: int = 0
    control_bytes: int = 0
    end_time: float = 0.0

    def record_result(self, record: ResultRecord):
        self.results.append(record)

    def record_queue_sample(self, t: float, worker: int, i_n: int, o_n: int):
        self.queue_samples.append((t, worker, i_n, o_n))

    def record_controller(self, t, worker, q, before, after, branch):
        self.controller_rows.append((t, worker, q, before, after, branch))

    def record_offload(self, t, src, dst, datum_id, stage, branch, p, draw):
        self.offload_rows.append((t, src, dst, datum_id, stage, branch, p, draw))


def nearest_rank_percentile(values: list[float], pct: float) -> float:
    """Nearest-rank percentile (no interpolation): the ceil(p*n)-th
    smallest value."""
    if not values:
        raise ValueError("percentile of empty list")
    ordered = sorted(values)
    rank = math.ceil(pct / 100.0 * len(ordered))
    return ordered[max(rank, 1) - 1]


@dataclass
class MetricsReport:
    achieved_rate: Optional[float]
    accuracy: Optional[float]
    exit_histogram: list[int]
    latency_mean: Optional[float]
    latency_median: Optional[float]
    latency_p95: Optional[float]
    delivered: int
    admitted: int
    warmup: float
    end_time: float
    seed: int
    config_hash: str
    mean_te: Optional[float] = None     # steady-state controller averages
    mean_mu: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "achieved_rate": self.achieved_rate,
            "accuracy": self.accuracy,
            "exit_histogram": self.exit_histogram,
            "latency": {
                "mean": self.latency_mean,
                "median": self.latency_median,
                "p95": self.latency_p95,
            },
            "delivered": self.delivered,
            "admitted": self.admitted,
            "warmup": self.warmup,
            "end_time": self.end_time,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "mean_te": self.mean_te,
            "mean_mu": self.mean_mu,
        }


def summarize(collector: MetricsCollector, warmup: Optional[float] = None) -> MetricsReport:
    """Steady-state statistics over results completing at t >= warmup.

    Warmup defaults to 10% of the run: both controllers start cold, so
    the ramp would otherwise pollute the averages.
    """
    if warmup is None:
        warmup = 0.1 * collector.end_time
    steady = [r for r in collector.results if r.completion_time >= warmup]

    hist = [0] * collector.num_stages
    for r in steady:
        hist[r.exit_stage - 1] += 1

    if steady:
        last = max(r.completion_time for r in steady)
        interval = last - warmup
        rate = len(steady) / interval if interval > 0 else None
        accuracy = sum(1 for r in steady if r.correct) / len(steady)
        lats = [r.end_to_end_latency for r in steady]
        lat_mean = sum(lats) / len(lats)
        lat_median = nearest_rank_percentile(lats, 50)
        lat_p95 = nearest_rank_percentile(lats, 95)
    else:
        rate = accuracy = lat_mean = lat_median = lat_p95 = None

    te_vals = [after for (t, _, _, _, after, _) in collector.controller_rows
               if t >= warmup]
    mean_ctl = sum(te_vals) / len(te_vals) if te_vals else None

    return MetricsReport(
        achieved_rate=rate,
        accuracy=accuracy,
        exit_histogram=hist,
        latency_mean=lat_mean,
        latency_median=lat_median,
        latency_p95=lat_p95,
        delivered=len(collector.results),
        admitted=collector.admitted,
        warmup=warmup,
        end_time=collector.end_time,
        seed=collector.seed,
        config_hash=collector.config_hash,
        mean_te=mean_ctl,
        mean_mu=mean_ctl,
    )


def write_report_json(report: MetricsReport, path: str):
    with open(path, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def write_results_csv(collector: MetricsCollector, path: str):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["datum_id", "exit_stage", "confidence", "correct", "latency"])
        for r in sorted(collector.results, key=lambda r: r.datum_id):
            w.writerow([r.datum_id, r.exit_stage, repr(r.confidence),
                        int(r.correct), repr(r.end_to_end_latency)])


def write_queues_csv(collector: MetricsCollector, path: str):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time", "worker", "input_len", "output_len"])
        for t, worker, i_n, o_n in collector.queue_samples:
            w.writerow([repr(t), worker, i_n, o_n])


def write_controller_csv(collector: MetricsCollector, path: str):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time", "worker", "q", "before", "after", "branch"])
        for t, worker, q, before, after, branch in collector.controller_rows:
            w.writerow([repr(t), worker, q, repr(before), repr(after), branch])


def write_offload_csv(collector: MetricsCollector, path: str):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time", "from", "to", "datum_id", "stage", "branch", "p", "draw"])
        for t, src, dst, datum_id, stage, branch, p, draw in collector.offload_rows:
            w.writerow([repr(t), src, dst, datum_id, stage, branch,
                        "" if p is None else repr(p),
                        "" if draw is None else repr(draw)])
