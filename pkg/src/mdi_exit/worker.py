"""Per-node execution: head-of-line processing, early-exit test, and
routing of successor tasks between the input and output queues.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .confidence import ConfidenceOracle, classify
from .model import ModelSpec, Task, successor_task


class WorkerDeparted(RuntimeError):
    pass


class OracleMiss(KeyError):
    pass


@dataclass
class WorkerState:
    id: int
    compute_delay: float                      # seconds per unit compute weight
    thresholds: list[float] = field(default_factory=list)  # T_e per stage
    output_threshold: int = 50                # T_O
    input_queue: deque = field(default_factory=deque)
    output_queue: deque = field(default_factory=deque)
    busy: bool = False
    alive: bool = True
    accepting: bool = True                    # False once a graceful leave begins
    has_task_neighbors: bool = True           # kept current by the engine
    current_task: Optional[Task] = None

    def __post_init__(self):
        if self.compute_delay <= 0:
            raise ValueError("compute delay must be positive")

    @property
    def input_len(self) -> int:
        return len(self.input_queue)

    @property
    def output_len(self) -> int:
        return len(self.output_queue)

    def set_threshold(self, t_e: float):
        self.thresholds = [t_e] * len(self.thresholds)


@dataclass(frozen=True)
class Outcome:
    """Result of finishing one task: either an early/final exit or a
    successor task placed in one of this worker's queues."""
    kind: str                      # "exit" | "enqueue_input" | "enqueue_output"
    task: Task
    confidence: float
    predicted_label: int
    successor: Optional[Task] = None


def start_next_task(worker: WorkerState, model: ModelSpec) -> Optional[tuple[Task, float]]:
    """Dequeue the head-of-line task and return (task, compute seconds),
    or None if the worker is busy, departed, or has nothing queued.
    One task at a time per worker; pipelining happens across workers."""
    if not worker.alive or worker.busy or not worker.input_queue:
        return None
    task = worker.input_queue.popleft()
    worker.busy = True
    worker.current_task = task
    delay = worker.compute_delay * model.stages[task.stage - 1].compute_weight
    return task, delay


def on_compute_complete(worker: WorkerState, task: Task, model: ModelSpec,
                        oracle: ConfidenceOracle, now: float = 0.0) -> Outcome:
    """Apply the early-exit rule to a finished task.

    Exit when this is the final stage or the confidence strictly exceeds
    this stage's threshold. Otherwise the successor task goes to the input
    queue when it is empty or the output queue is over T_O (local
    processing is the faster option), else to the output queue. A worker
    with no reachable task neighbors always keeps successors on its input
    queue: the output queue exists solely to stage offload candidates.
    """
    worker.busy = False
    worker.current_task = None
    k = task.stage
    try:
        logits = oracle.logits_for(task.datum_id, k)
    except KeyError as e:
        raise OracleMiss((task.datum_id, k)) from e
    conf, label = classify(logits)

    if k == model.num_stages or conf > worker.thresholds[k - 1]:
        return Outcome("exit", task, conf, label)

    nxt = successor_task(model, task, now=now)
    if (not worker.has_task_neighbors or worker.input_len == 0
            or worker.output_len > worker.output_threshold):
        worker.input_queue.append(nxt)
        return Outcome("enqueue_input", task, conf, label, successor=nxt)
    worker.output_queue.append(nxt)
    return Outcome("enqueue_output", task, conf, label, successor=nxt)


def enqueue_remote(worker: WorkerState, task: Task) -> None:
    """Accept a task offloaded from a neighbor onto the input queue tail."""
    if not worker.alive or not worker.accepting:
        raise WorkerDeparted(worker.id)
    worker.input_queue.append(task)
