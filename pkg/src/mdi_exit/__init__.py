"""Deterministic simulator for model-distributed inference with early exit.

Workers hold contiguous slices of a partitioned DNN, exit early when the
softmax confidence clears a per-stage threshold, offload queued tasks to
one-hop neighbors by queue/delay comparison, and keep queues bounded by
adapting either the data admission rate or the exit threshold.
"""

from .admission import (ControllerConfig, SourceState, adapt_interarrival,
                        adapt_threshold, next_arrival_gap)
from .confidence import (SyntheticOracle, TraceOracle, classify, confidence,
                         construct_logits, softmax, trace_oracle_load)
from .engine import (Engine, ScenarioConfig, Topology, built_in_topology,
                     config_from_dict, load_config, run)
from .metrics import MetricsCollector, MetricsReport, summarize
from .model import (CompressorSpec, Datum, ModelSpec, ResultRecord, StageSpec,
                    Task, build_partition, load_model, model_from_dict,
                    successor_task)
from .offload import LinkSpec, NeighborView, offload_decision, transmission_delay
from .worker import WorkerState, enqueue_remote, on_compute_complete, start_next_task

__version__ = "0.1.0"
