"""Domain types for a partitioned early-exit DNN and the tasks that flow through it.

Nothing here knows about real tensors: a model is described purely by its
layer partition, per-stage compute weights, and the byte sizes of the
feature vectors crossing stage boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional


class ModelError(ValueError):
    pass


class NonContiguousPartition(ModelError):
    pass


class KNotLessThanL(ModelError):
    pass


class EmptyStage(ModelError):
    pass


@dataclass(frozen=True)
class StageSpec:
    index: int                  # 1-based stage number
    first_layer: int
    last_layer: int
    compute_weight: float = 1.0
    output_feature_bytes: int = 1

    def __post_init__(self):
        if self.compute_weight <= 0:
            raise ModelError("compute_weight must be positive")
        if self.output_feature_bytes <= 0:
            raise ModelError("output_feature_bytes must be positive")
        if self.first_layer > self.last_layer:
            raise EmptyStage(f"stage {self.index} has no layers")

    @property
    def num_layers(self) -> int:
        return self.last_layer - self.first_layer + 1


@dataclass(frozen=True)
class CompressorSpec:
    stage_index: int            # sits at the boundary after this stage, 1..K-1
    compressed_bytes: int
    accuracy_penalty: float = 0.0

    def __post_init__(self):
        if self.compressed_bytes <= 0:
            raise ModelError("compressed_bytes must be positive")
        if not (0.0 <= self.accuracy_penalty <= 1.0):
            raise ModelError("accuracy_penalty must be in [0,1]")


@dataclass(frozen=True)
class ModelSpec:
    total_layers: int
    num_classes: int
    stages: tuple[StageSpec, ...]
    compressors: tuple[CompressorSpec, ...] = ()

    def __post_init__(self):
        k = len(self.stages)
        if k < 1:
            raise EmptyStage("model must have at least one stage")
        if k >= self.total_layers:
            raise KNotLessThanL(
                f"K={k} must be < L={self.total_layers}")
        if self.stages[0].first_layer != 1:
            raise NonContiguousPartition("first stage must start at layer 1")
        if self.stages[-1].last_layer != self.total_layers:
            raise NonContiguousPartition("last stage must end at layer L")
        prev_end = 0
        for s in self.stages:
            if s.first_layer != prev_end + 1:
                raise NonContiguousPartition(
                    f"stage {s.index} starts at {s.first_layer}, "
                    f"expected {prev_end + 1}")
            prev_end = s.last_layer
        for c in self.compressors:
            if not (1 <= c.stage_index < k):
                raise ModelError(
                    f"compressor stage_index {c.stage_index} out of 1..K-1")
            if c.compressed_bytes >= self.stages[c.stage_index - 1].output_feature_bytes:
                raise ModelError("compressed_bytes must shrink the feature")

    @property
    def num_stages(self) -> int:
        return len(self.stages)

    def compressor_at(self, stage_index: int) -> Optional[CompressorSpec]:
        for c in self.compressors:
            if c.stage_index == stage_index:
                return c
        return None

    def wire_bytes(self, stage_index: int) -> int:
        """Bytes on the wire for the feature leaving stage `stage_index`."""
        c = self.compressor_at(stage_index)
        if c is not None:
            return c.compressed_bytes
        return self.stages[stage_index - 1].output_feature_bytes

    def accuracy_penalty_for_exit(self, exit_stage: int) -> float:
        """Combined corruption probability for an exit at `exit_stage`.

        A compressor's penalty hits exits strictly after its own boundary,
        since those exits consume the compressed feature.
        """
        p_clean = 1.0
        for c in self.compressors:
            if exit_stage > c.stage_index:
                p_clean *= (1.0 - c.accuracy_penalty)
        return 1.0 - p_clean


@dataclass(frozen=True)
class Datum:
    id: int
    arrival_time: float
    input_bytes: int
    truth_label: Optional[int] = None


@dataclass(frozen=True)
class Task:
    datum_id: int
    stage: int
    payload_bytes: int
    created_at: float = 0.0
    hop_count: int = 0


@dataclass(frozen=True)
class ResultRecord:
    datum_id: int
    exit_stage: int
    confidence: float
    predicted_label: int
    correct: bool
    completion_time: float
    end_to_end_latency: float


def build_partition(total_layers: int, exit_layers: list[int],
                    num_classes: int, feature_sizes: list[int],
                    compute_weights: Optional[list[float]] = None,
                    compressors: Optional[list[CompressorSpec]] = None) -> ModelSpec:
    """Partition an L-layer model at its exit points into K stages.

    `exit_layers` must be strictly increasing and end at `total_layers`;
    each stage runs from the layer after the previous exit up to its own
    exit. `feature_sizes[k-1]` is the wire size of stage k's output.
    """
    k = len(exit_layers)
    if k == 0:
        raise EmptyStage("need at least one exit point")
    if k >= total_layers:
        raise KNotLessThanL(f"K={k} must be < L={total_layers}")
    for a, b in zip(exit_layers, exit_layers[1:]):
        if b <= a:
            raise NonContiguousPartition(
                f"exit_layers must be strictly increasing, got {a} then {b}")
    if exit_layers[0] < 1:
        raise EmptyStage("first exit layer must be >= 1")
    if exit_layers[-1] != total_layers:
        raise NonContiguousPartition(
            f"last exit ({exit_layers[-1]}) must be the final layer "
            f"({total_layers})")
    if len(feature_sizes) != k:
        raise ModelError(f"need {k} feature sizes, got {len(feature_sizes)}")
    if compute_weights is None:
        compute_weights = [1.0] * k
    if len(compute_weights) != k:
        raise ModelError(f"need {k} compute weights, got {len(compute_weights)}")

    stages = []
    prev = 0
    for i, exit_layer in enumerate(exit_layers):
        stages.append(StageSpec(
            index=i + 1,
            first_layer=prev + 1,
            last_layer=exit_layer,
            compute_weight=float(compute_weights[i]),
            output_feature_bytes=int(feature_sizes[i]),
        ))
        prev = exit_layer
    return ModelSpec(
        total_layers=total_layers,
        num_classes=num_classes,
        stages=tuple(stages),
        compressors=tuple(compressors or ()),
    )


def successor_task(model: ModelSpec, task: Task,
                   now: float = 0.0) -> Optional[Task]:
    """Next-stage task for the same datum, or None after the final stage.

    The payload is the wire size of the current stage's output, i.e. the
    compressed size when a compressor sits at this boundary.
    """
    if task.stage >= model.num_stages:
        return None
    return Task(
        datum_id=task.datum_id,
        stage=task.stage + 1,
        payload_bytes=model.wire_bytes(task.stage),
        created_at=now,
        hop_count=task.hop_count,
    )


def model_from_dict(doc: dict) -> ModelSpec:
    """Build a ModelSpec from its JSON document form."""
    try:
        total_layers = int(doc["total_layers"])
        num_classes = int(doc["num_classes"])
        exit_layers = [int(x) for x in doc["exit_layers"]]
        feature_bytes = [int(x) for x in doc["feature_bytes"]]
    except KeyError as e:
        raise ModelError(f"model document missing field {e.args[0]!r}")
    weights = doc.get("compute_weights")
    if weights is not None:
        weights = [float(w) for w in weights]
    comps = []
    for c in doc.get("compressors", []):
        comps.append(CompressorSpec(
            stage_index=int(c["stage_index"]),
            compressed_bytes=int(c["compressed_bytes"]),
            accuracy_penalty=float(c.get("accuracy_penalty", 0.0)),
        ))
    return build_partition(total_layers, exit_layers, num_classes,
                           feature_bytes, weights, comps)


def load_model(path: str) -> ModelSpec:
    with open(path) as f:
        return model_from_dict(json.load(f))
