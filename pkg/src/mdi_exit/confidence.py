"""Softmax/confidence math and the oracles that stand in for real inference.

An oracle answers "what logits does the exit-k classifier produce for
datum d" without running a network. Two implementations: a CSV trace of
recorded logits, and a seeded synthetic generator.
"""

from __future__ import annotations

import csv
import hashlib
import math
import random
from typing import Protocol


class ConfidenceError(ValueError):
    pass


class EmptyVector(ConfidenceError):
    pass


class NonFiniteInput(ConfidenceError):
    pass


class ConfidenceOutOfRange(ConfidenceError):
    pass


class ParseError(ConfidenceError):
    pass


class DimensionMismatch(ConfidenceError):
    pass


class UnknownDatum(KeyError):
    pass


class InvalidParams(ConfidenceError):
    pass


def softmax(logits: list[float]) -> list[float]:
    """Normalize logits into probabilities, max-subtracted for stability."""
    if len(logits) == 0:
        raise EmptyVector("softmax of empty vector")
    if not all(math.isfinite(x) for x in logits):
        raise NonFiniteInput(f"non-finite logit in {logits!r}")
    m = max(logits)
    exps = [math.exp(x - m) for x in logits]
    total = sum(exps)
    return [e / total for e in exps]


def confidence(probs: list[float]) -> float:
    """Confidence level: the maximum class probability."""
    return max(probs)


def argmax_label(probs: list[float]) -> int:
    """Predicted label; ties broken toward the lowest index."""
    best = 0
    for i in range(1, len(probs)):
        if probs[i] > probs[best]:
            best = i
    return best


def classify(logits: list[float]) -> tuple[float, int]:
    """(confidence, predicted label) for a logit vector."""
    probs = softmax(logits)
    return confidence(probs), argmax_label(probs)


def construct_logits(target_confidence: float, label: int, v: int) -> list[float]:
    """One-hot-style logits whose softmax max is exactly `target_confidence`.

    Solves e^x / (e^x + v - 1) = c for the labelled coordinate, zeros
    elsewhere. Requires 1/v < c < 1 strictly, the attainable range of a
    non-degenerate softmax max.
    """
    if v < 2:
        raise InvalidParams("need at least 2 classes")
    if not (0 <= label < v):
        raise InvalidParams(f"label {label} out of 0..{v - 1}")
    c = target_confidence
    if not (1.0 / v < c < 1.0):
        raise ConfidenceOutOfRange(
            f"target confidence {c} must be strictly inside (1/{v}, 1)")
    x = math.log(c * (v - 1) / (1.0 - c))
    logits = [0.0] * v
    logits[label] = x
    return logits


class ConfidenceOracle(Protocol):
    num_stages: int
    num_classes: int

    def logits_for(self, datum_id: int, stage: int) -> list[float]: ...

    def truth(self, datum_id: int) -> int: ...


class TraceOracle:
    """Oracle backed by a CSV of recorded logits, one row per datum.

    Columns: datum_id, truth, then K*v logits stage-major
    (s1_l0 .. s1_l{v-1}, s2_l0, ...). Lookups outside the trace are
    errors, never silent defaults.
    """

    def __init__(self, num_stages: int, num_classes: int,
                 rows: dict[int, tuple[int, list[float]]]):
        self.num_stages = num_stages
        self.num_classes = num_classes
        self._rows = rows

    def logits_for(self, datum_id: int, stage: int) -> list[float]:
        if datum_id not in self._rows:
            raise UnknownDatum(datum_id)
        if not (1 <= stage <= self.num_stages):
            raise UnknownDatum((datum_id, stage))
        _, flat = self._rows[datum_id]
        v = self.num_classes
        off = (stage - 1) * v
        return flat[off:off + v]

    def truth(self, datum_id: int) -> int:
        if datum_id not in self._rows:
            raise UnknownDatum(datum_id)
        return self._rows[datum_id][0]

    @property
    def datum_ids(self) -> list[int]:
        return sorted(self._rows)


def _parse_trace_header(header: list[str]) -> tuple[int, int]:
    if len(header) < 3 or header[0] != "datum_id" or header[1] != "truth":
        raise ParseError("trace header must start with datum_id,truth")
    stages, classes = set(), set()
    for col in header[2:]:
        try:
            s_part, l_part = col.split("_")
            stages.add(int(s_part[1:]))
            classes.add(int(l_part[1:]))
        except (ValueError, IndexError):
            raise ParseError(f"bad logit column name {col!r}")
    k, v = max(stages), max(classes) + 1
    if len(header) - 2 != k * v:
        raise DimensionMismatch(
            f"header declares {len(header) - 2} logit columns, "
            f"expected K*v = {k * v}")
    return k, v


def trace_header(num_stages: int, num_classes: int) -> list[str]:
    cols = ["datum_id", "truth"]
    for k in range(1, num_stages + 1):
        for l in range(num_classes):
            cols.append(f"s{k}_l{l}")
    return cols


def trace_oracle_load(path: str) -> TraceOracle:
    rows: dict[int, tuple[int, list[float]]] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty trace")
        k, v = _parse_trace_header([h.strip() for h in header])
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 + k * v:
                raise DimensionMismatch(
                    f"{path}:{lineno}: row has {len(row)} fields, "
                    f"expected {2 + k * v}")
            try:
                datum_id = int(row[0])
                truth = int(row[1])
                logits = [float(x) for x in row[2:]]
            except ValueError as e:
                raise ParseError(f"{path}:{lineno}: {e}")
            if not (0 <= truth < v):
                raise ParseError(f"{path}:{lineno}: truth {truth} out of range")
            rows[datum_id] = (truth, logits)
    return TraceOracle(k, v, rows)


def _derive_int(*parts) -> int:
    h = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(h[:8], "big")


class SyntheticOracle:
    """Seeded generator of per-(datum, stage) logits.

    Each stage k has a confidence distribution Beta(a_k, b_k), rescaled
    into the attainable range (1/v, 1), and a correctness probability p_k.
    Every lookup is a pure function of (seed, datum_id, stage), so repeat
    queries are identical and order-independent.
    """

    def __init__(self, stage_params: list[dict], v: int, seed: int):
        if v < 2:
            raise InvalidParams("need at least 2 classes")
        for sp in stage_params:
            if sp["a"] <= 0 or sp["b"] <= 0:
                raise InvalidParams("Beta parameters must be positive")
            if not (0.0 <= sp["p"] <= 1.0):
                raise InvalidParams("correctness probability must be in [0,1]")
        self.num_stages = len(stage_params)
        self.num_classes = v
        self._params = [(float(sp["a"]), float(sp["b"]), float(sp["p"]))
                        for sp in stage_params]
        self._seed = seed

    def truth(self, datum_id: int) -> int:
        return _derive_int(self._seed, "truth", datum_id) % self.num_classes

    def logits_for(self, datum_id: int, stage: int) -> list[float]:
        if not (1 <= stage <= self.num_stages):
            raise UnknownDatum((datum_id, stage))
        a, b, p = self._params[stage - 1]
        rng = random.Random(_derive_int(self._seed, "logits", datum_id, stage))
        v = self.num_classes
        x = rng.betavariate(a, b)
        c = 1.0 / v + x * (1.0 - 1.0 / v)
        eps = 1e-12
        c = min(max(c, 1.0 / v + eps), 1.0 - eps)
        truth = self.truth(datum_id)
        if rng.random() < p:
            label = truth
        else:
            label = rng.randrange(v - 1)
            if label >= truth:
                label += 1
        return construct_logits(c, label, v)
