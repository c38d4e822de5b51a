"""Deterministic discrete-event core: clock, event queue, topology,
gossip, offload pump, controllers, churn, and result routing.

A run is single-threaded and fully determined by (config, seed): all
randomness comes from named substreams derived from the seed, and ties
in event time are broken by scheduling order.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import admission, confidence, metrics, model as model_mod, offload, worker as worker_mod
from .admission import ControllerConfig, SourceState
from .confidence import ConfidenceOracle, SyntheticOracle, trace_oracle_load
from .metrics import MetricsCollector, MetricsReport, summarize
from .model import Datum, ModelSpec, ResultRecord, Task, model_from_dict
from .offload import Decision, LinkSpec, NeighborView, offload_decision, transmission_delay
from .worker import WorkerState, enqueue_remote, on_compute_complete, start_next_task


class ConfigInvalid(ValueError):
    pass


class UnknownTopology(ValueError):
    pass


class DeadlockDetected(RuntimeError):
    pass


class SourceCannotLeave(ValueError):
    pass


class NoPath(RuntimeError):
    pass


# Event kinds
ARRIVAL = "Arrival"
COMPUTE_COMPLETE = "ComputeComplete"
TX_COMPLETE = "TxComplete"
CONTROLLER_WAKE = "ControllerWake"
GOSSIP_TICK = "GossipTick"
CHURN_JOIN = "ChurnJoin"
CHURN_LEAVE = "ChurnLeave"
RESULT_DELIVERED = "ResultDelivered"


@dataclass(frozen=True)
class Topology:
    name: str
    worker_ids: tuple[int, ...]
    source: int
    links: tuple[LinkSpec, ...]


def built_in_topology(name: str, latency: float = 0.01,
                      bandwidth: float = 10e6) -> Topology:
    """The four testbed layouts. Worker 1 is always the source.

    circular3 is a directed ring for task traffic (1->2->3->1); the
    reverse edges exist but carry only results and control messages,
    which is what distinguishes it from the 3-node mesh.
    """
    def duplex(a, b):
        return [LinkSpec(a, b, latency, bandwidth),
                LinkSpec(b, a, latency, bandwidth)]

    if name == "two_node":
        ids, links = (1, 2), duplex(1, 2)
    elif name == "mesh3":
        ids = (1, 2, 3)
        links = duplex(1, 2) + duplex(1, 3) + duplex(2, 3)
    elif name == "circular3":
        ids = (1, 2, 3)
        links = [LinkSpec(1, 2, latency, bandwidth),
                 LinkSpec(2, 3, latency, bandwidth),
                 LinkSpec(3, 1, latency, bandwidth),
                 LinkSpec(2, 1, latency, bandwidth, control_only=True),
                 LinkSpec(3, 2, latency, bandwidth, control_only=True),
                 LinkSpec(1, 3, latency, bandwidth, control_only=True)]
    elif name == "mesh5":
        ids = (1, 2, 3, 4, 5)
        links = []
        for a in ids:
            for b in ids:
                if a < b:
                    links += duplex(a, b)
    elif name == "chain4":
        ids = (1, 2, 3, 4)
        links = duplex(1, 2) + duplex(2, 3) + duplex(3, 4)
    elif name == "local":
        ids, links = (1,), []
    else:
        raise UnknownTopology(name)
    return Topology(name, ids, 1, tuple(links))


def topology_from_dict(doc: dict) -> Topology:
    workers = doc["workers"]
    ids = tuple(int(w["id"]) for w in workers)
    sources = [int(w["id"]) for w in workers if w.get("source")]
    if len(sources) != 1:
        raise ConfigInvalid("topology: exactly one worker must be the source")
    links = tuple(
        LinkSpec(int(l["src"]), int(l["dst"]), float(l["latency"]),
                 float(l["bandwidth"]),
                 control_only=bool(l.get("control_only", False)))
        for l in doc.get("links", []))
    return Topology(doc.get("name", "custom"), ids, sources[0], links)


@dataclass
class ChurnSpec:
    time: float
    action: str                  # "join" | "leave"
    worker: int
    gamma: Optional[float] = None
    links: tuple[LinkSpec, ...] = ()


@dataclass
class ScenarioConfig:
    seed: int
    topology: Topology
    model: ModelSpec
    oracle: ConfidenceOracle
    controller: ControllerConfig
    source: SourceState
    gammas: dict[int, float]
    input_bytes: int = 1
    t_e_initial: float = 0.9
    t_o: int = 50
    duration: Optional[float] = None
    datum_budget: Optional[int] = None
    gossip_period: float = 0.1
    sample_period: Optional[float] = 0.5
    staleness_bound: Optional[float] = None
    scan_order: str = "round_robin"       # or "best_delay"
    result_payload_bytes: Optional[int] = None
    gossip_bytes: int = 0
    warmup: Optional[float] = None
    churn: tuple[ChurnSpec, ...] = ()
    config_hash: str = ""
    # test hook: scripted uniforms consumed by offload decisions before
    # falling back to the seeded substream
    offload_draws: Optional[list[float]] = None

    def __post_init__(self):
        if self.duration is None and self.datum_budget is None:
            raise ConfigInvalid("need duration and/or datum_budget")
        if self.scan_order not in ("round_robin", "best_delay"):
            raise ConfigInvalid(f"scan_order: unknown value {self.scan_order!r}")
        if self.gossip_period <= 0:
            raise ConfigInvalid("gossip_period must be positive")
        for wid in self.topology.worker_ids:
            if wid not in self.gammas:
                raise ConfigInvalid(f"gamma missing for worker {wid}")
        if self.result_payload_bytes is None:
            self.result_payload_bytes = 4 * self.model.num_classes


def _require(doc: dict, key: str):
    if key not in doc:
        raise ConfigInvalid(f"missing field {key!r}")
    return doc[key]


def oracle_from_dict(doc: dict, seed: int) -> ConfidenceOracle:
    kind = _require(doc, "type")
    if kind == "trace":
        return trace_oracle_load(_require(doc, "path"))
    if kind == "synthetic":
        stages = _require(doc, "stages")
        v = int(_require(doc, "num_classes"))
        return SyntheticOracle(stages, v, doc.get("seed", seed))
    raise ConfigInvalid(f"oracle.type: unknown value {kind!r}")


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from its JSON document form."""
    try:
        seed = int(_require(doc, "seed"))
        model = model_from_dict(_require(doc, "model"))

        topo_doc = _require(doc, "topology")
        if isinstance(topo_doc, str):
            topo = built_in_topology(
                topo_doc,
                latency=float(doc.get("link_latency", 0.01)),
                bandwidth=float(doc.get("link_bandwidth", 10e6)))
        else:
            topo = topology_from_dict(topo_doc)

        oracle = oracle_from_dict(_require(doc, "oracle"), seed)
        if oracle.num_stages != model.num_stages:
            raise ConfigInvalid(
                f"oracle: has {oracle.num_stages} stages, model has "
                f"{model.num_stages}")
        if oracle.num_classes != model.num_classes:
            raise ConfigInvalid(
                f"oracle: has {oracle.num_classes} classes, model has "
                f"{model.num_classes}")

        ctl_doc = doc.get("controller", {"mode": "none"})
        ctl = ControllerConfig(
            mode=ctl_doc.get("mode", "none"),
            alpha=float(ctl_doc.get("alpha", 0.2)),
            beta=float(ctl_doc.get("beta", 0.1)),
            zeta=float(ctl_doc.get("zeta", 0.2)),
            t_q1=int(ctl_doc.get("t_q1", 10)),
            t_q2=int(ctl_doc.get("t_q2", 30)),
            sleep_s=float(ctl_doc.get("sleep", 1.0)),
            t_e_min=float(ctl_doc.get("t_e_min", 0.5)),
            mu_min=float(ctl_doc.get("mu_min", 1e-4)),
            scope=ctl_doc.get("scope", "per-worker"),
        )

        arr = _require(doc, "arrival")
        mode = _require(arr, "mode")
        if mode == "adaptive":
            src = SourceState("adaptive", mu=float(_require(arr, "mu")))
        elif mode == "poisson":
            src = SourceState("poisson", lam=float(_require(arr, "lambda")))
        else:
            raise ConfigInvalid(f"arrival.mode: unknown value {mode!r}")
        if ctl.mode == admission.MODE_RATE and mode != "adaptive":
            raise ConfigInvalid("rate controller requires adaptive arrivals")

        gamma_doc = _require(doc, "gamma")
        default = gamma_doc.get("default")
        gammas = {}
        for wid in topo.worker_ids:
            g = gamma_doc.get(str(wid), default)
            if g is None:
                raise ConfigInvalid(f"gamma missing for worker {wid}")
            gammas[wid] = float(g)

        churn = []
        for c in doc.get("churn", []):
            churn.append(ChurnSpec(
                time=float(_require(c, "time")),
                action=_require(c, "action"),
                worker=int(_require(c, "worker")),
                gamma=float(c["gamma"]) if "gamma" in c else None,
                links=tuple(
                    LinkSpec(int(l["src"]), int(l["dst"]),
                             float(l["latency"]), float(l["bandwidth"]),
                             control_only=bool(l.get("control_only", False)))
                    for l in c.get("links", [])),
            ))

        cfg = ScenarioConfig(
            seed=seed,
            topology=topo,
            model=model,
            oracle=oracle,
            controller=ctl,
            source=src,
            gammas=gammas,
            input_bytes=int(doc.get("input_bytes", model.stages[0].output_feature_bytes)),
            t_e_initial=float(doc.get("t_e_initial", 0.9)),
            t_o=int(doc.get("t_o", 50)),
            duration=float(doc["duration"]) if doc.get("duration") is not None else None,
            datum_budget=int(doc["datum_budget"]) if doc.get("datum_budget") is not None else None,
            gossip_period=float(doc.get("gossip_period", 0.1)),
            sample_period=(float(doc["sample_period"])
                           if doc.get("sample_period") is not None else 0.5),
            staleness_bound=(float(doc["staleness_bound"])
                             if doc.get("staleness_bound") is not None else None),
            scan_order=doc.get("scan_order", "round_robin"),
            result_payload_bytes=(int(doc["result_payload_bytes"])
                                  if doc.get("result_payload_bytes") is not None else None),
            gossip_bytes=int(doc.get("gossip_bytes", 0)),
            warmup=float(doc["warmup"]) if doc.get("warmup") is not None else None,
            churn=tuple(churn),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigInvalid):
            raise
        raise ConfigInvalid(str(e))
    cfg.config_hash = hashlib.sha256(
        json.dumps(doc, sort_keys=True).encode()).hexdigest()
    return cfg


def load_config(path: str) -> ScenarioConfig:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigInvalid(f"{path}: {e}")
    return config_from_dict(doc)


def _substream(seed: int, name: str) -> random.Random:
    h = hashlib.sha256(f"{seed}/{name}".encode()).digest()
    return random.Random(int.from_bytes(h[:8], "big"))


def _penalty_uniform(seed: int, datum_id: int) -> float:
    h = hashlib.sha256(f"{seed}/penalty/{datum_id}".encode()).digest()
    return int.from_bytes(h[:8], "big") / 2.0**64


class Engine:
    """One simulation run. Construct with a ScenarioConfig, call run()."""

    def __init__(self, config: ScenarioConfig,
                 event_log: Optional[Callable[[dict], None]] = None):
        self.cfg = config
        self.model = config.model
        self.oracle = config.oracle
        self.clock = 0.0
        self._seq = 0
        self._heap: list = []
        self._event_log = event_log

        self.workers: dict[int, WorkerState] = {}
        for wid in config.topology.worker_ids:
            self.workers[wid] = WorkerState(
                id=wid,
                compute_delay=config.gammas[wid],
                thresholds=[config.t_e_initial] * self.model.num_stages,
                output_threshold=config.t_o,
            )
        self.source_id = config.topology.source
        self.links: dict[tuple[int, int], LinkSpec] = {}
        for l in config.topology.links:
            self.links[(l.src, l.dst)] = l
        self._link_free: dict[tuple[int, int], float] = {}

        self.views: dict[int, dict[int, NeighborView]] = {w: {} for w in self.workers}
        self._last_target: dict[int, Optional[int]] = {w: None for w in self.workers}

        self.source = config.source
        self.global_te = config.t_e_initial

        self._arrivals_rng = _substream(config.seed, "arrivals")
        self._offload_rng = _substream(config.seed, "offload")
        self._scripted_draws = list(config.offload_draws or [])

        self.datums: dict[int, Datum] = {}
        self.admitted = 0
        self.delivered = 0
        self.arrivals_done = False
        self._leaving: set[int] = set()
        self._pending_results: list[tuple[int, dict]] = []

        self.collector = MetricsCollector(
            num_stages=self.model.num_stages,
            seed=config.seed,
            config_hash=config.config_hash,
        )
        self._next_sample = (config.sample_period
                             if config.sample_period else None)

    # -- scheduling ---------------------------------------------------

    def _schedule(self, time: float, kind: str, **payload):
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, kind, payload))

    def _log(self, time: float, kind: str, **fields):
        if self._event_log is not None:
            self._event_log({"t": time, "kind": kind, **fields})

    # -- topology helpers ---------------------------------------------

    def _task_neighbors(self, n: int) -> list[int]:
        """Out-neighbors reachable by task-capable links, sorted by id."""
        return sorted(m for (a, m), l in self.links.items()
                      if a == n and not l.control_only)

    def _all_neighbors(self, n: int) -> list[int]:
        return sorted(m for (a, m) in self.links if a == n)

    def _result_path_delay(self, start: int) -> float:
        """Minimum-latency path delay from `start` back to the source for
        a result payload, over any alive links (Dijkstra)."""
        if start == self.source_id:
            return 0.0
        payload = self.cfg.result_payload_bytes
        dist = {start: 0.0}
        frontier = [(0.0, start)]
        visited = set()
        while frontier:
            frontier.sort()
            d, n = frontier.pop(0)
            if n in visited:
                continue
            visited.add(n)
            if n == self.source_id:
                return d
            for (a, m), l in self.links.items():
                if a != n or m in visited:
                    continue
                if not self.workers[m].alive:
                    continue
                nd = d + transmission_delay(l, payload)
                if nd < dist.get(m, float("inf")):
                    dist[m] = nd
                    frontier.append((nd, m))
        raise NoPath(start)

    # -- run loop -----------------------------------------------------

    def run(self) -> MetricsCollector:
        cfg = self.cfg
        self._schedule(0.0, ARRIVAL)
        for wid in sorted(self.workers):
            self._refresh_views(wid, 0.0, count_bytes=False)
            if self._task_neighbors(wid) or (
                    cfg.controller.scope == admission.SCOPE_SOURCE_GLOBAL):
                if len(self.workers) > 1:
                    self._schedule(cfg.gossip_period, GOSSIP_TICK, worker=wid)
        ctl = cfg.controller
        if ctl.mode == admission.MODE_RATE:
            self._schedule(ctl.sleep_s, CONTROLLER_WAKE, worker=self.source_id)
        elif ctl.mode == admission.MODE_THRESHOLD:
            if ctl.scope == admission.SCOPE_SOURCE_GLOBAL:
                self._schedule(ctl.sleep_s, CONTROLLER_WAKE, worker=self.source_id)
            else:
                for wid in sorted(self.workers):
                    self._schedule(ctl.sleep_s, CONTROLLER_WAKE, worker=wid)
        for c in cfg.churn:
            kind = CHURN_JOIN if c.action == "join" else CHURN_LEAVE
            self._schedule(c.time, kind, spec=c)

        while self._heap:
            time, seq, kind, payload = heapq.heappop(self._heap)
            self._take_samples_until(time)
            self.clock = time
            self._dispatch(time, kind, payload)
            if self.arrivals_done and self.delivered == self.admitted:
                break
        self.collector.end_time = self.clock
        self.collector.admitted = self.admitted
        if self.delivered < self.admitted:
            raise DeadlockDetected(
                f"{self.admitted - self.delivered} data unresolved with no "
                f"events pending")
        return self.collector

    def _take_samples_until(self, time: float):
        if self._next_sample is None:
            return
        while self._next_sample <= time:
            t = self._next_sample
            for wid in sorted(self.workers):
                w = self.workers[wid]
                if w.alive:
                    self.collector.record_queue_sample(
                        t, wid, w.input_len, w.output_len)
            self._next_sample += self.cfg.sample_period

    def _dispatch(self, time: float, kind: str, payload: dict):
        if kind == ARRIVAL:
            self._on_arrival(time)
        elif kind == COMPUTE_COMPLETE:
            self._on_compute_complete(time, payload["worker"], payload["task"])
        elif kind == TX_COMPLETE:
            self._on_tx_complete(time, payload["src"], payload["dst"],
                                 payload["task"])
        elif kind == CONTROLLER_WAKE:
            self._on_controller_wake(time, payload["worker"])
        elif kind == GOSSIP_TICK:
            self._on_gossip_tick(time, payload["worker"])
        elif kind == CHURN_JOIN:
            self._on_churn_join(time, payload["spec"])
        elif kind == CHURN_LEAVE:
            self._on_churn_leave(time, payload["spec"])
        elif kind == RESULT_DELIVERED:
            self._on_result_delivered(time, payload["record"])
        else:  # pragma: no cover
            raise RuntimeError(f"unknown event kind {kind}")

    # -- handlers -----------------------------------------------------

    def _on_arrival(self, now: float):
        datum = Datum(
            id=self.admitted,
            arrival_time=now,
            input_bytes=self.cfg.input_bytes,
        )
        self.datums[datum.id] = datum
        self.admitted += 1
        self._log(now, ARRIVAL, datum=datum.id)
        task = Task(datum_id=datum.id, stage=1,
                    payload_bytes=datum.input_bytes, created_at=now)
        src = self.workers[self.source_id]
        src.input_queue.append(task)

        budget = self.cfg.datum_budget
        if budget is not None and self.admitted >= budget:
            self.arrivals_done = True
        else:
            gap = admission.next_arrival_gap(self.source, self._arrivals_rng)
            nxt = now + gap
            if self.cfg.duration is not None and nxt > self.cfg.duration:
                self.arrivals_done = True
            else:
                self._schedule(nxt, ARRIVAL)
        self._service(self.source_id, now)

    def _on_compute_complete(self, now: float, wid: int, task: Task):
        w = self.workers[wid]
        self._log(now, COMPUTE_COMPLETE, worker=wid, datum=task.datum_id,
                  stage=task.stage)
        outcome = on_compute_complete(w, task, self.model, self.oracle, now=now)
        if outcome.kind == "exit":
            self._emit_result(now, wid, task, outcome.confidence,
                              outcome.predicted_label)
        if wid in self._leaving:
            self._drain_and_depart(now, wid)
            return
        self._service(wid, now)

    def _emit_result(self, now: float, wid: int, task: Task,
                     conf: float, label: int):
        truth = self.oracle.truth(task.datum_id)
        correct = (label == truth)
        pen = self.model.accuracy_penalty_for_exit(task.stage)
        if pen > 0.0 and _penalty_uniform(self.cfg.seed, task.datum_id) < pen:
            correct = not correct
        partial = {
            "datum_id": task.datum_id,
            "exit_stage": task.stage,
            "confidence": conf,
            "predicted_label": label,
            "correct": correct,
        }
        try:
            delay = self._result_path_delay(wid)
        except NoPath:
            self._pending_results.append((wid, partial))
            return
        self._schedule(now + delay, RESULT_DELIVERED, record=partial)

    def _retry_pending_results(self, now: float):
        if not self._pending_results:
            return
        still = []
        for wid, partial in self._pending_results:
            try:
                delay = self._result_path_delay(wid)
            except NoPath:
                still.append((wid, partial))
                continue
            self._schedule(now + delay, RESULT_DELIVERED, record=partial)
        self._pending_results = still

    def _on_result_delivered(self, now: float, partial: dict):
        datum = self.datums[partial["datum_id"]]
        record = ResultRecord(
            datum_id=partial["datum_id"],
            exit_stage=partial["exit_stage"],
            confidence=partial["confidence"],
            predicted_label=partial["predicted_label"],
            correct=partial["correct"],
            completion_time=now,
            end_to_end_latency=now - datum.arrival_time,
        )
        self.delivered += 1
        self.collector.record_result(record)
        self._log(now, RESULT_DELIVERED, datum=record.datum_id,
                  exit_stage=record.exit_stage)

    def _on_tx_complete(self, now: float, src: int, dst: int, task: Task):
        self._log(now, TX_COMPLETE, src=src, dst=dst, datum=task.datum_id,
                  stage=task.stage)
        target = self.workers[dst]
        try:
            enqueue_remote(target, task)
        except worker_mod.WorkerDeparted:
            # sender keeps the task at the head of its output queue and
            # learns the neighbor is gone
            view = self.views[src].get(dst)
            if view is not None:
                view.alive = False
            sender = self.workers[src]
            if sender.alive:
                sender.output_queue.appendleft(
                    Task(task.datum_id, task.stage, task.payload_bytes,
                         task.created_at, task.hop_count - 1))
                self._service(src, now)
            else:
                self._force_drain_tasks(now, src, [task])
            return
        self._service(dst, now)

    def _on_gossip_tick(self, now: float, wid: int):
        w = self.workers[wid]
        if not w.alive:
            return
        self._log(now, GOSSIP_TICK, worker=wid)
        self._refresh_views(wid, now)
        ctl = self.cfg.controller
        if (ctl.mode == admission.MODE_THRESHOLD
                and ctl.scope == admission.SCOPE_SOURCE_GLOBAL
                and wid != self.source_id):
            w.set_threshold(self.global_te)
        self._retry_pending_results(now)
        self._pump(wid, now)
        self._schedule(now + self.cfg.gossip_period, GOSSIP_TICK, worker=wid)

    def _refresh_views(self, wid: int, now: float, count_bytes: bool = True):
        for m in self._task_neighbors(wid):
            target = self.workers.get(m)
            if target is not None and target.alive and target.accepting:
                self.views[wid][m] = NeighborView(
                    neighbor_id=m,
                    input_len=target.input_len,
                    compute_delay=target.compute_delay,
                    observed_at=now,
                )
                if count_bytes:
                    self.collector.control_bytes += self.cfg.gossip_bytes
            else:
                old = self.views[wid].get(m)
                if old is not None:
                    old.alive = False
        self.workers[wid].has_task_neighbors = any(
            v.alive for v in self.views[wid].values())

    def _on_controller_wake(self, now: float, wid: int):
        w = self.workers[wid]
        ctl = self.cfg.controller
        if not w.alive:
            return
        self._log(now, CONTROLLER_WAKE, worker=wid)
        q = w.input_len + w.output_len
        if ctl.mode == admission.MODE_RATE:
            before = self.source.mu
            after, branch = admission.adapt_interarrival(q, before, ctl)
            self.source.mu = after
        else:
            before = w.thresholds[0]
            after, branch = admission.adapt_threshold(q, before, ctl)
            w.set_threshold(after)
            if ctl.scope == admission.SCOPE_SOURCE_GLOBAL:
                self.global_te = after
        self.collector.record_controller(now, wid, q, before, after, branch)
        self._schedule(now + ctl.sleep_s, CONTROLLER_WAKE, worker=wid)

    def _on_churn_join(self, now: float, spec: ChurnSpec):
        self._log(now, CHURN_JOIN, worker=spec.worker)
        gamma = spec.gamma if spec.gamma is not None else self.cfg.gammas.get(
            spec.worker, 1.0)
        self.workers[spec.worker] = WorkerState(
            id=spec.worker,
            compute_delay=gamma,
            thresholds=[self.cfg.t_e_initial] * self.model.num_stages,
            output_threshold=self.cfg.t_o,
        )
        self.views[spec.worker] = {}
        self._last_target[spec.worker] = None
        for l in spec.links:
            self.links[(l.src, l.dst)] = l
        self._refresh_views(spec.worker, now)
        self._schedule(now + self.cfg.gossip_period, GOSSIP_TICK,
                       worker=spec.worker)
        if self.cfg.controller.mode == admission.MODE_THRESHOLD and \
                self.cfg.controller.scope == admission.SCOPE_PER_WORKER:
            self._schedule(now + self.cfg.controller.sleep_s, CONTROLLER_WAKE,
                           worker=spec.worker)
        self._retry_pending_results(now)

    def _on_churn_leave(self, now: float, spec: ChurnSpec):
        wid = spec.worker
        if wid == self.source_id:
            raise SourceCannotLeave(wid)
        w = self.workers.get(wid)
        if w is None or not w.alive:
            return
        self._log(now, CHURN_LEAVE, worker=wid)
        w.accepting = False
        if w.busy:
            self._leaving.add(wid)
        else:
            self._drain_and_depart(now, wid)

    def _drain_and_depart(self, now: float, wid: int):
        w = self.workers[wid]
        self._leaving.discard(wid)
        tasks = list(w.input_queue) + list(w.output_queue)
        w.input_queue.clear()
        w.output_queue.clear()
        w.alive = False
        self._force_drain_tasks(now, wid, tasks)

    def _force_drain_tasks(self, now: float, wid: int, tasks: list[Task]):
        """Graceful-leave drain: every remaining task moves to an alive
        neighbor's input queue, round-robin, regardless of queue state."""
        if not tasks:
            return
        recipients = [m for m in self._task_neighbors(wid)
                      if self.workers[m].alive and self.workers[m].accepting]
        if not recipients:
            recipients = [m for m in sorted(self.workers)
                          if m != wid and self.workers[m].alive
                          and self.workers[m].accepting]
        if not recipients:
            raise DeadlockDetected(f"worker {wid} left with no one to drain to")
        touched = set()
        for i, task in enumerate(tasks):
            m = recipients[i % len(recipients)]
            self.workers[m].input_queue.append(task)
            touched.add(m)
        for m in sorted(touched):
            self._service(m, now)

    # -- per-worker service: start compute, then pump offloads ---------

    def _service(self, wid: int, now: float):
        w = self.workers[wid]
        if not w.alive:
            return
        # An idle worker with an empty input queue can never offload the
        # head output task (its local wait is 0, so the offload probability
        # is 0); reclaim it for local processing instead of stranding it.
        if not w.busy and not w.input_queue and w.output_queue:
            w.input_queue.append(w.output_queue.popleft())
        started = start_next_task(w, self.model)
        if started is not None:
            task, delay = started
            self._schedule(now + delay, COMPUTE_COMPLETE, worker=wid, task=task)
        self._pump(wid, now)

    def _draw(self) -> float:
        if self._scripted_draws:
            return self._scripted_draws.pop(0)
        return self._offload_rng.random()

    def _pump(self, wid: int, now: float):
        w = self.workers[wid]
        if not w.alive or not w.output_queue:
            return
        neighbors = self._task_neighbors(wid)
        if not neighbors:
            return
        bound = self.cfg.staleness_bound
        while w.output_queue:
            task = w.output_queue[0]
            order = self._scan_order(wid, neighbors, task, now)
            fired = False
            for m in order:
                view = self.views[wid].get(m)
                if view is None or not view.alive:
                    continue
                if bound is not None and now - view.observed_at > bound:
                    continue
                link = self.links[(wid, m)]
                d_nm = transmission_delay(link, task.payload_bytes)
                dec = offload_decision(
                    o_n=w.output_len, i_n=w.input_len,
                    gamma_n=w.compute_delay,
                    view_input_len=view.effective_input_len,
                    gamma_m=view.compute_delay, d_nm=d_nm,
                    draw=self._draw)
                if dec.offload:
                    w.output_queue.popleft()
                    start = max(now, self._link_free.get((wid, m), 0.0))
                    done = start + d_nm
                    self._link_free[(wid, m)] = done
                    sent = Task(task.datum_id, task.stage, task.payload_bytes,
                                task.created_at, task.hop_count + 1)
                    self._schedule(done, TX_COMPLETE, src=wid, dst=m, task=sent)
                    view.sent_since += 1
                    self._last_target[wid] = m
                    self.collector.record_offload(
                        now, wid, m, task.datum_id, task.stage,
                        dec.branch, dec.p, dec.draw)
                    fired = True
                    break
            if not fired:
                break

    def _scan_order(self, wid: int, neighbors: list[int], task: Task,
                    now: float) -> list[int]:
        if self.cfg.scan_order == "best_delay":
            def est(m):
                view = self.views[wid].get(m)
                if view is None:
                    return float("inf")
                link = self.links[(wid, m)]
                return (transmission_delay(link, task.payload_bytes)
                        + view.effective_input_len * view.compute_delay)
            return sorted(neighbors, key=lambda m: (est(m), m))
        last = self._last_target[wid]
        if last is None or last not in neighbors:
            return neighbors
        i = neighbors.index(last)
        return neighbors[i + 1:] + neighbors[:i + 1]


def run(config: ScenarioConfig,
        event_log: Optional[Callable[[dict], None]] = None) -> MetricsReport:
    """Execute one scenario and summarize it (warmup from config)."""
    eng = Engine(config, event_log=event_log)
    collector = eng.run()
    return summarize(collector, warmup=config.warmup)
