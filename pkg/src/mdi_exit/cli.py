"""Command-line runner: single scenarios, sweeps, and trace validation.

Exit codes are fixed so CI can assert failure modes: 0 success,
2 config/validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import json
import logging
import os
import sys

from . import admission
from .confidence import (ConfidenceError, classify, trace_oracle_load)
from .engine import ConfigInvalid, Engine, config_from_dict, load_config
from .metrics import (summarize, write_controller_csv, write_offload_csv,
                      write_queues_csv, write_report_json, write_results_csv)
from .model import ModelError, load_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("mdi_exit")


def _setup_logging():
    level = os.environ.get("MDI_EXIT_LOG", "summary")
    if level == "off":
        logging.disable(logging.CRITICAL)
    elif level == "events":
        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr)
    else:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr)


def _run_one(doc: dict, seed: int, out_dir: str | None,
             event_log_path: str | None = None):
    doc = copy.deepcopy(doc)
    doc["seed"] = seed
    cfg = config_from_dict(doc)

    sink = None
    log_f = None
    if event_log_path:
        log_f = open(event_log_path, "w")

        def sink(rec):
            log_f.write(json.dumps(rec, sort_keys=True) + "\n")

    try:
        eng = Engine(cfg, event_log=sink)
        collector = eng.run()
    finally:
        if log_f:
            log_f.close()
    report = summarize(collector, warmup=cfg.warmup)

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_report_json(report, os.path.join(out_dir, "report.json"))
        write_results_csv(collector, os.path.join(out_dir, "results.csv"))
        write_queues_csv(collector, os.path.join(out_dir, "queues.csv"))
        write_controller_csv(collector, os.path.join(out_dir, "controller.csv"))
        write_offload_csv(collector, os.path.join(out_dir, "offload.csv"))
    return report


def cmd_run(args) -> int:
    try:
        with open(args.config) as f:
            doc = json.load(f)
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as e:
        print(f"error: config is not valid JSON: {e}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else doc.get("seed")
    if seed is None:
        print("error: missing field 'seed' (config or --seed)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = _run_one(doc, int(seed), args.out_dir, args.event_log)
    except (ConfigInvalid, ModelError, ConfidenceError) as e:
        print(f"error: invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    log.info("run complete: delivered=%d rate=%s accuracy=%s",
             report.delivered, report.achieved_rate, report.accuracy)
    if not args.out_dir:
        json.dump(report.to_dict(), sys.stdout, indent=2, sort_keys=True)
        print()
    return EXIT_OK


_SWEEP_VARS = {"lambda", "T_e", "topology"}


def _apply_sweep_value(doc: dict, variable: str, value):
    doc = copy.deepcopy(doc)
    if variable == "lambda":
        doc["arrival"] = {"mode": "poisson", "lambda": float(value)}
    elif variable == "T_e":
        doc["t_e_initial"] = float(value)
    elif variable == "topology":
        doc["topology"] = value
    return doc


def _sweep_point(doc: dict, seed: int):
    cfg = config_from_dict(doc)
    collector = Engine(cfg).run()
    report = summarize(collector, warmup=cfg.warmup)
    return report.achieved_rate, report.accuracy, report.latency_mean


def cmd_sweep(args) -> int:
    try:
        with open(args.sweep) as f:
            spec = json.load(f)
    except OSError as e:
        print(f"error: cannot read sweep spec: {e}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as e:
        print(f"error: sweep spec is not valid JSON: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        base = spec["base"]
        if isinstance(base, str):
            with open(base) as f:
                base = json.load(f)
        variable = spec["variable"]
        values = spec["values"]
        seeds = int(spec.get("seeds", 1))
    except (KeyError, TypeError, OSError) as e:
        print(f"error: bad sweep spec: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if variable not in _SWEEP_VARS:
        print(f"error: unknown sweep variable {variable!r}", file=sys.stderr)
        return EXIT_CONFIG
    if not values or seeds < 1:
        print("error: sweep needs a nonempty value list and seeds >= 1",
              file=sys.stderr)
        return EXIT_CONFIG
    mode = base.get("controller", {}).get("mode", "none")
    if variable == "lambda" and mode == admission.MODE_RATE:
        print("error: sweeping lambda requires threshold adaptation or no "
              "controller", file=sys.stderr)
        return EXIT_CONFIG
    if variable == "T_e" and mode == admission.MODE_THRESHOLD:
        print("error: sweeping a fixed T_e requires rate adaptation or no "
              "controller", file=sys.stderr)
        return EXIT_CONFIG

    base_seed = int(base.get("seed", 0))
    points = []
    for value in values:
        for i in range(seeds):
            doc = _apply_sweep_value(base, variable, value)
            doc["seed"] = base_seed + i
            points.append((value, base_seed + i, doc))

    rows = []
    try:
        if args.parallel > 1:
            with concurrent.futures.ProcessPoolExecutor(args.parallel) as ex:
                futures = [ex.submit(_sweep_point, doc, seed)
                           for (_, seed, doc) in points]
                for (value, seed, _), fut in zip(points, futures):
                    rate, acc, lat = fut.result()
                    rows.append((variable, value, seed, rate, acc, lat))
        else:
            for value, seed, doc in points:
                rate, acc, lat = _sweep_point(doc, seed)
                rows.append((variable, value, seed, rate, acc, lat))
    except (ConfigInvalid, ModelError, ConfidenceError) as e:
        print(f"error: invalid config: {e} ({len(rows)} of {len(points)} "
              f"points completed before the failure)", file=sys.stderr)
        return EXIT_CONFIG

    os.makedirs(args.out_dir, exist_ok=True)
    out = os.path.join(args.out_dir, "sweep.csv")
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["variable", "value", "seed", "achieved_rate", "accuracy",
                    "mean_latency"])
        for variable, value, seed, rate, acc, lat in rows:
            w.writerow([variable, value, seed,
                        "" if rate is None else repr(rate),
                        "" if acc is None else repr(acc),
                        "" if lat is None else repr(lat)])
    log.info("sweep complete: %d rows -> %s", len(rows), out)
    return EXIT_OK


def cmd_validate_trace(args) -> int:
    try:
        model = load_model(args.model)
        oracle = trace_oracle_load(args.trace)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ModelError, ConfidenceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if oracle.num_stages != model.num_stages or \
            oracle.num_classes != model.num_classes:
        print(f"error: dimension mismatch: trace has K={oracle.num_stages} "
              f"v={oracle.num_classes}, model has K={model.num_stages} "
              f"v={model.num_classes}", file=sys.stderr)
        return EXIT_CONFIG

    ids = oracle.datum_ids
    print(f"trace: {len(ids)} data, K={oracle.num_stages}, "
          f"v={oracle.num_classes}")
    print("stage  mean_confidence  attainable_accuracy")
    stage_acc = {}
    for k in range(1, oracle.num_stages + 1):
        confs, hits = [], 0
        for d in ids:
            conf, label = classify(oracle.logits_for(d, k))
            confs.append(conf)
            hits += int(label == oracle.truth(d))
        mean_conf = sum(confs) / len(confs) if confs else float("nan")
        acc = hits / len(ids) if ids else float("nan")
        stage_acc[k] = acc
        print(f"{k:5d}  {mean_conf:15.4f}  {acc:19.4f}")
    if ids and stage_acc[oracle.num_stages] < stage_acc[1]:
        print("warning: final-stage accuracy below stage-1 accuracy; "
              "this trace looks suspicious", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdi-exit",
        description="Discrete-event simulator for model-distributed "
                    "inference with early exit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("config", help="scenario config JSON")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_run.add_argument("--out-dir", default=None,
                       help="write report.json and CSVs here")
    p_run.add_argument("--event-log", default=None,
                       help="stream the full event log as ndjson to this file")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("sweep", help="sweep spec JSON")
    p_sweep.add_argument("--out-dir", required=True)
    p_sweep.add_argument("--parallel", type=int, default=1, metavar="N")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate-trace",
                           help="check a logit trace against a model spec")
    p_val.add_argument("trace", help="trace CSV")
    p_val.add_argument("model", help="model spec JSON")
    p_val.set_defaults(func=cmd_validate_trace)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
