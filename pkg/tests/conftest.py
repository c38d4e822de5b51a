import csv

import pytest

from mdi_exit.confidence import construct_logits, trace_header


def make_config_doc(**overrides):
    """A small, valid mesh3 scenario; override fields per test."""
    doc = {
        "seed": 7,
        "topology": "mesh3",
        "model": {
            "total_layers": 9,
            "num_classes": 10,
            "exit_layers": [3, 6, 9],
            "feature_bytes": [10000, 8000, 40],
        },
        "oracle": {
            "type": "synthetic",
            "num_classes": 10,
            "stages": [
                {"a": 2, "b": 2, "p": 0.7},
                {"a": 3, "b": 2, "p": 0.85},
                {"a": 4, "b": 2, "p": 0.95},
            ],
        },
        "arrival": {"mode": "poisson", "lambda": 5.0},
        "controller": {"mode": "none"},
        "gamma": {"default": 0.1},
        "t_e_initial": 0.9,
        "datum_budget": 200,
    }
    doc.update(overrides)
    return doc


def write_trace(path, rows, num_stages, num_classes):
    """Write a logit trace CSV. rows: {datum_id: (truth, {stage: logits})}."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(trace_header(num_stages, num_classes))
        for datum_id in sorted(rows):
            truth, per_stage = rows[datum_id]
            flat = []
            for k in range(1, num_stages + 1):
                flat.extend(per_stage[k])
            w.writerow([datum_id, truth] + flat)


def write_confidence_trace(path, entries, num_stages, num_classes):
    """Trace where each (datum, stage) is given as (confidence, label).

    entries: {datum_id: (truth, {stage: (confidence, label)})}
    """
    rows = {}
    for datum_id, (truth, per_stage) in entries.items():
        rows[datum_id] = (truth, {
            k: construct_logits(c, label, num_classes)
            for k, (c, label) in per_stage.items()
        })
    write_trace(path, rows, num_stages, num_classes)


@pytest.fixture
def config_doc():
    return make_config_doc()


_acceptance_outcomes = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        if report.when == "call":
            _acceptance_outcomes[name] = report.outcome
        elif report.when == "setup" and report.outcome != "passed":
            _acceptance_outcomes[name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_acceptance_outcomes):
        status = "PASS" if _acceptance_outcomes[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{name}: {status}")
