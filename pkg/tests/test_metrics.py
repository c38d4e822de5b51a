import csv

import pytest

from mdi_exit.metrics import (MetricsCollector, nearest_rank_percentile,
                              summarize, write_controller_csv,
                              write_offload_csv, write_queues_csv,
                              write_report_json, write_results_csv)
from mdi_exit.model import ResultRecord


def rec(datum_id, exit_stage=1, correct=True, completion=10.0, latency=1.0):
    return ResultRecord(datum_id=datum_id, exit_stage=exit_stage,
                        confidence=0.9, predicted_label=0, correct=correct,
                        completion_time=completion, end_to_end_latency=latency)


def test_nearest_rank_percentile():
    values = [float(x) for x in range(1, 101)]
    assert nearest_rank_percentile(values, 95) == 95.0
    assert nearest_rank_percentile(values, 50) == 50.0
    assert nearest_rank_percentile([3.0], 95) == 3.0
    with pytest.raises(ValueError):
        nearest_rank_percentile([], 95)


def test_accuracy_and_histogram():
    col = MetricsCollector(num_stages=3)
    for d in range(100):
        col.record_result(rec(d, exit_stage=1 if d < 40 else 3,
                              correct=d < 90, completion=float(d)))
    col.admitted = 100
    col.end_time = 100.0
    report = summarize(col, warmup=0.0)
    assert report.accuracy == pytest.approx(0.9)
    assert report.exit_histogram == [40, 0, 60]
    assert report.delivered == 100


def test_empty_run_report_has_undefined_markers():
    col = MetricsCollector(num_stages=2)
    col.end_time = 5.0
    report = summarize(col, warmup=0.0)
    assert report.accuracy is None
    assert report.achieved_rate is None
    assert report.latency_p95 is None
    assert report.exit_histogram == [0, 0]
    d = report.to_dict()
    assert d["accuracy"] is None   # marker, not NaN


def test_warmup_excludes_early_results():
    col = MetricsCollector(num_stages=1)
    for d in range(10):
        col.record_result(rec(d, completion=float(d), latency=float(d)))
    col.end_time = 10.0
    report = summarize(col, warmup=5.0)
    assert sum(report.exit_histogram) == 5
    assert report.latency_mean == pytest.approx((5 + 6 + 7 + 8 + 9) / 5)


def test_default_warmup_is_ten_percent():
    col = MetricsCollector(num_stages=1)
    col.end_time = 100.0
    report = summarize(col)
    assert report.warmup == pytest.approx(10.0)


def test_rate_times_interval_equals_count():
    col = MetricsCollector(num_stages=1)
    for d in range(50):
        col.record_result(rec(d, completion=1.0 + d * 0.5))
    col.end_time = 30.0
    report = summarize(col, warmup=1.0)
    interval = max(r.completion_time for r in col.results) - 1.0
    assert report.achieved_rate * interval == pytest.approx(50, abs=1)


def test_csv_writers(tmp_path):
    col = MetricsCollector(num_stages=2, seed=3, config_hash="abc")
    col.record_result(rec(0))
    col.record_queue_sample(1.0, 1, 2, 3)
    col.record_controller(1.0, 1, 5, 1.0, 0.8, "alpha")
    col.record_offload(1.5, 1, 2, 0, 1, "prob", 0.5, 0.3)
    col.end_time = 10.0
    col.admitted = 1

    paths = {}
    for name, writer in [("results", write_results_csv),
                         ("queues", write_queues_csv),
                         ("controller", write_controller_csv),
                         ("offload", write_offload_csv)]:
        p = tmp_path / f"{name}.csv"
        writer(col, str(p))
        paths[name] = p

    with open(paths["results"]) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["datum_id", "exit_stage", "confidence", "correct",
                       "latency"]
    assert rows[1][0] == "0"

    with open(paths["offload"]) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["time", "from", "to", "datum_id", "stage", "branch",
                       "p", "draw"]

    report = summarize(col, warmup=0.0)
    rp = tmp_path / "report.json"
    write_report_json(report, str(rp))
    text = rp.read_text()
    assert '"config_hash": "abc"' in text


def test_config_hash_distinguishes_configs():
    from mdi_exit.engine import config_from_dict
    from conftest import make_config_doc
    a = config_from_dict(make_config_doc())
    b = config_from_dict(make_config_doc(t_e_initial=0.91))
    assert a.config_hash != b.config_hash
