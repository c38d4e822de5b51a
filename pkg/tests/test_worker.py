import pytest

from mdi_exit.confidence import SyntheticOracle
from mdi_exit.model import Task, build_partition
from mdi_exit.worker import (OracleMiss, WorkerDeparted, WorkerState,
                             enqueue_remote, on_compute_complete,
                             start_next_task)
from conftest import write_confidence_trace
from mdi_exit.confidence import trace_oracle_load


@pytest.fixture
def model():
    return build_partition(9, [3, 6, 9], 10, [100, 50, 40])


def make_worker(model, gamma=0.5, t_e=0.9, t_o=50):
    return WorkerState(id=1, compute_delay=gamma,
                       thresholds=[t_e] * model.num_stages,
                       output_threshold=t_o)


def oracle_with(tmp_path, entries, k=3, v=10):
    path = tmp_path / "trace.csv"
    write_confidence_trace(str(path), entries, k, v)
    return trace_oracle_load(str(path))


def test_start_next_task_schedules_compute(model):
    w = make_worker(model, gamma=0.5)
    w.input_queue.append(Task(0, 1, 100))
    task, delay = start_next_task(w, model)
    assert task.datum_id == 0 and delay == 0.5 and w.busy


def test_start_next_task_none_when_busy(model):
    w = make_worker(model)
    w.busy = True
    w.input_queue.append(Task(0, 1, 100))
    assert start_next_task(w, model) is None


def test_start_next_task_none_when_empty(model):
    w = make_worker(model)
    assert start_next_task(w, model) is None


def test_start_next_task_uses_stage_weight():
    m = build_partition(9, [3, 6, 9], 10, [100, 50, 40],
                        compute_weights=[1.0, 2.0, 0.5])
    w = make_worker(m, gamma=0.4)
    w.input_queue.append(Task(0, 2, 100))
    _, delay = start_next_task(w, m)
    assert delay == pytest.approx(0.8)


def test_exit_when_confidence_clears_threshold(model, tmp_path):
    oracle = oracle_with(tmp_path, {0: (3, {1: (0.95, 3), 2: (0.95, 3),
                                            3: (0.95, 3)})})
    w = make_worker(model, t_e=0.9)
    out = on_compute_complete(w, Task(0, 1, 100), model, oracle)
    assert out.kind == "exit"
    assert out.predicted_label == 3
    assert out.confidence == pytest.approx(0.95, abs=1e-9)
    assert not w.busy


def test_threshold_comparison_is_strict(model, tmp_path):
    oracle = oracle_with(tmp_path, {0: (3, {1: (0.9, 3), 2: (0.9, 3),
                                            3: (0.9, 3)})})
    w = make_worker(model, t_e=0.9 - 1e-12)  # just below: 0.9 > T_e holds
    out = on_compute_complete(w, Task(0, 1, 100), model, oracle)
    assert out.kind == "exit"


def test_successor_to_input_when_input_empty(model, tmp_path):
    oracle = oracle_with(tmp_path, {0: (3, {1: (0.8, 3), 2: (0.8, 3),
                                            3: (0.8, 3)})})
    w = make_worker(model, t_e=0.9)
    out = on_compute_complete(w, Task(0, 1, 100), model, oracle)
    assert out.kind == "enqueue_input"
    assert w.input_queue[-1].stage == 2


def test_successor_to_input_when_output_over_threshold(model, tmp_path):
    oracle = oracle_with(tmp_path, {0: (3, {1: (0.8, 3), 2: (0.8, 3),
                                            3: (0.8, 3)})})
    w = make_worker(model, t_e=0.9, t_o=50)
    w.input_queue.extend(Task(d, 1, 100) for d in (1, 2, 3))
    w.output_queue.extend(Task(d, 2, 100) for d in range(51))  # O_n = 51 > 50
    out = on_compute_complete(w, Task(0, 1, 100), model, oracle)
    assert out.kind == "enqueue_input"


def test_successor_to_output_otherwise(model, tmp_path):
    oracle = oracle_with(tmp_path, {0: (3, {1: (0.8, 3), 2: (0.8, 3),
                                            3: (0.8, 3)})})
    w = make_worker(model, t_e=0.9, t_o=50)
    w.input_queue.extend(Task(d, 1, 100) for d in (1, 2, 3))
    w.output_queue.extend(Task(d, 2, 100) for d in range(10))
    out = on_compute_complete(w, Task(0, 1, 100), model, oracle)
    assert out.kind == "enqueue_output"
    assert w.output_queue[-1].stage == 2


def test_output_exactly_at_threshold_goes_to_output(model, tmp_path):
    # O_n > T_O is strict: equality takes the else branch
    oracle = oracle_with(tmp_path, {0: (3, {1: (0.8, 3), 2: (0.8, 3),
                                            3: (0.8, 3)})})
    w = make_worker(model, t_e=0.9, t_o=50)
    w.input_queue.append(Task(1, 1, 100))
    w.output_queue.extend(Task(d, 2, 100) for d in range(50))
    out = on_compute_complete(w, Task(0, 1, 100), model, oracle)
    assert out.kind == "enqueue_output"


def test_final_stage_always_exits(model, tmp_path):
    oracle = oracle_with(tmp_path, {0: (3, {1: (0.2, 3), 2: (0.2, 3),
                                            3: (0.2, 3)})})
    w = make_worker(model, t_e=1.0)  # threshold unreachable
    out = on_compute_complete(w, Task(0, 3, 50), model, oracle)
    assert out.kind == "exit" and out.task.stage == 3


def test_no_early_exit_when_threshold_is_one(model):
    oracle = SyntheticOracle([{"a": 2, "b": 2, "p": 0.9}] * 3, 10, seed=5)
    w = make_worker(model, t_e=1.0)
    for d in range(50):
        for k in (1, 2):
            w2 = make_worker(model, t_e=1.0)
            out = on_compute_complete(w2, Task(d, k, 100), model, oracle)
            assert out.kind != "exit"


def test_every_datum_exits_stage_one_with_floor_threshold(model):
    oracle = SyntheticOracle([{"a": 2, "b": 2, "p": 0.9}] * 3, 10, seed=5)
    for d in range(50):
        w = make_worker(model, t_e=0.1)  # = 1/v: non-uniform logits beat it
        out = on_compute_complete(w, Task(d, 1, 100), model, oracle)
        assert out.kind == "exit" and out.task.stage == 1


def test_oracle_miss(model, tmp_path):
    oracle = oracle_with(tmp_path, {0: (3, {1: (0.8, 3), 2: (0.8, 3),
                                            3: (0.8, 3)})})
    w = make_worker(model)
    with pytest.raises(OracleMiss):
        on_compute_complete(w, Task(99, 1, 100), model, oracle)


def test_enqueue_remote_fifo(model):
    w = make_worker(model)
    a, b = Task(1, 2, 100), Task(2, 2, 100)
    enqueue_remote(w, a)
    enqueue_remote(w, b)
    assert w.input_len == 2
    assert w.input_queue.popleft() is a
    assert w.input_queue.popleft() is b


def test_enqueue_remote_departed(model):
    w = make_worker(model)
    w.alive = False
    with pytest.raises(WorkerDeparted):
        enqueue_remote(w, Task(1, 2, 100))
    w2 = make_worker(model)
    w2.accepting = False
    with pytest.raises(WorkerDeparted):
        enqueue_remote(w2, Task(1, 2, 100))
