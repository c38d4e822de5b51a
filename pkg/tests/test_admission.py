import random

import pytest

from mdi_exit.admission import (ControllerConfig, SourceState,
                                adapt_interarrival, adapt_threshold,
                                next_arrival_gap)

# testbed constants: T_Q1=10, T_Q2=30, alpha=0.2, beta=0.1, zeta=0.2
CFG = ControllerConfig(mode="rate", alpha=0.2, beta=0.1, zeta=0.2,
                       t_q1=10, t_q2=30, t_e_min=0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(alpha=0.1, beta=0.2)   # needs alpha > beta
    with pytest.raises(ValueError):
        ControllerConfig(t_q1=40, t_q2=30)
    with pytest.raises(ValueError):
        ControllerConfig(mode="bogus")
    with pytest.raises(ValueError):
        ControllerConfig(t_e_min=0.0)


def test_interarrival_short_queue_shrinks_fast():
    mu, branch = adapt_interarrival(5, 1.0, CFG)
    assert mu == pytest.approx(0.8) and branch == "alpha"


def test_interarrival_moderate_queue_shrinks_gently():
    mu, branch = adapt_interarrival(20, 1.0, CFG)
    assert mu == pytest.approx(0.9) and branch == "beta"


def test_interarrival_long_queue_grows():
    mu, branch = adapt_interarrival(40, 1.0, CFG)
    assert mu == pytest.approx(1.2) and branch == "zeta"


@pytest.mark.parametrize("q", [10, 30])
def test_interarrival_boundary_holds(q):
    mu, branch = adapt_interarrival(q, 1.0, CFG)
    assert mu == 1.0 and branch == "hold"


def test_interarrival_clamped_at_floor():
    mu = 1.0
    for _ in range(200):
        mu, _ = adapt_interarrival(0, mu, CFG)
    assert mu == CFG.mu_min


def test_interarrival_geometric_drive():
    mu = 1.0
    for i in range(1, 11):
        mu, _ = adapt_interarrival(0, mu, CFG)
        assert mu == pytest.approx(0.8 ** i)
    mu = 1.0
    for i in range(1, 11):
        mu, _ = adapt_interarrival(100, mu, CFG)
        assert mu == pytest.approx(1.2 ** i)


def test_threshold_short_queue_raises():
    te, branch = adapt_threshold(5, 0.8, CFG)
    assert te == pytest.approx(0.96) and branch == "alpha"


def test_threshold_clamped_at_one():
    te, _ = adapt_threshold(5, 0.9, CFG)
    assert te == 1.0


def test_threshold_moderate_queue():
    te, branch = adapt_threshold(20, 0.8, CFG)
    assert te == pytest.approx(0.88) and branch == "beta"


def test_threshold_long_queue_lowers():
    te, branch = adapt_threshold(40, 0.9, CFG)
    assert te == pytest.approx(0.72) and branch == "zeta"


def test_threshold_clamped_at_min():
    te = 0.9
    for _ in range(100):
        te, _ = adapt_threshold(100, te, CFG)
    assert te == CFG.t_e_min


@pytest.mark.parametrize("q", [10, 30])
def test_threshold_boundary_holds(q):
    te, branch = adapt_threshold(q, 0.8, CFG)
    assert te == 0.8 and branch == "hold"


def test_threshold_stays_in_bounds_under_any_sequence():
    rng = random.Random(0)
    te = 0.9
    for _ in range(1000):
        te, _ = adapt_threshold(rng.randrange(0, 100), te, CFG)
        assert CFG.t_e_min <= te <= 1.0


def test_adaptive_arrival_gap_is_mu():
    src = SourceState("adaptive", mu=0.5)
    rng = random.Random(0)
    assert next_arrival_gap(src, rng) == 0.5


def test_poisson_arrival_mean_gap():
    src = SourceState("poisson", lam=2.0)
    rng = random.Random(42)
    n = 100_000
    mean = sum(next_arrival_gap(src, rng) for _ in range(n)) / n
    assert mean == pytest.approx(0.5, rel=0.01)


def test_source_state_validation():
    with pytest.raises(ValueError):
        SourceState("adaptive", mu=0.0)
    with pytest.raises(ValueError):
        SourceState("weird")
