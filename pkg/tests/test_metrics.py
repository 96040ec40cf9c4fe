import numpy as np
import pytest

from ledsim.config import FlowConfig, ScenarioConfig
from ledsim.metrics import (
    RateSample,
    efficiency,
    jain_index,
    mean_queue,
    mean_queueing_delay,
    protocol_breakdown,
    stationary_window,
    summarize,
)
from ledsim.simulation import simulate


def test_jain_examples():
    assert jain_index([5, 5]) == 1.0
    assert jain_index([10, 0]) == 0.5
    assert jain_index([3, 1]) == pytest.approx(0.8)
    assert jain_index([0, 0, 0]) == 1.0


def test_jain_rejects_bad_input():
    with pytest.raises(ValueError):
        jain_index([])
    with pytest.raises(ValueError):
        jain_index([1, -1])


def test_efficiency_examples():
    assert efficiency([400, 433.3333], 833.3333) == pytest.approx(1.0)
    assert efficiency([0, 0], 10.0) == 0.0
    assert efficiency([5, 5], 10.0) == 1.0
    with pytest.raises(ValueError):
        efficiency([1], 0)


def sample(bytes_, protos):
    return RateSample((0.0, 10.0), dict(enumerate(bytes_)), dict(enumerate(protos)))


def test_breakdown():
    assert protocol_breakdown(sample([0, 9e6], ["fledbat", "reno"]), "fledbat") == 0.0
    assert protocol_breakdown(sample([1, 1], ["fledbat", "fledbat"]), "fledbat") == 1.0
    assert protocol_breakdown(sample([5, 5], ["fledbat", "reno"]), "fledbat") == 0.5
    assert protocol_breakdown(sample([0, 0], ["fledbat", "reno"]), "fledbat") is None


def test_rate_sample_window_must_be_positive():
    with pytest.raises(ValueError):
        RateSample((5.0, 5.0), {}, {})


@pytest.fixture(scope="module")
def trace():
    cfg = ScenarioConfig(flows=[FlowConfig("fledbat"), FlowConfig("fledbat", 2.0)], duration_s=30)
    return simulate(cfg)


def test_stationary_window_bounds(trace):
    whole = stationary_window(trace, 0.0)
    assert whole.window == (0.0, 30.0)
    tail = stationary_window(trace, 10.0)
    assert tail.window[0] == pytest.approx(10.0)
    assert sum(tail.per_flow_bytes.values()) < sum(whole.per_flow_bytes.values())
    with pytest.raises(ValueError):
        stationary_window(trace, 30.0)


def test_summary_of_two_flows(trace):
    s = summarize(trace, 10.0)
    assert 0.9 < s.efficiency <= 1.001
    assert s.fairness > 0.95
    assert s.breakdown == 1.0


def test_littles_law(trace):
    # mean waiting time vs mean queue / C over a stationary window
    q = mean_queue(trace, 10.0, 30.0)
    w = mean_queueing_delay(trace, 10.0, 30.0)
    assert w == pytest.approx(q / trace.capacity_pps, rel=0.05)
