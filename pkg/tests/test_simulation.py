import numpy as np
import pytest

from ledsim.config import FlowConfig, ScenarioConfig, SwarmConfig, TrafficConfig, RttConfig
from ledsim.simulation import simulate


def two_flows(**kw):
    base = dict(flows=[FlowConfig("fledbat"), FlowConfig("fledbat", 2.0)], duration_s=20.0)
    base.update(kw)
    return ScenarioConfig(**base)


def test_sample_grid():
    r = simulate(two_flows())
    assert len(r.t) == 2001
    assert r.t[0] == 0.0 and r.t[-1] == 20.0
    assert np.allclose(np.diff(r.t), 0.01)


def test_queue_stays_within_buffer():
    cfg = ScenarioConfig(flows=[FlowConfig("reno"), FlowConfig("reno")], duration_s=20.0)
    r = simulate(cfg)
    assert r.queue.max() <= 100
    assert r.drops > 0
    assert np.all(np.diff(r.acked, axis=1) >= 0)


def test_single_flow_fills_and_holds_queue_near_target():
    r = simulate(ScenarioConfig(flows=[FlowConfig("ledbat")], duration_s=30.0))
    tail = r.queue[r.t > 15]
    # LEDBAT parks the queue at tau*C = 20.8 packets
    assert abs(tail.mean() - 20.8) < 3


def test_flow_inactive_before_start():
    r = simulate(two_flows())
    before = r.t < 2.0
    assert np.all(r.acked[1, before] == 0)
    assert r.acked[1, -1] > 0


def test_stop_freezes_ack_count():
    cfg = ScenarioConfig(flows=[FlowConfig("fledbat"), FlowConfig("fledbat", 1.0, stop_s=5.0)], duration_s=10.0)
    r = simulate(cfg)
    after = r.acked[1, r.t >= 5.5]
    assert np.all(after == after[0])


def test_determinism_bitwise():
    cfg = ScenarioConfig(
        traffic=TrafficConfig("swarm"),
        swarm=SwarmConfig(persistence=0.7),
        rtt=RttConfig(mode="heterogeneous"),
        duration_s=15.0,
        record_acks=True,
    )
    a, b = simulate(cfg, 3), simulate(cfg, 3)
    for name in ("t", "queue", "acked", "cwnd", "wait_sum"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.ack_records == b.ack_records
    c = simulate(cfg, 4)
    assert not np.array_equal(a.acked, c.acked)


def test_ack_records():
    r = simulate(two_flows(duration_s=5.0, record_acks=True))
    t, unit, cwnd, delta, dmin, kind = r.ack_records[0]
    assert kind == "ack" and unit == 0 and cwnd >= 1
    assert delta == pytest.approx(-0.025)
    assert dmin == pytest.approx(0.0262)
    dmins = [rec[4] for rec in r.ack_records if rec[1] == 0]
    assert all(b <= a for a, b in zip(dmins, dmins[1:]))


def test_chunk_boundaries_are_whole_chunks():
    cfg = ScenarioConfig(flows=[FlowConfig("fledbat")], traffic=TrafficConfig("chunk"), duration_s=10.0, record_acks=True)
    r = simulate(cfg)
    assert len(r.chunk_records) >= 5
    acks = [rec for rec in r.ack_records if rec[5] == "ack"]
    for t, unit, conn, done in r.chunk_records:
        count = sum(1 for rec in acks if rec[0] <= t)
        assert count == 167 * (done + 1)


def test_chunk_mode_keeps_cwnd_across_chunks():
    cfg = ScenarioConfig(flows=[FlowConfig("fledbat")], traffic=TrafficConfig("chunk"), duration_s=10.0, record_acks=True)
    r = simulate(cfg)
    t_end = r.chunk_records[2][0]
    before = [rec[2] for rec in r.ack_records if rec[0] <= t_end][-1]
    after = [rec[2] for rec in r.ack_records if rec[0] > t_end][0]
    assert after >= before


def test_swarm_with_full_persistence_equals_chunk_flows():
    sw = ScenarioConfig(
        traffic=TrafficConfig("swarm"), swarm=SwarmConfig(persistence=1.0, start_spread_s=0.0), duration_s=15.0
    )
    ch = ScenarioConfig(traffic=TrafficConfig("chunk"), flows=[FlowConfig() for _ in range(5)], duration_s=15.0)
    a, b = simulate(sw), simulate(ch)
    assert np.array_equal(a.acked, b.acked)
    assert np.array_equal(a.queue, b.queue)


def test_swarm_keeps_m_active_and_resets_windows():
    cfg = ScenarioConfig(traffic=TrafficConfig("swarm"), swarm=SwarmConfig(persistence=0.0), duration_s=10.0, record_acks=True)
    r = simulate(cfg)
    assert r.n_units == 5
    assert r.stats["connections"] > 5
    # a switch opens a new connection with cwnd 1: its first ack leaves cwnd near 2
    conns = {c for _, _, c, _ in r.chunk_records}
    assert len(conns) > 5


def test_zero_backward_delay_bound():
    cfg = two_flows(rtt=RttConfig(rtt_ms=26.2, fwd_ms=25.0), duration_s=3.0)
    r = simulate(cfg)
    assert r.acked[:, -1].sum() > 0
