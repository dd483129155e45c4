from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cochlea_agc.adm import Polarity, SpikeEvent
from cochlea_agc.agc import (GAIN_PATTERNS, AgcChannelRegs, AgcController, AgcParams, Decision, GainUpdateQueue,
                             GainUpdateRequest, averaging_window_ticks, enqueue_gain_update,
                             estimate_input_amplitude, gain_adjusted_rate, gain_lookup, on_spike,
                             service_gain_updates, tick)

P = AgcParams()


def on(ch=30, t=0):
    return SpikeEvent(t, ch, Polarity.ON, 11)


def off(ch=30, t=0):
    return SpikeEvent(t, ch, Polarity.OFF, 11)


def test_window_lengths():
    assert averaging_window_ticks(30) == 166
    assert averaging_window_ticks(63) == 4095
    assert averaging_window_ticks(0) == 4


def test_on_spike_counts_and_saturates():
    r = AgcChannelRegs(30)
    on_spike(r, on())
    assert r.spike_count == 1
    r.spike_count = 63
    on_spike(r, on())
    assert r.spike_count == 63


def test_on_spike_polarity_and_gating():
    r = AgcChannelRegs(30)
    on_spike(r, off())
    assert r.spike_count == 0
    on_spike(r, off(), AgcParams(count_polarity="both"))
    assert r.spike_count == 1
    on_spike(r, on(ch=31))
    assert r.spike_count == 1
    r.enabled = False
    on_spike(r, on())
    assert r.spike_count == 1


def test_register_ranges_enforced():
    r = AgcChannelRegs(30)
    with pytest.raises(ValueError):
        r.spike_count = 64
    with pytest.raises(ValueError):
        r.gain_index = 12
    with pytest.raises(ValueError):
        r.time_counter = 4096
    with pytest.raises(ValueError):
        AgcChannelRegs(64)


def _closing(count, gi):
    return AgcChannelRegs(30, window_len_ticks=1, spike_count=count, gain_index=gi)


@pytest.mark.parametrize("count,gi,decision,gi_after", [
    (0, 5, Decision.INCREASE, 6),
    (16, 5, Decision.DECREASE, 4),
    (5, 5, Decision.NONE, 5),
    (0, 11, Decision.NONE, 11),
    (63, 0, Decision.NONE, 0),
    (15, 3, Decision.NONE, 3),
    (1, 3, Decision.NONE, 3),
])
def test_tick_decisions(count, gi, decision, gi_after):
    r = _closing(count, gi)
    d = tick(r, P, now_us=700)
    assert d.decision == decision and r.gain_index == gi_after == d.gain_index
    assert d.spike_count == count and d.time_us == 700
    assert r.spike_count == 0 and r.time_counter == 0 and r.window_end


def test_tick_midwindow_and_flag_clears():
    r = AgcChannelRegs(30, window_len_ticks=3, spike_count=20)
    assert tick(r) is None and tick(r) is None and not r.window_end
    assert tick(r).decision == Decision.DECREASE and r.window_end
    assert tick(r) is None and not r.window_end


def test_tick_disabled_channel_frozen():
    r = AgcChannelRegs(30, window_len_ticks=1, spike_count=20, enabled=False)
    assert tick(r) is None and r.spike_count == 20 and r.gain_index == 11


def test_params_validation():
    with pytest.raises(ValueError):
        AgcParams(t_lower=16, t_upper=16)
    with pytest.raises(ValueError):
        AgcParams(count_polarity="off")
    with pytest.raises(ValueError):
        AgcParams(gain_patterns=(1,) * 12)
    with pytest.raises(ValueError):
        AgcParams(window_max_ticks=100)


def test_gain_lookup():
    assert gain_lookup(11)[1] == pytest.approx(32.5)
    assert gain_lookup(0)[1] == 0.0
    assert gain_lookup(6)[1] == pytest.approx(6 * 32.5 / 11)
    assert len(set(GAIN_PATTERNS)) == 12 and all(0 <= p < 64 for p in GAIN_PATTERNS)
    with pytest.raises(ValueError):
        gain_lookup(12)


def test_request_pack():
    assert GainUpdateRequest(5, 0b100011, 0).pack() == (5 << 6) | 0b100011


def test_queue_basic_fifo():
    q = GainUpdateQueue()
    r = GainUpdateRequest(3, 7, 0)
    assert enqueue_gain_update(q, r) and len(q) == 1
    assert q.dequeue() == r
    for ch in (1, 2, 1):
        q.enqueue(GainUpdateRequest(ch, 0, 0))
    assert [q.dequeue().channel for _ in range(3)] == [1, 2, 1]


def test_queue_overflow_drops_newest():
    q = GainUpdateQueue()
    for i in range(128):
        assert q.enqueue(GainUpdateRequest(i % 64, 0, i))
    assert not q.enqueue(GainUpdateRequest(0, 0, 999))
    assert len(q) == 128 and q.dropped == 1
    assert q.dequeue().enqueue_time_us == 0


def test_service_serialises():
    q = GainUpdateQueue()
    assert service_gain_updates(q, 0) == []
    for ch in range(10):
        q.enqueue(GainUpdateRequest(ch, 0, 0))
    applied = []
    for now in range(0, 10_000, 100):
        applied += service_gain_updates(q, now)
    times = [a[2] for a in applied]
    assert [a[0] for a in applied] == list(range(10))
    assert np.all(np.diff(times) >= 500)
    assert times[-1] - times[0] >= 4500 and times[-1] >= 5000


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 63)), max_size=300))
def test_queue_matches_deque_model(ops):
    # op 0 = service attempt, otherwise enqueue a request for that channel
    q = GainUpdateQueue()
    model, dropped, busy, now = deque(), 0, 0, 0
    for kind, ch in ops:
        now += 100
        if kind == 0:
            got = q.service(now)
            if model and now >= busy:
                exp = model.popleft()
                busy = now + 500
                assert got == [(exp, 0, busy)]
            else:
                assert got == []
        else:
            q.enqueue(GainUpdateRequest(ch, 0, now))
            if len(model) >= 128:
                dropped += 1
            else:
                model.append(ch)
    assert q.dropped == dropped and [r.channel for r in q._q] == list(model)


def test_controller_ticks_channels_in_order_and_queues():
    ctrl = AgcController([31, 30], P)
    for ch in (30, 31):
        ctrl.regs[ch].window_len_ticks = 1
    loads = ctrl.tick_all(0)
    assert [w.channel for w in ctrl.windows] == [30, 31]
    assert all(w.decision == Decision.NONE for w in ctrl.windows)  # silent but already at 11
    for _ in range(20):
        ctrl.on_event(on(30))
        ctrl.on_event(on(31))
    loads = ctrl.tick_all(100)
    assert loads == [(30, GAIN_PATTERNS[10], 600)]
    assert len(ctrl.queue) == 1
    assert ctrl.tick_all(200) == []
    ctrl.on_event(on(40))  # unknown channel ignored


def test_amplitude_estimate_and_rga():
    assert estimate_input_amplitude(2, 20) == pytest.approx(0.2)
    assert estimate_input_amplitude(1, 0) == 1
    assert estimate_input_amplitude(0, 17) == 0
    assert gain_adjusted_rate(3.0, 32.5) == 3.0
    assert gain_adjusted_rate(1.0, 12.5) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        estimate_input_amplitude(-1, 0)
    with pytest.raises(ValueError):
        gain_adjusted_rate(-1, 0)
