from dataclasses import replace

import numpy as np
import pytest

from cochlea_agc.agc import AgcParams
from cochlea_agc.harness.analysis import sine_mv
from cochlea_agc.harness.config import CochleaConfig
from cochlea_agc.harness.simulate import duration_us, simulate

FS = 44100


def mixed_signal(seconds=0.3, seed=0):
    rng = np.random.default_rng(seed)
    n = int(seconds * FS)
    t = np.arange(n) / FS
    x = 0.3 * np.sin(2 * np.pi * 480 * t) * (t > 0.05)
    x += 0.05 * rng.standard_normal(n)
    x[int(0.2 * FS):] *= 0.01
    return x


def same(a, b):
    return a.dtype == b.dtype and a.tobytes() == b.tobytes()


def test_compiled_matches_reference():
    cfg = CochleaConfig().with_channels(28, 32)
    x = mixed_signal()
    a = simulate(x, cfg, backend="compiled", record_channels=(30,))
    b = simulate(x, cfg, backend="reference", record_channels=(30,))
    assert a.events.size > 0 and a.windows.size > 0 and a.applied_trace.size > 0
    for name in ("events", "gain_trace", "applied_trace", "windows"):
        assert same(getattr(a, name), getattr(b, name)), name
    assert np.array_equal(a.analog[30], b.analog[30])
    assert a.queue_drops == b.queue_drops and a.cap_hits == b.cap_hits


def test_compiled_matches_reference_non_agc():
    cfg = CochleaConfig().with_channels(29, 31)
    x = mixed_signal(0.1, seed=2)
    a = simulate(x, cfg, agc_on=False)
    b = simulate(x, cfg, agc_on=False, backend="reference")
    assert same(a.events, b.events) and a.windows.size == 0


def test_silence():
    res = simulate(np.zeros(FS // 2), CochleaConfig())
    assert res.events.size == 0
    assert np.all(res.gain_trace["gain_index"] == 11)
    assert np.all(res.windows["decision"] == 0)
    assert res.duration_us == 500_000


def test_silence_ramps_back_from_low_start():
    cfg = replace(CochleaConfig().with_channels(30, 30), initial_gain_index=3)
    res = simulate(np.zeros(FS // 2), cfg)
    gi = res.gain_trace["gain_index"]
    assert gi[0] == 3 and gi[-1] == 11 and np.all(np.diff(gi.astype(int)) == 1)


def test_mid_amplitude_regulates():
    cfg = CochleaConfig().with_channels(30, 30)
    res = simulate(sine_mv(481.9071, 10.0, 1.5), cfg)
    w = res.windows[res.windows["time_us"] >= 1_000_000]
    assert np.all((w["spike_count"] >= 1) & (w["spike_count"] < 16))


def test_deterministic():
    x = mixed_signal(0.2, seed=5)
    a, b = simulate(x), simulate(x)
    assert same(a.events, b.events) and same(a.gain_trace, b.gain_trace)


def test_forced_constant_gain_equals_non_agc():
    # t_lower = 0 never raises the gain from 11; t_upper = 63 is not reached
    params = AgcParams(t_lower=0, t_upper=63)
    cfg = replace(CochleaConfig(), agc=params)
    x = mixed_signal(0.3, seed=9) * 0.05
    a = simulate(x, cfg, agc_on=True)
    b = simulate(x, cfg, agc_on=False)
    assert a.windows["spike_count"].max() < 63
    assert np.all(a.windows["decision"] == 0)
    assert same(a.events, b.events)


def test_three_simultaneous_requests_serialised():
    # three channels whose windows close on the same tick all step down
    cfg = CochleaConfig().with_channels(30, 32)
    x = sine_mv(450.0, 60.0, 0.1)
    res = simulate(x, cfg)
    first = res.gain_trace[res.gain_trace["time_us"] > 0]
    t0 = first["time_us"].min()
    applied = res.applied_trace
    assert applied.size >= 3
    times = applied["time_us"][:3].astype(int)
    assert times[0] == t0 + 500
    assert np.all(np.diff(applied["time_us"].astype(int)) >= 500)


def test_event_gain_tag_is_register_value():
    cfg = CochleaConfig().with_channels(30, 30)
    res = simulate(sine_mv(481.9, 30.0, 0.3), cfg)
    trace = res.gain_trace
    for ev in res.events[::97]:
        k = np.searchsorted(trace["time_us"], ev["timestamp_us"], side="right") - 1
        assert ev["gain_index"] == trace["gain_index"][k]


def test_errors():
    with pytest.raises(ValueError):
        simulate(np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        simulate(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        simulate(np.zeros(10), backend="gpu")
    with pytest.raises(ValueError):
        simulate(np.zeros(10), record_channels=(5,))


def test_duration_us():
    assert duration_us(44100, 44100) == 1_000_000
    assert duration_us(1, 44100) == 22
