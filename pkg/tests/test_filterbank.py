import math

import numpy as np
import pytest
from scipy import signal

from cochlea_agc.filterbank import (BELOW_FLOOR_DB, FilterbankConfig, bandpass_section, cascade_bandwidth,
                                    channel_center_freq, channel_gain_db, design_channel, equal_step_gain_table,
                                    frequency_response, is_designable, noise_adjusted_amplitude, process_sample,
                                    steady_sine_rms)

FS = 44100


def test_center_frequencies():
    assert channel_center_freq(63) == pytest.approx(8.0, abs=0)
    assert channel_center_freq(0) == pytest.approx(20000.0, rel=1e-3)
    sf = (20000 / 8) ** (1 / 63)
    assert channel_center_freq(30) == pytest.approx(8 * sf ** 33, rel=1e-12)
    # the rounded 1.13224 compounds over 33 steps to about 2e-4
    assert channel_center_freq(30) == pytest.approx(8 * 1.13224 ** 33, rel=5e-4)
    assert channel_center_freq(30) == pytest.approx(482.3, rel=1e-3)


def test_adjacent_ratio_constant():
    f = np.array([channel_center_freq(c) for c in range(64)])
    assert np.allclose(f[:-1] / f[1:], 1.13224, atol=1e-5)


@pytest.mark.parametrize("ch", [-1, 64])
def test_channel_out_of_range(ch):
    with pytest.raises(ValueError):
        channel_center_freq(ch)


def test_channel0_not_designable():
    cfg = FilterbankConfig()
    assert not is_designable(0, cfg)
    with pytest.raises(ValueError, match="above the usable band"):
        design_channel(0, cfg)
    assert is_designable(1, cfg)


def test_section_matches_scipy_design():
    # RBJ bandpass (constant 0 dB peak) equals the bilinear transform of s/Q / (s^2 + s/Q + 1) prewarped
    f0, q = 1000.0, 4.0
    w0 = 2 * FS * math.tan(math.pi * f0 / FS)
    b, a = signal.bilinear([w0 / q, 0], [1, w0 / q, w0 * w0], fs=FS)
    sec = bandpass_section(f0, q, FS)
    assert np.allclose(sec[:3], b / a[0], atol=1e-12)
    assert np.allclose(sec[3:], a[1:] / a[0], atol=1e-12)


def test_peak_near_center_via_impulse_fft():
    filt = design_channel(30, gain_index=0)
    imp = np.zeros(1 << 17)
    imp[0] = 1.0
    h = filt.process_block(imp)
    spec = np.abs(np.fft.rfft(h))
    freqs = np.fft.rfftfreq(h.size, 1 / FS)
    f_peak = freqs[np.argmax(spec)]
    assert abs(f_peak / channel_center_freq(30) - 1) < 0.02


def test_half_and_double_center_attenuated():
    filt = design_channel(30, gain_index=0)
    fc = filt.center_freq_hz
    _, h = signal.sosfreqz(filt.sos, worN=[0.5 * fc, fc, 2 * fc], fs=FS)
    db = 20 * np.log10(np.abs(h))
    assert db[1] == pytest.approx(0.0, abs=1e-9)
    assert db[0] <= db[1] - 12 and db[2] <= db[1] - 12


def test_cascade_q_narrower_than_section():
    filt = design_channel(30)
    bw, q = cascade_bandwidth(filt, FS)
    assert q > 4.0


def test_zero_input_stays_zero():
    filt = design_channel(30)
    assert all(process_sample(filt, 0.0) == 0.0 for _ in range(1000))


def test_nonfinite_input_rejected():
    filt = design_channel(30)
    with pytest.raises(ValueError):
        filt.process_sample(float("nan"))
    with pytest.raises(ValueError):
        filt.process_block(np.array([0.0, np.inf]))


def test_sample_loop_matches_sosfilt():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(3000) * 0.01
    a = design_channel(25, gain_index=7)
    b = design_channel(25, gain_index=7)
    y_loop = np.array([a.process_sample(v) for v in x])
    y_block = b.process_block(x)
    assert np.allclose(y_loop, y_block, rtol=1e-10, atol=1e-15)
    assert np.allclose(a.state, b.state, rtol=1e-10, atol=1e-15)


def test_center_sine_gain_max():
    filt = design_channel(30, gain_index=11)
    rms = steady_sine_rms(filt, filt.center_freq_hz, 0.01, FS)
    assert rms == pytest.approx(0.01 * 10 ** (32.5 / 20), rel=0.05)
    assert channel_gain_db(rms, 0.01) == pytest.approx(32.5, abs=1.0)


def test_far_below_center_attenuated_20db():
    filt = design_channel(30)
    at_c = steady_sine_rms(filt, filt.center_freq_hz, 0.01, FS)
    low = steady_sine_rms(filt, filt.center_freq_hz / 8, 0.01, FS)
    assert 20 * math.log10(low / at_c) <= -20


def test_pending_gain_applies_at_activation():
    filt = design_channel(30, gain_index=11)
    filt.schedule_gain(1.0, 500)
    y_before = filt.process_sample(1.0, now_us=499)
    assert filt.pending_gain is not None
    filt.reset()
    filt.process_sample(1.0, now_us=500)
    assert filt.pending_gain is None and filt.applied_gain_linear == 1.0
    assert y_before != 0


def test_noise_adjusted_amplitude():
    assert noise_adjusted_amplitude(5, 3) == pytest.approx(4)
    assert noise_adjusted_amplitude(2.0, 2.0) == 0
    assert noise_adjusted_amplitude(4.5e-3, 4.5e-3) == 0
    assert noise_adjusted_amplitude(1.0, 2.0) == 0
    with pytest.raises(ValueError):
        noise_adjusted_amplitude(-1, 0)


def test_channel_gain_db():
    assert channel_gain_db(1.0, 1.0) == 0
    assert channel_gain_db(10.0, 1.0) == pytest.approx(20)
    assert channel_gain_db(0.0, 1.0) == BELOW_FLOOR_DB
    with pytest.raises(ValueError):
        channel_gain_db(1.0, 0.0)


def test_gain_table():
    t = equal_step_gain_table()
    assert len(t) == 12 and t[0] == 0 and t[-1] == pytest.approx(32.5)
    assert t[6] == pytest.approx(17.727, abs=1e-3)
    with pytest.raises(ValueError):
        FilterbankConfig(gain_table_db=tuple(range(12)))
    with pytest.raises(ValueError):
        FilterbankConfig(gain_table_db=(0.0,) * 11)


def test_config_validation():
    with pytest.raises(ValueError):
        FilterbankConfig(active_channel_range=(40, 20))
    with pytest.raises(ValueError):
        FilterbankConfig(q_factor=0)
    with pytest.raises(ValueError):
        FilterbankConfig(saturation_knee=0)


def test_frequency_response_linear_and_shape():
    fc = channel_center_freq(30)
    grid = frequency_response(30, 11, [0.001, 0.01, 0.1], [fc, 2 * fc], FilterbankConfig())
    assert np.ptp(grid[:, 0]) < 0.1 and np.ptp(grid[:, 1]) < 0.1
    assert np.all(grid[:, 0] >= grid[:, 1])


def test_frequency_response_saturation_compresses():
    fc = channel_center_freq(30)
    cfg = FilterbankConfig(saturation_enabled=True, saturation_knee=0.1)
    grid = frequency_response(30, 11, [1e-4, 0.1], [fc, 2 * fc], cfg)
    assert grid[1, 0] < grid[0, 0]
    assert np.all(grid[:, 0] >= grid[:, 1])


def test_frequency_response_errors():
    with pytest.raises(ValueError):
        frequency_response(30, 11, [], [100.0])
    with pytest.raises(ValueError):
        frequency_response(30, 11, [0.01], [FS])
    with pytest.raises(ValueError):
        frequency_response(30, 11, [-0.01], [100.0])
