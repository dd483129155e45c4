"""64-channel geometrically spaced bandpass filter bank with programmable gain.

Each channel is a fourth-order bandpass built from two identical
bilinear-transform second-order sections, preceded by a single gain
multiplier selected from a 12-entry gain table (0 dB to 32.5 dB).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal

NUM_CHANNELS = 64
NUM_GAIN_LEVELS = 12
G_MAX_DB = 32.5

# Stored in place of 20*log10(0); finite so result tables stay serialisable.
BELOW_FLOOR_DB = -999.0

# Channels 0..11 (highest) and 48..63 (lowest) are excluded by default.
DEFAULT_ACTIVE_CHANNELS = (12, 47)


def equal_step_gain_table(g_max_db: float = G_MAX_DB, levels: int = NUM_GAIN_LEVELS) -> tuple:
    return tuple(float(v) for v in np.linspace(0.0, g_max_db, levels))


@dataclass(frozen=True)
class FilterbankConfig:
    """Static description of the filter bank.

    ``active_channel_range`` is an inclusive ``(first, last)`` channel
    interval. ``saturation_knee`` > 0 enables a tanh soft limiter between
    the gain multiplier and the bandpass sections.
    """

    sample_rate_hz: int = 44100
    num_channels: int = NUM_CHANNELS
    f_min_hz: float = 8.0
    f_max_hz: float = 20000.0
    q_factor: float = 4.0
    active_channel_range: tuple = DEFAULT_ACTIVE_CHANNELS
    gain_table_db: tuple = field(default_factory=equal_step_gain_table)
    saturation_enabled: bool = False
    saturation_knee: float = 1.0
    max_design_fraction: float = 0.45

    def __post_init__(self):
        if self.sample_rate_hz <= 0 or self.q_factor <= 0:
            raise ValueError("sample_rate_hz and q_factor must be positive")
        if not self.f_min_hz < self.f_max_hz:
            raise ValueError("f_min_hz must be below f_max_hz")
        if self.f_max_hz >= self.sample_rate_hz / 2:
            raise ValueError("f_max_hz must be below the Nyquist frequency")
        validate_gain_table(self.gain_table_db)
        lo, hi = self.active_channel_range
        if not 0 <= lo <= hi < self.num_channels:
            raise ValueError(f"invalid active channel range {self.active_channel_range}")
        if self.saturation_knee <= 0:
            raise ValueError("saturation_knee must be positive")

    @property
    def scale_factor(self) -> float:
        """Ratio between adjacent channel center frequencies (about 1.13224)."""
        return (self.f_max_hz / self.f_min_hz) ** (1.0 / (self.num_channels - 1))

    @property
    def active_channels(self) -> np.ndarray:
        lo, hi = self.active_channel_range
        return np.arange(lo, hi + 1)

    @property
    def gain_table_linear(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.gain_table_db) / 20.0)

    @property
    def knee(self) -> float:
        """Soft-limiter knee, 0.0 when the saturation stage is off."""
        return float(self.saturation_knee) if self.saturation_enabled else 0.0


def validate_gain_table(table: Sequence[float]) -> None:
    t = np.asarray(table, dtype=float)
    if t.shape != (NUM_GAIN_LEVELS,):
        raise ValueError(f"gain table needs exactly {NUM_GAIN_LEVELS} entries")
    steps = np.diff(t)
    if t[0] != 0.0 or not math.isclose(t[-1], G_MAX_DB, abs_tol=1e-9):
        raise ValueError("gain table must span 0 dB to 32.5 dB")
    if np.any(steps < 2.5) or np.any(steps > 3.5):
        raise ValueError("gain table steps must lie within [2.5, 3.5] dB")


def channel_center_freq(ch: int, cfg: FilterbankConfig | None = None) -> float:
    """Center frequency of channel ``ch``; channel 0 is the highest."""
    cfg = cfg or FilterbankConfig()
    if not 0 <= ch < cfg.num_channels:
        raise ValueError(f"channel index {ch} outside 0..{cfg.num_channels - 1}")
    return cfg.f_min_hz * cfg.scale_factor ** (cfg.num_channels - 1 - ch)


def bandpass_section(f0: float, q: float, fs: float) -> np.ndarray:
    """Bilinear bandpass biquad with unit gain at ``f0``.

    Returns normalised coefficients ``[b0, b1, b2, a1, a2]`` (a0 == 1).
    """
    w0 = 2.0 * math.pi * f0 / fs
    alpha = math.sin(w0) / (2.0 * q)
    a0 = 1.0 + alpha
    return np.array([alpha / a0, 0.0, -alpha / a0, -2.0 * math.cos(w0) / a0, (1.0 - alpha) / a0])


def is_designable(ch: int, cfg: FilterbankConfig) -> bool:
    return channel_center_freq(ch, cfg) < cfg.max_design_fraction * cfg.sample_rate_hz


class ChannelFilter:
    """One cochlea channel: gain multiplier, optional limiter, two biquads.

    The coefficient layout is shared with the compiled simulation kernel so
    both paths run the same arithmetic in the same order.
    """

    def __init__(self, channel_index: int, center_freq_hz: float, coeffs: np.ndarray,
                 gain_linear: float, knee: float = 0.0):
        self.channel_index = channel_index
        self.center_freq_hz = center_freq_hz
        self.coeffs = np.asarray(coeffs, dtype=np.float64).reshape(2, 5)
        self.state = np.zeros(4)
        self.applied_gain_linear = float(gain_linear)
        self.knee = float(knee)
        self.pending_gain: tuple | None = None  # (gain_linear, activation_time_us)

    def reset(self) -> None:
        self.state[:] = 0.0

    def schedule_gain(self, gain_linear: float, activation_time_us: int) -> None:
        self.pending_gain = (float(gain_linear), int(activation_time_us))

    def process_sample(self, x: float, now_us: float | None = None) -> float:
        if not math.isfinite(x):
            raise ValueError(f"non-finite input sample {x!r}")
        if self.pending_gain is not None and now_us is not None and now_us >= self.pending_gain[1]:
            self.applied_gain_linear = self.pending_gain[0]
            self.pending_gain = None
        u = self.applied_gain_linear * x
        if self.knee > 0.0:
            u = self.knee * math.tanh(u / self.knee)
        z = self.state
        c = self.coeffs
        y = c[0, 0] * u + z[0]
        z[0] = c[0, 1] * u - c[0, 3] * y + z[1]
        z[1] = c[0, 2] * u - c[0, 4] * y
        u = y
        y = c[1, 0] * u + z[2]
        z[2] = c[1, 1] * u - c[1, 3] * y + z[3]
        z[3] = c[1, 2] * u - c[1, 4] * y
        return y

    def process_block(self, x: np.ndarray) -> np.ndarray:
        """Vectorised equivalent of repeated :meth:`process_sample` at fixed gain."""
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input samples")
        u = self.applied_gain_linear * x
        if self.knee > 0.0:
            u = self.knee * np.tanh(u / self.knee)
        zi = self.state.reshape(2, 2)
        y, zf = signal.sosfilt(self.sos, u, zi=zi)
        self.state[:] = zf.ravel()
        return y

    @property
    def sos(self) -> np.ndarray:
        c = self.coeffs
        return np.column_stack([c[:, 0], c[:, 1], c[:, 2], np.ones(2), c[:, 3], c[:, 4]])


def design_channel(ch: int, cfg: FilterbankConfig | None = None, gain_index: int = NUM_GAIN_LEVELS - 1) -> ChannelFilter:
    """Design the fourth-order bandpass for channel ``ch``.

    Raises
    ------
    ValueError
        If the channel's center frequency is at or above
        ``max_design_fraction * sample_rate`` (0.45 fs by default).
    """
    cfg = cfg or FilterbankConfig()
    f0 = channel_center_freq(ch, cfg)
    if f0 >= cfg.max_design_fraction * cfg.sample_rate_hz:
        raise ValueError(
            f"channel {ch} center {f0:.1f} Hz is above the usable band "
            f"({cfg.max_design_fraction} x {cfg.sample_rate_hz} Hz)")
    sec = bandpass_section(f0, cfg.q_factor, cfg.sample_rate_hz)
    gain = float(cfg.gain_table_linear[gain_index])
    return ChannelFilter(ch, f0, np.vstack([sec, sec]), gain, cfg.knee)


def process_sample(filt: ChannelFilter, x: float, now_us: float | None = None) -> float:
    return filt.process_sample(x, now_us)


def cascade_bandwidth(filt: ChannelFilter, fs: float, n_points: int = 1 << 16) -> tuple:
    """Measured -3 dB bandwidth and overall Q of a designed cascade."""
    w, h = signal.sosfreqz(filt.sos, worN=n_points, fs=fs)
    mag = np.abs(h)
    peak = int(np.argmax(mag))
    half = mag >= mag[peak] / math.sqrt(2.0)
    lo = peak
    while lo > 0 and half[lo - 1]:
        lo -= 1
    hi = peak
    while hi < len(mag) - 1 and half[hi + 1]:
        hi += 1
    bw = w[hi] - w[lo]
    return bw, w[peak] / bw


def noise_adjusted_amplitude(v_out: float, v_noise: float) -> float:
    """Signal RMS with the noise RMS removed in quadrature."""
    if v_out < 0 or v_noise < 0:
        raise ValueError("amplitudes must be non-negative")
    return math.sqrt(max(v_out * v_out - v_noise * v_noise, 0.0))


def channel_gain_db(v_na: float, v_in: float) -> float:
    """Channel gain in dB; ``BELOW_FLOOR_DB`` when no signal remains."""
    if v_in <= 0:
        raise ValueError("input amplitude must be positive")
    if v_na < 0:
        raise ValueError("output amplitude must be non-negative")
    if v_na == 0:
        return BELOW_FLOOR_DB
    return 20.0 * math.log10(v_na / v_in)


def steady_sine_rms(filt: ChannelFilter, freq_hz: float, amplitude_rms: float, fs: int,
                    settle_periods: int = 50, measure_periods: int = 20) -> float:
    """Output RMS of a channel driven by a steady sine, after settling.

    The settling span is at least 50 periods of the stimulus and 20 periods
    of the channel center; RMS is taken over whole stimulus periods.
    """
    period = fs / freq_hz
    n_settle = int(math.ceil(max(settle_periods * period, 20 * fs / filt.center_freq_hz)))
    n_meas = int(round(measure_periods * period))
    n_meas = max(n_meas, int(round(period)))
    t = np.arange(n_settle + n_meas) / fs
    x = amplitude_rms * math.sqrt(2.0) * np.sin(2.0 * math.pi * freq_hz * t)
    filt.reset()
    y = filt.process_block(x)
    tail = y[n_settle:]
    return float(np.sqrt(np.mean(tail * tail)))


def frequency_response(ch: int, gain_index: int, amplitudes: Sequence[float], freqs: Sequence[float],
                       cfg: FilterbankConfig | None = None, noise_rms: float = 0.0) -> np.ndarray:
    """Gain grid in dB, shape ``(len(amplitudes), len(freqs))``.

    Each cell plays a steady sine at the given RMS amplitude and frequency.
    ``noise_rms`` is an output noise floor removed in quadrature before the
    gain is computed, as done for bench measurements.
    """
    cfg = cfg or FilterbankConfig()
    amplitudes = list(amplitudes)
    freqs = list(freqs)
    if not amplitudes or not freqs:
        raise ValueError("amplitude and frequency grids must be non-empty")
    nyq = cfg.sample_rate_hz / 2
    if any(f <= 0 or f >= nyq for f in freqs):
        raise ValueError("all frequencies must lie in (0, Nyquist)")
    if any(a <= 0 for a in amplitudes):
        raise ValueError("amplitudes must be positive")
    filt = design_channel(ch, cfg, gain_index)
    out = np.empty((len(amplitudes), len(freqs)))
    for i, a in enumerate(amplitudes):
        for j, f in enumerate(freqs):
            v_out = steady_sine_rms(filt, f, a, cfg.sample_rate_hz)
            out[i, j] = channel_gain_db(noise_adjusted_amplitude(v_out, noise_rms), a)
    return out
