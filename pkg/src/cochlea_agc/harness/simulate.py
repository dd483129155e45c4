"""End-to-end cochlea simulation: filter bank -> ADM -> gain controller.

Samples (1/fs) and controller ticks (100 us) share one virtual clock.
Ticks due at or before a sample's exact time run first, channels in
ascending order, followed by one queue-service step. Each sample is then
filtered and encoded on every active channel, and new events feed the
channel's spike counter.

Two interchangeable backends run this loop: ``"compiled"`` (numba, the
default) and ``"reference"`` (plain Python over the object model).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _kernel
from ..adm import EVENT_DTYPE, AdmState, Polarity, SpikeEvent, adm_step
from ..agc import AgcController, Decision, window_table
from ..filterbank import design_channel
from .config import CochleaConfig

GAIN_TRACE_DTYPE = np.dtype([("time_us", "<u8"), ("channel", "u1"), ("gain_index", "u1")])
WINDOW_DTYPE = np.dtype([
    ("time_us", "<u8"), ("channel", "u1"), ("spike_count", "u1"),
    ("decision", "i1"), ("gain_index", "u1"),
])


@dataclass
class SimulationResult:
    """Everything a simulation run produces.

    ``gain_trace`` holds register gain indices (one row per change, plus a
    row per channel at t=0); ``applied_trace`` holds the moments the filter
    gain actually switched. ``analog`` maps channel -> filter output.
    """

    events: np.ndarray
    gain_trace: np.ndarray
    applied_trace: np.ndarray
    windows: np.ndarray
    channels: np.ndarray
    duration_us: int
    agc: bool
    queue_drops: int = 0
    cap_hits: int = 0
    analog: dict = field(default_factory=dict)

    def channel_events(self, ch: int) -> np.ndarray:
        return self.events[self.events["channel"] == ch]


def _pack(dtype, *cols):
    out = np.zeros(len(cols[0]), dtype=dtype)
    for name, col in zip(dtype.names, cols):
        out[name] = col
    return out


def _initial_trace(channels, gi):
    return _pack(GAIN_TRACE_DTYPE, np.zeros(len(channels)), channels, np.full(len(channels), gi))


def _check_input(samples) -> np.ndarray:
    x = np.ascontiguousarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a mono sample stream")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input samples")
    return x


def simulate(samples, cfg: CochleaConfig | None = None, agc_on: bool = True,
             record_channels=(), backend: str = "compiled") -> SimulationResult:
    """Run the cochlea over ``samples`` (full scale 1.0 = 100 mV RMS-eq).

    With ``agc_on=False`` every channel stays at ``cfg.initial_gain_index``
    and no controller runs.
    """
    cfg = cfg or CochleaConfig()
    x = _check_input(samples)
    if backend == "reference":
        return _simulate_reference(x, cfg, agc_on, record_channels)
    if backend != "compiled":
        raise ValueError(f"unknown backend {backend!r}")

    fb = cfg.filterbank
    params = cfg.agc
    channels = fb.active_channels
    filters = [design_channel(int(ch), fb) for ch in channels]
    coeffs = np.stack([f.coeffs for f in filters])
    rec_map = np.full(len(channels), -1, dtype=np.int64)
    rec_list = [int(c) for c in record_channels]
    for k, ch in enumerate(rec_list):
        idx = np.nonzero(channels == ch)[0]
        if idx.size == 0:
            raise ValueError(f"cannot record inactive channel {ch}")
        rec_map[idx[0]] = k

    out = _kernel.run(
        x, coeffs, fb.gain_table_linear, window_table(params, fb, channels),
        channels.astype(np.int64), int(fb.sample_rate_hz), float(cfg.delta), -0.5 * cfg.delta,
        int(cfg.max_events_per_sample), bool(agc_on), int(params.t_lower), int(params.t_upper),
        int(params.counter_max), int(params.gain_levels), int(params.tick_us),
        int(params.settle_time_us), int(params.queue_capacity), params.count_polarity == "on",
        float(fb.knee), int(cfg.initial_gain_index), np.asarray(params.gain_patterns, dtype=np.int64),
        rec_map, len(rec_list))
    ev, gt, at, win, rec, drops, cap_hits = out

    gain_trace = np.concatenate([_initial_trace(channels, cfg.initial_gain_index),
                                 _pack(GAIN_TRACE_DTYPE, *gt.T)])
    return SimulationResult(
        events=_pack(EVENT_DTYPE, *ev.T),
        gain_trace=gain_trace,
        applied_trace=_pack(GAIN_TRACE_DTYPE, *at.T),
        windows=_pack(WINDOW_DTYPE, *win.T),
        channels=channels,
        duration_us=duration_us(len(x), fb.sample_rate_hz),
        agc=bool(agc_on),
        queue_drops=int(drops),
        cap_hits=int(cap_hits),
        analog={ch: rec[k] for k, ch in enumerate(rec_list)},
    )


def duration_us(n_samples: int, fs: int) -> int:
    return (n_samples * 1_000_000) // fs


def _simulate_reference(x, cfg: CochleaConfig, agc_on: bool, record_channels) -> SimulationResult:
    fb = cfg.filterbank
    params = cfg.agc
    fs = int(fb.sample_rate_hz)
    channels = fb.active_channels
    gi0 = cfg.initial_gain_index
    filters = {int(ch): design_channel(int(ch), fb, gi0) for ch in channels}
    encoders = {int(ch): AdmState(cfg.delta, None, cfg.max_events_per_sample, int(ch)) for ch in channels}
    ctrl = AgcController([int(c) for c in channels], params, fb, gi0) if agc_on else None
    gains = fb.gain_table_linear
    rec = {int(c): np.zeros(len(x)) for c in record_channels}

    events: list[SpikeEvent] = []
    gain_rows = []
    applied_rows = []
    pending_index = {}
    k_tick = 0
    tick_scaled = params.tick_us * fs

    def apply_pending(ch, filt):
        applied_rows.append((filt.pending_gain[1], ch, pending_index[ch]))
        filt.applied_gain_linear = filt.pending_gain[0]
        filt.pending_gain = None

    for n in range(len(x)):
        tn = n * 1_000_000
        while k_tick * tick_scaled <= tn:
            if ctrl is not None:
                now = k_tick * params.tick_us
                n_windows = len(ctrl.windows)
                loads = ctrl.tick_all(now)
                for d in ctrl.windows[n_windows:]:
                    if d.decision != Decision.NONE:
                        gain_rows.append((now, d.channel, d.gain_index))
                for ch, pattern, apply_at in loads:
                    filt = filters[ch]
                    if filt.pending_gain is not None and filt.pending_gain[1] <= now:
                        apply_pending(ch, filt)
                    idx = params.pattern_to_index(pattern)
                    pending_index[ch] = idx
                    filt.schedule_gain(gains[idx], apply_at)
            k_tick += 1
        ts = tn // fs
        for ch in channels:
            ch = int(ch)
            filt = filters[ch]
            if filt.pending_gain is not None and tn >= filt.pending_gain[1] * fs:
                apply_pending(ch, filt)
            y = filt.process_sample(float(x[n]))
            if ch in rec:
                rec[ch][n] = y
            gi = ctrl.regs[ch].gain_index if ctrl is not None else gi0
            new = adm_step(encoders[ch], y, ts, gi)
            events.extend(new)
            if ctrl is not None:
                for ev in new:
                    ctrl.on_event(ev)

    ev_arr = np.zeros(len(events), dtype=EVENT_DTYPE)
    if events:
        ev_arr["timestamp_us"] = [e.timestamp_us for e in events]
        ev_arr["channel"] = [e.channel for e in events]
        ev_arr["polarity"] = [int(e.polarity == Polarity.ON) for e in events]
        ev_arr["gain_index"] = [e.gain_index for e in events]

    def rows(dtype, data):
        if not data:
            return np.zeros(0, dtype=dtype)
        return _pack(dtype, *map(np.asarray, zip(*data)))

    windows = [] if ctrl is None else [
        (d.time_us, d.channel, d.spike_count, int(d.decision), d.gain_index) for d in ctrl.windows]
    return SimulationResult(
        events=ev_arr,
        gain_trace=np.concatenate([_initial_trace(channels, gi0), rows(GAIN_TRACE_DTYPE, gain_rows)]),
        applied_trace=rows(GAIN_TRACE_DTYPE, applied_rows),
        windows=rows(WINDOW_DTYPE, windows),
        channels=channels,
        duration_us=duration_us(len(x), fs),
        agc=bool(agc_on),
        queue_drops=0 if ctrl is None else ctrl.queue.dropped,
        cap_hits=sum(e.cap_hits for e in encoders.values()),
        analog=rec,
    )
