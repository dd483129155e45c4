"""Steady-state rate sweeps and onset/offset transients on single channels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..agc import estimate_input_amplitude, gain_adjusted_rate
from ..filterbank import channel_center_freq
from .audio import FULL_SCALE_MV, SAMPLE_RATE
from .config import CochleaConfig
from .simulate import SimulationResult, simulate


def sine_mv(freq_hz: float, amplitude_mv: float, duration_s: float, fs: int = SAMPLE_RATE) -> np.ndarray:
    """Sine whose RMS equals ``amplitude_mv`` under the 100 mV full-scale convention."""
    t = np.arange(int(round(duration_s * fs))) / fs
    return np.sqrt(2.0) * amplitude_mv / FULL_SCALE_MV * np.sin(2 * np.pi * freq_hz * t)


def compensable_range_mv(cfg: CochleaConfig | None = None) -> tuple[float, float]:
    """Center-frequency sine levels (mV RMS) the controller can hold in band.

    At unit filter gain a sine of peak ``A`` gives one ON event per period
    for ``A`` in ``[delta/2, 3*delta/2)``. Adjacent gain steps are closer
    than 3x apart, so every level between the two ends below is reachable.
    """
    cfg = cfg or CochleaConfig()
    g = cfg.filterbank.gain_table_linear
    to_mv = FULL_SCALE_MV / np.sqrt(2.0)
    return 0.5 * cfg.delta / g[-1] * to_mv, 1.5 * cfg.delta / g[0] * to_mv


@dataclass
class RateRow:
    amplitude_mV: float
    norm_rate: float
    mean_gain_index: float
    mean_gain_db: float
    r_ga: float
    est_amplitude: float
    inband_fraction: float
    n_windows: int
    agc_rate_hz: float
    non_agc_rate_hz: float


@dataclass
class RateAnalysis:
    channel: int
    freq_hz: float
    rows: list = field(default_factory=list)

    @property
    def compression(self) -> float:
        agc = np.mean([r.agc_rate_hz for r in self.rows])
        return float(np.mean([r.non_agc_rate_hz for r in self.rows]) / agc) if agc > 0 else float("inf")

    def loglog_slope(self, lo_mv: float = 0.0, hi_mv: float = np.inf) -> float:
        """Least-squares slope of log r_ga against log amplitude."""
        pts = [(r.amplitude_mV, r.r_ga) for r in self.rows if lo_mv <= r.amplitude_mV <= hi_mv and r.r_ga > 0]
        if len(pts) < 2:
            raise ValueError("need two positive points for a slope")
        a, r = np.log(np.array(pts)).T
        return float(np.polyfit(a, r, 1)[0])


def _time_mean_gain_index(trace, channel, start_us, end_us) -> float:
    rows = trace[trace["channel"] == channel]
    t = rows["time_us"].astype(np.int64)
    g = rows["gain_index"].astype(float)
    first = np.searchsorted(t, start_us, side="right") - 1
    inside = np.nonzero((t > start_us) & (t < end_us))[0]
    edges = np.r_[start_us, t[inside], end_us]
    return float(np.dot(np.diff(edges), np.r_[g[first], g[inside]]) / (end_us - start_us))


def rate_analysis(channel: int = 30, freq_hz: float | None = None, amplitudes_mv=None,
                  cfg: CochleaConfig | None = None, duration_s: float = 3.0,
                  settle_s: float = 1.0) -> RateAnalysis:
    """Steady-state ON rate, gain and derived quantities per input level.

    Each level runs once with the controller and once at fixed gain index
    11; only the part after ``settle_s`` is measured. Rates count ON
    events. ``inband_fraction`` is the share of measured windows whose
    count lies in ``[t_lower, t_upper)``.
    """
    cfg = (cfg or CochleaConfig()).with_channels(channel, channel)
    fb = cfg.filterbank
    freq_hz = channel_center_freq(channel, fb) if freq_hz is None else float(freq_hz)
    if amplitudes_mv is None:
        amplitudes_mv = np.logspace(0, 2, 20)
    table_db = np.asarray(fb.gain_table_db)
    start_us = int(settle_s * 1e6)
    out = RateAnalysis(channel, freq_hz)
    for amp in amplitudes_mv:
        x = sine_mv(freq_hz, float(amp), duration_s, fb.sample_rate_hz)
        runs = {}
        for agc_on in (True, False):
            res = simulate(x, cfg, agc_on=agc_on)
            on = res.events[(res.events["polarity"] == 1) & (res.events["timestamp_us"] >= start_us)]
            span_s = (res.duration_us - start_us) / 1e6
            runs[agc_on] = (res, on.size / span_s)
        res, agc_rate = runs[True]
        gi = _time_mean_gain_index(res.gain_trace, channel, start_us, res.duration_us)
        gain_db = float(np.interp(gi, np.arange(table_db.size), table_db))
        norm = agc_rate / freq_hz
        w = res.windows[res.windows["time_us"] >= start_us]
        ok = (w["spike_count"] >= cfg.agc.t_lower) & (w["spike_count"] < cfg.agc.t_upper)
        out.rows.append(RateRow(
            amplitude_mV=float(amp),
            norm_rate=norm,
            mean_gain_index=gi,
            mean_gain_db=gain_db,
            r_ga=gain_adjusted_rate(norm, gain_db, float(table_db[-1])),
            est_amplitude=estimate_input_amplitude(norm, gain_db),
            inband_fraction=float(ok.mean()) if w.size else float("nan"),
            n_windows=int(w.size),
            agc_rate_hz=agc_rate,
            non_agc_rate_hz=runs[False][1],
        ))
    return out


def sustained_vowel(duration_s: float, amplitude_mv: float, f0_hz: float = 120.0,
                    formants=(500.0, 1500.0, 2500.0), fs: int = SAMPLE_RATE, ramp_s: float = 0.01) -> np.ndarray:
    """Steady harmonic stack with formant peaks, RMS set to ``amplitude_mv``."""
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    x = np.zeros(n)
    for k in range(1, int(4500.0 // f0_hz) + 1):
        fk = k * f0_hz
        a = 0.03 + sum(np.exp(-0.5 * ((fk - fc) / 120.0) ** 2) for fc in formants)
        x += a / np.sqrt(k) * np.sin(2 * np.pi * fk * t)
    m = max(int(ramp_s * fs), 1)
    x[:m] *= np.linspace(0.0, 1.0, m)
    x[-m:] *= np.linspace(1.0, 0.0, m)
    return x * (amplitude_mv / FULL_SCALE_MV / np.sqrt(np.mean(x * x)))


@dataclass
class TransientResult:
    sim: SimulationResult
    channel: int
    onset_us: int
    offset_us: int


def transient_response(channel: int = 30, amplitude_mv: float = 50.0, lead_s: float = 0.3,
                       burst_s: float = 1.0, tail_s: float = 1.0, cfg: CochleaConfig | None = None,
                       channels: tuple | None = None) -> TransientResult:
    """Silence, a loud sustained vowel, then silence again, with AGC on."""
    cfg = cfg or CochleaConfig()
    if channels is not None:
        cfg = cfg.with_channels(*channels)
    fs = cfg.filterbank.sample_rate_hz
    lead = np.zeros(int(round(lead_s * fs)))
    burst = sustained_vowel(burst_s, amplitude_mv, fs=fs)
    tail = np.zeros(int(round(tail_s * fs)))
    sim = simulate(np.concatenate([lead, burst, tail]), cfg, agc_on=True)
    onset = lead.size * 1_000_000 // fs
    return TransientResult(sim, channel, onset, (lead.size + burst.size) * 1_000_000 // fs)


def check_transient(tr: TransientResult, t_lower: int = 1, t_upper: int = 16) -> dict:
    """Attack and release properties read off the window trace of one channel.

    attack: from the first loud window to the first in-band window, every
    window steps the gain down by exactly one. release: after the burst,
    the gain never decreases and ends at 11.
    """
    w = tr.sim.windows[tr.sim.windows["channel"] == tr.channel]
    after = w[w["time_us"] >= tr.onset_us]
    loud = np.nonzero(after["spike_count"] >= t_upper)[0]
    attack_ok, reached, attack_steps = False, False, 0
    if loud.size:
        seq = after[loud[0]:]
        inband = np.nonzero((seq["spike_count"] >= t_lower) & (seq["spike_count"] < t_upper))[0]
        reached = bool(inband.size) and seq["time_us"][inband[0]] < tr.offset_us
        head = seq[:inband[0]] if inband.size else seq
        steps = np.diff(np.r_[head["gain_index"][0] + 1, head["gain_index"]].astype(int))
        attack_ok = bool(np.all(head["decision"] == -1) and np.all(steps == -1))
        attack_steps = int(head.size)
    rel = w[w["time_us"] > tr.offset_us]
    gi = rel["gain_index"].astype(int)
    release_ok = bool(np.all(np.diff(gi) >= 0)) and bool(np.all(rel["decision"] >= 0))
    final = int(gi[-1]) if gi.size else -1
    return {
        "attack_monotonic": attack_ok,
        "attack_steps": attack_steps,
        "reached_regulation": reached,
        "release_monotonic": release_ok,
        "final_gain_index": final,
        "min_gain_index": int(w["gain_index"].min()) if w.size else -1,
    }
