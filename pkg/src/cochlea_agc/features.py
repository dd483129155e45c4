"""152-dimensional frame features from cochlea event streams.

Per 400 ms frame: an 80-bin inter-spike-interval histogram pooled over
channels, the event count of each of the 36 active channels, and each
channel's time-averaged gain index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernel import frame_accumulate

N_ISI_BINS = 80
MAX_ISI_US = 150_000
FRAME_US = 400_000
NON_AGC_GAIN = 11.0


@dataclass
class FrameFeature:
    isi_hist: np.ndarray
    channel_counts: np.ndarray
    channel_gains: np.ndarray
    frame_start_us: int
    frame_len_us: int
    label: int | None = None

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.isi_hist, self.channel_counts, self.channel_gains])


def isi_bin(isi_us, n_bins: int = N_ISI_BINS, max_isi_us: int = MAX_ISI_US):
    """Bin index of an interval on equal-width bins over [0, max_isi_us]."""
    return np.minimum(np.asarray(isi_us) * n_bins // max_isi_us, n_bins - 1)


def isi_histogram(streams, n_bins: int = N_ISI_BINS, max_isi_ms: float = 150.0) -> np.ndarray:
    """Pooled ISI histogram of per-channel timestamp arrays (microseconds).

    Intervals are taken within each channel, both polarities together;
    intervals longer than ``max_isi_ms`` are dropped.
    """
    max_us = int(round(max_isi_ms * 1000))
    hist = np.zeros(n_bins)
    for ts in streams:
        ts = np.asarray(ts, dtype=np.int64)
        if ts.size < 2:
            continue
        isi = np.diff(ts)
        if np.any(isi < 0):
            raise ValueError("channel timestamps must be non-decreasing")
        isi = isi[isi <= max_us]
        hist += np.bincount(isi_bin(isi, n_bins, max_us), minlength=n_bins)
    return hist


def bin_spike_counts(events: np.ndarray, start_us: int, end_us: int, channels) -> np.ndarray:
    """Events per active channel in ``[start_us, end_us)``; others ignored."""
    channels = np.asarray(channels)
    t = events["timestamp_us"]
    sel = events["channel"][(t >= start_us) & (t < end_us)]
    lut = np.full(256, -1)
    lut[channels] = np.arange(channels.size)
    slots = lut[sel]
    return np.bincount(slots[slots >= 0], minlength=channels.size).astype(float)


def average_channel_gain(gain_trace: np.ndarray | None, start_us: int, end_us: int, channels,
                         agc: bool = True, constant: float = NON_AGC_GAIN) -> np.ndarray:
    """Time-weighted mean gain index of each channel over the frame.

    ``gain_trace`` rows are ``(time_us, channel, gain_index)`` change points
    and must include each channel's initial value. Without AGC every entry
    is ``constant``.
    """
    channels = np.asarray(channels)
    if not agc:
        return np.full(channels.size, float(constant))
    if gain_trace is None:
        raise ValueError("AGC features need the controller gain trace")
    span = end_us - start_us
    out = np.empty(channels.size)
    for k, ch in enumerate(channels):
        rows = gain_trace[gain_trace["channel"] == ch]
        if rows.size == 0:
            raise ValueError(f"gain trace has no entry for channel {ch}")
        t = rows["time_us"].astype(np.int64)
        g = rows["gain_index"].astype(float)
        # Value in force at frame start, then each change inside the frame.
        first = np.searchsorted(t, start_us, side="right") - 1
        if first < 0:
            raise ValueError(f"channel {ch} gain unknown at {start_us} us")
        inside = np.nonzero((t > start_us) & (t < end_us))[0]
        edges = np.r_[start_us, t[inside], end_us]
        vals = np.r_[g[first], g[inside]]
        out[k] = float(np.dot(np.diff(edges), vals)) / span
    return out


def _gain_integrals(gain_trace, channels, edges, agc, constant):
    """Time-weighted mean gain of each channel between consecutive ``edges``."""
    n_frames = edges.size - 1
    if not agc:
        return np.full((n_frames, channels.size), float(constant))
    if gain_trace is None:
        raise ValueError("AGC features need the controller gain trace")
    out = np.empty((n_frames, channels.size))
    order = np.lexsort((gain_trace["time_us"], gain_trace["channel"]))
    trace = gain_trace[order]
    bounds = np.searchsorted(trace["channel"], channels, side="left"), \
        np.searchsorted(trace["channel"], channels, side="right")
    for k, (lo, hi) in enumerate(zip(*bounds)):
        if lo == hi:
            raise ValueError(f"gain trace has no entry for channel {channels[k]}")
        t = trace["time_us"][lo:hi].astype(np.int64)
        g = trace["gain_index"][lo:hi].astype(float)
        if t[0] > edges[0]:
            raise ValueError(f"channel {channels[k]} gain unknown at {edges[0]} us")
        # integral of the step function up to each edge
        seg = np.diff(np.r_[t, max(edges[-1], t[-1])]) * g
        cum = np.r_[0.0, np.cumsum(seg)]
        idx = np.searchsorted(t, edges, side="right") - 1
        at_edge = cum[idx] + (edges - t[idx]) * g[idx]
        out[:, k] = np.diff(at_edge) / np.diff(edges)
    return out


def frame_stream(events: np.ndarray, gain_trace: np.ndarray | None, duration_us: int, channels,
                 agc: bool = True, frame_len_ms: float = 400.0, label: int | None = None) -> list[FrameFeature]:
    """Non-overlapping frames tiling the recording; a trailing partial frame is dropped.

    Frames are half-open, ``[start, start + len)``. Intervals spanning a
    frame boundary are not counted. Equivalent to applying
    :func:`isi_histogram`, :func:`bin_spike_counts` and
    :func:`average_channel_gain` frame by frame, but done in one pass.
    """
    frame_us = int(round(frame_len_ms * 1000))
    channels = np.asarray(channels)
    n_frames = int(duration_us // frame_us)
    if n_frames == 0:
        return []
    t = events["timestamp_us"].astype(np.int64)
    lut = np.full(256, -1, dtype=np.int64)
    lut[channels] = np.arange(channels.size)
    slot = lut[events["channel"]]
    if t.size > 1 and not np.all(t[1:] >= t[:-1]):
        order = np.argsort(t, kind="stable")
        t, slot = t[order], slot[order]
    counts, hist = frame_accumulate(t, slot, frame_us, n_frames, channels.size, MAX_ISI_US, N_ISI_BINS)

    edges = np.arange(n_frames + 1, dtype=np.int64) * frame_us
    gains = _gain_integrals(gain_trace, channels, edges, agc, NON_AGC_GAIN)
    return [FrameFeature(hist[k], counts[k], gains[k], int(edges[k]), frame_us, label) for k in range(n_frames)]


def feature_matrix(frames) -> np.ndarray:
    if not frames:
        return np.zeros((0, N_ISI_BINS + 72))
    return np.vstack([f.vector for f in frames])


class Normalizer:
    """Per-dimension z-score with training-set statistics.

    Uses the population standard deviation; constant dimensions map to 0.
    """

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)

    @classmethod
    def fit(cls, x: np.ndarray) -> "Normalizer":
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] < 2:
            raise ValueError("need at least two training frames")
        return cls(x.mean(axis=0), x.std(axis=0))

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        safe = np.where(self.std > 0, self.std, 1.0)
        return np.where(self.std > 0, (x - self.mean) / safe, 0.0)


def normalize_features(train: np.ndarray, *others: np.ndarray):
    """Fit on ``train`` and transform it plus any further sets."""
    norm = Normalizer.fit(train)
    return norm, [norm.transform(train)] + [norm.transform(o) for o in others]
