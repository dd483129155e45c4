"""Labelled audio sets: a synthetic speech-vs-noise generator and a WAV directory loader.

Speech-like clips are harmonic stacks (100-300 Hz pitch) shaped by
per-syllable formant envelopes, gated at a 2-8 Hz syllabic rate with
pauses. Noise clips are band-filtered noise, gated tone mixtures or
chirps. Labels: speech = 1, noise = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .audio import SAMPLE_RATE, load_audio

SPEECH, NOISE = 1, 0
NOISE_KINDS = ("filtered_noise", "tones", "chirp")
_SPLIT_IDS = {"train": 0, "test": 1}


@dataclass(frozen=True)
class CorpusSpec:
    """Synthetic corpus size. Durations are per split, split evenly between classes."""

    train_seconds: float = 600.0
    test_seconds: float = 600.0
    clip_seconds: float = 4.0
    sample_rate_hz: int = SAMPLE_RATE

    def clips_per_class(self, split: str) -> int:
        total = self.train_seconds if split == "train" else self.test_seconds
        n = int(total / self.clip_seconds) // 2
        if n < 1:
            raise ValueError(f"{split} split too short for one clip per class")
        return n


@dataclass
class Recording:
    samples: np.ndarray
    label: int
    source_id: str
    split: str
    kind: str = ""

    @property
    def duration_s(self) -> float:
        return self.samples.size / SAMPLE_RATE


@dataclass
class Corpus:
    recordings: list = field(default_factory=list)

    def split(self, name: str) -> list:
        return [r for r in self.recordings if r.split == name]


def _rng(seed: int, split: str, label: int, index: int) -> np.random.Generator:
    # One independent stream per clip; train and test never share a stream.
    return np.random.default_rng(np.random.SeedSequence([seed, _SPLIT_IDS[split], label, index]))


def speech_like(rng: np.random.Generator, duration_s: float, fs: int = SAMPLE_RATE,
                f0_hz: float | None = None, pitch_contour: bool = True) -> np.ndarray:
    """Voiced harmonic stack with syllabic gating, formants and pauses.

    ``f0_hz`` fixes the base pitch (otherwise drawn from 100-300 Hz);
    ``pitch_contour=False`` holds it constant.
    """
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    f0_base = rng.uniform(100.0, 300.0) if f0_hz is None else float(f0_hz)
    # slow pitch contour: a few random-phase sinusoids below 3 Hz, up to +-12%
    contour = 0.0
    if pitch_contour:
        contour = sum(rng.uniform(0.01, 0.04) * np.sin(2 * np.pi * rng.uniform(0.2, 3.0) * t + rng.uniform(0, 2 * np.pi))
                      for _ in range(3))
    f0 = f0_base * (1.0 + contour) * np.ones(n)
    phase = 2 * np.pi * np.cumsum(f0) / fs
    rate = rng.uniform(2.0, 8.0)

    x = np.zeros(n)
    pos = int(rng.uniform(0.0, 0.3) * fs)
    while pos < n:
        if rng.random() < 0.2:
            pos += int(rng.uniform(0.1, 0.5) * fs)
            continue
        length = max(int(fs / rate * rng.uniform(0.7, 1.3)), 16)
        seg = slice(pos, min(pos + length, n))
        m = seg.stop - seg.start
        env = np.sin(np.pi * np.arange(m) / length) ** 2
        formants = (rng.uniform(300, 900), rng.uniform(900, 2500), rng.uniform(2400, 3500))
        widths = (90.0, 140.0, 220.0)
        levels = (1.0, rng.uniform(0.3, 0.8), rng.uniform(0.1, 0.4))
        f_mean = float(f0[seg].mean())
        k_max = int(min(4500.0, 0.45 * fs) // f_mean)
        acc = np.zeros(m)
        for k in range(1, k_max + 1):
            fk = k * f_mean
            a = 0.03 + sum(lv * np.exp(-0.5 * ((fk - fc) / bw) ** 2) for fc, bw, lv in zip(formants, widths, levels))
            acc += a / np.sqrt(k) * np.sin(k * phase[seg])
        x[seg] += env * rng.uniform(0.5, 1.0) * acc
        pos = seg.stop
    if not np.any(x):
        # every syllable fell in a pause: force one in the middle
        return speech_like(rng, duration_s, fs, f0_hz, pitch_contour)
    return x


def _bandpass_noise(rng, n, fs):
    lo = rng.uniform(50.0, 2000.0)
    hi = min(lo * rng.uniform(1.5, 8.0), 0.4 * fs)
    sos = signal.butter(4, [lo, hi], btype="bandpass", fs=fs, output="sos")
    x = signal.sosfilt(sos, rng.standard_normal(n))
    t = np.arange(n) / fs
    depth = rng.uniform(0.0, 0.5)
    return x * (1.0 + depth * np.sin(2 * np.pi * rng.uniform(0.2, 1.0) * t + rng.uniform(0, 2 * np.pi)))


def _tones(rng, n, fs):
    t = np.arange(n) / fs
    x = np.zeros(n)
    for _ in range(rng.integers(1, 4)):
        f = np.exp(rng.uniform(np.log(100.0), np.log(4000.0)))
        tone = rng.uniform(0.3, 1.0) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        gate = np.zeros(n)
        pos = 0
        while pos < n:
            on = int(rng.uniform(0.2, 1.0) * fs)
            gate[pos:pos + on] = 1.0
            pos += on + int(rng.uniform(0.0, 0.3) * fs)
        gate = np.convolve(gate, np.hanning(441) / np.hanning(441).sum(), mode="same")
        x += tone * gate
    return x


def _chirps(rng, n, fs):
    x = np.zeros(n)
    pos = 0
    while pos < n:
        m = min(int(rng.uniform(0.3, 2.0) * fs), n - pos)
        tt = np.arange(m) / fs
        f_a, f_b = np.exp(rng.uniform(np.log(100.0), np.log(4000.0), 2))
        method = "logarithmic" if rng.random() < 0.5 else "linear"
        x[pos:pos + m] = signal.chirp(tt, f_a, max(tt[-1], 1.0 / fs), f_b, method=method) * np.hanning(m)
        pos += m
    return x


def noise_like(rng: np.random.Generator, duration_s: float, fs: int = SAMPLE_RATE, kind: str | None = None):
    """One non-speech clip; returns ``(samples, kind)``."""
    n = int(round(duration_s * fs))
    kind = kind or NOISE_KINDS[rng.integers(len(NOISE_KINDS))]
    gen = {"filtered_noise": _bandpass_noise, "tones": _tones, "chirp": _chirps}[kind]
    return gen(rng, n, fs), kind


def synth_corpus(spec: CorpusSpec | None = None, seed: int = 0) -> Corpus:
    """Deterministic, class-balanced train and test sets."""
    spec = spec or CorpusSpec()
    fs = spec.sample_rate_hz
    recs = []
    for split in ("train", "test"):
        for i in range(spec.clips_per_class(split)):
            x = speech_like(_rng(seed, split, SPEECH, i), spec.clip_seconds, fs)
            recs.append(Recording(x, SPEECH, f"{split}-speech-{i:04d}", split, "speech"))
            x, kind = noise_like(_rng(seed, split, NOISE, i), spec.clip_seconds, fs)
            recs.append(Recording(x, NOISE, f"{split}-noise-{i:04d}", split, kind))
    return Corpus(recs)


def load_corpus_dir(root: str | Path) -> Corpus:
    """Read ``root/{train,test}/{speech,noise}/*.wav``."""
    root = Path(root)
    recs = []
    for split in ("train", "test"):
        for label, name in ((SPEECH, "speech"), (NOISE, "noise")):
            for path in sorted((root / split / name).glob("*.wav")):
                recs.append(Recording(load_audio(path), label, f"{split}-{name}-{path.stem}", split, name))
    if not recs:
        raise ValueError(f"no WAV files under {root}/{{train,test}}/{{speech,noise}}")
    return Corpus(recs)
