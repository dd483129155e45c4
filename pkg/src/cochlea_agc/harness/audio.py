"""WAV ingestion and RMS level setting.

Level convention: digital full scale 1.0 (RMS) corresponds to 100 mV RMS
at the cochlea input, so the 2-80 mV test grid maps to 0.02-0.8.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile

SAMPLE_RATE = 44100
FULL_SCALE_MV = 100.0

_FORMAT_NAMES = {
    0x0001: "PCM",
    0x0002: "MS ADPCM",
    0x0003: "IEEE float",
    0x0006: "A-law",
    0x0007: "mu-law",
    0x0011: "IMA ADPCM",
    0x0055: "MPEG layer 3",
    0xFFFE: "WAVE_FORMAT_EXTENSIBLE",
}


def _format_tag(path) -> int | None:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
            return None
        while True:
            chunk = fh.read(8)
            if len(chunk) < 8:
                return None
            cid, size = chunk[:4], struct.unpack("<I", chunk[4:])[0]
            if cid == b"fmt ":
                return struct.unpack("<H", fh.read(2))[0]
            fh.seek(size + (size & 1), 1)


def load_audio(path: str | Path, target_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Mono float64 samples in [-1, 1] at ``target_rate``.

    Integer PCM (8/16/24/32 bit) and float WAV are accepted; stereo is
    averaged; other rates are resampled by linear interpolation.
    """
    tag = _format_tag(path)
    if tag is None:
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    if tag not in (0x0001, 0x0003, 0xFFFE):
        raise ValueError(f"{path}: unsupported WAV encoding {_FORMAT_NAMES.get(tag, hex(tag))}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise ValueError(f"{path}: unsupported WAV encoding {_FORMAT_NAMES.get(tag, hex(tag))} ({exc})") from exc
    if data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        x = data / 32768.0
    elif data.dtype == np.int32:
        x = data / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported sample type {data.dtype}")
    if x.ndim == 2:
        x = x.mean(axis=1)
    if rate != target_rate and x.size:
        n_out = int(round(x.size * target_rate / rate))
        t_out = np.arange(n_out) / target_rate
        x = np.interp(t_out, np.arange(x.size) / rate, x)
    return np.clip(x, -1.0, 1.0)


def write_wav(path: str | Path, samples, rate: int = SAMPLE_RATE) -> None:
    """16-bit PCM mono; samples are clipped to [-1, 1]."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    wavfile.write(path, rate, np.round(x * 32767.0).astype(np.int16))


def rms(samples) -> float:
    x = np.asarray(samples, dtype=np.float64)
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0


def normalize_rms(samples, target_mv: float, full_scale_mv: float = FULL_SCALE_MV) -> np.ndarray:
    """Scale so the RMS level equals ``target_mv`` under the full-scale convention."""
    current = rms(samples)
    if current == 0.0:
        raise ValueError("cannot normalise a silent signal")
    return np.asarray(samples, dtype=np.float64) * (target_mv / full_scale_mv / current)


def mv_to_rms(mv: float, full_scale_mv: float = FULL_SCALE_MV) -> float:
    return mv / full_scale_mv
