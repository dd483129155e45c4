"""JSON-backed configuration for the cochlea simulator.

Example config (all keys optional)::

    {
      "sample_rate_hz": 44100,
      "q_factor": 4.0,
      "gain_table_db": [0, 2.95, ..., 32.5],
      "saturation": {"enabled": false, "knee": 1.0},
      "channels": [12, 47],
      "adm": {"delta": 0.5964, "max_events_per_sample": 8},
      "agc": {"n_periods": 8, "t_lower": 1, "t_upper": 16, "count_polarity": "on"}
    }
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..adm import DEFAULT_MAX_EVENTS_PER_SAMPLE, default_delta
from ..agc import AgcParams
from ..filterbank import FilterbankConfig, channel_center_freq

_AGC_KEYS = ("n_periods", "t_lower", "t_upper", "settle_time_us", "queue_capacity", "count_polarity")


@dataclass(frozen=True)
class CochleaConfig:
    filterbank: FilterbankConfig = field(default_factory=FilterbankConfig)
    agc: AgcParams = field(default_factory=AgcParams)
    delta: float = field(default_factory=default_delta)
    max_events_per_sample: int = DEFAULT_MAX_EVENTS_PER_SAMPLE
    initial_gain_index: int = 11

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 <= self.initial_gain_index <= 11:
            raise ValueError("initial_gain_index outside 0..11")

    @property
    def channels(self):
        return self.filterbank.active_channels

    def with_channels(self, first: int, last: int) -> "CochleaConfig":
        return replace(self, filterbank=replace(self.filterbank, active_channel_range=(first, last)))

    def to_dict(self) -> dict:
        fb = self.filterbank
        return {
            "sample_rate_hz": fb.sample_rate_hz,
            "q_factor": fb.q_factor,
            "gain_table_db": list(fb.gain_table_db),
            "saturation": {"enabled": fb.saturation_enabled, "knee": fb.saturation_knee},
            "channels": list(fb.active_channel_range),
            "adm": {"delta": self.delta, "max_events_per_sample": self.max_events_per_sample},
            "agc": {k: getattr(self.agc, k) for k in _AGC_KEYS},
            "initial_gain_index": self.initial_gain_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CochleaConfig":
        fb_kw = {}
        if "sample_rate_hz" in d:
            fb_kw["sample_rate_hz"] = int(d["sample_rate_hz"])
        if "q_factor" in d:
            fb_kw["q_factor"] = float(d["q_factor"])
        if "gain_table_db" in d:
            fb_kw["gain_table_db"] = tuple(float(v) for v in d["gain_table_db"])
        sat = d.get("saturation", {})
        if "enabled" in sat:
            fb_kw["saturation_enabled"] = bool(sat["enabled"])
        if "knee" in sat:
            fb_kw["saturation_knee"] = float(sat["knee"])
        if "channels" in d:
            ch = d["channels"]
            fb_kw["active_channel_range"] = parse_channels(ch) if isinstance(ch, str) else tuple(int(c) for c in ch)
        agc = {k: v for k, v in d.get("agc", {}).items() if k in _AGC_KEYS}
        adm = d.get("adm", {})
        kw = {"filterbank": FilterbankConfig(**fb_kw), "agc": AgcParams(**agc)}
        if "delta" in adm:
            kw["delta"] = float(adm["delta"])
        if "max_events_per_sample" in adm:
            kw["max_events_per_sample"] = int(adm["max_events_per_sample"])
        if "initial_gain_index" in d:
            kw["initial_gain_index"] = int(d["initial_gain_index"])
        return cls(**kw)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path: str | Path | None) -> CochleaConfig:
    if path is None:
        return CochleaConfig()
    with open(path) as fh:
        return CochleaConfig.from_dict(json.load(fh))


# The classifier channel set: 12 highest and 16 lowest channels dropped.
CHANNEL_PRESETS = {"56hz-4khz": (12, 47), "all": (1, 63)}

_FREQ = re.compile(r"^\s*([\d.]+)\s*(k?)hz\s*$", re.IGNORECASE)


def _parse_freq(s: str) -> float:
    m = _FREQ.match(s)
    if not m:
        raise ValueError(f"cannot parse frequency {s!r}")
    return float(m.group(1)) * (1000.0 if m.group(2) else 1.0)


def parse_channels(spec: str, cfg: FilterbankConfig | None = None) -> tuple[int, int]:
    """Parse ``"12-47"`` (channel indices), a preset name, or a band such
    as ``"100hz-2khz"`` (edges snap to the nearest channel center).
    """
    cfg = cfg or FilterbankConfig()
    key = spec.strip().lower()
    if key in CHANNEL_PRESETS:
        return CHANNEL_PRESETS[key]
    lo_s, _, hi_s = spec.partition("-")
    if lo_s.strip().isdigit() and hi_s.strip().isdigit():
        a, b = int(lo_s), int(hi_s)
        return (min(a, b), max(a, b))
    f_lo, f_hi = sorted((_parse_freq(lo_s), _parse_freq(hi_s)))
    freqs = [channel_center_freq(ch, cfg) for ch in range(cfg.num_channels)]

    def nearest(f):
        return min(range(cfg.num_channels), key=lambda c: abs(freqs[c] / f - 1.0))

    return (nearest(f_hi), nearest(f_lo))

