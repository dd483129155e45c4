"""Binary event files.

Layout (little-endian)::

    magic      4 bytes  b"CAER"
    version    u16
    hdr_len    u32      length of the JSON header that follows
    header     hdr_len bytes of UTF-8 JSON
    n_events   u64
    records    n_events x 12 bytes: timestamp_us u64, channel u8,
               polarity u8, gain_index u8, pad u8

The JSON header carries sample_rate_hz, num_channels, agc, delta,
gain_table_db and the recording metadata (amplitude_mV, label, source_id,
duration_us).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..adm import EVENT_DTYPE

MAGIC = b"CAER"
VERSION = 1


@dataclass
class EventFileHeader:
    sample_rate_hz: int
    num_channels: int
    agc: bool
    delta: float
    gain_table_db: list
    amplitude_mV: float | None = None
    label: int | None = None
    source_id: str = ""
    duration_us: int | None = None
    version: int = VERSION

    @classmethod
    def from_config(cls, cfg, agc: bool, **meta) -> "EventFileHeader":
        fb = cfg.filterbank
        return cls(int(fb.sample_rate_hz), int(fb.num_channels), bool(agc), float(cfg.delta),
                   [float(g) for g in fb.gain_table_db], **meta)


def write_events(path: str | Path, header: EventFileHeader, events: np.ndarray) -> None:
    events = np.asarray(events, dtype=EVENT_DTYPE)
    meta = asdict(header)
    meta.pop("version")
    blob = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", header.version, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<Q", events.size))
        fh.write(events.tobytes())


def read_events(path: str | Path) -> tuple[EventFileHeader, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}")
    version, hdr_len = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported event file version {version}")
    off = 10
    meta = json.loads(data[off:off + hdr_len].decode())
    off += hdr_len
    (n,) = struct.unpack_from("<Q", data, off)
    off += 8
    expected = n * EVENT_DTYPE.itemsize
    if len(data) - off != expected:
        raise ValueError(f"{path}: expected {expected} bytes of records, found {len(data) - off}")
    events = np.frombuffer(data, dtype=EVENT_DTYPE, count=n, offset=off).copy()
    return EventFileHeader(version=version, **meta), events
