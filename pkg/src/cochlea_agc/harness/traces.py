"""CSV dumps of controller traces."""

from __future__ import annotations

import csv

import numpy as np

from .simulate import GAIN_TRACE_DTYPE, WINDOW_DTYPE


def write_struct_csv(path, arr: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(arr.dtype.names)
        for row in arr.tolist():
            w.writerow(row)


def read_struct_csv(path, dtype: np.dtype) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != dtype.names:
        raise ValueError(f"{path}: expected header {','.join(dtype.names)}")
    out = np.zeros(len(rows) - 1, dtype=dtype)
    for name_i, name in enumerate(dtype.names):
        out[name] = [int(r[name_i]) for r in rows[1:]]
    return out


def write_gain_trace(path, trace: np.ndarray) -> None:
    """Columns: time_us, channel, gain_index (register value from that time on)."""
    write_struct_csv(path, trace.astype(GAIN_TRACE_DTYPE))


def read_gain_trace(path) -> np.ndarray:
    return read_struct_csv(path, GAIN_TRACE_DTYPE)


def write_window_trace(path, windows: np.ndarray) -> None:
    """Columns: time_us, channel, spike_count, decision (-1/0/+1), gain_index after the decision."""
    write_struct_csv(path, windows.astype(WINDOW_DTYPE))


def read_window_trace(path) -> np.ndarray:
    return read_struct_csv(path, WINDOW_DTYPE)
