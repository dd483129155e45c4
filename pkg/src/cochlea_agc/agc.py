"""Register-level model of the per-channel step-wise gain controller.

Every 100 us tick advances each enabled channel's window counter. At the
end of a channel's averaging window (N periods of its center frequency)
the spike count is compared with two thresholds and the 4-bit gain index
is stepped by one. Gain changes reach the filter through a 128-entry FIFO
that the chip drains one channel per 0.5 ms.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .adm import Polarity, SpikeEvent
from .filterbank import FilterbankConfig, channel_center_freq

WINDOW_BITS = 12
COUNTER_BITS = 6
GAIN_INDEX_BITS = 4
PATTERN_BITS = 6


def _default_patterns() -> tuple:
    # 6-bit ATT/PGA setting: bits 5..3 attenuator code (1=-6 dB .. 4=-18 dB),
    # bits 2..0 amplifier code. Ascending gain index = ascending total gain.
    return tuple(((4 - (i % 4)) << 3) | (i // 4) for i in range(12))


GAIN_PATTERNS = _default_patterns()


@dataclass(frozen=True)
class AgcParams:
    """Controller constants.

    ``count_polarity`` selects which events increment the spike counter:
    ``"on"`` (default) or ``"both"``.
    """

    n_periods: int = 8
    t_lower: int = 1
    t_upper: int = 16
    tick_us: int = 100
    window_max_ticks: int = (1 << WINDOW_BITS) - 1
    counter_max: int = (1 << COUNTER_BITS) - 1
    gain_levels: int = 12
    settle_time_us: int = 500
    queue_capacity: int = 128
    count_polarity: str = "on"
    gain_patterns: tuple = GAIN_PATTERNS

    def __post_init__(self):
        if not 0 <= self.t_lower < self.t_upper <= self.counter_max:
            raise ValueError("thresholds must satisfy 0 <= t_lower < t_upper <= counter_max")
        if self.window_max_ticks != (1 << WINDOW_BITS) - 1 or self.counter_max != (1 << COUNTER_BITS) - 1:
            raise ValueError("register widths are fixed at 12 and 6 bits")
        if self.count_polarity not in ("on", "both"):
            raise ValueError("count_polarity must be 'on' or 'both'")
        if len(self.gain_patterns) != self.gain_levels or len(set(self.gain_patterns)) != self.gain_levels:
            raise ValueError("gain_patterns needs one distinct pattern per gain level")
        if any(not 0 <= p < (1 << PATTERN_BITS) for p in self.gain_patterns):
            raise ValueError("gain patterns must fit in 6 bits")
        if self.tick_us <= 0 or self.settle_time_us < 0 or self.queue_capacity < 1:
            raise ValueError("invalid timing or queue parameters")

    def pattern_to_index(self, pattern: int) -> int:
        return self.gain_patterns.index(pattern)


class Decision(enum.IntEnum):
    DECREASE = -1
    NONE = 0
    INCREASE = 1


@dataclass
class AgcChannelRegs:
    channel: int
    window_len_ticks: int = 1
    time_counter: int = 0
    spike_count: int = 0
    gain_index: int = 11
    enabled: bool = True
    window_end: bool = False

    def __setattr__(self, name, value):
        limits = {
            "window_len_ticks": (1, (1 << WINDOW_BITS) - 1),
            "time_counter": (0, (1 << WINDOW_BITS) - 1),
            "spike_count": (0, (1 << COUNTER_BITS) - 1),
            "gain_index": (0, 11),
            "channel": (0, 63),
        }
        if name in limits:
            lo, hi = limits[name]
            if not lo <= value <= hi:
                raise ValueError(f"{name}={value} outside register range {lo}..{hi}")
        object.__setattr__(self, name, value)


@dataclass(frozen=True)
class GainUpdateRequest:
    channel: int
    gain_pattern: int
    enqueue_time_us: int

    def pack(self) -> int:
        """12-bit FIFO word: channel in the high 6 bits, pattern in the low 6."""
        return (self.channel << PATTERN_BITS) | self.gain_pattern


@dataclass(frozen=True)
class GainDecision:
    channel: int
    decision: Decision
    gain_index: int
    time_us: int
    spike_count: int


def averaging_window_ticks(ch: int, params: AgcParams | None = None, cfg: FilterbankConfig | None = None) -> int:
    """Window length of channel ``ch`` in ticks: N periods, clamped to 12 bits."""
    params = params or AgcParams()
    f = channel_center_freq(ch, cfg)
    ticks = round(params.n_periods / f / (params.tick_us * 1e-6))
    return int(min(max(ticks, 1), params.window_max_ticks))


def on_spike(regs: AgcChannelRegs, ev: SpikeEvent, params: AgcParams | None = None) -> AgcChannelRegs:
    params = params or AgcParams()
    if not regs.enabled or ev.channel != regs.channel:
        return regs
    if params.count_polarity == "on" and ev.polarity != Polarity.ON:
        return regs
    if regs.spike_count < params.counter_max:
        regs.spike_count += 1
    return regs


def tick(regs: AgcChannelRegs, params: AgcParams | None = None, now_us: int = 0) -> GainDecision | None:
    """Advance one 100 us tick; returns a decision when the window closes.

    The gain index register is updated immediately; getting the new gain
    into the filter is the queue's job.
    """
    params = params or AgcParams()
    regs.window_end = False
    if not regs.enabled:
        return None
    regs.time_counter += 1
    if regs.time_counter < regs.window_len_ticks:
        return None
    regs.window_end = True
    count = regs.spike_count
    decision = Decision.NONE
    if count >= params.t_upper and regs.gain_index > 0:
        regs.gain_index -= 1
        decision = Decision.DECREASE
    elif count < params.t_lower and regs.gain_index < params.gain_levels - 1:
        regs.gain_index += 1
        decision = Decision.INCREASE
    regs.time_counter = 0
    regs.spike_count = 0
    return GainDecision(regs.channel, decision, regs.gain_index, now_us, count)


def gain_lookup(gain_index: int, cfg: FilterbankConfig | None = None,
                params: AgcParams | None = None) -> tuple[int, float]:
    """``(6-bit pattern, gain in dB)`` for a gain index."""
    cfg = cfg or FilterbankConfig()
    params = params or AgcParams()
    if not 0 <= gain_index < params.gain_levels:
        raise ValueError(f"gain index {gain_index} outside 0..{params.gain_levels - 1}")
    return params.gain_patterns[gain_index], float(cfg.gain_table_db[gain_index])


class GainUpdateQueue:
    """Bounded FIFO of pending gain loads, drained one per settle interval.

    A request arriving while 128 are pending is dropped and counted.
    """

    def __init__(self, params: AgcParams | None = None):
        self.params = params or AgcParams()
        self._q: deque[GainUpdateRequest] = deque()
        self.dropped = 0
        self.busy_until_us = 0

    def __len__(self):
        return len(self._q)

    def enqueue(self, req: GainUpdateRequest) -> bool:
        if len(self._q) >= self.params.queue_capacity:
            self.dropped += 1
            return False
        self._q.append(req)
        return True

    def dequeue(self) -> GainUpdateRequest:
        return self._q.popleft()

    def service(self, now_us: int) -> list[tuple[int, int, int]]:
        """Start at most one gain load if the chip is idle.

        Returns ``[(channel, gain_pattern, apply_time_us)]`` (empty or one).
        """
        if not self._q or now_us < self.busy_until_us:
            return []
        req = self._q.popleft()
        apply_at = now_us + self.params.settle_time_us
        self.busy_until_us = apply_at
        return [(req.channel, req.gain_pattern, apply_at)]


def enqueue_gain_update(queue: GainUpdateQueue, req: GainUpdateRequest) -> bool:
    return queue.enqueue(req)


def service_gain_updates(queue: GainUpdateQueue, now_us: int) -> list[tuple[int, int, int]]:
    return queue.service(now_us)


@dataclass
class AgcController:
    """All channel registers plus the shared update queue.

    ``tick_all`` processes channels in ascending order, then services the
    queue, so a request raised on a tick can start loading on that tick.
    """

    channels: list
    params: AgcParams = field(default_factory=AgcParams)
    cfg: FilterbankConfig = field(default_factory=FilterbankConfig)
    initial_gain_index: int = 11

    def __post_init__(self):
        self.regs = {
            ch: AgcChannelRegs(ch, averaging_window_ticks(ch, self.params, self.cfg), 0, 0,
                               self.initial_gain_index)
            for ch in sorted(self.channels)
        }
        self.queue = GainUpdateQueue(self.params)
        self.windows: list[GainDecision] = []

    def on_event(self, ev: SpikeEvent) -> None:
        regs = self.regs.get(ev.channel)
        if regs is not None:
            on_spike(regs, ev, self.params)

    def tick_all(self, now_us: int) -> list[tuple[int, int, int]]:
        for ch, regs in self.regs.items():
            d = tick(regs, self.params, now_us)
            if d is None:
                continue
            self.windows.append(d)
            if d.decision != Decision.NONE:
                pattern = self.params.gain_patterns[d.gain_index]
                self.queue.enqueue(GainUpdateRequest(ch, pattern, now_us))
        return self.queue.service(now_us)


def estimate_input_amplitude(norm_rate: float, gain_db: float) -> float:
    """Relative input amplitude from spikes per period and channel gain."""
    if norm_rate < 0:
        raise ValueError("spike rate must be non-negative")
    return norm_rate * 10.0 ** (-gain_db / 20.0)


def gain_adjusted_rate(norm_rate: float, gain_db: float, gmax_db: float = 32.5) -> float:
    """Spike rate rescaled to what the channel would give at full gain."""
    if norm_rate < 0:
        raise ValueError("spike rate must be non-negative")
    return norm_rate * 10.0 ** ((gmax_db - gain_db) / 20.0)


def window_table(params: AgcParams, cfg: FilterbankConfig, channels) -> np.ndarray:
    return np.array([averaging_window_ticks(int(ch), params, cfg) for ch in channels], dtype=np.int64)
