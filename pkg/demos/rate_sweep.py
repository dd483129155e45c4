"""
Steady-state rate regulation on one channel
===========================================

A sine at the center frequency of channel 30 (about 482 Hz) is swept over
40 dB. Without the controller the ON rate grows with the input. With it,
every level inside the compensable range settles at about one ON event
per period, and the gain-adjusted rate recovers the input level.
"""

import numpy as np

from _common import OUT, pyplot
from cochlea_agc.harness.analysis import compensable_range_mv, rate_analysis

# 20 levels from 1 to 100 mV RMS, 3 s each, the first second discarded
ra = rate_analysis(channel=30)
lo, hi = compensable_range_mv()
print(f"channel 30 at {ra.freq_hz:.1f} Hz, compensable range {lo:.2f} to {hi:.2f} mV")
print(f"{'mV':>7} {'rate/f':>7} {'gain dB':>8} {'r_ga':>8} {'in band':>8} {'no-AGC Hz':>10}")
for r in ra.rows:
    print(f"{r.amplitude_mV:7.2f} {r.norm_rate:7.3f} {r.mean_gain_db:8.2f} {r.r_ga:8.4f} "
          f"{r.inband_fraction:8.2f} {r.non_agc_rate_hz:10.0f}")

# the two headline numbers: rate compression and linearity of r_ga
print(f"compression {ra.compression:.1f}x, log-log slope of r_ga {ra.loglog_slope(lo, hi):.3f}")

plt = pyplot()
if plt is not None:
    amps = np.array([r.amplitude_mV for r in ra.rows])
    fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
    ax[0].loglog(amps, [r.non_agc_rate_hz for r in ra.rows], "o-", label="fixed gain")
    ax[0].loglog(amps, [r.agc_rate_hz for r in ra.rows], "s-", label="AGC")
    ax[0].set(xlabel="input (mV RMS)", ylabel="ON rate (Hz)")
    ax[0].legend()
    ax[1].loglog(amps, [r.r_ga for r in ra.rows], "o-")
    ax[1].set(xlabel="input (mV RMS)", ylabel="gain-adjusted rate")
    fig.tight_layout()
    fig.savefig(OUT / "rate_sweep.png", dpi=120)
    print("figure:", OUT / "rate_sweep.png")
