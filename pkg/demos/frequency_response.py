"""
Channel frequency response
==========================

Gain of channel 30 against frequency at three input levels, first with the
linear filter, then with the output limiter switched on. The limiter only
bites at the loudest level, flattening the peak.
"""

from dataclasses import replace

import numpy as np

from _common import OUT, pyplot
from cochlea_agc.filterbank import FilterbankConfig, channel_center_freq, frequency_response

fc = channel_center_freq(30)
freqs = fc * np.logspace(-1, 1, 41)
freqs = freqs[freqs < 0.45 * 44100]
levels = (0.001, 0.01, 0.1)
linear = FilterbankConfig()
limited = replace(linear, saturation_enabled=True)

for name, cfg in (("linear", linear), ("limited", limited)):
    g = frequency_response(30, 11, levels, freqs, cfg)
    peak = np.argmax(g, axis=1)
    for lv, row, k in zip(levels, g, peak):
        print(f"{name:>8} input {lv:6.3f}: peak {row[k]:6.2f} dB at {freqs[k]:7.1f} Hz, "
              f"{row[0]:7.2f} dB at {freqs[0]:.0f} Hz")
    plt = pyplot()
    if plt is not None:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for lv, row in zip(levels, g):
            ax.semilogx(freqs, row, label=f"{lv:g} RMS")
        ax.axvline(fc, ls=":", c="k")
        ax.set(xlabel="frequency (Hz)", ylabel="gain (dB)", title=f"channel 30, {name}")
        ax.legend()
        fig.tight_layout()
        fig.savefig(OUT / f"freq_response_{name}.png", dpi=120)
