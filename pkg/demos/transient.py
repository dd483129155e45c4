"""
Attack and release
==================

Silence, then a loud vowel-like burst, then silence again. The controller
lowers the gain by one step per averaging window until the spike count is
back in band, and walks it back up to the top once the input goes quiet.
"""

import numpy as np

from _common import OUT, pyplot
from cochlea_agc.harness.analysis import check_transient, transient_response
from cochlea_agc.harness.traces import write_gain_trace

tr = transient_response(channel=30, amplitude_mv=50.0, channels=(28, 32))
summary = check_transient(tr)
for key, value in summary.items():
    print(f"{key:>20}: {value}")

# gain register changes of channel 30, in ms
trace = tr.sim.gain_trace[tr.sim.gain_trace["channel"] == 30]
print("gain index changes (ms, index):")
print(", ".join(f"({t / 1000:.1f}, {g})" for t, g in zip(trace["time_us"], trace["gain_index"])))
write_gain_trace(OUT / "transient_gains.csv", tr.sim.gain_trace)

plt = pyplot()
if plt is not None:
    w = tr.sim.windows[tr.sim.windows["channel"] == 30]
    fig, ax = plt.subplots(2, 1, sharex=True, figsize=(8, 4.5))
    ax[0].step(w["time_us"] / 1000, w["spike_count"], where="post")
    ax[0].axhline(16, ls=":", c="k")
    ax[0].set(ylabel="window count")
    t = np.r_[trace["time_us"], tr.sim.duration_us] / 1000
    ax[1].step(t, np.r_[trace["gain_index"], trace["gain_index"][-1]], where="post")
    for edge in (tr.onset_us, tr.offset_us):
        ax[1].axvline(edge / 1000, ls="--", c="gray")
    ax[1].set(xlabel="time (ms)", ylabel="gain index")
    fig.tight_layout()
    fig.savefig(OUT / "transient.png", dpi=120)
    print("figure:", OUT / "transient.png")
