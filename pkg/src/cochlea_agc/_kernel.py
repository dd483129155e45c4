"""Compiled per-sample cochlea loop (filter -> ADM -> controller -> queue).

Mirrors the object model in ``filterbank``, ``adm`` and ``agc`` operation
for operation; ``tests/test_simulate.py`` checks the two agree bit for bit.
Output buffers are reserved once per sample or tick, never inside the
per-channel loop, which keeps numba from spilling the filter state.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _reserve(buf, used, extra):
    if used + extra <= buf.shape[0]:
        return buf
    out = np.empty((max(2 * buf.shape[0], used + extra), buf.shape[1]), dtype=buf.dtype)
    out[:used] = buf[:used]
    return out


@njit(cache=True)
def run(x, coeffs, gains_lin, win_ticks, ch_ids, fs, delta, init_level, max_ev,
        agc, t_lower, t_upper, counter_max, n_levels, tick_us, settle_us, qcap,
        on_only, knee, init_gi, patterns, rec_map, n_rec):
    n_samples = x.shape[0]
    nch = ch_ids.shape[0]

    z = np.zeros((nch, 4))
    level = np.full(nch, init_level)
    g = np.full(nch, gains_lin[init_gi])
    pend_act = np.full(nch, -1, dtype=np.int64)
    pend_gi = np.zeros(nch, dtype=np.int64)

    tc = np.zeros(nch, dtype=np.int64)
    sc = np.zeros(nch, dtype=np.int64)
    gi = np.full(nch, init_gi, dtype=np.int64)

    pat_to_idx = np.full(64, -1, dtype=np.int64)
    for k in range(patterns.shape[0]):
        pat_to_idx[patterns[k]] = k
    slot_of_ch = np.full(64, -1, dtype=np.int64)
    for i in range(nch):
        slot_of_ch[ch_ids[i]] = i

    q_ch = np.zeros(qcap, dtype=np.int64)
    q_pat = np.zeros(qcap, dtype=np.int64)
    q_head = 0
    q_len = 0
    drops = 0
    busy_until = 0

    # events: (t, ch, polarity, gi); traces: (t, ch, gi); windows: (t, ch, count, decision, gi)
    ev = np.empty((max(1024, n_samples // 4), 4), dtype=np.int64)
    n_ev = 0
    gt = np.empty((256, 3), dtype=np.int64)
    n_gt = 0
    at = np.empty((256, 3), dtype=np.int64)
    n_at = 0
    win = np.empty((256, 5), dtype=np.int64)
    n_w = 0

    rec = np.zeros((n_rec, n_samples))
    cap_hits = 0
    k_tick = 0
    tick_scaled = tick_us * fs
    next_tick_t = 0

    for n in range(n_samples):
        tn = n * 1000000
        while next_tick_t <= tn:
            if agc:
                now = k_tick * tick_us
                win = _reserve(win, n_w, nch)
                gt = _reserve(gt, n_gt, nch)
                at = _reserve(at, n_at, 1)
                for i in range(nch):
                    tc[i] += 1
                    if tc[i] < win_ticks[i]:
                        continue
                    count = sc[i]
                    d = 0
                    if count >= t_upper and gi[i] > 0:
                        gi[i] -= 1
                        d = -1
                    elif count < t_lower and gi[i] < n_levels - 1:
                        gi[i] += 1
                        d = 1
                    tc[i] = 0
                    sc[i] = 0
                    win[n_w, 0] = now
                    win[n_w, 1] = ch_ids[i]
                    win[n_w, 2] = count
                    win[n_w, 3] = d
                    win[n_w, 4] = gi[i]
                    n_w += 1
                    if d != 0:
                        gt[n_gt, 0] = now
                        gt[n_gt, 1] = ch_ids[i]
                        gt[n_gt, 2] = gi[i]
                        n_gt += 1
                        if q_len >= qcap:
                            drops += 1
                        else:
                            tail = (q_head + q_len) % qcap
                            q_ch[tail] = ch_ids[i]
                            q_pat[tail] = patterns[gi[i]]
                            q_len += 1
                if q_len > 0 and now >= busy_until:
                    ch = q_ch[q_head]
                    pat = q_pat[q_head]
                    q_head = (q_head + 1) % qcap
                    q_len -= 1
                    busy_until = now + settle_us
                    s = slot_of_ch[ch]
                    if pend_act[s] >= 0 and pend_act[s] <= now:
                        g[s] = gains_lin[pend_gi[s]]
                        at[n_at, 0] = pend_act[s]
                        at[n_at, 1] = ch
                        at[n_at, 2] = pend_gi[s]
                        n_at += 1
                    pend_act[s] = now + settle_us
                    pend_gi[s] = pat_to_idx[pat]
            k_tick += 1
            next_tick_t = k_tick * tick_scaled

        ts = tn // fs
        xn = x[n]
        ev = _reserve(ev, n_ev, nch * max_ev)
        at = _reserve(at, n_at, nch)
        for i in range(nch):
            if pend_act[i] >= 0 and tn >= pend_act[i] * fs:
                g[i] = gains_lin[pend_gi[i]]
                at[n_at, 0] = pend_act[i]
                at[n_at, 1] = ch_ids[i]
                at[n_at, 2] = pend_gi[i]
                n_at += 1
                pend_act[i] = -1
            u = g[i] * xn
            if knee > 0.0:
                u = knee * np.tanh(u / knee)
            y = coeffs[i, 0, 0] * u + z[i, 0]
            z[i, 0] = coeffs[i, 0, 1] * u - coeffs[i, 0, 3] * y + z[i, 1]
            z[i, 1] = coeffs[i, 0, 2] * u - coeffs[i, 0, 4] * y
            u = y
            y = coeffs[i, 1, 0] * u + z[i, 2]
            z[i, 2] = coeffs[i, 1, 1] * u - coeffs[i, 1, 3] * y + z[i, 3]
            z[i, 3] = coeffs[i, 1, 2] * u - coeffs[i, 1, 4] * y
            if n_rec > 0 and rec_map[i] >= 0:
                rec[rec_map[i], n] = y

            lv = level[i]
            if y - lv < delta and lv - y < delta:
                continue
            emitted = 0
            while y - lv >= delta and emitted < max_ev:
                lv += delta
                ev[n_ev, 0] = ts
                ev[n_ev, 1] = ch_ids[i]
                ev[n_ev, 2] = 1
                ev[n_ev, 3] = gi[i]
                n_ev += 1
                emitted += 1
                if agc and sc[i] < counter_max:
                    sc[i] += 1
            while lv - y >= delta and emitted < max_ev:
                lv -= delta
                ev[n_ev, 0] = ts
                ev[n_ev, 1] = ch_ids[i]
                ev[n_ev, 2] = 0
                ev[n_ev, 3] = gi[i]
                n_ev += 1
                emitted += 1
                if agc and not on_only and sc[i] < counter_max:
                    sc[i] += 1
            if emitted == max_ev and (y - lv >= delta or lv - y >= delta):
                cap_hits += 1
            level[i] = lv

    return ev[:n_ev], gt[:n_gt], at[:n_at], win[:n_w], rec, drops, cap_hits


@njit(cache=True)
def frame_accumulate(t, slot, frame_us, n_frames, n_slots, max_isi_us, n_bins):
    """Per-frame event counts and ISI histograms in one pass.

    ``t`` must be non-decreasing; ``slot`` is -1 for ignored channels.
    Intervals are taken within a channel and within a frame only.
    """
    counts = np.zeros((n_frames, n_slots))
    hist = np.zeros((n_frames, n_bins))
    last_t = np.zeros(n_slots, dtype=np.int64)
    last_f = np.full(n_slots, -1, dtype=np.int64)
    for i in range(t.shape[0]):
        s = slot[i]
        if s < 0:
            continue
        f = t[i] // frame_us
        if f >= n_frames:
            break
        counts[f, s] += 1.0
        if last_f[s] == f:
            isi = t[i] - last_t[s]
            if isi <= max_isi_us:
                hist[f, min(isi * n_bins // max_isi_us, n_bins - 1)] += 1.0
        last_t[s] = t[i]
        last_f[s] = f
    return counts, hist
