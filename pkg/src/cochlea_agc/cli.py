"""Command-line entry point: ``cochlea-agc <verb> [options]``.

Every verb accepts ``--config`` (JSON, see README) and ``--channels``;
other flags override the config for that run.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .classifiers import TrainConfig, evaluate, load_checkpoint, save_checkpoint
from .features import Normalizer, feature_matrix, frame_stream
from .filterbank import channel_center_freq, frequency_response
from .harness.analysis import rate_analysis
from .harness.audio import load_audio, normalize_rms
from .harness.config import CochleaConfig, load_config, parse_channels
from .harness.corpus import CorpusSpec, noise_like, speech_like
from .harness.events import EventFileHeader, read_events, write_events
from .harness.experiment import (ExperimentSpec, FeatureSet, read_feature_csv, run_experiment, train_model,
                                 write_feature_csv)
from .harness.simulate import simulate
from .harness.traces import read_gain_trace, write_gain_trace, write_window_trace

_AGC_MODES = {"on": (True,), "off": (False,), "both": (False, True)}


def _floats(s: str) -> list:
    return [float(v) for v in s.split(",") if v.strip()]


def _config(args) -> CochleaConfig:
    cfg = load_config(args.config)
    if args.channels:
        cfg = cfg.with_channels(*parse_channels(args.channels, cfg.filterbank))
    return cfg


def _raw_config(args) -> dict:
    if not args.config:
        return {}
    return json.loads(Path(args.config).read_text())


def cmd_simulate(args) -> int:
    cfg = _config(args)
    fs = cfg.filterbank.sample_rate_hz
    if args.input:
        x = load_audio(args.input, fs)
        stem, label = Path(args.input).stem, args.label
    else:
        rng = np.random.default_rng(args.seed)
        if args.synth == "speech":
            x, label = speech_like(rng, args.duration, fs), 1
        else:
            x, label = noise_like(rng, args.duration, fs)[0], 0
        stem = f"synth-{args.synth}-seed{args.seed}"
    if args.amplitude is not None:
        x = normalize_rms(x, args.amplitude)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for agc_on in _AGC_MODES[args.agc]:
        res = simulate(x, cfg, agc_on=agc_on)
        base = f"{stem}_agc-{'on' if agc_on else 'off'}"
        header = EventFileHeader.from_config(cfg, agc_on, amplitude_mV=args.amplitude, label=label,
                                             source_id=stem, duration_us=res.duration_us)
        write_events(out / f"{base}.events", header, res.events)
        write_gain_trace(out / f"{base}.gains.csv", res.gain_trace)
        write_window_trace(out / f"{base}.windows.csv", res.windows)
        summary.append({"file": str(out / f"{base}.events"), "agc": agc_on, "n_events": int(res.events.size),
                        "duration_us": res.duration_us, "queue_drops": res.queue_drops, "cap_hits": res.cap_hits})
    print(json.dumps(summary, indent=2))
    return 0


def _gains_path(events_path: Path) -> Path:
    name = events_path.name[:-len(".events")] if events_path.name.endswith(".events") else events_path.stem
    return events_path.with_name(name + ".gains.csv")


def cmd_features(args) -> int:
    cfg = _config(args)
    channels = cfg.channels
    sets = []
    for path in map(Path, args.events):
        header, events = read_events(path)
        gains = read_gain_trace(_gains_path(path)) if header.agc else None
        dur = args.duration_us or header.duration_us
        if dur is None:
            dur = int(events["timestamp_us"].max()) + 1 if events.size else 0
        frames = frame_stream(events, gains, dur, channels, header.agc, args.frame_ms, header.label)
        x = feature_matrix(frames)
        label = -1 if header.label is None else int(header.label)
        amp = float("nan") if header.amplitude_mV is None else float(header.amplitude_mV)
        sets.append(FeatureSet(x, np.full(len(x), label), np.full(len(x), header.source_id, dtype=object),
                               np.full(len(x), amp), header.agc))
    if len({s.agc for s in sets}) > 1:
        raise SystemExit("cannot mix AGC and non-AGC event files in one feature CSV")
    write_feature_csv(args.out, FeatureSet.concat(sets))
    print(f"wrote {sum(len(s.y) for s in sets)} frames to {args.out}")
    return 0


def _load_features(paths, amplitudes=None) -> FeatureSet:
    fs = FeatureSet.concat(read_feature_csv(p) for p in paths)
    if amplitudes:
        keep = np.isin(fs.amplitude, amplitudes)
        fs = FeatureSet(fs.x[keep], fs.y[keep], fs.recording[keep], fs.amplitude[keep], fs.agc)
    if fs.y.size == 0:
        raise SystemExit("no feature rows selected")
    return fs


def cmd_train(args) -> int:
    fs = _load_features(args.features, _floats(args.amplitudes) if args.amplitudes else None)
    norm = Normalizer.fit(fs.x)
    config = TrainConfig(seed=args.seed)
    model = train_model(args.classifier, norm.transform(fs.x), fs.y, args.seed, config)
    extra = {"normalizer": {"mean": norm.mean.tolist(), "std": norm.std.tolist()}, "agc": fs.agc}
    save_checkpoint(model, args.out, args.seed, config, extra)
    print(f"trained {args.classifier} on {fs.y.size} frames -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    model, extra = load_checkpoint(args.model, with_extra=True)
    fs = _load_features(args.features)
    x = fs.x
    if "normalizer" in extra:
        x = Normalizer(extra["normalizer"]["mean"], extra["normalizer"]["std"]).transform(x)
    ev = evaluate(model, x, fs.y, fs.amplitude)
    result = {"accuracy": ev.accuracy, "mean_over_amplitudes": ev.mean_over_amplitudes, "n": ev.n,
              "per_amplitude": {repr(k): v for k, v in ev.per_amplitude.items()}}
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def cmd_experiment(args) -> int:
    cfg = _config(args)
    raw = _raw_config(args).get("experiment", {})
    spec = ExperimentSpec.from_dict(raw) if raw else ExperimentSpec()
    over = {"output_dir": args.out, "agc": args.agc or spec.agc}
    if args.classifier:
        over["classifier"] = args.classifier
    if args.seeds:
        over["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if args.seed is not None:
        over["corpus_seed"] = args.seed
    if args.train_amplitudes:
        over["train_amplitudes_mV"] = tuple(_floats(args.train_amplitudes))
    if args.test_amplitudes:
        over["test_amplitudes_mV"] = tuple(_floats(args.test_amplitudes))
    if args.no_all:
        over["include_all"] = False
    if args.corpus_dir:
        over["corpus"] = args.corpus_dir
    elif args.corpus_seconds:
        over["corpus"] = CorpusSpec(args.corpus_seconds, args.corpus_seconds)
    if args.write_features:
        over["write_features"] = True
    spec = replace(spec, **over)
    report = run_experiment(spec, cfg)
    for row in report.mean_table:
        print(f"{row['train_condition']:>6} {row['classifier']:>4} agc={row['agc']} mean={row['mean']:.4f}")
    for row in report.relative_error:
        if row["seed"] == "mean":
            print(f"{row['train_condition']:>6} {row['classifier']:>4} relative error decrease "
                  f"{row['relative_error_decrease']:.2f}%")
    if report.failures:
        print(f"{len(report.failures)} failed cells; see {args.out}/report.json", file=sys.stderr)
    return 0


def cmd_rate_analysis(args) -> int:
    cfg = load_config(args.config)
    amps = _floats(args.amplitudes) if args.amplitudes else list(np.logspace(0, 2, 20))
    ra = rate_analysis(args.channel, args.freq, amps, cfg, args.duration, args.settle)
    rows = [asdict(r) for r in ra.rows]
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    print(f"channel {ra.channel} at {ra.freq_hz:.2f} Hz: compression {ra.compression:.2f}x, "
          f"log-log slope {ra.loglog_slope():.3f} -> {args.out}")
    return 0


def cmd_freq_response(args) -> int:
    cfg = load_config(args.config).filterbank
    f_c = channel_center_freq(args.channel, cfg)
    freqs = _floats(args.freqs) if args.freqs else list(np.geomspace(f_c / 4, min(f_c * 4, 0.45 * cfg.sample_rate_hz),
                                                                        args.n_freqs))
    amps = _floats(args.amplitudes) if args.amplitudes else [0.01]
    grid = frequency_response(args.channel, args.gain_index, amps, freqs, cfg, args.noise_rms)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["amplitude_rms", "freq_hz", "gain_db"])
        for i, a in enumerate(amps):
            for j, f in enumerate(freqs):
                w.writerow([repr(float(a)), repr(float(f)), repr(float(grid[i, j]))])
    print(f"channel {args.channel} ({f_c:.2f} Hz), gain index {args.gain_index}: peak "
          f"{grid.max():.2f} dB -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--channels", help='channel range "12-47", preset "56hz-4khz"/"all", or "100hz-2khz"')
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cochlea-agc", description="Spiking cochlea with local gain control")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("simulate", parents=[common], help="audio -> event file, gain and window traces")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="WAV file")
    src.add_argument("--synth", choices=("speech", "noise"), help="generate a synthetic clip instead")
    s.add_argument("--duration", type=float, default=4.0, help="synthetic clip length, s")
    s.add_argument("--amplitude", type=float, help="normalise to this RMS level, mV")
    s.add_argument("--label", type=int, help="class label stored in the event header")
    s.add_argument("--agc", choices=tuple(_AGC_MODES), default="on")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("features", parents=[common], help="event files -> 152-d frame feature CSV")
    f.add_argument("--events", nargs="+", required=True)
    f.add_argument("--frame-ms", type=float, default=400.0)
    f.add_argument("--duration-us", type=int, default=None, help="recording length (default: from the file header)")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_features)

    t = sub.add_parser("train", parents=[common], help="feature CSV -> classifier checkpoint")
    t.add_argument("--features", nargs="+", required=True)
    t.add_argument("--classifier", choices=("lr", "dnn"), default="lr")
    t.add_argument("--amplitudes", help="comma-separated levels to train on (default: all rows)")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train, seed=0)

    e = sub.add_parser("evaluate", parents=[common], help="checkpoint + feature CSV -> accuracy")
    e.add_argument("--model", required=True)
    e.add_argument("--features", nargs="+", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", parents=[common], help="full train/test amplitude matrix")
    x.add_argument("--agc", choices=tuple(_AGC_MODES))
    x.add_argument("--classifier", choices=("lr", "dnn", "both"))
    x.add_argument("--seeds", help="comma-separated training seeds")
    x.add_argument("--train-amplitudes")
    x.add_argument("--test-amplitudes")
    x.add_argument("--no-all", action="store_true", help='skip the "all levels" training row')
    x.add_argument("--corpus-seconds", type=float, help="synthetic train and test duration each, s")
    x.add_argument("--corpus-dir", help="WAV corpus directory instead of the synthetic one")
    x.add_argument("--write-features", action="store_true")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_experiment)

    r = sub.add_parser("rate-analysis", parents=[common], help="steady-state rate sweep on one channel")
    r.add_argument("--channel", type=int, default=30)
    r.add_argument("--freq", type=float, default=None, help="default: channel center")
    r.add_argument("--amplitudes", help="comma-separated mV levels (default: 20 from 1 to 100)")
    r.add_argument("--duration", type=float, default=3.0)
    r.add_argument("--settle", type=float, default=1.0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rate_analysis)

    q = sub.add_parser("freq-response", parents=[common], help="channel gain vs frequency")
    q.add_argument("--channel", type=int, default=30)
    q.add_argument("--gain-index", type=int, default=11)
    q.add_argument("--amplitudes", help="comma-separated RMS levels, full-scale units")
    q.add_argument("--freqs", help="comma-separated frequencies, Hz")
    q.add_argument("--n-freqs", type=int, default=41)
    q.add_argument("--noise-rms", type=float, default=0.0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_freq_response)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "seed", None) is None and args.verb == "simulate":
        args.seed = 0
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
