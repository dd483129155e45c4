import json

import numpy as np
import pytest

from cochlea_agc.adm import EVENT_DTYPE
from cochlea_agc.cli import main
from cochlea_agc.harness.config import CochleaConfig, load_config, parse_channels
from cochlea_agc.harness.corpus import CorpusSpec
from cochlea_agc.harness.events import EventFileHeader, read_events, write_events
from cochlea_agc.harness.experiment import (ALL, ExperimentSpec, read_feature_csv, run_experiment,
                                            write_feature_csv)
from cochlea_agc.harness.simulate import simulate
from cochlea_agc.harness.traces import read_gain_trace, read_window_trace, write_gain_trace, write_window_trace


def _random_events(n, seed=0):
    rng = np.random.default_rng(seed)
    ev = np.zeros(n, dtype=EVENT_DTYPE)
    ev["timestamp_us"] = np.sort(rng.integers(0, 10**9, n))
    ev["channel"] = rng.integers(0, 64, n)
    ev["polarity"] = rng.integers(0, 2, n)
    ev["gain_index"] = rng.integers(0, 12, n)
    return ev


def test_event_file_roundtrip(tmp_path):
    cfg = CochleaConfig()
    ev = _random_events(10_000)
    hdr = EventFileHeader.from_config(cfg, True, amplitude_mV=15.0, label=1, source_id="x", duration_us=10**9)
    write_events(tmp_path / "a.events", hdr, ev)
    hdr2, ev2 = read_events(tmp_path / "a.events")
    assert hdr2 == hdr
    assert np.array_equal(ev2, ev)


def test_event_file_rejects_corruption(tmp_path):
    hdr = EventFileHeader.from_config(CochleaConfig(), False)
    path = tmp_path / "a.events"
    write_events(path, hdr, _random_events(10))
    data = path.read_bytes()
    (tmp_path / "magic.events").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValueError, match="magic"):
        read_events(tmp_path / "magic.events")
    (tmp_path / "short.events").write_bytes(data[:-5])
    with pytest.raises(ValueError, match="bytes"):
        read_events(tmp_path / "short.events")
    (tmp_path / "ver.events").write_bytes(data[:4] + b"\x09\x00" + data[6:])
    with pytest.raises(ValueError, match="version"):
        read_events(tmp_path / "ver.events")


def test_traces_roundtrip(tmp_path):
    res = simulate(0.3 * np.sin(2 * np.pi * 480 * np.arange(22050) / 44100), CochleaConfig().with_channels(28, 32))
    write_gain_trace(tmp_path / "g.csv", res.gain_trace)
    write_window_trace(tmp_path / "w.csv", res.windows)
    assert np.array_equal(read_gain_trace(tmp_path / "g.csv"), res.gain_trace)
    assert np.array_equal(read_window_trace(tmp_path / "w.csv"), res.windows)


def test_parse_channels():
    assert parse_channels("12-47") == (12, 47)
    assert parse_channels("47-12") == (12, 47)
    assert parse_channels("56hz-4khz") == (12, 47)
    assert parse_channels("ALL") == (1, 63)
    lo, hi = parse_channels("100hz-2khz")
    assert lo < hi and hi - lo > 10
    with pytest.raises(ValueError):
        parse_channels("low-high")


def test_config_roundtrip(tmp_path):
    cfg = CochleaConfig()
    assert len(cfg.channels) == 36
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path) == cfg
    path.write_text(json.dumps({"channels": "all", "agc": {"t_upper": 20}, "adm": {"delta": 0.3}}))
    c2 = load_config(path)
    assert len(c2.channels) == 63 and c2.agc.t_upper == 20 and c2.delta == 0.3
    assert c2.digest() != cfg.digest()
    with pytest.raises(ValueError):
        CochleaConfig(delta=0.0)


def _small_spec(out=None):
    return ExperimentSpec(corpus=CorpusSpec(16, 16, 2.0), train_amplitudes_mV=(15,), test_amplitudes_mV=(5, 50),
                          classifier="lr", seeds=(0,), output_dir=out)


@pytest.fixture(scope="module")
def small_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    cfg = CochleaConfig().with_channels(20, 40)
    return run_experiment(_small_spec(str(out)), cfg), out, cfg


def test_small_experiment_shape(small_report):
    report, out, _ = small_report
    assert not report.failures
    assert {c.train_condition for c in report.cells} == {"15", ALL}
    # 2 conditions x 2 agc modes x 1 classifier x 1 seed x 2 test levels
    assert len(report.cells) == 8
    for row in report.mean_table:
        accs = [row["acc_5mV"], row["acc_50mV"]]
        assert row["mean"] == pytest.approx(np.mean(accs))
        assert all(0.0 <= a <= 1.0 for a in accs)
    assert report.mean_relative_error("15", "lr") == report.relative_error[1]["relative_error_decrease"]
    for name in ("accuracy_cells.csv", "mean_accuracy.csv", "relative_error.csv", "report.json"):
        assert (out / name).stat().st_size > 0


def test_experiment_is_deterministic(small_report, tmp_path):
    _, out, cfg = small_report
    run_experiment(_small_spec(str(tmp_path)), cfg)
    for name in ("accuracy_cells.csv", "mean_accuracy.csv", "relative_error.csv"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()


def test_experiment_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(train_amplitudes_mV=())
    with pytest.raises(ValueError):
        ExperimentSpec(agc="maybe")
    with pytest.raises(ValueError):
        ExperimentSpec(seeds=())
    spec = _small_spec()
    assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_feature_csv_roundtrip(tmp_path):
    from cochlea_agc.harness.experiment import FeatureSet
    rng = np.random.default_rng(0)
    fs = FeatureSet(rng.random((5, 152)), np.array([0, 1, 0, 1, 1]), np.array(["a", "a", "b", "b", "c"]),
                    np.full(5, 15.0), True)
    write_feature_csv(tmp_path / "f.csv", fs)
    back = read_feature_csv(tmp_path / "f.csv")
    assert back.agc is True and np.array_equal(back.x, fs.x) and np.array_equal(back.y, fs.y)
    assert list(back.recording) == list(fs.recording) and np.array_equal(back.amplitude, fs.amplitude)


def test_cli_pipeline(tmp_path):
    out = tmp_path / "sim"
    common = ["--channels", "25-35", "--seed", "1"]
    for label, kind in ((1, "speech"), (0, "noise")):
        assert main(["simulate", "--synth", kind, "--duration", "1.2", "--amplitude", "15", "--label", str(label),
                     "--agc", "on", "--out", str(out)] + common) == 0
    events = sorted(str(p) for p in out.glob("*.events"))
    assert len(events) == 2 and len(list(out.glob("*.gains.csv"))) == 2
    feats = tmp_path / "f.csv"
    assert main(["features", "--events", *events, "--out", str(feats)] + common) == 0
    fs = read_feature_csv(feats)
    # 3 frames per clip; 80 ISI bins plus count and gain for 11 channels
    assert fs.x.shape == (6, 80 + 2 * 11)
    model = tmp_path / "m.json"
    assert main(["train", "--features", str(feats), "--classifier", "lr", "--out", str(model)] + common) == 0
    res = tmp_path / "eval.json"
    assert main(["evaluate", "--model", str(model), "--features", str(feats), "--out", str(res)] + common) == 0
    assert json.loads(res.read_text())["accuracy"] >= 0.5


def test_cli_analysis_verbs(tmp_path):
    assert main(["rate-analysis", "--amplitudes", "5,20", "--duration", "1.5", "--settle", "0.5",
                 "--out", str(tmp_path / "ra.csv")]) == 0
    assert len((tmp_path / "ra.csv").read_text().splitlines()) == 3
    assert main(["freq-response", "--n-freqs", "5", "--out", str(tmp_path / "fr.csv")]) == 0
    assert (tmp_path / "fr.csv").exists()


def test_cli_bad_input(tmp_path):
    with pytest.raises(SystemExit):
        main(["simulate", "--out", str(tmp_path)])
    assert main(["simulate", "--input", str(tmp_path / "missing.wav"), "--out", str(tmp_path)]) != 0
