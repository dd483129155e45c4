"""Train-at-one-level, test-across-levels experiment matrix and its CSV reports.

Report files written to ``output_dir``:

``accuracy_cells.csv``
    train_condition, agc, classifier, seed, test_amplitude_mV, accuracy, n_frames, status
``mean_accuracy.csv``
    train_condition, classifier, agc, acc_<a>mV for each test level (mean over seeds), mean
``relative_error.csv``
    train_condition, classifier, seed, acc_non_agc, acc_agc, relative_error_decrease
    (a final ``mean`` seed row per condition averages the seeds)
``report.json``
    spec, config digest and per-cell failures
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..classifiers import TrainConfig, dnn_train, evaluate, lr_train, relative_error_decrease
from ..features import Normalizer, feature_matrix, frame_stream
from .audio import normalize_rms
from .config import CochleaConfig
from .corpus import Corpus, CorpusSpec, load_corpus_dir, synth_corpus
from .simulate import simulate

log = logging.getLogger(__name__)

ALL = "all"
DEFAULT_TRAIN_MV = (5.0, 10.0, 15.0, 50.0, 80.0)
DEFAULT_TEST_MV = (2.0, 2.5, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0, 80.0)
_MODES = {"on": (True,), "off": (False,), "both": (False, True)}
_CLASSIFIERS = {"lr": ("lr",), "dnn": ("dnn",), "both": ("lr", "dnn")}


@dataclass
class ExperimentSpec:
    """One experiment matrix.

    ``corpus`` is a :class:`CorpusSpec` (synthetic, generated with
    ``corpus_seed``) or a directory path laid out as
    ``{train,test}/{speech,noise}/*.wav``. ``include_all`` adds the row
    trained on every training level at once.
    """

    corpus: CorpusSpec | str = field(default_factory=CorpusSpec)
    train_amplitudes_mV: tuple = DEFAULT_TRAIN_MV
    test_amplitudes_mV: tuple = DEFAULT_TEST_MV
    include_all: bool = True
    agc: str = "both"
    classifier: str = "both"
    seeds: tuple = (0, 1, 2, 3, 4, 5)
    frame_ms: float = 400.0
    corpus_seed: int = 0
    output_dir: str | None = None
    write_features: bool = False

    def __post_init__(self):
        for name in ("train_amplitudes_mV", "test_amplitudes_mV"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals or min(vals) <= 0:
                raise ValueError(f"{name} must be a non-empty list of positive levels")
            setattr(self, name, vals)
        if self.agc not in _MODES:
            raise ValueError(f"agc must be one of {sorted(_MODES)}")
        if self.classifier not in _CLASSIFIERS:
            raise ValueError(f"classifier must be one of {sorted(_CLASSIFIERS)}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        self.seeds = tuple(int(s) for s in self.seeds)
        if isinstance(self.corpus, dict):
            self.corpus = CorpusSpec(**self.corpus)

    @property
    def conditions(self) -> list:
        conds = [str(_fmt(a)) for a in self.train_amplitudes_mV]
        return conds + [ALL] if self.include_all else conds

    def condition_levels(self, cond: str) -> tuple:
        return self.train_amplitudes_mV if cond == ALL else (float(cond),)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["corpus"] = self.corpus if isinstance(self.corpus, str) else asdict(self.corpus)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if isinstance(d.get("corpus"), dict):
            d["corpus"] = CorpusSpec(**d["corpus"])
        return cls(**d)


def _fmt(a: float):
    return int(a) if float(a).is_integer() else a


@dataclass
class FeatureSet:
    x: np.ndarray
    y: np.ndarray
    recording: np.ndarray
    amplitude: np.ndarray
    agc: bool

    @classmethod
    def concat(cls, sets) -> "FeatureSet":
        sets = list(sets)
        return cls(np.vstack([s.x for s in sets]), np.concatenate([s.y for s in sets]),
                   np.concatenate([s.recording for s in sets]), np.concatenate([s.amplitude for s in sets]),
                   sets[0].agc)


def recording_features(samples, amplitude_mv: float, cfg: CochleaConfig, agc_on: bool,
                       frame_ms: float = 400.0, label: int | None = None):
    """Normalise one recording, simulate it and cut it into feature frames."""
    sim = simulate(normalize_rms(samples, amplitude_mv), cfg, agc_on=agc_on)
    frames = frame_stream(sim.events, sim.gain_trace, sim.duration_us, sim.channels, agc_on, frame_ms, label)
    return feature_matrix(frames), sim


def compute_features(recordings, amplitude_mv: float, cfg: CochleaConfig, agc_on: bool,
                     frame_ms: float = 400.0) -> FeatureSet:
    xs, ys, ids = [], [], []
    for rec in recordings:
        x, _ = recording_features(rec.samples, amplitude_mv, cfg, agc_on, frame_ms, rec.label)
        xs.append(x)
        ys.append(np.full(len(x), rec.label))
        ids.append(np.full(len(x), rec.source_id, dtype=object))
    x = np.vstack(xs)
    return FeatureSet(x, np.concatenate(ys).astype(int), np.concatenate(ids),
                      np.full(len(x), float(amplitude_mv)), agc_on)


FEATURE_HEADER_TAIL = ["label", "recording_id", "amplitude_mV", "agc"]


def write_feature_csv(path, fs: FeatureSet) -> None:
    header = [f"isi_{k}" for k in range(80)] + [f"count_{k}" for k in range(36)] + \
             [f"gain_{k}" for k in range(36)]
    if fs.x.shape[1] != len(header):
        header = [f"f{k}" for k in range(fs.x.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header + FEATURE_HEADER_TAIL)
        for row, lab, rid, amp in zip(fs.x, fs.y, fs.recording, fs.amplitude):
            w.writerow([repr(float(v)) for v in row] + [int(lab), rid, repr(float(amp)), int(fs.agc)])


def read_feature_csv(path) -> FeatureSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no feature rows")
    n_feat = len(rows[0]) - len(FEATURE_HEADER_TAIL)
    x = np.array([[float(v) for v in r[:n_feat]] for r in body])
    return FeatureSet(x, np.array([int(r[n_feat]) for r in body]), np.array([r[n_feat + 1] for r in body], dtype=object),
                      np.array([float(r[n_feat + 2]) for r in body]), bool(int(body[0][n_feat + 3])))


def train_model(kind: str, x, y, seed: int, config: TrainConfig | None = None):
    config = config or TrainConfig(seed=seed)
    if kind == "lr":
        return lr_train(x, y, config)
    if kind == "dnn":
        return dnn_train(x, y, config)
    raise ValueError(f"unknown classifier {kind!r}")


@dataclass
class Cell:
    train_condition: str
    agc: bool
    classifier: str
    seed: int
    test_amplitude_mV: float
    accuracy: float
    n_frames: int
    status: str = "ok"


@dataclass
class ExperimentReport:
    cells: list
    mean_table: list
    relative_error: list
    failures: list
    spec: dict
    config_digest: str

    def mean_accuracy(self, condition: str, classifier: str, agc: bool) -> float:
        for row in self.mean_table:
            if row["train_condition"] == condition and row["classifier"] == classifier and row["agc"] == int(agc):
                return row["mean"]
        raise KeyError((condition, classifier, agc))

    def mean_relative_error(self, condition: str, classifier: str) -> float:
        for row in self.relative_error:
            if row["train_condition"] == condition and row["classifier"] == classifier and row["seed"] == "mean":
                return row["relative_error_decrease"]
        raise KeyError((condition, classifier))


def load_corpus(spec: ExperimentSpec) -> Corpus:
    if isinstance(spec.corpus, (str, Path)):
        return load_corpus_dir(spec.corpus)
    return synth_corpus(spec.corpus, spec.corpus_seed)


def run_experiment(spec: ExperimentSpec, cfg: CochleaConfig | None = None,
                   corpus: Corpus | None = None) -> ExperimentReport:
    """Run the full matrix; failures are recorded per cell and the run goes on."""
    cfg = cfg or CochleaConfig()
    corpus = corpus or load_corpus(spec)
    train_recs, test_recs = corpus.split("train"), corpus.split("test")
    out_dir = Path(spec.output_dir) if spec.output_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    cache: dict = {}

    def features(split, amp, agc_on):
        key = (split, float(amp), agc_on)
        if key not in cache:
            log.info("features split=%s amplitude=%s agc=%s", split, amp, agc_on)
            cache[key] = compute_features(train_recs if split == "train" else test_recs, amp, cfg, agc_on,
                                          spec.frame_ms)
            if out_dir and spec.write_features:
                fdir = out_dir / "features"
                fdir.mkdir(exist_ok=True)
                write_feature_csv(fdir / f"{split}_{_fmt(amp)}mV_agc{int(agc_on)}.csv", cache[key])
        return cache[key]

    cells, failures = [], []
    for agc_on in _MODES[spec.agc]:
        test = FeatureSet.concat(features("test", a, agc_on) for a in spec.test_amplitudes_mV)
        for cond in spec.conditions:
            train = FeatureSet.concat(features("train", a, agc_on) for a in spec.condition_levels(cond))
            norm = Normalizer.fit(train.x)
            xtr, xte = norm.transform(train.x), norm.transform(test.x)
            for clf in _CLASSIFIERS[spec.classifier]:
                lr_cache = None
                for seed in spec.seeds:
                    try:
                        if clf == "lr":
                            # full-batch from zero weights: the seed has no effect
                            lr_cache = lr_cache or train_model("lr", xtr, train.y, seed)
                            model = lr_cache
                        else:
                            model = train_model(clf, xtr, train.y, seed)
                        ev = evaluate(model, xte, test.y, test.amplitude)
                        for a in spec.test_amplitudes_mV:
                            cells.append(Cell(cond, agc_on, clf, seed, a, ev.per_amplitude[a],
                                              int(np.sum(test.amplitude == a))))
                    except Exception as exc:  # noqa: BLE001 - recorded, run continues
                        msg = f"{type(exc).__name__}: {exc}"
                        log.warning("cell failed %s %s %s %s: %s", cond, agc_on, clf, seed, msg)
                        failures.append({"train_condition": cond, "agc": agc_on, "classifier": clf,
                                         "seed": seed, "error": msg})
                        for a in spec.test_amplitudes_mV:
                            cells.append(Cell(cond, agc_on, clf, seed, a, float("nan"), 0, "error"))

    report = ExperimentReport(cells, _mean_table(cells, spec), _relative_error(cells, spec), failures,
                              spec.to_dict(), cfg.digest())
    if out_dir:
        write_report(report, spec, out_dir)
    return report


def _mean_table(cells, spec) -> list:
    rows = []
    for cond in spec.conditions:
        for clf in _CLASSIFIERS[spec.classifier]:
            for agc_on in _MODES[spec.agc]:
                row = {"train_condition": cond, "classifier": clf, "agc": int(agc_on)}
                vals = []
                for a in spec.test_amplitudes_mV:
                    accs = [c.accuracy for c in cells if c.train_condition == cond and c.classifier == clf
                            and c.agc == agc_on and c.test_amplitude_mV == a]
                    v = float(np.mean(accs)) if accs else float("nan")
                    row[f"acc_{_fmt(a)}mV"] = v
                    vals.append(v)
                row["mean"] = float(np.mean(vals))
                rows.append(row)
    return rows


def _relative_error(cells, spec) -> list:
    if spec.agc != "both":
        return []
    rows = []
    for cond in spec.conditions:
        for clf in _CLASSIFIERS[spec.classifier]:
            reds = []
            for seed in spec.seeds:
                acc = {}
                for agc_on in (False, True):
                    acc[agc_on] = float(np.mean([c.accuracy for c in cells if c.train_condition == cond
                                                 and c.classifier == clf and c.seed == seed and c.agc == agc_on]))
                try:
                    red = relative_error_decrease(acc[True], acc[False])
                except ValueError:
                    red = float("nan")
                reds.append(red)
                rows.append({"train_condition": cond, "classifier": clf, "seed": seed,
                             "acc_non_agc": acc[False], "acc_agc": acc[True], "relative_error_decrease": red})
            mean_non = float(np.mean([r["acc_non_agc"] for r in rows[-len(spec.seeds):]]))
            mean_agc = float(np.mean([r["acc_agc"] for r in rows[-len(spec.seeds):]]))
            rows.append({"train_condition": cond, "classifier": clf, "seed": "mean", "acc_non_agc": mean_non,
                         "acc_agc": mean_agc, "relative_error_decrease": float(np.mean(reds))})
    return rows


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (r[h] for h in header)])


def write_report(report: ExperimentReport, spec: ExperimentSpec, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    cell_header = ["train_condition", "agc", "classifier", "seed", "test_amplitude_mV", "accuracy", "n_frames", "status"]
    cell_rows = [dict(asdict(c), agc=int(c.agc)) for c in report.cells]
    _write_rows(out_dir / "accuracy_cells.csv", cell_header, cell_rows)
    mean_header = ["train_condition", "classifier", "agc"] + \
                  [f"acc_{_fmt(a)}mV" for a in spec.test_amplitudes_mV] + ["mean"]
    _write_rows(out_dir / "mean_accuracy.csv", mean_header, report.mean_table)
    if report.relative_error:
        _write_rows(out_dir / "relative_error.csv",
                    ["train_condition", "classifier", "seed", "acc_non_agc", "acc_agc", "relative_error_decrease"],
                    report.relative_error)
    summary = {"spec": report.spec, "config_digest": report.config_digest, "failures": report.failures,
               "n_cells": len(report.cells)}
    (out_dir / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
