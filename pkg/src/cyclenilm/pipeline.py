"""Hybrid per-cycle predictor, evaluation metrics, latency benchmark, experiments.

The hybrid predictor runs, for every cycle: feature extraction (once),
the binary classifier bank, then every load's regressor on
features ⊕ predicted state bits. Batch prediction walks the cycles one at
a time through the same code path as streaming, so both give bit-identical
results.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from cyclenilm.classify import ClassifierBank, ForestParams, train_binary_bank
from cyclenilm.dataset import ObservationSet, split_strategy1, split_strategy2
from cyclenilm.errors import LengthMismatch, NilmError
from cyclenilm.features import WaveShapeConfig, extract_feature_array, schema_hash
from cyclenilm.regress import MlpHyper, RegressorBank, train_regressor_bank
from cyclenilm.waveform import (CYCLE_LENGTH, NOMINAL_FREQ, CycleObservation,
                                StreamingSegmenter, Waveform, detect_zero_crossings,
                                resample_span, segment_cycles, _valid_pair)

RESPONSE_BUDGET_S = 10 / 60
CYCLE_BUDGET_S = 1 / 60
MIN_BENCH_CYCLES = 1000
STAGES = ("segmentation", "features", "classify", "regress")


@dataclass
class HybridPredictor:
    """Classifier bank + regressor bank sharing one feature layout."""

    bank: ClassifierBank
    regressors: RegressorBank
    feature_cfg: WaveShapeConfig = field(default_factory=WaveShapeConfig)
    n_samples: int = CYCLE_LENGTH
    budget_s: float = RESPONSE_BUDGET_S
    feature_calls: int = 0

    def __post_init__(self) -> None:
        expected = schema_hash(self.feature_cfg, self.n_samples)
        for name, h in (("classifier bank", self.bank.schema),
                        ("regressor bank", self.regressors.schema)):
            if h and h != expected:
                raise NilmError(f"{name} was trained on feature schema {h}, "
                                f"predictor uses {expected}")
        if self.bank.n_loads != self.regressors.n_loads:
            raise NilmError("classifier and regressor banks cover different loads")

    @property
    def n_loads(self) -> int:
        return self.bank.n_loads

    def features(self, cycle: CycleObservation | np.ndarray) -> np.ndarray:
        self.feature_calls += 1
        return extract_feature_array(cycle, self.feature_cfg)

    def classify(self, x: np.ndarray) -> np.ndarray:
        return self.bank.predict_one(x)

    def regress(self, x: np.ndarray, state: np.ndarray) -> np.ndarray:
        return self.regressors.predict_one(np.concatenate([x, state.astype(np.float64)]))


def hybrid_predict(p: HybridPredictor, cycle: CycleObservation | np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """(state vector, per-load RMS) for one cycle.

    RMS is reported for every load as the regressor produced it, including
    loads predicted OFF.
    """
    x = p.features(cycle)
    state = p.classify(x)
    return state, p.regress(x, state)


def predict_cycles(p: HybridPredictor, cycles: Iterable[CycleObservation | np.ndarray]
                   ) -> tuple[np.ndarray, np.ndarray]:
    states, rms = [], []
    for c in cycles:
        s, r = hybrid_predict(p, c)
        states.append(s)
        rms.append(r)
    if not states:
        return np.zeros((0, p.n_loads), np.uint8), np.zeros((0, p.n_loads))
    return np.stack(states), np.stack(rms)


def predict_trace(p: HybridPredictor, i_tot: Waveform, ref: Waveform | None = None,
                  nominal_freq: float = NOMINAL_FREQ
                  ) -> tuple[list[CycleObservation], np.ndarray, np.ndarray]:
    """Segment a whole trace, then predict every cycle."""
    cycles = segment_cycles(i_tot, ref=ref, n_samples=p.n_samples, nominal_freq=nominal_freq)
    states, rms = predict_cycles(p, cycles)
    return cycles, states, rms


@dataclass
class StreamingPredictor:
    """Feeds sample chunks through a streaming segmenter into the hybrid predictor.

    ``band`` is the absolute hysteresis band used for crossing detection; a
    live stream cannot know its own peak in advance.
    """

    predictor: HybridPredictor
    sample_rate: float
    band: float
    nominal_freq: float = NOMINAL_FREQ

    def __post_init__(self) -> None:
        self._seg = StreamingSegmenter(self.sample_rate, self.band, self.nominal_freq,
                                       self.predictor.n_samples)

    def _emit(self, cycles: list[CycleObservation]
              ) -> list[tuple[CycleObservation, np.ndarray, np.ndarray]]:
        return [(c, *hybrid_predict(self.predictor, c)) for c in cycles]

    def push(self, current: np.ndarray, reference: np.ndarray | None = None
             ) -> list[tuple[CycleObservation, np.ndarray, np.ndarray]]:
        return self._emit(self._seg.push(current, reference))

    def flush(self) -> list[tuple[CycleObservation, np.ndarray, np.ndarray]]:
        return self._emit(self._seg.flush())


def stream_trace(p: HybridPredictor, i_tot: Waveform, ref: Waveform | None = None,
                 chunk: int = 4096, band: float | None = None
                 ) -> list[tuple[CycleObservation, np.ndarray, np.ndarray]]:
    """Stream a recorded trace chunk by chunk (for testing and the CLI)."""
    src = ref if ref is not None else i_tot
    if band is None:
        band = 0.02 * float(np.max(np.abs(src.samples)))
    sp = StreamingPredictor(p, i_tot.sample_rate, band)
    out = []
    for s in range(0, len(i_tot), chunk):
        r = ref.samples[s:s + chunk] if ref is not None else None
        out.extend(sp.push(i_tot.samples[s:s + chunk], r))
    out.extend(sp.flush())
    return out


# -- metrics ------------------------------------------------------------------

def evaluate_classification(preds: np.ndarray, truth: np.ndarray) -> dict:
    """Per-load accuracy, their mean, exact-match rate and confusion counts."""
    preds = np.atleast_2d(np.asarray(preds)).astype(np.int64)
    truth = np.atleast_2d(np.asarray(truth)).astype(np.int64)
    if preds.shape != truth.shape:
        raise LengthMismatch(f"prediction shape {preds.shape} != truth shape {truth.shape}")
    if preds.shape[0] == 0:
        raise LengthMismatch("no rows to evaluate")
    correct = preds == truth
    per_load = correct.mean(axis=0)
    confusion = {
        "tp": ((preds == 1) & (truth == 1)).sum(axis=0).tolist(),
        "fp": ((preds == 1) & (truth == 0)).sum(axis=0).tolist(),
        "tn": ((preds == 0) & (truth == 0)).sum(axis=0).tolist(),
        "fn": ((preds == 0) & (truth == 1)).sum(axis=0).tolist(),
    }
    return {"per_load": per_load.tolist(), "overall": float(per_load.mean()),
            "exact_match": float(correct.all(axis=1).mean()), "confusion": confusion}


OFF_TOLERANCE_A = 0.2
ON_TOLERANCE = 0.10


def regression_correct(pred_rms: np.ndarray, true_rms: np.ndarray, true_state: np.ndarray
                       ) -> np.ndarray:
    """ON: within 10 % of the true RMS; OFF: prediction within 0.2 A of zero."""
    pred_rms = np.atleast_2d(np.asarray(pred_rms, dtype=np.float64))
    true_rms = np.atleast_2d(np.asarray(true_rms, dtype=np.float64))
    true_state = np.atleast_2d(np.asarray(true_state))
    if not pred_rms.shape == true_rms.shape == true_state.shape:
        raise LengthMismatch("prediction, truth and state arrays are not aligned")
    on = true_state == 1
    return np.where(on, np.abs(pred_rms - true_rms) <= ON_TOLERANCE * true_rms,
                    np.abs(pred_rms) <= OFF_TOLERANCE_A)


def evaluate_regression(pred_rms: np.ndarray, true_rms: np.ndarray, true_state: np.ndarray
                        ) -> dict:
    ok = regression_correct(pred_rms, true_rms, true_state)
    if ok.shape[0] == 0:
        raise LengthMismatch("no rows to evaluate")
    per_load = ok.mean(axis=0)
    return {"per_load": per_load.tolist(), "overall": float(per_load.mean())}


@dataclass
class EvalReport:
    per_load_class_acc: list[float]
    overall_class_acc: float
    exact_match: float
    per_load_reg_acc: list[float]
    overall_reg_acc: float
    per_load_reg_acc_truth: list[float]
    overall_reg_acc_truth: float
    confusion: dict
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


def evaluate_models(bank: ClassifierBank, regressors: RegressorBank, test: ObservationSet,
                    meta: dict | None = None) -> EvalReport:
    """Score a trained pair on labeled feature rows (vectorized)."""
    pred_states = bank.predict(test.features)
    cls = evaluate_classification(pred_states, test.states)
    hybrid = regressors.predict(np.hstack([test.features, pred_states]))
    truth = regressors.predict(np.hstack([test.features, test.states]))
    reg = evaluate_regression(hybrid, test.rms, test.states)
    reg_t = evaluate_regression(truth, test.rms, test.states)
    return EvalReport(cls["per_load"], cls["overall"], cls["exact_match"], reg["per_load"],
                      reg["overall"], reg_t["per_load"], reg_t["overall"], cls["confusion"],
                      dict(meta or {}))


# -- latency ------------------------------------------------------------------

@dataclass
class LatencyReport:
    """Per-cycle stage timings in seconds, shape (n, 4) in ``STAGES`` order."""

    timings: np.ndarray
    total: np.ndarray

    @property
    def n(self) -> int:
        return self.timings.shape[0]

    @property
    def processing(self) -> np.ndarray:
        """Features + classify + regress per cycle."""
        return self.timings[:, 1:].sum(axis=1)

    def summary(self) -> dict:
        out = {}
        for j, name in enumerate(STAGES):
            out[name] = {"mean_ms": float(self.timings[:, j].mean() * 1e3),
                         "p99_ms": float(np.percentile(self.timings[:, j], 99) * 1e3)}
        for name, arr in (("processing", self.processing), ("total", self.total)):
            out[name] = {"mean_ms": float(arr.mean() * 1e3),
                         "p99_ms": float(np.percentile(arr, 99) * 1e3)}
        out["n_cycles"] = self.n
        out["dominant_stage"] = STAGES[int(np.argmax(self.timings.mean(axis=0)))]
        out["within_cycle_budget"] = bool(self.processing.mean() <= CYCLE_BUDGET_S)
        out["within_response_budget"] = bool(self.total.mean() <= RESPONSE_BUDGET_S)
        return out


def benchmark_latency(p: HybridPredictor, cycles: Sequence[CycleObservation] | np.ndarray,
                      n: int = 10_000, source: Waveform | None = None,
                      warmup: int = 20) -> LatencyReport:
    """Wall-clock each stage for ``n`` cycles, reusing ``cycles`` round-robin.

    When ``source`` is given, the segmentation stage re-cuts each cycle from
    the raw trace (``start``/``span`` of the observation); otherwise it is 0.
    File I/O and model loading are outside the timed region.
    """
    if len(cycles) == 0:
        raise NilmError("no cycles to benchmark")
    if n < MIN_BENCH_CYCLES:
        raise NilmError(f"benchmark needs at least {MIN_BENCH_CYCLES} cycles, got {n}")
    clock = time.perf_counter
    for i in range(min(warmup, len(cycles))):
        hybrid_predict(p, cycles[i])
    timings = np.empty((n, 4))
    total = np.empty(n)
    for i in range(n):
        c = cycles[i % len(cycles)]
        t0 = clock()
        if source is not None and isinstance(c, CycleObservation):
            c = CycleObservation(resample_span(source.samples, c.start, c.start + c.span,
                                               p.n_samples), c.start_index)
        t1 = clock()
        x = p.features(c)
        t2 = clock()
        s = p.classify(x)
        t3 = clock()
        p.regress(x, s)
        t4 = clock()
        timings[i] = (t1 - t0, t2 - t1, t3 - t2, t4 - t3)
        total[i] = t4 - t0
    return LatencyReport(timings, total)


# -- experiments --------------------------------------------------------------

@dataclass
class ExperimentConfig:
    forest: ForestParams = field(default_factory=ForestParams)
    mlp: MlpHyper = field(default_factory=MlpHyper)
    split_ratio: float = 0.8
    train_regressors: bool = True


def train_predictor_models(train: ObservationSet, cfg: ExperimentConfig, seed: int,
                           schema: str = "") -> tuple[ClassifierBank, RegressorBank | None]:
    bank = train_binary_bank(train.features, train.states, cfg.forest, seed, schema=schema)
    regs = None
    if cfg.train_regressors:
        regs = train_regressor_bank(train.features, train.states, train.rms, cfg.mlp, seed)
        regs.schema = schema
    return bank, regs


def run_single(train: ObservationSet, test: ObservationSet, cfg: ExperimentConfig,
               seed: int, meta: dict) -> EvalReport:
    bank, regs = train_predictor_models(train, cfg, seed)
    if regs is None:
        cls = evaluate_classification(bank.predict(test.features), test.states)
        return EvalReport(cls["per_load"], cls["overall"], cls["exact_match"], [], float("nan"),
                          [], float("nan"), cls["confusion"], meta)
    return evaluate_models(bank, regs, test, meta)


def iter_runs(data: ObservationSet, strategy: str, seeds: Sequence[int]
              ) -> Iterator[tuple[ObservationSet, ObservationSet, int, dict]]:
    if strategy == "split80":
        for s in seeds:
            tr, te = split_strategy1(data, 0.8, s)
            yield tr, te, s, {"strategy": strategy, "seed": s}
    elif strategy == "holdout-each":
        seed = seeds[0] if seeds else 0
        for h in np.unique(data.dataset_id):
            tr, te = split_strategy2(data, int(h))
            yield tr, te, seed, {"strategy": strategy, "seed": seed, "holdout": int(h)}
    else:
        raise NilmError(f"unknown strategy {strategy!r}")


def aggregate_reports(reports: Sequence[EvalReport]) -> dict:
    """Median and quartiles per load across runs for every accuracy field."""
    out = {}
    for key in ("per_load_class_acc", "per_load_reg_acc", "per_load_reg_acc_truth"):
        arr = np.array([getattr(r, key) for r in reports], dtype=np.float64)
        if arr.size == 0 or arr.ndim != 2 or arr.shape[1] == 0:
            continue
        q1, med, q3 = np.percentile(arr, [25, 50, 75], axis=0)
        out[key] = {"median": med.tolist(), "q1": q1.tolist(), "q3": q3.tolist(),
                    "min": arr.min(0).tolist(), "max": arr.max(0).tolist()}
    for key in ("overall_class_acc", "exact_match", "overall_reg_acc", "overall_reg_acc_truth"):
        arr = np.array([getattr(r, key) for r in reports], dtype=np.float64)
        q1, med, q3 = np.percentile(arr, [25, 50, 75])
        out[key] = {"median": float(med), "q1": float(q1), "q3": float(q3)}
    out["n_runs"] = len(reports)
    return out


def write_aggregate_csv(path: str | Path, agg: dict, n_loads: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "load", "median", "q1", "q3"])
        for key in ("per_load_class_acc", "per_load_reg_acc", "per_load_reg_acc_truth"):
            if key not in agg:
                continue
            for i in range(n_loads):
                w.writerow([key, i + 1, agg[key]["median"][i], agg[key]["q1"][i],
                            agg[key]["q3"][i]])
        for key in ("overall_class_acc", "exact_match", "overall_reg_acc",
                    "overall_reg_acc_truth"):
            w.writerow([key, "all", agg[key]["median"], agg[key]["q1"], agg[key]["q3"]])


def run_experiment(data: ObservationSet, strategy: str = "split80",
                   seeds: Sequence[int] = tuple(range(7)),
                   cfg: ExperimentConfig = ExperimentConfig(),
                   out_dir: str | Path | None = None) -> tuple[list[EvalReport], dict]:
    """Train and score one model pair per run; optionally write JSON + CSV.

    ``split80`` runs once per seed; ``holdout-each`` runs once per data set.
    """
    reports = []
    for tr, te, seed, meta in iter_runs(data, strategy, seeds):
        meta = {**meta, "n_train": len(tr), "n_test": len(te)}
        reports.append(run_single(tr, te, cfg, seed, meta))
    agg = aggregate_reports(reports)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for k, r in enumerate(reports):
            (out / f"run_{k:02d}.json").write_text(r.to_json())
        (out / "aggregate.json").write_text(json.dumps(agg, indent=1))
        write_aggregate_csv(out / "aggregate.csv", agg, data.n_loads)
    return reports, agg


def trace_cycle_pairs(ref: Waveform, nominal_freq: float = NOMINAL_FREQ
                      ) -> list[tuple[int, float, float]]:
    xs = detect_zero_crossings(ref, nominal_freq)
    period = ref.sample_rate / nominal_freq
    return [(k, float(xs[k]), float(xs[k + 1])) for k in range(len(xs) - 1)
            if _valid_pair(xs[k], xs[k + 1], period)]
