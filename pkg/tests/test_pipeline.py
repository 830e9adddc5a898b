from __future__ import annotations

import json

import numpy as np
import pytest

from cyclenilm.classify import ForestParams
from cyclenilm.dataset import DatasetConfig, build_dataset
from cyclenilm.errors import LengthMismatch, NilmError
from cyclenilm.features import WaveShapeConfig, schema_hash
from cyclenilm.pipeline import (ExperimentConfig, HybridPredictor, aggregate_reports,
                                benchmark_latency, evaluate_classification, evaluate_models,
                                evaluate_regression, hybrid_predict, predict_cycles,
                                predict_trace, run_experiment, stream_trace,
                                train_predictor_models)
from cyclenilm.regress import MlpHyper
from cyclenilm.simulate import (OFF, Event, LoadSpec, Schedule, Transient,
                                make_load_signature, synthesize_scenario, CFL_PROFILE)
from cyclenilm.waveform import CYCLE_LENGTH, CycleObservation, segment_cycles

FAST = ExperimentConfig(forest=ForestParams(n_trees=15),
                        mlp=MlpHyper(hidden=(48, 48, 48), max_epochs=40, patience=8))


def _palette() -> list[LoadSpec]:
    return [
        LoadSpec(1, "resistive", 10.0, operating_levels=(1.0, 0.7), name="heater"),
        LoadSpec(2, "rectifier_cfl", 1.4, harmonic_profile=CFL_PROFILE, name="cfl"),
        LoadSpec(3, "induction_motor", 4.0,
                 harmonic_profile={1: (1.0, 0.0), 3: (0.08, 1.0), 5: (0.04, 0.3)},
                 turn_on_transient=Transient(8, "inrush_spike", 3.0), name="motor",
                 phase_offset=-0.45),
    ]


def _scenario(dataset_id: int, seed: int):
    rng = np.random.default_rng(seed)
    events = []
    for load, levels in ((1, (0, 1)), (2, (0,)), (3, (0,))):
        t, on = 0.0, bool(rng.integers(2))
        while t < 3.0:
            events.append(Event(round(t, 4), load, int(rng.choice(levels)) if on else OFF))
            t += rng.uniform(0.3, 0.9)
            on = not on
    events.sort(key=lambda e: (e.time_s, e.load_id))
    return synthesize_scenario(_palette(), Schedule(events), 3.0, noise_rms=0.02, seed=seed,
                               drift_std=0.002, dataset_id=dataset_id)


@pytest.fixture(scope="module")
def corpora():
    return [_scenario(k, 10 + k) for k in (1, 2, 3)]


@pytest.fixture(scope="module")
def data(corpora):
    return build_dataset(corpora, DatasetConfig(cycle_stride=2))


@pytest.fixture(scope="module")
def predictor(data):
    schema = schema_hash(WaveShapeConfig(), CYCLE_LENGTH)
    bank, regs = train_predictor_models(data, FAST, seed=0, schema=schema)
    return HybridPredictor(bank, regs)


# -- metrics ------------------------------------------------------------------

def test_classification_perfect_and_single_error():
    truth = np.zeros((100, 2), np.uint8)
    truth[::2, 0] = 1
    assert evaluate_classification(truth, truth)["overall"] == 1.0
    pred = truth.copy()
    pred[5, 1] ^= 1
    rep = evaluate_classification(pred, truth)
    assert rep["per_load"] == [1.0, 0.99]
    assert rep["exact_match"] == 0.99


def test_classification_inverted_and_random(rng):
    truth = rng.integers(0, 2, (4000, 3))
    inv = evaluate_classification(1 - truth, truth)
    assert inv["overall"] == 0.0 and inv["exact_match"] == 0.0
    rnd = evaluate_classification(rng.integers(0, 2, truth.shape), truth)
    assert all(abs(a - 0.5) < 0.05 for a in rnd["per_load"])
    assert rnd["exact_match"] < 0.2


def test_confusion_counts_sum_to_rows(rng):
    truth = rng.integers(0, 2, (50, 2))
    pred = rng.integers(0, 2, (50, 2))
    c = evaluate_classification(pred, truth)["confusion"]
    for j in range(2):
        assert c["tp"][j] + c["fp"][j] + c["tn"][j] + c["fn"][j] == 50
        assert c["tp"][j] + c["fn"][j] == truth[:, j].sum()


def test_classification_length_mismatch():
    with pytest.raises(LengthMismatch):
        evaluate_classification(np.zeros((3, 2)), np.zeros((4, 2)))


@pytest.mark.parametrize("pred, true, state, ok", [
    (10.5, 10.0, 1, True),
    (12.0, 10.0, 1, False),
    (9.0, 10.0, 1, True),
    (0.15, 0.0, 0, True),
    (0.25, 0.0, 0, False),
])
def test_regression_rule(pred, true, state, ok):
    rep = evaluate_regression(np.array([[pred]]), np.array([[true]]), np.array([[state]]))
    assert rep["overall"] == float(ok)


def test_regression_length_mismatch():
    with pytest.raises(LengthMismatch):
        evaluate_regression(np.zeros((2, 1)), np.zeros((3, 1)), np.zeros((2, 1)))


# -- hybrid predictor ----------------------------------------------------------

def test_schema_mismatch_rejected(predictor):
    with pytest.raises(NilmError):
        HybridPredictor(predictor.bank, predictor.regressors,
                        WaveShapeConfig(epsilon=0.5))


def test_feature_extraction_once_per_cycle(predictor, corpora):
    cycles = segment_cycles(corpora[0].i_tot)[:12]
    before = predictor.feature_calls
    states, rms = predict_cycles(predictor, cycles)
    assert predictor.feature_calls - before == len(cycles)
    assert states.shape == rms.shape == (12, 3)


def test_quiet_cycle_predicts_all_off(predictor):
    noise = np.random.default_rng(7).normal(scale=0.02, size=CYCLE_LENGTH)
    state, rms = hybrid_predict(predictor, noise)
    assert state.tolist() == [0, 0, 0]
    assert np.all(rms < 0.2)


def test_single_resistive_load_cycle(predictor):
    wave = make_load_signature(_palette()[0], 0, 0.0, 1)
    cycle = CycleObservation(wave.samples[:CYCLE_LENGTH], 0)
    state, rms = hybrid_predict(predictor, cycle)
    assert state.tolist() == [1, 0, 0]
    assert abs(rms[0] - 10.0) <= 1.0


def test_evaluate_models_truth_and_hybrid(predictor, data):
    rep = evaluate_models(predictor.bank, predictor.regressors, data, {"note": "train"})
    assert 0.0 <= rep.overall_reg_acc <= 1.0
    assert rep.overall_class_acc > 0.95
    assert json.loads(rep.to_json())["meta"] == {"note": "train"}


# -- latency -------------------------------------------------------------------

def test_benchmark_accounting(predictor, corpora):
    cycles = segment_cycles(corpora[0].i_tot)[:50]
    rep = benchmark_latency(predictor, cycles, n=1000, source=corpora[0].i_tot)
    assert rep.n == 1000 and rep.timings.shape == (1000, 4)
    stage_sum = rep.timings.sum()
    assert abs(stage_sum - rep.total.sum()) <= 0.05 * rep.total.sum()
    s = rep.summary()
    assert s["n_cycles"] == 1000
    assert set(s) >= {"features", "classify", "regress", "segmentation", "total"}
    assert s["within_cycle_budget"] == (s["processing"]["mean_ms"] <= 1000 / 60)


def test_benchmark_needs_enough_cycles(predictor, corpora):
    cycles = segment_cycles(corpora[0].i_tot)[:5]
    with pytest.raises(NilmError):
        benchmark_latency(predictor, cycles, n=999)
    with pytest.raises(NilmError):
        benchmark_latency(predictor, [], n=1000)


# -- streaming and structure -----------------------------------------------------

@pytest.mark.parametrize("chunk", [777, 4096])
@pytest.mark.parametrize("use_voltage", [False, True])
def test_streaming_matches_batch(predictor, corpora, chunk, use_voltage):
    trace = corpora[1].i_tot
    ref = corpora[1].voltage if use_voltage else None
    cycles, states, rms = predict_trace(predictor, trace, ref=ref)
    streamed = stream_trace(predictor, trace, ref=ref, chunk=chunk)
    assert len(streamed) == len(cycles)
    for (c, s, r), cb, sb, rb in zip(streamed, cycles, states, rms):
        assert c.start_index == cb.start_index
        np.testing.assert_array_equal(c.samples, cb.samples)
        np.testing.assert_array_equal(s, sb)
        np.testing.assert_array_equal(r, rb)


def test_one_prediction_per_cycle(predictor, corpora):
    corpus = corpora[2]
    cycles, states, rms = predict_trace(predictor, corpus.i_tot, ref=corpus.voltage)
    assert len(cycles) == states.shape[0] == rms.shape[0]
    # the simulated voltage crosses zero on the first sample and one past the last,
    # so only the two boundary cycles lack a bracketing crossing pair
    assert len(cycles) == corpus.ground_truth.n_cycles - 2
    starts = np.array([c.start_index for c in cycles])
    assert np.all(np.diff(starts) > 0)


# -- experiments -----------------------------------------------------------------

def test_run_experiment_split80(data, tmp_path):
    cfg = ExperimentConfig(forest=ForestParams(n_trees=5), train_regressors=False)
    reports, agg = run_experiment(data, "split80", seeds=range(7), cfg=cfg, out_dir=tmp_path)
    assert len(reports) == agg["n_runs"] == 7
    per = np.array([r.per_load_class_acc for r in reports])
    med = np.array(agg["per_load_class_acc"]["median"])
    assert np.all(per.min(0) <= med) and np.all(med <= per.max(0))
    assert (tmp_path / "aggregate.csv").exists()
    assert len(list(tmp_path.glob("run_*.json"))) == 7


def test_run_experiment_holdout_each(data):
    cfg = ExperimentConfig(forest=ForestParams(n_trees=5),
                           mlp=MlpHyper(hidden=(8, 8, 8), max_epochs=2))
    reports, agg = run_experiment(data, "holdout-each", seeds=[0], cfg=cfg)
    assert sorted(r.meta["holdout"] for r in reports) == [1, 2, 3]
    med = agg["overall_reg_acc"]["median"]
    vals = [r.overall_reg_acc for r in reports]
    assert min(vals) <= med <= max(vals)


def test_unknown_strategy(data):
    with pytest.raises(NilmError):
        run_experiment(data, "kfold", seeds=[0])


def test_aggregate_quartiles_ordered(data):
    cfg = ExperimentConfig(forest=ForestParams(n_trees=3), train_regressors=False)
    reports, _ = run_experiment(data, "split80", seeds=[0, 1, 2], cfg=cfg)
    agg = aggregate_reports(reports)
    a = agg["per_load_class_acc"]
    assert np.all(np.array(a["q1"]) <= np.array(a["median"]))
    assert np.all(np.array(a["median"]) <= np.array(a["q3"]))
