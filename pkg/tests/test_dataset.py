from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cyclenilm.dataset import (ORIGIN_STRIDE, DatasetConfig, ObservationSet,
                               build_dataset, build_observations, expand_synthetic,
                               label_observation, pack_states, read_dataset, reduce_dataset,
                               split_strategy1, split_strategy2, subset_matrix,
                               trace_observations, write_dataset)
from cyclenilm.errors import BadId
from cyclenilm.features import extract_feature_array, feature_dim
from cyclenilm.simulate import (CorpusConfig, default_palette, iter_default_corpus,
                                synthesize_scenario, table1_schedules)
from cyclenilm.waveform import CYCLE_LENGTH

N = CYCLE_LENGTH
PHASE = 2 * np.pi * np.arange(N) / N


def sine_cycle(rms: float, phase: float = 0.0, order: int = 1) -> np.ndarray:
    return rms * np.sqrt(2) * np.sin(order * PHASE + phase)


def reduce_oracle(X: np.ndarray, tol: float) -> list[int]:
    """Plain-Python scan without the first-of-state rule."""
    order = sorted(range(len(X)), key=lambda i: tuple(X[i]))
    kept = []
    for i in order:
        if not kept or np.sum(np.abs(X[i] - X[kept[-1]])) > tol * np.sum(np.abs(X[kept[-1]])):
            kept.append(i)
    return kept


def make_set(X: np.ndarray, states: np.ndarray, dataset_id=None, origin=None) -> ObservationSet:
    n = len(X)
    return ObservationSet(X, states, states * 1.0,
                          np.arange(n) if origin is None else origin,
                          np.zeros(n) if dataset_id is None else dataset_id,
                          np.zeros(n, bool))


# -- labeling ---------------------------------------------------------------------

def test_label_examples(rng):
    q, r = label_observation([sine_cycle(10.0), np.zeros(N),
                              0.05 * rng.standard_normal(N)], 0.2)
    assert list(q) == [1, 0, 0]
    assert abs(r[0] - 10.0) < 1e-9 and r[1] == 0.0 and r[2] < 0.2


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0, 5), b=st.floats(0, 5))
def test_labeling_monotone(a, b):
    lo, hi = sorted((a, b))
    q_lo, _ = label_observation([sine_cycle(lo)], 0.2)
    q_hi, _ = label_observation([sine_cycle(hi)], 0.2)
    assert q_hi[0] >= q_lo[0]


# -- expansion --------------------------------------------------------------------

def test_expand_three_active_loads():
    cycles = [sine_cycle(5.0), sine_cycle(1.0, 0.3, 3), np.zeros(N), sine_cycle(2.0, -0.5)]
    obs = expand_synthetic(cycles, 0.2, origin_id=7, dataset_id=2)
    assert len(obs) == 8
    codes = {tuple(o.state) for o in obs}
    assert len(codes) == 8
    assert all(o.state[2] == 0 for o in obs)
    assert (0, 0, 0, 0) in codes and (1, 1, 0, 1) in codes
    assert all(o.origin_id == 7 and o.dataset_id == 2 for o in obs)
    for o in obs:
        members = [c for c, q in zip(cycles, o.state) if q]
        total = np.sum(members, axis=0) if members else np.zeros(N)
        assert o.features.rms ** 2 == pytest.approx(np.mean(total ** 2), rel=1e-12, abs=1e-12)
        np.testing.assert_allclose(o.per_load_rms[o.state == 0], 0.0)


def test_expand_single_active_load():
    obs = expand_synthetic([sine_cycle(3.0), np.zeros(N)], 0.2)
    assert len(obs) == 2
    assert sorted(tuple(o.state) for o in obs) == [(0, 0), (1, 0)]


@settings(max_examples=15, deadline=None)
@given(amps=st.lists(st.sampled_from([0.0, 0.1, 1.0, 4.0]), min_size=1, max_size=5))
def test_expansion_count_property(amps):
    cycles = [sine_cycle(a, 0.2 * i) for i, a in enumerate(amps)]
    obs = expand_synthetic(cycles, 0.2)
    m = sum(a > 0.2 for a in amps)
    assert len(obs) == 2 ** m
    assert len({tuple(o.state) for o in obs}) == 2 ** m


def test_residual_keeps_measured_cycle():
    cycles = [sine_cycle(5.0), sine_cycle(1.0, 0.5)]
    residual = 0.01 * np.cos(PHASE)
    obs = expand_synthetic(cycles, 0.2, residual=residual)
    full = obs[-1]
    assert not full.synthetic and all(o.synthetic for o in obs[:-1])
    np.testing.assert_allclose(full.features.to_array(),
                               extract_feature_array(cycles[0] + cycles[1] + residual),
                               rtol=1e-12, atol=1e-12)


def test_subset_matrix_msb_first():
    np.testing.assert_array_equal(subset_matrix(2), [[0, 0], [0, 1], [1, 0], [1, 1]])
    assert pack_states(np.array([[0, 0, 0, 0, 1, 1, 0, 0]]))[0] == 12


# -- reduction ----------------------------------------------------------------------

def test_reduce_identical_rows():
    X = np.tile(np.arange(1.0, 6.0), (100, 1))
    assert len(reduce_dataset(make_set(X, np.ones((100, 1))))) == 1


def test_reduce_keeps_distant_rows():
    X = np.array([[1.0, 1.0], [1.5, 1.5]])
    assert len(reduce_dataset(make_set(X, np.ones((2, 1))))) == 2


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 60))
def test_reduce_matches_oracle(seed, n):
    rng = np.random.default_rng(seed)
    X = np.round(rng.uniform(1, 2, (n, 3)), 1)
    out = reduce_dataset(make_set(X, np.ones((n, 1))), keep_new_states=False)
    oracle = X[reduce_oracle(X, 0.05)]
    np.testing.assert_array_equal(out.features, oracle)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_reduce_preserves_state_classes(seed):
    rng = np.random.default_rng(seed)
    n = 80
    X = 1.0 + 0.01 * rng.standard_normal((n, 4))
    states = rng.integers(0, 2, (n, 3))
    out = reduce_dataset(make_set(X, states))
    assert set(pack_states(states)) == set(out.state_codes())
    assert len(out) <= n


def test_reduce_output_is_sorted(rng):
    X = rng.uniform(0, 10, (50, 3))
    out = reduce_dataset(make_set(X, np.ones((50, 1))))
    rows = [tuple(r) for r in out.features]
    assert rows == sorted(rows)


# -- splits -------------------------------------------------------------------------

def grouped_set(n_groups: int, per_group: int = 3, n_datasets: int = 7) -> ObservationSet:
    origin = np.repeat(np.arange(n_groups), per_group)
    ds = 1 + origin % n_datasets
    X = np.random.default_rng(0).standard_normal((origin.size, 2))
    return make_set(X, np.ones((origin.size, 1)), ds, origin)


def test_split1_group_counts_and_leakage():
    data = grouped_set(1000)
    tr, te = split_strategy1(data, 0.8, seed=4)
    assert abs(np.unique(tr.origin_id).size - 800) <= 1
    assert not set(tr.origin_id) & set(te.origin_id)
    assert len(tr) + len(te) == len(data)
    tr2, _ = split_strategy1(data, 0.8, seed=4)
    np.testing.assert_array_equal(tr.origin_id, tr2.origin_id)


def test_split2_holdout():
    data = grouped_set(70)
    tr, te = split_strategy2(data, 3)
    assert set(te.dataset_id) == {3} and 3 not in set(tr.dataset_id)
    assert len(tr) + len(te) == len(data)
    covered = [int(split_strategy2(data, k)[1].dataset_id[0]) for k in range(1, 8)]
    assert covered == list(range(1, 8))
    with pytest.raises(BadId):
        split_strategy2(data, 9)


# -- building from corpora ------------------------------------------------------------

@pytest.fixture(scope="module")
def corpus():
    sched = table1_schedules(1.0, seed=2)[5]
    return synthesize_scenario(default_palette(), sched, 1.0, noise_rms=0.1, seed=3,
                               dataset_id=6)


def test_build_observations_expansion_counts(corpus):
    cfg = DatasetConfig(reduce=False, cycle_stride=5)
    data = build_observations(corpus, cfg)
    _, trace = trace_observations(corpus)
    by_origin = {int(o): int(np.sum(data.origin_id == o)) for o in np.unique(data.origin_id)}
    for o, count in by_origin.items():
        row = np.flatnonzero(trace.origin_id == o)[0]
        assert count == 2 ** int(trace.states[row].sum())
    assert set(np.unique(data.dataset_id)) == {6}
    assert np.all(data.origin_id // ORIGIN_STRIDE == 6)
    full = data.subset(np.flatnonzero(~data.synthetic))
    assert len(full) == len(by_origin)


def test_measured_cycle_features_match_trace(corpus):
    data = build_observations(corpus, DatasetConfig(reduce=False, cycle_stride=7))
    _, trace = trace_observations(corpus)
    full = data.subset(np.flatnonzero(~data.synthetic))
    for i, o in enumerate(full.origin_id):
        j = np.flatnonzero(trace.origin_id == o)[0]
        np.testing.assert_array_equal(full.features[i], trace.features[j])
        np.testing.assert_array_equal(full.states[i], trace.states[j])


def test_build_dataset_reduction_and_meta(tmp_path):
    corpora = list(iter_default_corpus(CorpusConfig(duration_s=0.5)))
    cfg = DatasetConfig(cycle_stride=3)
    data = build_dataset(corpora, cfg)
    raw = build_dataset(corpora, DatasetConfig(cycle_stride=3, reduce=False))
    assert data.meta["n_raw"] == len(raw)
    assert len(data) < len(raw)
    assert set(data.state_codes()) == set(raw.state_codes())
    assert data.features.shape[1] == feature_dim(4)
    write_dataset(tmp_path / "d", data)
    back = read_dataset(tmp_path / "d")
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.states, data.states)
    np.testing.assert_array_equal(back.rms, data.rms)
    np.testing.assert_array_equal(back.origin_id, data.origin_id)
    np.testing.assert_array_equal(back.synthetic, data.synthetic)
    assert back.meta == data.meta
