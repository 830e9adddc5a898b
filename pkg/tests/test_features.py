from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cyclenilm.errors import CycleTooShort, NilmError
from cyclenilm.features import (DEFAULT_RATIO_POINTS, HARMONIC_ORDERS, WAVELET_INDICES,
                                FeatureVector, WaveShapeConfig, dwt_db7_level8,
                                extract_feature_array, extract_feature_matrix,
                                extract_features, feature_dim, feature_names,
                                harmonic_magnitudes, mid_third_bounds, normalize_l2,
                                read_feature_csv, rms, schema_hash, wave_shape_features,
                                write_feature_csv)
from cyclenilm.simulate import default_palette, make_load_signature
from cyclenilm.wavelets import (DB7_SCALING, DB7_WAVELET, DEC_HI, DEC_LO, coeff_length,
                                detail_at_level, dwt_step, wavedec)
from cyclenilm.waveform import CYCLE_LENGTH, resample

N = CYCLE_LENGTH
PHASE = 2 * np.pi * np.arange(N) / N


def naive_dft(x: np.ndarray, k: int) -> complex:
    # O(N^2) overall: one full sum per requested bin, no cached basis
    n = np.arange(x.size)
    return complex(np.sum(x * np.exp(-2j * np.pi * k * n / x.size)))


def symmetric_extend(x: np.ndarray, p: int) -> np.ndarray:
    return np.concatenate([x[:p][::-1], x, x[-p:][::-1]])


def cascade_detail(x: np.ndarray, level: int) -> np.ndarray:
    """Convolve, keep every second sample, repeat: the textbook Mallat cascade."""
    L = DEC_LO.size
    a = np.asarray(x, dtype=np.float64)
    for step in range(level):
        n_out = (a.size + L - 1) // 2
        ext = symmetric_extend(a, L - 1)
        lo = np.convolve(ext, DEC_LO)[L::2][:n_out]
        hi = np.convolve(ext, DEC_HI)[L::2][:n_out]
        if step == level - 1:
            return hi
        a = lo
    raise AssertionError


# -- filters and transform ------------------------------------------------------

def test_db7_filter_identities():
    h = DB7_SCALING
    assert h.size == 14
    assert math.isclose(h.sum(), math.sqrt(2), rel_tol=1e-12)
    assert math.isclose(np.sum(h * h), 1.0, rel_tol=1e-12)
    for shift in range(1, 7):
        assert abs(np.dot(h[2 * shift:], h[:-2 * shift])) < 1e-12
    np.testing.assert_allclose(DB7_WAVELET, [(-1) ** n * h[13 - n] for n in range(14)])
    moments = [np.sum(DB7_WAVELET * np.arange(14) ** p) for p in range(7)]
    assert np.max(np.abs(moments)) < 1e-6


def test_level8_band_lengths():
    n = N
    lengths = []
    for _ in range(8):
        n = coeff_length(n)
        lengths.append(n)
    assert lengths == [1673, 843, 428, 220, 116, 64, 38, 25]


def test_dwt_matches_cascade_oracle(rng):
    x = rng.standard_normal(N)
    band = detail_at_level(x, 8)
    oracle = cascade_detail(x, 8)
    assert band.size == 25
    assert np.max(np.abs(band - oracle)) <= 1e-9
    np.testing.assert_array_equal(dwt_db7_level8(x), band[12:24])


def test_dwt_matches_pywavelets(rng):
    pywt = pytest.importorskip("pywt")
    x = rng.standard_normal(N)
    ours = wavedec(x, 8)
    ref = pywt.wavedec(x, "db7", mode="symmetric", level=8)
    for a, b in zip(ours, ref):
        assert np.max(np.abs(a - b)) < 1e-10
    ours = wavedec(x[:1024], 5, mode="periodization")
    ref = pywt.wavedec(x[:1024], "db7", mode="periodization", level=5)
    for a, b in zip(ours, ref):
        assert np.max(np.abs(a - b)) < 1e-10


def test_parseval_periodization(rng):
    x = rng.standard_normal(1024)
    coeffs = wavedec(x, 8, mode="periodization")
    energy = sum(float(np.sum(c * c)) for c in coeffs)
    assert math.isclose(energy, float(np.sum(x * x)), rel_tol=1e-6)


def test_dwt_annihilates_constant():
    assert np.max(np.abs(dwt_db7_level8(np.ones(N)))) < 1e-8


def test_dwt_linearity_exact(rng):
    x = rng.standard_normal(N)
    np.testing.assert_array_equal(dwt_db7_level8(2 * x), 2 * dwt_db7_level8(x))


def test_dwt_too_short():
    with pytest.raises(CycleTooShort):
        dwt_db7_level8(np.ones(255))
    assert dwt_db7_level8(np.ones(256)).shape == (12,)


def test_dwt_batch_matches_rows(rng):
    X = rng.standard_normal((3, N))
    B = dwt_db7_level8(X)
    for i in range(3):
        np.testing.assert_array_equal(B[i], dwt_db7_level8(X[i]))


def test_dwt_step_unknown_mode():
    with pytest.raises(ValueError):
        dwt_step(np.ones(8), DEC_LO, mode="zero")


# -- rms and harmonics ----------------------------------------------------------

def test_rms_examples():
    assert rms(np.zeros(N)) == 0.0
    assert abs(rms(math.sqrt(2) * np.sin(PHASE)) - 1.0) < 1e-6
    x = 10 * np.sin(PHASE) + 5 * np.sin(PHASE)
    assert math.isclose(rms(x), math.sqrt(np.mean(x ** 2)), rel_tol=1e-12)
    assert abs(rms(x) - 15 / math.sqrt(2)) < 1e-9


def test_harmonics_of_pure_sine():
    h = harmonic_magnitudes(2 * np.sin(PHASE))
    assert abs(h[0] - 2.0) < 1e-3
    assert np.all(h[1:] < 1e-3)


def test_harmonics_of_square_wave():
    sq = np.where(np.arange(N) < N // 2, 1.0, -1.0)
    h = harmonic_magnitudes(sq)
    expected = 4 / (np.pi * np.asarray(HARMONIC_ORDERS))
    np.testing.assert_allclose(h, expected, rtol=0.02)


def test_harmonics_match_naive_dft(rng):
    x = rng.standard_normal(N)
    h = harmonic_magnitudes(x)
    oracle = np.array([2 * abs(naive_dft(x, k)) / N for k in HARMONIC_ORDERS])
    np.testing.assert_allclose(h, oracle, rtol=1e-9)


@settings(max_examples=20, deadline=None)
@given(shift=st.integers(0, N - 1), seed=st.integers(0, 2 ** 16))
def test_harmonics_phase_invariant(shift, seed):
    x = np.random.default_rng(seed).standard_normal(N)
    a = harmonic_magnitudes(x)
    b = harmonic_magnitudes(np.roll(x, shift))
    assert np.max(np.abs(a - b)) <= 1e-9 * max(1.0, np.max(a))


def test_normalize_l2_examples():
    np.testing.assert_allclose(normalize_l2(np.array([3.0, 4, 0, 0, 0, 0, 0])),
                               [0.6, 0.8, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(normalize_l2(np.zeros(7)), np.zeros(7))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 7, elements=st.floats(0, 1e3)))
def test_normalize_l2_unit_norm(v):
    out = normalize_l2(v)
    if np.any(v > 0):
        assert abs(np.linalg.norm(out) - 1.0) <= 1e-12
    else:
        assert np.all(out == 0)


# -- wave shape -----------------------------------------------------------------

def test_wave_shape_sine_values():
    cfg = WaveShapeConfig(((0.25, 0.125),))
    out = wave_shape_features(np.sin(PHASE), cfg)
    assert abs(out[0] - math.sqrt(2)) <= 0.01
    assert abs(out[1] - 1.0) <= 1e-3


def test_mid_third_bounds_contain_quarter_point():
    lo, hi = mid_third_bounds(N)
    assert (lo, hi) == (556, 1112)
    assert lo <= N / 4 < hi


def test_ratio_guard_sign_and_floor():
    cfg = WaveShapeConfig(((0.25, 0.0),), epsilon=0.01)
    x = np.sin(PHASE)
    assert abs(wave_shape_features(x, cfg)[0] - 100.0) < 1e-3
    assert abs(wave_shape_features(-x, cfg)[0] + 100.0) < 1e-3


def test_wave_shape_config_validation():
    with pytest.raises(NilmError):
        WaveShapeConfig(((0.2, 0.2),))
    with pytest.raises(NilmError):
        WaveShapeConfig(((0.2, 1.0),))
    with pytest.raises(NilmError):
        WaveShapeConfig(epsilon=0.0)


def _palette_cycle(name: str, scale: float = 1.0) -> np.ndarray:
    spec = next(s for s in default_palette() if s.name == name)
    return scale * resample(make_load_signature(spec, n_cycles=1).samples, N)


def test_cfl_changes_ratio_features():
    base = _palette_cycle("refrigerator") + _palette_cycle("water_heater")
    with_cfl = base + _palette_cycle("cfl_bank")
    a = wave_shape_features(base)[:-1]
    b = wave_shape_features(with_cfl)[:-1]
    assert np.max(np.abs(b - a) / np.abs(a)) > 0.10


def test_close_rms_composites_differ_in_shape():
    a = _palette_cycle("refrigerator") + _palette_cycle("cfl_bank")
    b = _palette_cycle("refrigerator")
    b = b * rms(a) / rms(b)
    assert abs(rms(a) - rms(b)) <= 0.01 * rms(a)
    wa, wb = wave_shape_features(a), wave_shape_features(b)
    assert np.max(np.abs(wa - wb) / np.abs(wb)) > 0.10


# -- full vector ----------------------------------------------------------------

def test_feature_dimension_and_names():
    assert feature_dim(4) == 32
    names = feature_names(4)
    assert len(names) == 32
    assert names[:2] == ["rms", "h1"] and names[-1] == "midmax"
    assert names[15] == "w12" and names[26] == "w23" and names[27] == "r1"


def test_zero_cycle_gives_zero_features():
    v = extract_feature_array(np.zeros(N))
    assert v.shape == (32,)
    assert np.all(v == 0)


def test_feature_vector_roundtrip(rng):
    x = rng.standard_normal(N)
    fv = extract_features(x)
    assert len(fv) == 32
    arr = fv.to_array()
    np.testing.assert_array_equal(arr, extract_feature_array(x))
    np.testing.assert_array_equal(FeatureVector.from_array(arr).to_array(), arr)
    norm = np.linalg.norm(fv.harmonics_normalized)
    assert abs(norm - 1.0) < 1e-12
    assert np.all(np.isfinite(arr))


def test_batch_equals_single_rows(rng):
    X = rng.standard_normal((5, N))
    M = extract_feature_matrix(X, batch=2)
    for i in range(5):
        np.testing.assert_allclose(M[i], extract_feature_array(X[i]), rtol=1e-12,
                                   atol=1e-12)


def test_extraction_deterministic(rng):
    x = rng.standard_normal(N)
    np.testing.assert_array_equal(extract_feature_array(x), extract_feature_array(x.copy()))


def test_schema_hash_depends_on_config():
    a = schema_hash(WaveShapeConfig(), N)
    assert a == schema_hash(WaveShapeConfig(DEFAULT_RATIO_POINTS), N)
    assert a != schema_hash(WaveShapeConfig(epsilon=0.02), N)
    assert a != schema_hash(WaveShapeConfig(), N + 1)


def test_feature_csv_roundtrip(tmp_path, rng):
    M = extract_feature_matrix(rng.standard_normal((4, N)))
    write_feature_csv(tmp_path / "f.csv", M, 4)
    back, names = read_feature_csv(tmp_path / "f.csv")
    assert names == feature_names(4)
    np.testing.assert_array_equal(back, M)
    assert len(WAVELET_INDICES) == 12
