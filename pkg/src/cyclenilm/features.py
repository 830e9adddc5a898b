"""Per-cycle feature vector: RMS, harmonics, db7 wavelet band, wave shape.

Column order (also the CSV header)::

    rms, h1..h13, h1n..h13n, w12..w23, r1..rK, midmax

Every function accepts either a :class:`CycleObservation` or a bare 1-D
array of samples. :func:`extract_feature_matrix` evaluates the same formulas
on a 2-D batch of cycles for dataset construction.
"""

from __future__ import annotations

import functools
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from cyclenilm.errors import CycleTooShort, NilmError
from cyclenilm.waveform import CycleObservation
from cyclenilm.wavelets import DEC_HI, DEC_LO, dwt_step

HARMONIC_ORDERS = (1, 3, 5, 7, 9, 11, 13)
WAVELET_LEVEL = 8
WAVELET_INDICES = tuple(range(12, 24))
DEFAULT_EPSILON = 0.01

# Calibrated on the default palette: the CFL bank's secondary hump and main
# pulse, the dryer's pre-firing notch, and the falling edge where lagging
# motor currents dominate. The denominator sits at the voltage peak.
DEFAULT_RATIO_POINTS = ((0.153, 0.25), (0.283, 0.25), (0.08, 0.25), (0.42, 0.25))


@dataclass(frozen=True)
class WaveShapeConfig:
    """Sample-ratio points (fractions of a cycle) and the denominator guard in amperes."""

    ratio_points: tuple[tuple[float, float], ...] = DEFAULT_RATIO_POINTS
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        pts = tuple((float(a), float(b)) for a, b in self.ratio_points)
        object.__setattr__(self, "ratio_points", pts)
        for a, b in pts:
            if a == b:
                raise NilmError(f"ratio point ({a}, {b}) uses the same phase twice")
            if not (0.0 <= a < 1.0 and 0.0 <= b < 1.0):
                raise NilmError(f"ratio point ({a}, {b}) outside [0, 1)")
        if not self.epsilon > 0:
            raise NilmError("epsilon must be positive")

    @property
    def k(self) -> int:
        return len(self.ratio_points)


def feature_names(k: int = len(DEFAULT_RATIO_POINTS)) -> list[str]:
    return (["rms"] + [f"h{o}" for o in HARMONIC_ORDERS]
            + [f"h{o}n" for o in HARMONIC_ORDERS]
            + [f"w{i}" for i in WAVELET_INDICES]
            + [f"r{i}" for i in range(1, k + 1)] + ["midmax"])


def feature_dim(k: int = len(DEFAULT_RATIO_POINTS)) -> int:
    return 1 + 2 * len(HARMONIC_ORDERS) + len(WAVELET_INDICES) + k + 1


def schema_hash(cfg: WaveShapeConfig, n_samples: int) -> str:
    """Short digest identifying the feature layout a model was trained on."""
    text = repr((feature_names(cfg.k), cfg.ratio_points, cfg.epsilon, n_samples,
                 HARMONIC_ORDERS, WAVELET_LEVEL, WAVELET_INDICES))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class FeatureVector:
    rms: float
    harmonics_unscaled: np.ndarray
    harmonics_normalized: np.ndarray
    wavelet: np.ndarray
    wave_shape: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_array(self) -> np.ndarray:
        return np.concatenate([[self.rms], self.harmonics_unscaled,
                               self.harmonics_normalized, self.wavelet, self.wave_shape])

    @classmethod
    def from_array(cls, v: np.ndarray) -> "FeatureVector":
        v = np.asarray(v, dtype=np.float64)
        n_h = len(HARMONIC_ORDERS)
        n_w = len(WAVELET_INDICES)
        return cls(float(v[0]), v[1:1 + n_h].copy(), v[1 + n_h:1 + 2 * n_h].copy(),
                   v[1 + 2 * n_h:1 + 2 * n_h + n_w].copy(), v[1 + 2 * n_h + n_w:].copy())

    def __len__(self) -> int:
        return 1 + self.harmonics_unscaled.size + self.harmonics_normalized.size \
            + self.wavelet.size + self.wave_shape.size


def _samples(cycle: CycleObservation | np.ndarray) -> np.ndarray:
    if isinstance(cycle, CycleObservation):
        return cycle.samples
    return np.asarray(cycle, dtype=np.float64)


def rms(cycle: CycleObservation | np.ndarray) -> float | np.ndarray:
    """Root mean square along the last axis."""
    x = _samples(cycle)
    out = np.sqrt(np.mean(x * x, axis=-1))
    return float(out) if x.ndim == 1 else out


@functools.lru_cache(maxsize=8)
def _dft_basis(n: int, orders: tuple[int, ...]) -> np.ndarray:
    """(n, 2k) matrix of [cos | sin] columns for bins ``orders``, scaled by 2/n."""
    k = np.asarray(orders, dtype=np.float64)
    # reduce k*t mod n in integers so the phase stays exact for large n
    phase = 2 * np.pi * (np.outer(np.arange(n), k.astype(np.int64)) % n) / n
    basis = np.hstack([np.cos(phase), np.sin(phase)]) * (2.0 / n)
    basis.setflags(write=False)
    return basis


def harmonic_magnitudes(cycle: CycleObservation | np.ndarray,
                        orders: Sequence[int] = HARMONIC_ORDERS) -> np.ndarray:
    """Amplitude of each harmonic, one cycle per observation so order equals bin.

    Scaled by 2/N so a sinusoid of amplitude A at that order reads A.
    """
    x = _samples(cycle)
    orders = tuple(int(o) for o in orders)
    proj = x @ _dft_basis(x.shape[-1], orders)
    k = len(orders)
    return np.hypot(proj[..., :k], proj[..., k:])


def normalize_l2(v: np.ndarray) -> np.ndarray:
    """Scale to unit Euclidean norm along the last axis; zero rows stay zero."""
    v = np.asarray(v, dtype=np.float64)
    # pre-scale by the largest magnitude so tiny inputs do not underflow
    peak = np.max(np.abs(v), axis=-1, keepdims=True)
    w = v / np.where(peak > 0, peak, 1.0)
    norm = np.sqrt(np.sum(w * w, axis=-1, keepdims=True))
    return np.where(peak > 0, w / np.where(norm > 0, norm, 1.0), 0.0)


def dwt_db7_level8(cycle: CycleObservation | np.ndarray) -> np.ndarray:
    """Level-8 db7 detail coefficients 12..23 (0-based) with symmetric extension.

    When the band is shorter than 24 coefficients (cycles of a few hundred
    samples) the missing positions are zero.

    Raises:
        CycleTooShort: Fewer than 2**8 samples.
    """
    x = _samples(cycle)
    n = x.shape[-1]
    if n < 2 ** WAVELET_LEVEL:
        raise CycleTooShort(f"cycle of {n} samples is shorter than {2 ** WAVELET_LEVEL}")
    a = x
    for _ in range(WAVELET_LEVEL - 1):
        a = dwt_step(a, DEC_LO)
    d = dwt_step(a, DEC_HI)
    lo, hi = WAVELET_INDICES[0], WAVELET_INDICES[-1] + 1
    out = np.zeros(x.shape[:-1] + (len(WAVELET_INDICES),))
    avail = max(0, min(hi, d.shape[-1]) - lo)
    out[..., :avail] = d[..., lo:lo + avail]
    return out


def _circular_value(x: np.ndarray, phase: float) -> np.ndarray:
    n = x.shape[-1]
    pos = phase * n
    i0 = int(math.floor(pos))
    frac = pos - i0
    i0 %= n
    return x[..., i0] * (1.0 - frac) + x[..., (i0 + 1) % n] * frac


def mid_third_bounds(n: int) -> tuple[int, int]:
    """Index range ``[ceil(n/6), ceil(n/3))``: the middle third of the positive half."""
    return -(-n // 6), -(-n // 3)


def wave_shape_features(cycle: CycleObservation | np.ndarray,
                        cfg: WaveShapeConfig = WaveShapeConfig()) -> np.ndarray:
    """K sample ratios plus the maximum over the middle third of the first half cycle.

    Each ratio is ``x(a) / g(x(b))`` where the guard ``g`` clamps denominators
    smaller than ``eps`` in magnitude to ``eps * sign(x(b))`` (``sign(0)`` taken
    as +1) and leaves larger ones untouched. Samples at
    fractional positions are linearly interpolated, wrapping at the cycle end.
    """
    x = _samples(cycle)
    out = np.empty(x.shape[:-1] + (cfg.k + 1,))
    for j, (a, b) in enumerate(cfg.ratio_points):
        den = _circular_value(x, b)
        den = np.where(np.abs(den) >= cfg.epsilon, den,
                       np.where(den >= 0, cfg.epsilon, -cfg.epsilon))
        out[..., j] = _circular_value(x, a) / den
    lo, hi = mid_third_bounds(x.shape[-1])
    out[..., cfg.k] = np.max(x[..., lo:hi], axis=-1)
    return out


def extract_features(cycle: CycleObservation | np.ndarray,
                     cfg: WaveShapeConfig = WaveShapeConfig()) -> FeatureVector:
    x = _samples(cycle)
    h = harmonic_magnitudes(x)
    return FeatureVector(rms(x), h, normalize_l2(h), dwt_db7_level8(x),
                         wave_shape_features(x, cfg))


def extract_feature_array(cycle: CycleObservation | np.ndarray,
                          cfg: WaveShapeConfig = WaveShapeConfig()) -> np.ndarray:
    """Feature row(s) as a plain array; accepts one cycle or a 2-D batch."""
    x = _samples(cycle)
    h = harmonic_magnitudes(x)
    r = np.sqrt(np.mean(x * x, axis=-1))
    return np.concatenate([r[..., None], h, normalize_l2(h), dwt_db7_level8(x),
                           wave_shape_features(x, cfg)], axis=-1)


def extract_feature_matrix(cycles: np.ndarray | Iterable[CycleObservation],
                           cfg: WaveShapeConfig = WaveShapeConfig(),
                           batch: int = 512) -> np.ndarray:
    """Features for many cycles, processed in batches to bound memory."""
    if not isinstance(cycles, np.ndarray):
        cycles = np.stack([_samples(c) for c in cycles])
    n = cycles.shape[0]
    out = np.empty((n, feature_dim(cfg.k)))
    for s in range(0, n, batch):
        out[s:s + batch] = extract_feature_array(cycles[s:s + batch], cfg)
    return out


def write_feature_csv(path: str | Path, matrix: np.ndarray, k: int) -> None:
    header = ",".join(feature_names(k))
    np.savetxt(path, np.atleast_2d(matrix), delimiter=",", header=header, comments="",
               fmt="%.17g")


def read_feature_csv(path: str | Path) -> tuple[np.ndarray, list[str]]:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(names)))
    return data, names
