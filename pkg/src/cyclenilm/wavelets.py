"""Daubechies-7 discrete wavelet transform.

Filters follow the usual orthonormal convention: ``DB7_SCALING`` is the
14-tap reconstruction low-pass ``h`` (sum sqrt(2), unit energy) and the
wavelet filter is ``g[n] = (-1)**n * h[13 - n]``. Analysis filters are their
time reverses. Two boundary modes are offered:

* ``"symmetric"``: half-point symmetric extension by ``L - 1`` samples, giving
  ``floor((N + L - 1) / 2)`` coefficients per level;
* ``"periodization"``: circular extension, ``ceil(N / 2)`` coefficients, an
  orthogonal transform when ``N`` is even.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DB7_SCALING = np.array([
    0.07785205408500918, 0.3965393194819173, 0.7291320908462351,
    0.4697822874051931, -0.14390600392856498, -0.22403618499387498,
    0.07130921926683026, 0.08061260915108308, -0.03802993693501441,
    -0.01657454163066688, 0.01255099855609984, 0.0004295779729213665,
    -0.0018016407040474908, 0.00035371379997452024,
])
FILTER_LENGTH = DB7_SCALING.size
DB7_WAVELET = DB7_SCALING[::-1] * (-1.0) ** np.arange(FILTER_LENGTH)
DEC_LO = DB7_SCALING[::-1].copy()
DEC_HI = DB7_WAVELET[::-1].copy()
MODES = ("symmetric", "periodization")


def coeff_length(n: int, mode: str = "symmetric") -> int:
    if mode == "symmetric":
        return (n + FILTER_LENGTH - 1) // 2
    return (n + 1) // 2


def dwt_step(x: np.ndarray, dec: np.ndarray, mode: str = "symmetric") -> np.ndarray:
    """Filter with analysis filter ``dec`` and keep every second output.

    Works along the last axis, so ``x`` may be a single signal or a batch.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    L = dec.size
    taps = dec[::-1]
    if mode == "symmetric":
        pad = [(0, 0)] * (x.ndim - 1) + [(L - 1, L - 1)]
        xp = np.pad(x, pad, mode="symmetric")
        windows = sliding_window_view(xp, L, axis=-1)[..., 1::2, :]
        return windows[..., :coeff_length(n, mode), :] @ taps
    if mode == "periodization":
        if n % 2:
            x = np.concatenate([x, x[..., -1:]], axis=-1)
            n += 1
        half = L // 2
        # y[o] = sum_j dec[j] * x[(2o + half - j) mod n]
        idx = (2 * np.arange(n // 2)[:, None] + half - np.arange(L)[None, :]) % n
        return x[..., idx] @ dec
    raise ValueError(f"unknown mode {mode!r}")


def dwt(x: np.ndarray, mode: str = "symmetric") -> tuple[np.ndarray, np.ndarray]:
    """One analysis level: (approximation, detail)."""
    return dwt_step(x, DEC_LO, mode), dwt_step(x, DEC_HI, mode)


def wavedec(x: np.ndarray, level: int, mode: str = "symmetric") -> list[np.ndarray]:
    """Multilevel decomposition ordered ``[cA_level, cD_level, ..., cD_1]``."""
    coeffs = []
    a = np.asarray(x, dtype=np.float64)
    for _ in range(level):
        a, d = dwt(a, mode)
        coeffs.append(d)
    coeffs.append(a)
    return coeffs[::-1]


def detail_at_level(x: np.ndarray, level: int, mode: str = "symmetric") -> np.ndarray:
    """Detail band of ``level`` only; skips the finer detail bands."""
    a = np.asarray(x, dtype=np.float64)
    for _ in range(level - 1):
        a = dwt_step(a, DEC_LO, mode)
    return dwt_step(a, DEC_HI, mode)
