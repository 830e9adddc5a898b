"""Sampled traces and their segmentation into fixed-length 60-Hz cycles.

Positive-going zero crossings are located in three steps:

1. a Schmitt trigger (band of +/- ``hysteresis`` times the trace peak) finds
   coarse candidates, which suppresses chatter around zero;
2. each candidate is refined to sub-sample precision by linear interpolation of
   the sign change of a zero-phase moving average taken over a local window;
3. refined crossings closer than 0.75 nominal periods to the previously
   accepted crossing are rejected.

Every step depends only on a bounded neighbourhood of raw samples, which lets
:class:`StreamingSegmenter` reproduce :func:`detect_zero_crossings` and
:func:`segment_cycles` bit for bit on chunked input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from cyclenilm.errors import AllZero, LengthMismatch, NilmError, TooShort

DEFAULT_SAMPLE_RATE = 200_000.0
NOMINAL_FREQ = 60.0
CYCLE_LENGTH = 3334
HYSTERESIS_FRACTION = 0.02
SPACING_TOLERANCE = 0.25

KINDS = ("current", "voltage")


@dataclass
class Waveform:
    """Uniformly sampled instantaneous current or voltage.

    Attributes:
        samples: Instantaneous values in amperes or volts.
        sample_rate: Samples per second.
        kind: ``"current"`` or ``"voltage"``.
    """

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    kind: str = "current"

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise NilmError("waveform samples must be one-dimensional")
        if not self.sample_rate > 0:
            raise NilmError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.kind not in KINDS:
            raise NilmError(f"unknown waveform kind {self.kind!r}")
        if not np.all(np.isfinite(self.samples)):
            raise NilmError("waveform contains NaN or infinite samples")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def __repr__(self) -> str:
        return (f"Waveform(kind={self.kind!r}, n={self.samples.size}, "
                f"sample_rate={self.sample_rate:g})")


@dataclass
class CycleObservation:
    """One nominal cycle of current resampled to a fixed number of samples.

    ``start`` and ``span`` keep the fractional crossing position and the raw
    cycle length (in source samples) so the cycle can be located in its trace.
    """

    samples: np.ndarray
    start_index: int
    source_dataset_id: int = 0
    observation_id: int = 0
    start: float = 0.0
    span: float = 0.0

    def __len__(self) -> int:
        return self.samples.size


def cycle_length(sample_rate: float = DEFAULT_SAMPLE_RATE,
                 nominal_freq: float = NOMINAL_FREQ) -> int:
    """Fixed per-cycle sample count: samples in one nominal period, rounded up."""
    return int(math.ceil(sample_rate / nominal_freq - 1e-9))


@dataclass(frozen=True)
class _CrossingGeometry:
    period: float       # nominal period in samples
    half_width: int     # moving-average half width
    search: int         # candidate search radius around a Schmitt trigger hit

    @property
    def reach(self) -> int:
        return self.search + self.half_width + 1

    @property
    def edge_window(self) -> int:
        return int(round(self.period / 2.0))

    def is_edge(self, c: int, total: int | None) -> bool:
        return c - self.reach < 0 or (total is not None and c + self.reach > total - 1)

    def edge_span(self, c: int, total: int) -> tuple[int, int]:
        if c - self.reach < 0:
            return 0, min(self.edge_window, total)
        return max(0, total - self.edge_window), total

    @classmethod
    def for_rate(cls, sample_rate: float, nominal_freq: float) -> "_CrossingGeometry":
        if not 40.0 < nominal_freq < 80.0:
            raise NilmError(f"nominal_freq must lie in (40, 80) Hz, got {nominal_freq}")
        period = sample_rate / nominal_freq
        half_width = max(1, int(round(period / 32.0)))
        search = max(2, int(round(period / 8.0)))
        return cls(period, half_width, search)


def _schmitt(x: np.ndarray, band: float, armed: bool) -> tuple[np.ndarray, bool]:
    """Indices where ``x`` first reaches ``+band`` after having been at or below ``-band``.

    ``armed`` is the trigger state before ``x[0]``; the state after the last
    sample is returned so chunked input can be processed incrementally.
    """
    hi = x >= band
    events = np.flatnonzero(hi | (x <= -band))
    if events.size == 0:
        return events, armed
    kinds = hi[events]
    armed_before = np.empty(kinds.size, dtype=bool)
    armed_before[0] = armed
    armed_before[1:] = ~kinds[:-1]
    return events[kinds & armed_before], not bool(kinds[-1])


def _extended(x: np.ndarray, offset: int, first: float, total: int | None,
              lo: int, hi: int) -> np.ndarray:
    """Samples at absolute indices ``lo..hi`` with point reflection past either end.

    ``x`` holds absolute indices ``offset..offset+len(x)-1``; ``first`` is the
    sample at index 0 and ``total`` the trace length once it is known.
    """
    idx = np.arange(lo, hi + 1)
    out = np.empty(idx.size)
    inside = idx >= 0
    if total is not None:
        inside &= idx < total
    out[inside] = x[idx[inside] - offset]
    left = idx < 0
    if left.any():
        out[left] = 2.0 * first - x[-idx[left] - offset]
    if total is not None:
        right = idx >= total
        if right.any():
            last = x[total - 1 - offset]
            out[right] = 2.0 * last - x[2 * (total - 1) - idx[right] - offset]
    return out


def _refine(window: np.ndarray, center: int, geo: _CrossingGeometry) -> float | None:
    """Sub-sample crossing offset relative to the window's first searched sample.

    ``window`` covers ``center - reach .. center + reach``. The returned value
    is measured from ``center`` (negative when the crossing precedes it), or
    ``None`` when the smoothed signal has no positive-going sign change.
    """
    w = 2 * geo.half_width + 1
    csum = np.cumsum(np.concatenate(([0.0], window)))
    smooth = (csum[w:] - csum[:-w]) / w
    # smooth[k] is centred on window index k + half_width, i.e. center - search - 1 + k
    rising = np.flatnonzero((smooth[:-1] <= 0.0) & (smooth[1:] > 0.0))
    if rising.size == 0:
        return None
    s0 = smooth[rising]
    s1 = smooth[rising + 1]
    pos = rising + (-s0) / (s1 - s0) - (geo.search + 1)
    return float(pos[np.argmin(np.abs(pos))])


def _edge_fit(seg: np.ndarray, lo: int, c: int, geo: _CrossingGeometry) -> float | None:
    """Crossing near a trace end from a one-sided least-squares sinusoid fit.

    Reflection about a single noisy end sample fabricates crossings, so
    within ``reach`` of either end the signal over half a period is fitted
    with a nominal-frequency sinusoid, an offset, and first-order
    frequency-deviation terms (``t sin``, ``t cos``). Sums use
    ``math.fsum`` so the batch and streaming paths agree bit for bit.
    """
    omega = 2.0 * math.pi / geo.period

    def design(n: np.ndarray) -> tuple[np.ndarray, ...]:
        t = (n - c) / geo.period
        s, co = np.sin(omega * (n - c)), np.cos(omega * (n - c))
        return s, co, np.ones(n.size), t * s, t * co

    basis = design(np.arange(lo, lo + seg.size, dtype=np.float64))
    gram = np.array([[math.fsum(u * v) for v in basis] for u in basis])
    rhs = np.array([math.fsum(u * seg) for u in basis])
    try:
        coef = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        return None
    grid = np.arange(c - geo.reach, c + geo.reach + 1, dtype=np.float64)
    f = sum(k * u for k, u in zip(coef, design(grid)))
    rising = np.flatnonzero((f[:-1] <= 0.0) & (f[1:] > 0.0))
    if rising.size == 0:
        return None
    pos = grid[rising] - f[rising] / (f[rising + 1] - f[rising])
    return float(pos[np.argmin(np.abs(pos - c))])


def _accept(crossing: float, last: float | None, geo: _CrossingGeometry) -> bool:
    if last is None:
        return True
    return crossing - last >= (1.0 - SPACING_TOLERANCE) * geo.period


def _hysteresis_band(x: np.ndarray, hysteresis: float, band: float | None) -> float:
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if band is None:
        if peak == 0.0:
            raise AllZero("reference signal is identically zero")
        return hysteresis * peak
    if peak < band:
        raise AllZero(f"signal peak {peak:g} never leaves the hysteresis band {band:g}")
    return band


def detect_zero_crossings(ref: Waveform, nominal_freq: float = NOMINAL_FREQ, *,
                          hysteresis: float = HYSTERESIS_FRACTION,
                          band: float | None = None) -> np.ndarray:
    """Locate positive-going zero crossings of ``ref`` to sub-sample precision.

    Args:
        ref: Reference waveform (voltage when available, otherwise current).
        nominal_freq: Nominal line frequency in hertz.
        hysteresis: Schmitt band as a fraction of the trace peak.
        band: Absolute Schmitt band; overrides ``hysteresis`` when given.

    Returns:
        Fractional sample indices of the accepted crossings, increasing.

    Raises:
        AllZero: The signal never leaves the hysteresis band.
        TooShort: The trace is shorter than two nominal cycles or fewer than
            two crossings were found.
    """
    x = ref.samples
    geo = _CrossingGeometry.for_rate(ref.sample_rate, nominal_freq)
    if x.size < 2 * geo.period:
        raise TooShort(f"need at least two nominal cycles, got {x.size} samples")
    level = _hysteresis_band(x, hysteresis, band)
    candidates, _ = _schmitt(x, level, bool(x[0] < level))
    crossings: list[float] = []
    last = None
    for c in candidates:
        c = int(c)
        if geo.is_edge(c, x.size):
            lo, hi = geo.edge_span(c, x.size)
            crossing = _edge_fit(x[lo:hi], lo, c, geo)
        else:
            window = _extended(x, 0, float(x[0]), x.size, c - geo.reach, c + geo.reach)
            offset = _refine(window, c, geo)
            crossing = None if offset is None else c + offset
        if crossing is None:
            continue
        if crossing < 0.0 or crossing > x.size - 2:
            continue
        if _accept(crossing, last, geo):
            crossings.append(crossing)
            last = crossing
    if len(crossings) < 2:
        raise TooShort(f"found {len(crossings)} crossing(s); need at least 2")
    return np.asarray(crossings)


def resample_span(x: np.ndarray, start: float, stop: float, n: int,
                  offset: int = 0) -> np.ndarray:
    """Linearly interpolate ``n`` equally spaced points over ``[start, stop)``.

    ``x`` holds absolute sample indices ``offset..offset+len(x)-1``.
    """
    base = int(math.floor(start))
    local = (start - base) + (stop - start) * np.arange(n) / n
    k = np.floor(local).astype(np.int64)
    frac = local - k
    seg = x[base - offset: base - offset + int(k[-1]) + 2]
    return seg[k] * (1.0 - frac) + seg[k + 1] * frac


def resample(cycle: np.ndarray, n: int = CYCLE_LENGTH) -> np.ndarray:
    """Resample one periodic cycle to ``n`` points (wrapping at the end)."""
    cycle = np.asarray(cycle, dtype=np.float64)
    m = cycle.size
    pos = np.arange(n) * (m / n)
    k = np.floor(pos).astype(np.int64)
    frac = pos - k
    nxt = np.where(k + 1 < m, k + 1, 0)
    return cycle[k] * (1.0 - frac) + cycle[nxt] * frac


def _valid_pair(a: float, b: float, period: float) -> bool:
    return abs((b - a) - period) <= SPACING_TOLERANCE * period


def segment_cycles(i_tot: Waveform, crossings: Sequence[float] | None = None,
                   ref: Waveform | None = None, *, n_samples: int = CYCLE_LENGTH,
                   nominal_freq: float = NOMINAL_FREQ, dataset_id: int = 0,
                   band: float | None = None) -> list[CycleObservation]:
    """Cut ``i_tot`` into one resampled observation per consecutive crossing pair.

    Crossings are detected on ``ref`` when given, else on ``i_tot`` itself,
    unless precomputed ``crossings`` are supplied. Pairs whose spacing falls
    outside (1 +/- 0.25) nominal periods are skipped; the partial trailing
    cycle is never emitted.
    """
    if ref is not None:
        if len(ref) != len(i_tot) or ref.sample_rate != i_tot.sample_rate:
            raise LengthMismatch("reference and current traces are not aligned")
    if crossings is None:
        crossings = detect_zero_crossings(ref if ref is not None else i_tot,
                                          nominal_freq, band=band)
    period = i_tot.sample_rate / nominal_freq
    x = i_tot.samples
    cycles = []
    for k in range(len(crossings) - 1):
        a, b = float(crossings[k]), float(crossings[k + 1])
        if not _valid_pair(a, b, period):
            continue
        cycles.append(CycleObservation(
            samples=resample_span(x, a, b, n_samples),
            start_index=int(math.floor(a)),
            source_dataset_id=dataset_id,
            observation_id=k,
            start=a,
            span=b - a,
        ))
    return cycles


def cycle_matrix(cycles: Sequence[CycleObservation]) -> np.ndarray:
    """Stack cycle samples into an ``(n_cycles, n_samples)`` array."""
    if not cycles:
        return np.empty((0, CYCLE_LENGTH))
    return np.vstack([c.samples for c in cycles])


@dataclass
class StreamingSegmenter:
    """Incremental equivalent of :func:`segment_cycles` for chunked input.

    Feed samples with :meth:`push` and call :meth:`flush` at end of stream.
    The Schmitt band must be fixed up front (``band``) because the trace peak
    is unknown while streaming. Emitted cycles are bit-identical to the batch
    path run with the same ``band``.
    """

    sample_rate: float = DEFAULT_SAMPLE_RATE
    band: float = 0.0
    nominal_freq: float = NOMINAL_FREQ
    n_samples: int = CYCLE_LENGTH
    dataset_id: int = 0
    _geo: _CrossingGeometry = field(init=False, repr=False)
    _cur: np.ndarray = field(init=False, repr=False)
    _ref: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.band > 0:
            raise NilmError("streaming segmentation needs a positive absolute band")
        self._geo = _CrossingGeometry.for_rate(self.sample_rate, self.nominal_freq)
        self._cur = np.empty(0)
        self._ref = np.empty(0)
        self._offset = 0
        self._received = 0
        self._first: float | None = None
        self._armed = False
        self._pending: list[int] = []
        self._last: float | None = None
        self._count = 0
        self._closed = False

    def push(self, current: np.ndarray, reference: np.ndarray | None = None
             ) -> list[CycleObservation]:
        """Append a chunk; returns cycles completed by it.

        ``reference`` must be aligned with ``current``; when omitted the
        current itself is the crossing reference.
        """
        if self._closed:
            raise NilmError("segmenter already flushed")
        current = np.asarray(current, dtype=np.float64)
        reference = current if reference is None else np.asarray(reference, dtype=np.float64)
        if reference.shape != current.shape:
            raise LengthMismatch("reference chunk is not aligned with current chunk")
        if current.size == 0:
            return []
        if self._first is None:
            self._first = float(reference[0])
            self._armed = bool(reference[0] < self.band)
        hits, self._armed = _schmitt(reference, self.band, self._armed)
        self._pending.extend(int(h) + self._received for h in hits)
        self._cur = np.concatenate((self._cur, current))
        self._ref = np.concatenate((self._ref, reference))
        self._received += current.size
        out = self._drain(total=None)
        self._trim()
        return out

    def flush(self) -> list[CycleObservation]:
        """Resolve crossings near the end of the stream and close it."""
        out = self._drain(total=self._received) if self._first is not None else []
        self._closed = True
        return out

    def _drain(self, total: int | None) -> list[CycleObservation]:
        geo = self._geo
        out = []
        while self._pending:
            c = self._pending[0]
            if total is None and (c + geo.reach >= self._received or (
                    c - geo.reach < 0 and self._received < geo.edge_window)):
                break
            self._pending.pop(0)
            if geo.is_edge(c, total):
                lo, hi = geo.edge_span(c, total if total is not None else self._received)
                lo = max(lo, self._offset)
                crossing = _edge_fit(self._ref[lo - self._offset:hi - self._offset],
                                     lo, c, geo)
            else:
                window = _extended(self._ref, self._offset, self._first, total,
                                   c - geo.reach, c + geo.reach)
                offset = _refine(window, c, geo)
                crossing = None if offset is None else c + offset
            if crossing is None:
                continue
            if crossing < 0.0 or (total is not None and crossing > total - 2):
                continue
            if not _accept(crossing, self._last, geo):
                continue
            if self._last is not None and _valid_pair(self._last, crossing, geo.period):
                out.append(CycleObservation(
                    samples=resample_span(self._cur, self._last, crossing,
                                          self.n_samples, self._offset),
                    start_index=int(math.floor(self._last)),
                    source_dataset_id=self.dataset_id,
                    observation_id=self._count,
                    start=self._last,
                    span=crossing - self._last,
                ))
            if self._last is not None:
                self._count += 1
            self._last = crossing
        return out

    def _trim(self) -> None:
        # keep enough history for reflection at the trace start, the open
        # cycle, and the refinement windows of pending candidates
        keep = self._received - self._geo.reach - 2
        if self._last is not None:
            keep = min(keep, int(math.floor(self._last)) - 1)
        if self._pending:
            keep = min(keep, self._pending[0] - self._geo.reach - 1)
        cut = max(keep, 0) - self._offset
        if cut > 0:
            self._cur = self._cur[cut:]
            self._ref = self._ref[cut:]
            self._offset += cut


def iter_chunks(samples: np.ndarray, chunk: int) -> Iterator[np.ndarray]:
    """Yield consecutive slices of at most ``chunk`` samples."""
    for i in range(0, len(samples), chunk):
        yield samples[i:i + chunk]
