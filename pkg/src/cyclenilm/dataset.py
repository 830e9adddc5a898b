"""Labeled per-cycle observations: labeling, synthetic expansion, reduction, splits.

Observations are stored column-wise in :class:`ObservationSet` (one matrix
per field) because training works on whole matrices; a row view is
available as :class:`LabeledObservation`.

Expansion follows the superposition principle: for a cycle in which ``m``
loads are active, every subset of those loads is summed into a new
composite cycle. The sensor residual (aggregate minus the active loads) is
added to each composite, so the full subset reproduces the measured cycle
and the all-off subset is pure residual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numba
import numpy as np

from cyclenilm.errors import BadId, LengthMismatch, NilmError
from cyclenilm.features import (FeatureVector, WaveShapeConfig, extract_feature_matrix,
                                feature_dim, read_feature_csv, write_feature_csv)
from cyclenilm.simulate import ScenarioCorpus
from cyclenilm.waveform import (CYCLE_LENGTH, CycleObservation, _valid_pair,
                                detect_zero_crossings, resample_span)

DEFAULT_THRESHOLD = 0.2
REDUCTION_TOLERANCE = 0.05
ORIGIN_STRIDE = 10_000_000  # origin_id = dataset_id * ORIGIN_STRIDE + cycle index


@dataclass
class LabeledObservation:
    features: FeatureVector
    state: np.ndarray
    per_load_rms: np.ndarray
    origin_id: int
    dataset_id: int
    synthetic: bool


@dataclass
class ObservationSet:
    """Column-oriented collection of labeled observations."""

    features: np.ndarray   # (n, d)
    states: np.ndarray     # (n, L) uint8
    rms: np.ndarray        # (n, L)
    origin_id: np.ndarray  # (n,) int64
    dataset_id: np.ndarray  # (n,) int64
    synthetic: np.ndarray  # (n,) bool
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.uint8)
        self.rms = np.asarray(self.rms, dtype=np.float64)
        self.origin_id = np.asarray(self.origin_id, dtype=np.int64)
        self.dataset_id = np.asarray(self.dataset_id, dtype=np.int64)
        self.synthetic = np.asarray(self.synthetic, dtype=bool)
        n = self.features.shape[0]
        for name in ("states", "rms", "origin_id", "dataset_id", "synthetic"):
            if getattr(self, name).shape[0] != n:
                raise LengthMismatch(f"column {name} has the wrong number of rows")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_loads(self) -> int:
        return self.states.shape[1]

    def subset(self, idx: np.ndarray) -> "ObservationSet":
        return ObservationSet(self.features[idx], self.states[idx], self.rms[idx],
                              self.origin_id[idx], self.dataset_id[idx],
                              self.synthetic[idx], dict(self.meta))

    def row(self, i: int) -> LabeledObservation:
        return LabeledObservation(FeatureVector.from_array(self.features[i]),
                                  self.states[i].copy(), self.rms[i].copy(),
                                  int(self.origin_id[i]), int(self.dataset_id[i]),
                                  bool(self.synthetic[i]))

    def __iter__(self) -> Iterator[LabeledObservation]:
        return (self.row(i) for i in range(len(self)))

    @classmethod
    def empty(cls, d: int, n_loads: int) -> "ObservationSet":
        return cls(np.zeros((0, d)), np.zeros((0, n_loads)), np.zeros((0, n_loads)),
                   np.zeros(0), np.zeros(0), np.zeros(0))

    @classmethod
    def concat(cls, parts: Sequence["ObservationSet"]) -> "ObservationSet":
        if not parts:
            raise NilmError("nothing to concatenate")
        meta = dict(parts[0].meta)
        return cls(np.concatenate([p.features for p in parts]),
                   np.concatenate([p.states for p in parts]),
                   np.concatenate([p.rms for p in parts]),
                   np.concatenate([p.origin_id for p in parts]),
                   np.concatenate([p.dataset_id for p in parts]),
                   np.concatenate([p.synthetic for p in parts]), meta)

    @classmethod
    def from_observations(cls, rows: Iterable[LabeledObservation]) -> "ObservationSet":
        rows = list(rows)
        if not rows:
            raise NilmError("no observations")
        return cls(np.stack([r.features.to_array() for r in rows]),
                   np.stack([r.state for r in rows]),
                   np.stack([r.per_load_rms for r in rows]),
                   np.array([r.origin_id for r in rows]),
                   np.array([r.dataset_id for r in rows]),
                   np.array([r.synthetic for r in rows]))

    def state_codes(self) -> np.ndarray:
        return pack_states(self.states)


def pack_states(states: np.ndarray) -> np.ndarray:
    """Integer per row with load 1 as the most significant bit."""
    states = np.asarray(states, dtype=np.int64)
    weights = 1 << np.arange(states.shape[1] - 1, -1, -1, dtype=np.int64)
    return states @ weights


def _cycle_samples(c: CycleObservation | np.ndarray) -> np.ndarray:
    return c.samples if isinstance(c, CycleObservation) else np.asarray(c, dtype=np.float64)


def _as_thresholds(thresholds: float | Sequence[float], n_loads: int) -> np.ndarray:
    t = np.broadcast_to(np.asarray(thresholds, dtype=np.float64), (n_loads,)).copy()
    if np.any(t < 0):
        raise NilmError("thresholds must be non-negative")
    return t


def label_observation(per_load_cycles: Sequence[CycleObservation | np.ndarray],
                      thresholds: float | Sequence[float] = DEFAULT_THRESHOLD
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Level detection: load i is ON iff its cycle RMS exceeds ``thresholds[i]``."""
    x = np.stack([_cycle_samples(c) for c in per_load_cycles])
    r = np.sqrt(np.mean(x * x, axis=-1))
    t = _as_thresholds(thresholds, len(r))
    return (r > t).astype(np.uint8), r


def subset_matrix(m: int) -> np.ndarray:
    """(2**m, m) 0/1 matrix; row s selects bit j of s (MSB first)."""
    s = np.arange(2 ** m, dtype=np.int64)[:, None]
    return ((s >> np.arange(m - 1, -1, -1)) & 1).astype(np.float64)


def _expand_block(cycles: np.ndarray, thresholds: np.ndarray,
                  residual: np.ndarray | None) -> tuple[np.ndarray, np.ndarray, np.ndarray,
                                                        np.ndarray]:
    """Composite cycles and labels for one observation.

    Args:
        cycles: (L, N) per-load cycles.
        thresholds: (L,) level-detection thresholds.
        residual: (N,) samples added to every composite, or None.

    Returns:
        composites (2**m, N), states (2**m, L), rms (2**m, L), is_full (2**m,).
    """
    state, r = label_observation(cycles, thresholds)
    active = np.flatnonzero(state)
    sel = subset_matrix(active.size)
    composites = sel @ cycles[active]
    if residual is not None:
        composites += residual
    n_sub, n_loads = sel.shape[0], cycles.shape[0]
    states = np.zeros((n_sub, n_loads), dtype=np.uint8)
    states[:, active] = sel.astype(np.uint8)
    rms_rows = np.zeros((n_sub, n_loads))
    rms_rows[:, active] = sel * r[active]
    if residual is not None:
        inactive = np.flatnonzero(state == 0)
        rms_rows[:, inactive] = r[inactive]
    is_full = np.zeros(n_sub, dtype=bool)
    is_full[-1] = residual is not None
    return composites, states, rms_rows, is_full


def expand_synthetic(per_load_cycles: Sequence[CycleObservation | np.ndarray],
                     thresholds: float | Sequence[float] = DEFAULT_THRESHOLD,
                     cfg: WaveShapeConfig = WaveShapeConfig(), *,
                     residual: np.ndarray | None = None, origin_id: int = 0,
                     dataset_id: int = 0) -> list[LabeledObservation]:
    """All ``2**m`` superpositions of the ``m`` loads active in one observation.

    Without ``residual`` each composite is exactly the sum of its member
    cycles. With it (aggregate minus active loads), the full combination is
    the measured cycle itself and is flagged as non-synthetic.
    """
    cycles = np.stack([_cycle_samples(c) for c in per_load_cycles])
    t = _as_thresholds(thresholds, cycles.shape[0])
    comp, states, rms_rows, is_full = _expand_block(cycles, t, residual)
    feats = extract_feature_matrix(comp, cfg)
    return [LabeledObservation(FeatureVector.from_array(feats[s]), states[s], rms_rows[s],
                               origin_id, dataset_id, not is_full[s])
            for s in range(comp.shape[0])]


@numba.njit(cache=True)
def _reduction_scan(x: np.ndarray, order: np.ndarray, codes: np.ndarray,
                    n_codes: int, tol: float, keep_first: bool) -> np.ndarray:
    keep = np.zeros(order.size, dtype=np.bool_)
    seen = np.zeros(n_codes, dtype=np.bool_)
    ref = -1
    ref_norm = 0.0
    d = x.shape[1]
    for pos in range(order.size):
        i = order[pos]
        take = ref < 0
        if not take:
            dist = 0.0
            for j in range(d):
                dist += abs(x[i, j] - x[ref, j])
            take = dist > tol * ref_norm
        if not take and keep_first and not seen[codes[pos]]:
            take = True
        if take:
            keep[pos] = True
            seen[codes[pos]] = True
            ref = i
            ref_norm = 0.0
            for j in range(d):
                ref_norm += abs(x[i, j])
    return keep


def reduction_order(features: np.ndarray) -> np.ndarray:
    """Lexicographic row order over the feature columns (column 0 most significant)."""
    return np.lexsort(features.T[::-1]) if len(features) else np.zeros(0, dtype=np.int64)


def reduce_dataset(data: ObservationSet | Sequence[LabeledObservation],
                   tol: float = REDUCTION_TOLERANCE, *, keep_new_states: bool = True
                   ) -> ObservationSet:
    """Drop rows that nearly repeat the previously kept row in lexicographic order.

    A row is discarded when its L1 feature distance to the last kept row is
    at most ``tol`` times that row's L1 norm. With ``keep_new_states`` the
    first row of every state vector met during the scan is kept regardless,
    so no class disappears. Output rows are in sorted order. The scan is
    order dependent and runs sequentially.
    """
    if not isinstance(data, ObservationSet):
        data = ObservationSet.from_observations(data)
    if len(data) == 0:
        return data
    order = reduction_order(data.features)
    codes = pack_states(data.states)
    uniq, dense = np.unique(codes[order], return_inverse=True)
    keep = _reduction_scan(data.features, order.astype(np.int64), dense.astype(np.int64),
                           uniq.size, float(tol), keep_new_states)
    return data.subset(order[keep])


def split_strategy1(data: ObservationSet, ratio: float = 0.8, seed: int = 0
                    ) -> tuple[ObservationSet, ObservationSet]:
    """Shuffled split by origin: siblings from one measured cycle stay together."""
    if not 0.0 < ratio < 1.0:
        raise NilmError("ratio must lie in (0, 1)")
    groups = np.unique(data.origin_id)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(groups)
    n_train = int(round(ratio * groups.size))
    train_groups = perm[:n_train]
    mask = np.isin(data.origin_id, train_groups)
    return data.subset(np.flatnonzero(mask)), data.subset(np.flatnonzero(~mask))


def split_strategy2(data: ObservationSet, holdout: int
                    ) -> tuple[ObservationSet, ObservationSet]:
    """Train on every data set except ``holdout``; test on ``holdout``."""
    mask = data.dataset_id == holdout
    if not mask.any():
        raise BadId(f"data set {holdout} not present")
    return data.subset(np.flatnonzero(~mask)), data.subset(np.flatnonzero(mask))


# -- building from simulated corpora ---------------------------------------

@dataclass
class DatasetConfig:
    thresholds: float | tuple[float, ...] = DEFAULT_THRESHOLD
    wave_shape: WaveShapeConfig = field(default_factory=WaveShapeConfig)
    n_samples: int = CYCLE_LENGTH
    expand: bool = True
    cycle_stride: int = 1
    reduce: bool = True
    reduction_tol: float = REDUCTION_TOLERANCE
    chunk_cycles: int = 16


def corpus_crossings(corpus: ScenarioCorpus) -> np.ndarray:
    ref = corpus.voltage if corpus.voltage is not None else corpus.i_tot
    return detect_zero_crossings(ref)


def corpus_cycle_pairs(corpus: ScenarioCorpus) -> list[tuple[int, float, float]]:
    """(cycle index, start, stop) for every valid consecutive crossing pair."""
    xs = corpus_crossings(corpus)
    period = corpus.i_tot.sample_rate / 60.0
    return [(k, float(xs[k]), float(xs[k + 1])) for k in range(len(xs) - 1)
            if _valid_pair(xs[k], xs[k + 1], period)]


def corpus_cycles(corpus: ScenarioCorpus, pairs: Sequence[tuple[int, float, float]],
                  n_samples: int = CYCLE_LENGTH) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate (m, N) and per-load (m, L, N) cycles for the given pairs."""
    m = len(pairs)
    agg = np.empty((m, n_samples))
    loads = np.empty((m, corpus.n_loads, n_samples))
    for r, (_, a, b) in enumerate(pairs):
        agg[r] = resample_span(corpus.i_tot.samples, a, b, n_samples)
        for j, w in enumerate(corpus.per_load):
            loads[r, j] = resample_span(w.samples, a, b, n_samples)
    return agg, loads


def build_observations(corpus: ScenarioCorpus, cfg: DatasetConfig = DatasetConfig()
                       ) -> ObservationSet:
    """Segment, label and (optionally) expand and reduce one scenario."""
    t = _as_thresholds(cfg.thresholds, corpus.n_loads)
    pairs = corpus_cycle_pairs(corpus)[::cfg.cycle_stride]
    d = feature_dim(cfg.wave_shape.k)
    parts = []
    for s in range(0, len(pairs), cfg.chunk_cycles):
        chunk = pairs[s:s + cfg.chunk_cycles]
        agg, loads = corpus_cycles(corpus, chunk, cfg.n_samples)
        comp_rows, st_rows, rms_rows, syn_rows, origin_rows = [], [], [], [], []
        for r, (k, _, _) in enumerate(chunk):
            origin = corpus.dataset_id * ORIGIN_STRIDE + k
            if cfg.expand:
                state, r_load = label_observation(loads[r], t)
                residual = agg[r] - state.astype(np.float64) @ loads[r]
                comp, st, rr, full = _expand_block(loads[r], t, residual)
                comp[-1] = agg[r]  # bit-exact measured cycle for the full subset
            else:
                st1, rr1 = label_observation(loads[r], t)
                comp, st, rr, full = agg[r][None], st1[None], rr1[None], np.ones(1, bool)
            comp_rows.append(comp)
            st_rows.append(st)
            rms_rows.append(rr)
            syn_rows.append(~full)
            origin_rows.append(np.full(comp.shape[0], origin, dtype=np.int64))
        comp = np.concatenate(comp_rows)
        feats = extract_feature_matrix(comp, cfg.wave_shape)
        parts.append(ObservationSet(feats, np.concatenate(st_rows), np.concatenate(rms_rows),
                                    np.concatenate(origin_rows),
                                    np.full(comp.shape[0], corpus.dataset_id),
                                    np.concatenate(syn_rows)))
    if not parts:
        return ObservationSet.empty(d, corpus.n_loads)
    data = ObservationSet.concat(parts)
    data.meta["n_raw"] = len(data)
    if cfg.reduce:
        data = reduce_dataset(data, cfg.reduction_tol)
    return data


def build_dataset(corpora: Iterable[ScenarioCorpus], cfg: DatasetConfig = DatasetConfig()
                  ) -> ObservationSet:
    """Concatenate per-scenario observation sets (reduction is per scenario)."""
    parts = [build_observations(c, cfg) for c in corpora]
    n_raw = sum(p.meta.get("n_raw", len(p)) for p in parts)
    data = ObservationSet.concat(parts)
    data.meta["n_raw"] = n_raw
    data.meta["wave_shape"] = {"ratio_points": [list(p) for p in cfg.wave_shape.ratio_points],
                               "epsilon": cfg.wave_shape.epsilon}
    data.meta["n_samples"] = cfg.n_samples
    return data


def trace_observations(corpus: ScenarioCorpus, cfg: DatasetConfig = DatasetConfig()
                       ) -> tuple[np.ndarray, ObservationSet]:
    """Measured cycles of a scenario (no expansion) and their labeled rows."""
    pairs = corpus_cycle_pairs(corpus)
    agg, loads = corpus_cycles(corpus, pairs, cfg.n_samples)
    t = _as_thresholds(cfg.thresholds, corpus.n_loads)
    r = np.sqrt(np.mean(loads * loads, axis=-1))
    states = (r > t).astype(np.uint8)
    feats = extract_feature_matrix(agg, cfg.wave_shape)
    origin = corpus.dataset_id * ORIGIN_STRIDE + np.array([k for k, _, _ in pairs])
    obs = ObservationSet(feats, states, r, origin, np.full(len(pairs), corpus.dataset_id),
                         np.zeros(len(pairs), bool))
    return agg, obs


# -- files -----------------------------------------------------------------

def write_dataset(out_dir: str | Path, data: ObservationSet) -> Path:
    """``features.csv`` + ``labels.csv`` + ``meta.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = data.features.shape[1]
    k = d - feature_dim(0)
    write_feature_csv(out / "features.csv", data.features, k)
    L = data.n_loads
    header = ["origin_id", "dataset_id"] + [f"q_{i}" for i in range(1, L + 1)] + \
             [f"rms_{i}" for i in range(1, L + 1)] + ["synthetic"]
    table = np.column_stack([data.origin_id, data.dataset_id, data.states, data.rms,
                             data.synthetic.astype(np.int64)]) if len(data) else \
        np.zeros((0, len(header)))
    fmt = ["%d", "%d"] + ["%d"] * L + ["%.17g"] * L + ["%d"]
    np.savetxt(out / "labels.csv", table, delimiter=",", header=",".join(header),
               comments="", fmt=fmt)
    (out / "meta.json").write_text(json.dumps(data.meta, indent=1))
    return out


def read_dataset(path: str | Path) -> ObservationSet:
    src = Path(path)
    feats, _ = read_feature_csv(src / "features.csv")
    with open(src / "labels.csv") as fh:
        header = fh.readline().strip().split(",")
        table = np.loadtxt(fh, delimiter=",", ndmin=2)
    L = sum(1 for h in header if h.startswith("q_"))
    if table.size == 0:
        table = np.zeros((0, len(header)))
    syn = table[:, 2 + 2 * L] if "synthetic" in header else np.zeros(len(table))
    meta_path = src / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return ObservationSet(feats, table[:, 2:2 + L], table[:, 2 + L:2 + 2 * L],
                          table[:, 0].astype(np.int64), table[:, 1].astype(np.int64),
                          syn.astype(bool), meta)


def wave_shape_from_meta(meta: dict) -> WaveShapeConfig:
    ws = meta.get("wave_shape")
    if not ws:
        return WaveShapeConfig()
    return WaveShapeConfig(tuple(tuple(p) for p in ws["ratio_points"]), ws["epsilon"])


def origin_cycle_index(origin_id: np.ndarray) -> np.ndarray:
    return np.asarray(origin_id) % ORIGIN_STRIDE


__all__ = [
    "LabeledObservation", "ObservationSet", "DatasetConfig", "label_observation",
    "expand_synthetic", "reduce_dataset", "split_strategy1", "split_strategy2",
    "build_observations", "build_dataset", "trace_observations", "write_dataset",
    "read_dataset", "pack_states", "subset_matrix",
]
