"""Random-forest classifiers: per-load binary bank and power-set baseline.

Trees are grown by exact greedy induction with the entropy criterion. Every
bootstrap replicate is represented by integer weights over the distinct
training rows it drew, which keeps node statistics identical to growing on
the resampled rows while touching each row once.

Storage is a flat preorder node array per forest. For node ``i`` the left
child is ``i + 1``; ``right[i]`` holds the right child, or the leaf slot when
``feature[i] == -1``. Leaf class counts are stored densely, one row of
``n_classes`` counts per leaf.
"""

from __future__ import annotations

import hashlib
import io
import itertools
import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np

from cyclenilm.errors import DimMismatch, EmptyData, EmptyGrid, FormatError, OutOfRange

FOREST_MAGIC = b"CSRF"
FOREST_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIBQQ")


@dataclass(frozen=True)
class ForestParams:
    """Hyperparameters; ``max_features=None`` means ``ceil(sqrt(d))``."""

    n_trees: int = 200
    max_depth: int = 35
    max_features: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    bootstrap: bool = True

    def features_for(self, d: int) -> int:
        mf = self.max_features or math.ceil(math.sqrt(d))
        return max(1, min(d, mf))


# -- tree induction -----------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _best_split(Xt, y, w, sidx, s, e, feats, n_classes, parent_counts, xlx, tol, min_leaf):
    """Best (feature, threshold) over ``feats`` for the node occupying ``[s, e)``.

    ``sidx[f, s:e]`` lists the node's rows sorted by feature ``f``. Minimises
    the weighted child entropy ``W_L H_L + W_R H_R`` (nats times weight) with
    integer counts and the table ``xlx[c] = c ln c``. A candidate replaces the
    incumbent only when better by more than ``tol``, so ties keep the lowest
    feature index and then the lowest threshold.
    """
    cl = np.empty(n_classes, dtype=np.int64)
    best_f = -1
    best_thr = 0.0
    best_score = np.inf
    W = 0
    a_tot = 0.0
    m = e - s
    for k in range(n_classes):
        W += parent_counts[k]
        a_tot += xlx[parent_counts[k]]
    for fi in range(feats.size):
        f = feats[fi]
        col = Xt[f]
        order = sidx[f]
        for k in range(n_classes):
            cl[k] = 0
        a_l = 0.0
        a_r = a_tot
        wl = 0
        nl = 0
        for r in range(s, e - 1):
            row = order[r]
            k = y[row]
            wk = w[row]
            cr_old = parent_counts[k] - cl[k]
            a_r += xlx[cr_old - wk] - xlx[cr_old]
            a_l += xlx[cl[k] + wk] - xlx[cl[k]]
            cl[k] += wk
            wl += wk
            nl += 1
            v0 = col[row]
            v1 = col[order[r + 1]]
            if v1 <= v0:
                continue
            if nl < min_leaf or (m - nl) < min_leaf:
                continue
            score = (xlx[wl] - a_l) + (xlx[W - wl] - a_r)
            if score < best_score - tol:
                best_score = score
                best_f = f
                thr = 0.5 * (v0 + v1)
                if thr >= v1:
                    thr = v0
                best_thr = thr
    return best_f, best_thr


@numba.njit(cache=True, nogil=True)
def _grow_tree(Xt, y, w, presort, n_classes, max_depth, max_features, min_split, min_leaf,
               seed):
    """Grow one tree on rows with ``w > 0``.

    Args:
        Xt: (d, N) feature-major training matrix.
        y: (N,) internal class indices.
        w: (N,) integer bootstrap weights.
        presort: (d, N) row order of each feature over all N rows.
    """
    np.random.seed(seed)
    d, N = Xt.shape
    n = 0
    total = 0
    for r in range(N):
        if w[r] > 0:
            n += 1
            total += w[r]
    xlx = np.zeros(total + 1)
    for c in range(1, total + 1):
        xlx[c] = c * math.log(c)
    sidx = np.empty((d, n), dtype=np.int32)
    for f in range(d):
        q = 0
        for r in range(N):
            row = presort[f, r]
            if w[row] > 0:
                sidx[f, q] = row
                q += 1
    goes_left = np.zeros(N, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int32)
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    right = np.full(cap, -1, dtype=np.int32)
    leaf_counts = np.zeros((n + 1, n_classes), dtype=np.int64)
    n_nodes = 0
    n_leaves = 0
    max_seen = 0
    # stack entries: start, end, depth, parent, is_right
    stack = np.empty((2 * max_depth + 8, 5), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = 0
    stack[0, 3] = -1
    stack[0, 4] = 0
    top = 1
    counts = np.empty(n_classes, dtype=np.int64)
    perm = np.arange(d)
    chosen = np.empty(d, dtype=np.int64)
    while top > 0:
        top -= 1
        s, e, depth, parent, is_right = stack[top]
        node = n_nodes
        n_nodes += 1
        if parent >= 0 and is_right == 1:
            right[parent] = node
        if depth > max_seen:
            max_seen = depth
        for k in range(n_classes):
            counts[k] = 0
        for r in range(s, e):
            row = sidx[0, r]
            counts[y[row]] += w[row]
        W = 0
        n_nonzero = 0
        for k in range(n_classes):
            W += counts[k]
            if counts[k] > 0:
                n_nonzero += 1
        split_f = -1
        split_thr = 0.0
        if n_nonzero > 1 and depth < max_depth and W >= min_split and (e - s) >= 2:
            # draw features until max_features non-constant ones are found
            for i in range(d):
                perm[i] = i
            n_chosen = 0
            for i in range(d):
                j = i + np.random.randint(0, d - i)
                t = perm[i]
                perm[i] = perm[j]
                perm[j] = t
                f = perm[i]
                if Xt[f, sidx[f, e - 1]] > Xt[f, sidx[f, s]]:
                    chosen[n_chosen] = f
                    n_chosen += 1
                    if n_chosen == max_features:
                        break
            if n_chosen > 0:
                feats = np.sort(chosen[:n_chosen])
                tol = 1e-10 * max(xlx[W], 1.0)
                split_f, split_thr = _best_split(Xt, y, w, sidx, s, e, feats, n_classes,
                                                 counts, xlx, tol, min_leaf)
        if split_f < 0:
            for k in range(n_classes):
                leaf_counts[n_leaves, k] = counts[k]
            right[node] = n_leaves
            n_leaves += 1
            continue
        feature[node] = split_f
        threshold[node] = split_thr
        n_left = 0
        for r in range(s, e):
            row = sidx[split_f, r]
            left = Xt[split_f, row] <= split_thr
            goes_left[row] = left
            if left:
                n_left += 1
        p = s + n_left
        # stable partition of every feature list keeps each side sorted
        for f in range(d):
            a = s
            q = 0
            for r in range(s, e):
                row = sidx[f, r]
                if goes_left[row]:
                    sidx[f, a] = row
                    a += 1
                else:
                    buf[q] = row
                    q += 1
            for r in range(q):
                sidx[f, p + r] = buf[r]
        stack[top, 0] = p
        stack[top, 1] = e
        stack[top, 2] = depth + 1
        stack[top, 3] = node
        stack[top, 4] = 1
        top += 1
        stack[top, 0] = s
        stack[top, 1] = p
        stack[top, 2] = depth + 1
        stack[top, 3] = node
        stack[top, 4] = 0
        top += 1
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), right[:n_nodes].copy(),
            leaf_counts[:n_leaves].copy(), max_seen)


@numba.njit(cache=True, nogil=True)
def _tree_votes(X, feature, threshold, right, leaf_class, roots, out):
    """Add one vote per tree to ``out[row, class]``."""
    for i in range(X.shape[0]):
        for t in range(roots.size):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node += 1
                else:
                    node = right[node]
            out[i, leaf_class[right[node]]] += 1


@numba.njit(cache=True, nogil=True)
def _bank_predict_one(x, feature, threshold, right, leaf_class, roots, model_tree_start,
                      out):
    """Majority vote of each binary forest in a stacked bank, ties to 0."""
    for m in range(model_tree_start.size - 1):
        ones = 0
        n_t = model_tree_start[m + 1] - model_tree_start[m]
        for t in range(model_tree_start[m], model_tree_start[m + 1]):
            node = roots[t]
            while feature[node] >= 0:
                if x[feature[node]] <= threshold[node]:
                    node += 1
                else:
                    node = right[node]
            ones += leaf_class[right[node]]
        out[m] = 1 if 2 * ones > n_t else 0


# -- models -------------------------------------------------------------------

@dataclass
class DecisionTree:
    """One fitted tree in preorder layout (see module docstring)."""

    feature: np.ndarray
    threshold: np.ndarray
    right: np.ndarray
    leaf_counts: np.ndarray
    depth: int

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return self.leaf_counts.shape[0]

    def leaf_classes(self) -> np.ndarray:
        return np.argmax(self.leaf_counts, axis=1).astype(np.int32)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros((X.shape[0], self.leaf_counts.shape[1]), dtype=np.int64)
        _tree_votes(X, self.feature, self.threshold, self.right, self.leaf_classes(),
                    np.zeros(1, dtype=np.int32), out)
        return np.argmax(out, axis=1)

    def root_split(self) -> tuple[int, float] | None:
        if self.feature[0] < 0:
            return None
        return int(self.feature[0]), float(self.threshold[0])


def _bootstrap_weights(n: int, rng: np.random.Generator, bootstrap: bool) -> np.ndarray:
    """Times each row was drawn in a size-``n`` resample with replacement."""
    if not bootstrap:
        return np.ones(n, dtype=np.int64)
    return np.bincount(rng.integers(0, n, n), minlength=n).astype(np.int64)


@dataclass
class _TrainMatrix:
    """Feature-major copy of the training matrix with per-feature row order."""

    Xt: np.ndarray
    presort: np.ndarray

    @classmethod
    def of(cls, X: np.ndarray) -> "_TrainMatrix":
        Xt = np.ascontiguousarray(np.asarray(X, dtype=np.float64).T)
        presort = np.argsort(Xt, axis=1, kind="stable").astype(np.int32)
        return cls(Xt, np.ascontiguousarray(presort))


def _fit_tree(tm: _TrainMatrix, y: np.ndarray, n_classes: int, params: ForestParams,
              weights: np.ndarray, seed: int) -> DecisionTree:
    f, t, r, c, depth = _grow_tree(
        tm.Xt, y, weights, tm.presort, n_classes, params.max_depth,
        params.features_for(tm.Xt.shape[0]), params.min_samples_split,
        params.min_samples_leaf, seed)
    return DecisionTree(f, t, r, c, int(depth))


def train_tree(X: np.ndarray, y: np.ndarray, params: ForestParams = ForestParams(),
               seed: int = 0, n_classes: int | None = None) -> DecisionTree:
    """Grow a single tree on all rows (no bootstrap)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise EmptyData("cannot grow a tree on zero rows")
    n_classes = n_classes or int(y.max()) + 1
    return _fit_tree(_TrainMatrix.of(X), y, n_classes, params,
                     np.ones(X.shape[0], dtype=np.int64), seed)


@dataclass
class ForestModel:
    """Fitted forest. ``classes[k]`` is the external label of internal class ``k``."""

    trees: list[DecisionTree]
    classes: np.ndarray
    n_features: int
    params: ForestParams = field(default_factory=ForestParams)

    def __post_init__(self) -> None:
        self._pack()

    def _pack(self) -> None:
        offs = np.cumsum([0] + [t.n_nodes for t in self.trees])
        loffs = np.cumsum([0] + [t.n_leaves for t in self.trees])
        self._roots = offs[:-1].astype(np.int32)
        self._feature = np.concatenate([t.feature for t in self.trees]).astype(np.int32)
        self._threshold = np.concatenate([t.threshold for t in self.trees])
        right = []
        for t, o, lo in zip(self.trees, offs, loffs):
            r = t.right.astype(np.int64)
            right.append(np.where(t.feature >= 0, r + o, r + lo))
        self._right = np.concatenate(right).astype(np.int32)
        self._leaf_class = np.concatenate([t.leaf_classes() for t in self.trees])

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_classes(self) -> int:
        return self.classes.size

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.ascontiguousarray(X)

    def votes(self, X: np.ndarray) -> np.ndarray:
        """(n, n_classes) count of trees voting for each internal class."""
        X = self._check(X)
        out = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        _tree_votes(X, self._feature, self._threshold, self._right, self._leaf_class,
                    self._roots, out)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Majority vote; ties go to the lowest label (OFF for binary models)."""
        return self.classes[np.argmax(self.votes(X), axis=1)]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.votes(X) / self.n_trees

    @property
    def max_depth_seen(self) -> int:
        return max((t.depth for t in self.trees), default=0)


def predict_forest(model: ForestModel, x: np.ndarray) -> tuple[int, float]:
    """(label, vote fraction of that label) for one feature vector."""
    v = model.votes(np.asarray(x, dtype=np.float64)[None, :] if np.ndim(x) == 1 else x)[0]
    k = int(np.argmax(v))
    return int(model.classes[k]), float(v[k] / model.n_trees)


def train_forest(X: np.ndarray, y: np.ndarray, params: ForestParams = ForestParams(),
                 seed: int = 0, n_jobs: int = 1) -> ForestModel:
    """Bagged ensemble of entropy trees; identical seeds give identical forests.

    Tree ``t`` uses the ``t``-th child of ``SeedSequence(seed)`` for both its
    bootstrap draw and its feature sampling, so results do not depend on
    ``n_jobs``.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise EmptyData("cannot train a forest on zero rows")
    if y.shape[0] != X.shape[0]:
        raise DimMismatch("feature and label row counts differ")
    classes, yk = np.unique(y, return_inverse=True)
    yk = yk.astype(np.int64)
    children = np.random.SeedSequence(seed).spawn(params.n_trees)
    tm = _TrainMatrix.of(X)

    def grow(ss: np.random.SeedSequence) -> DecisionTree:
        rng = np.random.default_rng(ss)
        w = _bootstrap_weights(X.shape[0], rng, params.bootstrap)
        tree_seed = int(ss.generate_state(1, np.uint32)[0])
        return _fit_tree(tm, yk, classes.size, params, w, tree_seed)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(grow, children))
    else:
        trees = [grow(ss) for ss in children]
    return ForestModel(trees, classes, X.shape[1], params)


# -- bank and power set -------------------------------------------------------

@dataclass
class ClassifierBank:
    """One binary forest per load; ``models[i]`` predicts ``q_{i+1}``."""

    models: list[ForestModel]
    schema: str = ""

    def __post_init__(self) -> None:
        dims = {m.n_features for m in self.models}
        if len(dims) > 1:
            raise DimMismatch("bank models disagree on feature dimension")
        self._stack()

    def _stack(self) -> None:
        feats, thr, right, leaf, roots, starts = [], [], [], [], [], [0]
        node_off = leaf_off = 0
        for m in self.models:
            # map internal classes back to 0/1 labels
            labels = m.classes.astype(np.int32)[m._leaf_class]
            feats.append(m._feature)
            thr.append(m._threshold)
            is_int = m._feature >= 0
            right.append(np.where(is_int, m._right + node_off, m._right + leaf_off))
            leaf.append(labels)
            roots.append(m._roots + node_off)
            starts.append(starts[-1] + m.n_trees)
            node_off += m._feature.size
            leaf_off += labels.size
        self._feature = np.concatenate(feats).astype(np.int32)
        self._threshold = np.concatenate(thr)
        self._right = np.concatenate(right).astype(np.int32)
        self._leaf = np.concatenate(leaf).astype(np.int32)
        self._roots = np.concatenate(roots).astype(np.int32)
        self._starts = np.asarray(starts, dtype=np.int64)

    @property
    def n_loads(self) -> int:
        return len(self.models)

    @property
    def n_features(self) -> int:
        return self.models[0].n_features

    def predict_one(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise DimMismatch(f"expected {self.n_features} features, got {x.shape}")
        out = np.zeros(self.n_loads, dtype=np.uint8)
        _bank_predict_one(x, self._feature, self._threshold, self._right, self._leaf,
                          self._roots, self._starts, out)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.column_stack([m.predict(X) for m in self.models]).astype(np.uint8)


def predict_state(bank: ClassifierBank, x: np.ndarray) -> np.ndarray:
    """LoadStateVector for one feature vector (or rows of a matrix)."""
    x = np.asarray(x, dtype=np.float64)
    return bank.predict_one(x) if x.ndim == 1 else bank.predict(x)


def train_binary_bank(X: np.ndarray, states: np.ndarray, params: ForestParams = ForestParams(),
                      seed: int = 0, n_jobs: int = 1, schema: str = "") -> ClassifierBank:
    """Independent forest per load column; load ``i`` uses seed ``seed + i``."""
    states = np.asarray(states)
    models = [train_forest(X, states[:, i], params, seed + i, n_jobs)
              for i in range(states.shape[1])]
    return ClassifierBank(models, schema)


def encode_powerset(q: Sequence[int] | np.ndarray) -> int | np.ndarray:
    """``sum_i q_i * 2**(N_L - i)`` for ``i = 1..N_L`` (load 1 is the MSB)."""
    q = np.asarray(q, dtype=np.int64)
    if np.any((q != 0) & (q != 1)):
        raise OutOfRange("state entries must be 0 or 1")
    n = q.shape[-1]
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    out = q @ weights
    return int(out) if q.ndim == 1 else out


def decode_powerset(label: int | np.ndarray, n_loads: int) -> np.ndarray:
    lab = np.asarray(label, dtype=np.int64)
    if np.any(lab < 0) or np.any(lab >= (1 << n_loads)):
        raise OutOfRange(f"label outside [0, {1 << n_loads})")
    return ((lab[..., None] >> np.arange(n_loads - 1, -1, -1)) & 1).astype(np.uint8)


@dataclass
class PowersetModel:
    forest: ForestModel
    n_loads: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        return decode_powerset(self.forest.predict(X), self.n_loads)


def train_powerset(X: np.ndarray, states: np.ndarray, params: ForestParams = ForestParams(),
                   seed: int = 0, n_jobs: int = 1) -> PowersetModel:
    """Single forest over power-set labels (one class per joint state)."""
    states = np.asarray(states)
    labels = encode_powerset(states)
    return PowersetModel(train_forest(X, labels, params, seed, n_jobs), states.shape[1])


# -- grid search --------------------------------------------------------------

def expand_grid(grid: dict[str, Sequence]) -> list[dict]:
    keys = sorted(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _model_size_key(p: dict) -> tuple:
    return (p.get("n_trees", ForestParams.n_trees), p.get("max_depth", ForestParams.max_depth))


def grid_search_cv(X: np.ndarray, states: np.ndarray, dataset_id: np.ndarray,
                   grid: dict[str, Sequence] | Sequence[dict], seed: int = 0,
                   base: ForestParams = ForestParams()) -> tuple[dict, list[tuple[dict, float]]]:
    """Leave-one-data-set-out search over bank hyperparameters.

    Each grid point is scored by the mean (over folds) of the bank's mean
    per-load accuracy. Ties prefer fewer trees, then shallower trees.

    Returns:
        (best point, [(point, score), ...] in grid order)
    """
    points = expand_grid(grid) if isinstance(grid, dict) else [dict(p) for p in grid]
    if not points:
        raise EmptyGrid("hyperparameter grid is empty")
    ids = np.unique(dataset_id)
    if ids.size < 2:
        raise EmptyData("need at least two data sets for cross-validation")
    scores = []
    for p in points:
        params = ForestParams(**{**asdict(base), **p})
        fold_acc = []
        for hold in ids:
            tr, te = dataset_id != hold, dataset_id == hold
            bank = train_binary_bank(X[tr], states[tr], params, seed)
            fold_acc.append(float(np.mean(bank.predict(X[te]) == states[te])))
        scores.append((p, float(np.mean(fold_acc))))
    best = max(range(len(points)),
               key=lambda i: (scores[i][1], tuple(-v for v in _model_size_key(points[i]))))
    return points[best], scores


# -- serialization ------------------------------------------------------------

def _count_dtype(counts: np.ndarray) -> tuple[int, str]:
    top = counts.max() if counts.size else 0
    return (0, "<u2") if top < 2 ** 16 else (1, "<u4")


def forest_to_bytes(model: ForestModel) -> bytes:
    counts = np.concatenate([t.leaf_counts for t in model.trees]) if model.trees else \
        np.zeros((0, model.n_classes))
    code, dt = _count_dtype(counts)
    p = model.params
    mf = p.max_features or 0
    buf = io.BytesIO()
    buf.write(_HEADER.pack(FOREST_MAGIC, FOREST_VERSION, model.n_trees, model.n_features,
                           model.n_classes, p.max_depth, code, model._feature.size,
                           counts.shape[0]))
    buf.write(struct.pack("<IIII?", mf, p.min_samples_split, p.min_samples_leaf,
                          0, p.bootstrap))
    buf.write(model.classes.astype("<i8").tobytes())
    nodes = np.array([t.n_nodes for t in model.trees], dtype="<u4")
    depths = np.array([t.depth for t in model.trees], dtype="<u2")
    buf.write(nodes.tobytes())
    buf.write(depths.tobytes())
    buf.write(np.concatenate([t.feature for t in model.trees]).astype("<i2").tobytes())
    buf.write(np.concatenate([t.threshold for t in model.trees]).astype("<f8").tobytes())
    buf.write(np.concatenate([t.right for t in model.trees]).astype("<i4").tobytes())
    buf.write(np.rint(counts).astype(dt).tobytes())
    return buf.getvalue()


def forest_from_bytes(raw: bytes) -> ForestModel:
    if len(raw) < _HEADER.size:
        raise FormatError("truncated forest header")
    magic, ver, n_trees, d, n_classes, max_depth, code, n_nodes, n_leaves = \
        _HEADER.unpack_from(raw)
    if magic != FOREST_MAGIC:
        raise FormatError(f"bad forest magic {magic!r}")
    if ver != FOREST_VERSION:
        raise FormatError(f"unsupported forest version {ver}")
    pos = _HEADER.size
    mf, mss, msl, _, boot = struct.unpack_from("<IIII?", raw, pos)
    pos += struct.calcsize("<IIII?")

    def take(dtype: str, count: int) -> np.ndarray:
        nonlocal pos
        size = np.dtype(dtype).itemsize * count
        if pos + size > len(raw):
            raise FormatError("truncated forest body")
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
        pos += size
        return arr

    classes = take("<i8", n_classes).astype(np.int64)
    nodes = take("<u4", n_trees).astype(np.int64)
    depths = take("<u2", n_trees).astype(np.int64)
    feature = take("<i2", n_nodes).astype(np.int32)
    threshold = take("<f8", n_nodes).astype(np.float64)
    right = take("<i4", n_nodes).astype(np.int32)
    counts = take("<u2" if code == 0 else "<u4", n_leaves * n_classes)
    counts = counts.reshape(n_leaves, n_classes).astype(np.float64)
    if pos != len(raw):
        raise FormatError("trailing bytes after forest body")
    trees = []
    no = lo = 0
    for k in range(n_trees):
        f = feature[no:no + nodes[k]]
        nl = int(np.count_nonzero(f < 0))
        trees.append(DecisionTree(f.copy(), threshold[no:no + nodes[k]].copy(),
                                  right[no:no + nodes[k]].copy(), counts[lo:lo + nl].copy(),
                                  int(depths[k])))
        no += nodes[k]
        lo += nl
    params = ForestParams(int(n_trees), int(max_depth), int(mf) or None, int(mss), int(msl),
                          bool(boot))
    return ForestModel(trees, classes, int(d), params)


def save_forest(path: str | Path, model: ForestModel) -> int:
    raw = forest_to_bytes(model)
    Path(path).write_bytes(raw)
    return len(raw)


def load_forest(path: str | Path) -> ForestModel:
    return forest_from_bytes(Path(path).read_bytes())


def save_bank(out_dir: str | Path, bank: ClassifierBank) -> Path:
    """One forest file per load plus ``bank.json`` (file list and schema hash)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, m in enumerate(bank.models, start=1):
        name = f"load_{i}.csrf"
        save_forest(out / name, m)
        files.append({"load": i, "file": name,
                      "sha256": hashlib.sha256((out / name).read_bytes()).hexdigest()})
    manifest = {"format": "cyclenilm-bank", "version": 1, "n_loads": bank.n_loads,
                "n_features": bank.n_features, "schema": bank.schema, "models": files}
    (out / "bank.json").write_text(json.dumps(manifest, indent=1))
    return out / "bank.json"


def load_bank(path: str | Path) -> ClassifierBank:
    p = Path(path)
    manifest_path = p / "bank.json" if p.is_dir() else p
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != "cyclenilm-bank":
        raise FormatError(f"{manifest_path} is not a bank manifest")
    models = []
    for m in manifest["models"]:
        raw = (manifest_path.parent / m["file"]).read_bytes()
        if "sha256" in m and hashlib.sha256(raw).hexdigest() != m["sha256"]:
            raise FormatError(f"checksum mismatch for {m['file']}")
        models.append(forest_from_bytes(raw))
    return ClassifierBank(models, manifest.get("schema", ""))


def bank_nbytes(bank: ClassifierBank) -> int:
    return sum(len(forest_to_bytes(m)) for m in bank.models)


def powerset_nbytes(model: PowersetModel) -> int:
    return len(forest_to_bytes(model.forest))


__all__: Iterable[str] = [
    "ForestParams", "DecisionTree", "ForestModel", "ClassifierBank", "PowersetModel",
    "train_tree", "train_forest", "predict_forest", "train_binary_bank", "predict_state",
    "encode_powerset", "decode_powerset", "train_powerset", "grid_search_cv",
    "save_forest", "load_forest", "save_bank", "load_bank", "bank_nbytes",
    "powerset_nbytes",
]
