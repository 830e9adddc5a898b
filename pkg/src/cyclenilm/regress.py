"""Per-load RMS regressors: Yeo-Johnson inputs, standardized targets, numpy MLP.

Each regressor sees the cycle's feature vector followed by the N_L state
bits. Feature columns are power-transformed and standardized; state bits
pass through unchanged. The network is a fully connected stack
(input zero-padded to 128 units, three hidden layers of 256 leaky-ReLU units
with dropout during training, one linear output) trained with Adam on mean
squared error and early-stopped on validation mean absolute error.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from cyclenilm.errors import (DegenerateColumn, DimMismatch, EmptyData, FormatError,
                              NonFiniteLoss)

LAMBDA_BOUNDS = (-5.0, 5.0)
LAMBDA_TOL = 1e-5
MLP_MAGIC = b"CSNN"
MLP_VERSION = 1


# -- Yeo-Johnson --------------------------------------------------------------

def yj_transform(y: float | np.ndarray, lam: float) -> float | np.ndarray:
    """Yeo-Johnson power transform (defined for any real ``y``)."""
    y = np.asarray(y, dtype=np.float64)
    out = np.empty_like(y)
    pos = y >= 0
    yp, yn = y[pos], y[~pos]
    if abs(lam) < 1e-12:
        out[pos] = np.log1p(yp)
    else:
        out[pos] = np.expm1(lam * np.log1p(yp)) / lam
    if abs(lam - 2.0) < 1e-12:
        out[~pos] = -np.log1p(-yn)
    else:
        out[~pos] = -np.expm1((2.0 - lam) * np.log1p(-yn)) / (2.0 - lam)
    return float(out) if out.ndim == 0 else out


def _yj_columns(Y: np.ndarray, lams: np.ndarray) -> np.ndarray:
    """Column-wise ``yj_transform`` with one λ per column (same elementwise ops)."""
    lams = np.asarray(lams, dtype=np.float64)
    pos = Y >= 0
    lp = np.log1p(np.abs(Y))
    zero = np.abs(lams) < 1e-12
    two = np.abs(lams - 2.0) < 1e-12
    lam_p = np.where(zero, 1.0, lams)
    lam_n = np.where(two, 1.0, 2.0 - lams)
    with np.errstate(over="ignore", invalid="ignore"):
        up = np.where(zero, lp, np.expm1(lams * lp) / lam_p)
        down = np.where(two, -lp, -np.expm1((2.0 - lams) * lp) / lam_n)
    return np.where(pos, up, down)


def yj_log_likelihood(y: np.ndarray, lam: float) -> float:
    """Profile log-likelihood of ``lam`` under a Gaussian model of the transformed data."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    with np.errstate(over="ignore", invalid="ignore"):
        t = yj_transform(y, lam)
        var = np.var(t)
    if not np.isfinite(var) or var <= 0:
        return -np.inf
    jac = (lam - 1.0) * np.sum(np.sign(y) * np.log1p(np.abs(y)))
    return float(-0.5 * n * math.log(var) + jac)


def fit_yeo_johnson(column: np.ndarray) -> float:
    """Maximum-likelihood λ by bounded scalar search on [-5, 5].

    Raises:
        DegenerateColumn: fewer than two distinct values.
    """
    col = np.asarray(column, dtype=np.float64)
    if np.unique(col).size < 2:
        raise DegenerateColumn("column needs at least two distinct values")
    res = minimize_scalar(lambda lam: -yj_log_likelihood(col, lam), bounds=LAMBDA_BOUNDS,
                          method="bounded", options={"xatol": LAMBDA_TOL})
    return float(res.x)


@dataclass
class InputTransform:
    """Column-wise Yeo-Johnson + standardization for features; state bits pass through.

    Attributes:
        n_inputs: Width of the raw input (features + state bits).
        n_passthrough: Trailing columns left untouched.
        kept: Indices of feature columns that survived (others had no spread).
        lambdas, means, stds: Per kept column.
    """

    n_inputs: int
    n_passthrough: int
    kept: np.ndarray
    lambdas: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    dropped: list[int] = field(default_factory=list)

    @classmethod
    def fit(cls, X: np.ndarray, n_passthrough: int = 0) -> "InputTransform":
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] == 0:
            raise EmptyData("cannot fit a transform on zero rows")
        n_feat = X.shape[1] - n_passthrough
        kept, lambdas, means, stds, dropped = [], [], [], [], []
        for j in range(n_feat):
            try:
                lam = fit_yeo_johnson(X[:, j])
            except DegenerateColumn:
                dropped.append(j)
                continue
            t = yj_transform(X[:, j], lam)
            sd = float(np.std(t))
            if not np.isfinite(sd) or sd <= 0:
                dropped.append(j)
                continue
            kept.append(j)
            lambdas.append(lam)
            means.append(float(np.mean(t)))
            stds.append(sd)
        return cls(X.shape[1], n_passthrough, np.asarray(kept, dtype=np.int64),
                   np.asarray(lambdas), np.asarray(means), np.asarray(stds), dropped)

    @property
    def n_outputs(self) -> int:
        return self.kept.size + self.n_passthrough

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Transform rows (2-D) or a single row (1-D)."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_inputs:
            raise DimMismatch(f"expected {self.n_inputs} inputs, got {X.shape[1]}")
        out = np.empty((X.shape[0], self.n_outputs))
        k = self.kept.size
        out[:, :k] = (_yj_columns(X[:, self.kept], self.lambdas) - self.means) / self.stds
        if self.n_passthrough:
            out[:, k:] = X[:, self.n_inputs - self.n_passthrough:]
        return out[0] if single else out


@dataclass
class OutputScaler:
    mean: float
    std: float

    @classmethod
    def fit(cls, y: np.ndarray) -> "OutputScaler":
        y = np.asarray(y, dtype=np.float64)
        if y.size == 0:
            raise EmptyData("cannot fit a scaler on zero targets")
        sd = float(np.std(y))
        return cls(float(np.mean(y)), sd if sd > 0 else 1.0)

    def scale(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.mean) / self.std

    def unscale(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z) * self.std + self.mean


# -- network ------------------------------------------------------------------

@dataclass(frozen=True)
class MlpHyper:
    input_width: int = 128
    hidden: tuple[int, ...] = (256, 256, 256)
    alpha: float = 0.05
    dropout: float = 0.05
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    val_fraction: float = 0.1
    outlier_quantile: float | None = None  # e.g. 1e-5 drops the extreme .001 percentile
    dtype: str = "float32"
    plateau_factor: float = 1.0  # < 1 multiplies the step after plateau_patience stale epochs
    plateau_patience: int = 3
    refit_output: bool = True  # least-squares output layer after dropout training


@dataclass
class MlpModel:
    """Weights ``W[l]`` have shape (fan_in, fan_out); biases ``b[l]`` (fan_out,)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    alpha: float = 0.05
    dropout: float = 0.05
    history: dict = field(default_factory=dict)

    @property
    def input_width(self) -> int:
        return self.weights[0].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @classmethod
    def init(cls, sizes: Sequence[int], seed: int = 0, alpha: float = 0.05,
             dropout: float = 0.05, dtype: str = "float64") -> "MlpModel":
        """Uniform fan-in initialization scaled for leaky-ReLU gain; zero biases."""
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for l, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = l == len(sizes) - 2
            gain = 1.0 if last else math.sqrt(2.0 / (1.0 + alpha * alpha))
            limit = gain * math.sqrt(3.0 / a)
            ws.append(rng.uniform(-limit, limit, (a, b)).astype(dtype))
            bs.append(np.zeros(b, dtype=dtype))
        return cls(ws, bs, alpha, dropout)

    @classmethod
    def zeros(cls, sizes: Sequence[int], alpha: float = 0.05, dropout: float = 0.05
              ) -> "MlpModel":
        return cls([np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(b) for b in sizes[1:]], alpha, dropout)

    def pad(self, X: np.ndarray) -> np.ndarray:
        """Zero-pad inputs on the right up to the input layer width."""
        X = np.atleast_2d(X)
        width = self.input_width
        if X.shape[1] > width:
            raise DimMismatch(f"{X.shape[1]} inputs exceed input layer width {width}")
        out = np.zeros((X.shape[0], width), dtype=self.weights[0].dtype)
        out[:, :X.shape[1]] = X
        return out

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Inference pass (no dropout); returns shape (n,)."""
        h = self.pad(X)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ w + b
            h = np.where(z > 0, z, self.alpha * z)
        return (h @ self.weights[-1] + self.biases[-1])[:, 0]


def loss_and_grads(model: MlpModel, X: np.ndarray, y: np.ndarray,
                   masks: Sequence[np.ndarray] | None = None
                   ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean squared error and its gradients w.r.t. every weight and bias.

    ``masks`` (one per hidden layer, already scaled by 1/keep) applies
    dropout to hidden activations; ``None`` disables it.
    """
    h = model.pad(X)
    acts, pre = [h], []
    n_hidden = len(model.weights) - 1
    for l in range(n_hidden):
        z = h @ model.weights[l] + model.biases[l]
        h = np.where(z > 0, z, model.alpha * z)
        if masks is not None:
            h = h * masks[l]
        pre.append(z)
        acts.append(h)
    out = (h @ model.weights[-1] + model.biases[-1])[:, 0]
    diff = out - y
    n = y.shape[0]
    loss = float(np.mean(diff * diff))
    g = (2.0 / n) * diff[:, None].astype(h.dtype)
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    gw[-1] = acts[-1].T @ g
    gb[-1] = g.sum(axis=0)
    for l in range(n_hidden - 1, -1, -1):
        g = g @ model.weights[l + 1].T
        if masks is not None:
            g = g * masks[l]
        g = np.where(pre[l] > 0, g, model.alpha * g)
        gw[l] = acts[l].T @ g
        gb[l] = g.sum(axis=0)
    return loss, gw, gb


def train_mlp(X: np.ndarray, y: np.ndarray, hyper: MlpHyper = MlpHyper(), seed: int = 0,
              X_val: np.ndarray | None = None, y_val: np.ndarray | None = None) -> MlpModel:
    """Adam on MSE with dropout; keeps the weights of the best validation MAE epoch.

    Args:
        X: Transformed inputs (n, p) with p <= input width.
        y: Scaled targets (n,).
        X_val, y_val: Validation data; when omitted a ``val_fraction`` slice of
            the training rows is held out (seeded).

    Raises:
        EmptyData: no training rows.
        NonFiniteLoss: the loss diverged.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyData("cannot train on zero rows")
    rng = np.random.default_rng(seed)
    if X_val is None:
        n_val = int(round(hyper.val_fraction * X.shape[0]))
        if n_val >= 1 and X.shape[0] - n_val >= 1:
            perm = rng.permutation(X.shape[0])
            X_val, y_val = X[perm[:n_val]], y[perm[:n_val]]
            X, y = X[perm[n_val:]], y[perm[n_val:]]
        else:
            X_val, y_val = X, y
    dt = np.dtype(hyper.dtype)
    sizes = [hyper.input_width, *hyper.hidden, 1]
    model = MlpModel.init(sizes, int(rng.integers(2 ** 31)), hyper.alpha, hyper.dropout,
                          hyper.dtype)
    Xp = model.pad(X)
    yt = y.astype(dt)
    Xv = model.pad(X_val)
    params = model.weights + model.biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    keep = 1.0 - hyper.dropout
    best_mae = np.inf
    best = [p.copy() for p in params]
    stale = 0
    step = 0
    base_lr = hyper.learning_rate
    hist = {"train_loss": [], "val_mae": []}
    n = Xp.shape[0]
    for epoch in range(hyper.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, hyper.batch_size):
            idx = order[s:s + hyper.batch_size]
            masks = None
            if hyper.dropout > 0:
                masks = [((rng.random((idx.size, h)) < keep) / keep).astype(dt)
                         for h in hyper.hidden]
            loss, gw, gb = loss_and_grads(model, Xp[idx], yt[idx], masks)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss} at epoch {epoch}")
            total += loss * idx.size
            step += 1
            c1 = 1.0 - hyper.beta1 ** step
            c2 = 1.0 - hyper.beta2 ** step
            lr = base_lr * math.sqrt(c2) / c1
            for p, g, a, b in zip(params, gw + gb, m1, m2):
                a *= hyper.beta1
                a += (1.0 - hyper.beta1) * g
                b *= hyper.beta2
                b += (1.0 - hyper.beta2) * (g * g)
                p -= (lr * a / (np.sqrt(b) + hyper.epsilon * math.sqrt(c2))).astype(dt)
        val_mae = float(np.mean(np.abs(model.forward(Xv) - y_val)))
        hist["train_loss"].append(total / n)
        hist["val_mae"].append(val_mae)
        if not math.isfinite(val_mae):
            raise NonFiniteLoss(f"validation error became {val_mae} at epoch {epoch}")
        if val_mae < best_mae:
            best_mae = val_mae
            best = [p.copy() for p in params]
            stale = 0
        else:
            stale += 1
            if stale >= hyper.patience:
                break
            if hyper.plateau_factor < 1.0 and stale % hyper.plateau_patience == 0:
                base_lr *= hyper.plateau_factor
    k = len(model.weights)
    model.weights = best[:k]
    model.biases = best[k:]
    if hyper.refit_output and hyper.dropout > 0:
        best_mae = _refit_output(model, Xp, y, Xv, y_val, best_mae)
    hist["best_val_mae"] = best_mae
    hist["epochs"] = len(hist["val_mae"])
    model.history = hist
    return model


def _last_hidden(model: MlpModel, Xp: np.ndarray) -> np.ndarray:
    h = Xp
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = h @ w + b
        h = np.where(z > 0, z, model.alpha * z)
    return h


def _refit_output(model: MlpModel, Xp: np.ndarray, y: np.ndarray, Xv: np.ndarray,
                  y_val: np.ndarray, best_mae: float) -> float:
    """Least-squares refit of the output layer on dropout-free activations.

    Inverted dropout leaves a train/inference mismatch in the last layer; the
    refit removes it. The refit is kept only if validation MAE improves.
    """
    H = _last_hidden(model, Xp).astype(np.float64)
    A = np.hstack([H, np.ones((H.shape[0], 1))])
    gram = A.T @ A
    gram[np.diag_indices_from(gram)] += 1e-6 * H.shape[0]
    coef = np.linalg.solve(gram, A.T @ y)
    dt = model.weights[-1].dtype
    old_w, old_b = model.weights[-1], model.biases[-1]
    model.weights[-1] = coef[:-1, None].astype(dt)
    model.biases[-1] = coef[-1:].astype(dt)
    mae = float(np.mean(np.abs(model.forward(Xv) - y_val)))
    if mae < best_mae:
        return mae
    model.weights[-1], model.biases[-1] = old_w, old_b
    return best_mae


# -- regressor triples and bank -----------------------------------------------

@dataclass
class Regressor:
    model: MlpModel
    transform: InputTransform
    scaler: OutputScaler

    def predict(self, X: np.ndarray) -> np.ndarray:
        z = self.model.forward(self.transform.apply(np.atleast_2d(X)))
        return np.maximum(self.scaler.unscale(z.astype(np.float64)), 0.0)


def predict_rms(model: MlpModel, transform: InputTransform, scaler: OutputScaler,
                x: np.ndarray) -> float | np.ndarray:
    """RMS estimate in amperes for features ⊕ state bits, clipped at 0 A."""
    out = Regressor(model, transform, scaler).predict(x)
    return float(out[0]) if np.ndim(x) == 1 else out


def _drop_outliers(y: np.ndarray, q: float | None) -> np.ndarray:
    if not q:
        return np.ones(y.size, dtype=bool)
    lo, hi = np.quantile(y, [q, 1.0 - q])
    return (y >= lo) & (y <= hi)


@dataclass
class RegressorBank:
    """One regressor per load; all share the input layout features ⊕ N_L bits."""

    regressors: list[Regressor]
    schema: str = ""

    def __post_init__(self) -> None:
        self._stack()

    def _stack(self) -> None:
        """Stack the per-load networks for a single batched pass per layer."""
        t0 = self.regressors[0].transform
        self._shared = all(r.transform is t0 for r in self.regressors)
        ms = [r.model for r in self.regressors]
        shapes = {tuple(w.shape for w in m.weights) for m in ms}
        self._stackable = self._shared and len(shapes) == 1
        if self._stackable:
            self._W = [np.stack([m.weights[l] for m in ms]) for l in range(len(ms[0].weights))]
            self._B = [np.stack([m.biases[l] for m in ms])[:, None, :]
                       for l in range(len(ms[0].weights))]
            dt = self._W[0].dtype
            self._alpha = np.array([m.alpha for m in ms], dtype=dt)[:, None, None]
            self._mean = np.array([r.scaler.mean for r in self.regressors])
            self._std = np.array([r.scaler.std for r in self.regressors])

    @property
    def n_loads(self) -> int:
        return len(self.regressors)

    def predict_one(self, x: np.ndarray) -> np.ndarray:
        """Per-load RMS for one augmented input row."""
        if not self._stackable:
            return np.array([r.predict(x)[0] for r in self.regressors])
        t = self.regressors[0].transform.apply(x)
        width = self._W[0].shape[1]
        h = np.zeros((1, width), dtype=self._W[0].dtype)
        h[0, :t.size] = t
        h = np.broadcast_to(h, (self.n_loads, 1, width))
        for w, b in zip(self._W[:-1], self._B[:-1]):
            z = h @ w + b
            h = np.where(z > 0, z, self._alpha * z)
        z = (h @ self._W[-1] + self._B[-1])[:, 0, 0].astype(np.float64)
        return np.maximum(z * self._std + self._mean, 0.0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """(n, N_L) predictions for many rows (vectorized per model)."""
        X = np.atleast_2d(X)
        if self._shared:
            T = self.regressors[0].transform.apply(X)
            out = []
            for r in self.regressors:
                z = r.model.forward(T).astype(np.float64)
                out.append(np.maximum(r.scaler.unscale(z), 0.0))
            return np.column_stack(out)
        return np.column_stack([r.predict(X) for r in self.regressors])


def train_regressor_bank(features: np.ndarray, states: np.ndarray, rms: np.ndarray,
                         hyper: MlpHyper | Sequence[MlpHyper] = MlpHyper(), seed: int = 0,
                         loads: Sequence[int] | None = None) -> RegressorBank:
    """One MLP per load on features ⊕ ground-truth state bits (teacher forcing).

    The input transform depends only on the inputs, so it is fitted once and
    shared. Load ``i`` trains with seed ``seed + i`` on target column ``i``.
    """
    features = np.asarray(features, dtype=np.float64)
    states = np.asarray(states, dtype=np.float64)
    rms = np.asarray(rms, dtype=np.float64)
    if features.shape[0] == 0:
        raise EmptyData("no training rows")
    X = np.hstack([features, states])
    transform = InputTransform.fit(X, n_passthrough=states.shape[1])
    T = transform.apply(X)
    n_loads = rms.shape[1]
    hypers = list(hyper) if isinstance(hyper, (list, tuple)) else [hyper] * n_loads
    regs = []
    for i in range(n_loads) if loads is None else loads:
        h = hypers[i]
        keep = _drop_outliers(rms[:, i], h.outlier_quantile)
        scaler = OutputScaler.fit(rms[keep, i])
        model = train_mlp(T[keep], scaler.scale(rms[keep, i]), h, seed + i)
        regs.append(Regressor(model, transform, scaler))
    return RegressorBank(regs)


# -- serialization ------------------------------------------------------------

_MLP_HEADER = struct.Struct("<4sIIIIddB")


def regressor_to_bytes(reg: Regressor) -> bytes:
    m, t, s = reg.model, reg.transform, reg.scaler
    dt = m.weights[0].dtype
    code = 0 if dt == np.float32 else 1
    buf = io.BytesIO()
    buf.write(_MLP_HEADER.pack(MLP_MAGIC, MLP_VERSION, len(m.weights), t.n_inputs,
                               t.n_passthrough, m.alpha, m.dropout, code))
    buf.write(np.asarray(m.layer_sizes, dtype="<u4").tobytes())
    buf.write(struct.pack("<I", t.kept.size))
    buf.write(t.kept.astype("<u4").tobytes())
    for arr in (t.lambdas, t.means, t.stds):
        buf.write(np.asarray(arr, dtype="<f8").tobytes())
    buf.write(struct.pack("<dd", s.mean, s.std))
    wdt = "<f4" if code == 0 else "<f8"
    for w, b in zip(m.weights, m.biases):
        buf.write(np.ascontiguousarray(w).astype(wdt).tobytes())
        buf.write(b.astype(wdt).tobytes())
    return buf.getvalue()


def regressor_from_bytes(raw: bytes) -> Regressor:
    if len(raw) < _MLP_HEADER.size:
        raise FormatError("truncated regressor header")
    magic, ver, n_layers, n_inputs, n_pass, alpha, dropout, code = \
        _MLP_HEADER.unpack_from(raw)
    if magic != MLP_MAGIC:
        raise FormatError(f"bad regressor magic {magic!r}")
    if ver != MLP_VERSION:
        raise FormatError(f"unsupported regressor version {ver}")
    pos = _MLP_HEADER.size

    def take(dtype: str, count: int) -> np.ndarray:
        nonlocal pos
        size = np.dtype(dtype).itemsize * count
        if pos + size > len(raw):
            raise FormatError("truncated regressor body")
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=pos).copy()
        pos += size
        return arr

    sizes = take("<u4", n_layers + 1).astype(np.int64)
    (n_kept,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    kept = take("<u4", n_kept).astype(np.int64)
    lambdas, means, stds = (take("<f8", n_kept) for _ in range(3))
    mean, std = struct.unpack_from("<dd", raw, pos)
    pos += 16
    wdt = "<f4" if code == 0 else "<f8"
    native = np.float32 if code == 0 else np.float64
    ws, bs = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        ws.append(take(wdt, a * b).reshape(a, b).astype(native))
        bs.append(take(wdt, b).astype(native))
    if pos != len(raw):
        raise FormatError("trailing bytes after regressor body")
    dropped = sorted(set(range(n_inputs - n_pass)) - set(kept.tolist()))
    return Regressor(MlpModel(ws, bs, alpha, dropout),
                     InputTransform(n_inputs, n_pass, kept, lambdas, means, stds, dropped),
                     OutputScaler(mean, std))


def save_regressor_bank(out_dir: str | Path, bank: RegressorBank) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, r in enumerate(bank.regressors, start=1):
        name = f"load_{i}.csnn"
        (out / name).write_bytes(regressor_to_bytes(r))
        files.append({"load": i, "file": name})
    manifest = {"format": "cyclenilm-regressors", "version": 1, "n_loads": bank.n_loads,
                "schema": bank.schema, "models": files}
    (out / "regressors.json").write_text(json.dumps(manifest, indent=1))
    return out / "regressors.json"


def load_regressor_bank(path: str | Path) -> RegressorBank:
    p = Path(path)
    manifest_path = p / "regressors.json" if p.is_dir() else p
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != "cyclenilm-regressors":
        raise FormatError(f"{manifest_path} is not a regressor manifest")
    regs = [regressor_from_bytes((manifest_path.parent / m["file"]).read_bytes())
            for m in manifest["models"]]
    # re-share identical transforms so the bank can use its stacked fast path
    first = regs[0].transform
    for r in regs[1:]:
        t = r.transform
        if (t.n_inputs == first.n_inputs and np.array_equal(t.kept, first.kept)
                and np.array_equal(t.lambdas, first.lambdas)
                and np.array_equal(t.means, first.means)
                and np.array_equal(t.stds, first.stds)):
            r.transform = first
    return RegressorBank(regs, manifest.get("schema", ""))
