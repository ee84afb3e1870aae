"""LSTM cell with backpropagation through time, in four architectures.

Cell equations are the standard formulation:

    i = sigmoid(W_i x + U_i h_prev + b_i)      input gate
    f = sigmoid(W_f x + U_f h_prev + b_f)      forget gate
    g = tanh   (W_g x + U_g h_prev + b_g)      candidate state
    o = sigmoid(W_o x + U_o h_prev + b_o)      output gate
    c = f * c_prev + i * g
    h = o * tanh(c)

Architectures: plain (one layer, last hidden state to the head), stacked
(each layer consumes the full hidden sequence of the one below),
bidirectional (forward and reversed passes concatenated), and the stacked
bidirectional combination. The head is a ReLU dense layer followed by a
linear scalar output. Gradients are hand-derived and exact; dropout sits
between layers and before the head during training.

All tensors are batched: a batch of windows is (B, t, F).
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    DivergenceError,
    EmptyInput,
    ShapeError,
    SpecError,
    StaleCache,
    ValidationError,
)
from .nn_core import (
    Adam,
    Parameter,
    Sgd,
    derive_seed,
    dropout,
    l2_penalty,
    load_params,
    make_rng,
    mse,
    relu,
    save_params,
    sigmoid,
    zero_grads,
)

ARCHITECTURES = ("plain", "stacked", "bidir", "bidir_stacked")


@dataclass(frozen=True)
class ModelSpec:
    arch: str = "plain"
    num_layers: int = 1
    hidden: int = 32
    dropout: float = 0.2
    epochs: int = 3000
    l2_lambda: float = 0.0
    timesteps: int = 3
    variant: str = "II"
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise SpecError(f"unknown architecture {self.arch!r}")
        if self.arch in ("plain", "bidir") and self.num_layers != 1:
            raise SpecError(f"{self.arch} requires num_layers=1, got {self.num_layers}")
        if self.arch in ("stacked", "bidir_stacked") and self.num_layers < 2:
            raise SpecError(f"{self.arch} requires num_layers>=2, got {self.num_layers}")
        if self.hidden < 1:
            raise SpecError(f"hidden width must be >= 1, got {self.hidden}")
        if not 0.0 <= self.dropout < 1.0:
            raise SpecError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.epochs < 1:
            raise SpecError(f"epochs must be >= 1, got {self.epochs}")
        if self.l2_lambda < 0:
            raise SpecError(f"l2_lambda must be >= 0, got {self.l2_lambda}")
        if self.timesteps < 2:
            raise SpecError(f"timesteps must be >= 2, got {self.timesteps}")
        if self.variant not in ("I", "II"):
            raise SpecError(f"variant must be I or II, got {self.variant!r}")

    @property
    def bidirectional(self):
        return self.arch in ("bidir", "bidir_stacked")


GATES = ("i", "f", "g", "o")


class LstmCellParams:
    """Gate weights for one cell: W_* (H x F), U_* (H x H), b_* (H,)."""

    def __init__(self, prefix, input_dim, hidden, rng):
        self.prefix = prefix
        self.input_dim = input_dim
        self.hidden = hidden
        lim_w = math.sqrt(1.0 / input_dim)
        lim_u = math.sqrt(1.0 / hidden)
        self.W = {}
        self.U = {}
        self.b = {}
        for gate in GATES:
            self.W[gate] = Parameter(
                f"{prefix}.W_{gate}", rng.uniform(-lim_w, lim_w, (hidden, input_dim))
            )
            self.U[gate] = Parameter(
                f"{prefix}.U_{gate}", rng.uniform(-lim_u, lim_u, (hidden, hidden))
            )
            bias = np.full(hidden, 1.0) if gate == "f" else np.zeros(hidden)
            self.b[gate] = Parameter(f"{prefix}.b_{gate}", bias, is_bias=True)

    def parameters(self):
        out = []
        for gate in GATES:
            out += [self.W[gate], self.U[gate], self.b[gate]]
        return out


def cell_forward(x_t, h_prev, c_prev, cell):
    """One LSTM step over a batch; returns (h, c, cache for the backward pass)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    if x_t.ndim != 2 or x_t.shape[1] != cell.input_dim:
        raise ShapeError(f"expected input (B, {cell.input_dim}), got {x_t.shape}")
    if h_prev.shape != (x_t.shape[0], cell.hidden) or c_prev.shape != h_prev.shape:
        raise ShapeError(
            f"state shapes {h_prev.shape}/{c_prev.shape} inconsistent with "
            f"batch {x_t.shape[0]} and hidden {cell.hidden}"
        )
    a = {
        g: x_t @ cell.W[g].value.T + h_prev @ cell.U[g].value.T + cell.b[g].value
        for g in GATES
    }
    i = sigmoid(a["i"])
    f = sigmoid(a["f"])
    g = np.tanh(a["g"])
    o = sigmoid(a["o"])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    cache = {"x": x_t, "h_prev": h_prev, "c_prev": c_prev,
             "i": i, "f": f, "g": g, "o": o, "tc": tc}
    return h, c, cache


def cell_backward(dh, dc_carry, cache, cell):
    """Backward through one step; accumulates gate gradients in place.

    Returns (dx, dh_prev, dc_prev).
    """
    i, f, g, o, tc = cache["i"], cache["f"], cache["g"], cache["o"], cache["tc"]
    do = dh * tc
    dct = dc_carry + dh * o * (1.0 - tc * tc)
    da = {
        "i": dct * g * i * (1.0 - i),
        "f": dct * cache["c_prev"] * f * (1.0 - f),
        "g": dct * i * (1.0 - g * g),
        "o": do * o * (1.0 - o),
    }
    dx = np.zeros_like(cache["x"])
    dh_prev = np.zeros_like(cache["h_prev"])
    for gate in GATES:
        cell.W[gate].grad += da[gate].T @ cache["x"]
        cell.U[gate].grad += da[gate].T @ cache["h_prev"]
        cell.b[gate].grad += da[gate].sum(axis=0)
        dx += da[gate] @ cell.W[gate].value
        dh_prev += da[gate] @ cell.U[gate].value
    dc_prev = dct * f
    return dx, dh_prev, dc_prev


def sequence_forward(window, cell, direction="forward"):
    """Run a cell over a window (or batch of windows) from zero initial state.

    The backward direction iterates rows t-1..0 and the output is re-reversed,
    so row s of the result always corresponds to input row s. Returns
    (hidden sequence, per-step caches in processing order).
    """
    if direction not in ("forward", "backward"):
        raise ValidationError(f"direction must be forward or backward, got {direction!r}")
    X = np.asarray(window, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.ndim != 3:
        raise ShapeError(f"expected (B, t, F) or (t, F), got {X.shape}")
    B, t, F = X.shape
    if F != cell.input_dim:
        raise ShapeError(f"window has {F} features, cell expects {cell.input_dim}")
    Xp = X[:, ::-1, :] if direction == "backward" else X
    h = np.zeros((B, cell.hidden))
    c = np.zeros((B, cell.hidden))
    hs = []
    caches = []
    for s in range(t):
        h, c, cache = cell_forward(Xp[:, s, :], h, c, cell)
        hs.append(h)
        caches.append(cache)
    seq = np.stack(hs, axis=1)
    if direction == "backward":
        seq = seq[:, ::-1, :]
    return (seq[0] if single else seq), caches


def sequence_backward(d_seq, caches, cell, direction="forward"):
    """Backward through a whole sequence; d_seq is indexed like the input rows."""
    d_seq = np.asarray(d_seq, dtype=np.float64)
    if d_seq.ndim == 2:
        d_seq = d_seq[None]
    B, t, H = d_seq.shape
    if len(caches) != t or caches[0]["x"].shape[0] != B:
        raise StaleCache("cache does not match the gradient being propagated")
    dp = d_seq[:, ::-1, :] if direction == "backward" else d_seq
    dh_carry = np.zeros((B, cell.hidden))
    dc_carry = np.zeros((B, cell.hidden))
    dXp = np.empty((B, t, cell.input_dim))
    for s in reversed(range(t)):
        dx, dh_carry, dc_carry = cell_backward(dp[:, s, :] + dh_carry, dc_carry,
                                               caches[s], cell)
        dXp[:, s, :] = dx
    return dXp[:, ::-1, :] if direction == "backward" else dXp


# ---------------------------------------------------------------------------
# whole models


class Model:
    """Parameters of one configured network: LSTM layers plus the dense head."""

    def __init__(self, spec, input_dim):
        self.spec = spec
        self.input_dim = input_dim
        rng = make_rng(derive_seed(spec.seed, "init"))
        H = spec.hidden
        self.layers = []
        dim = input_dim
        for li in range(spec.num_layers):
            fwd = LstmCellParams(f"layer{li}.fwd", dim, H, rng)
            bwd = (
                LstmCellParams(f"layer{li}.bwd", dim, H, rng)
                if spec.bidirectional
                else None
            )
            self.layers.append((fwd, bwd))
            dim = 2 * H if spec.bidirectional else H
        feat_dim = dim
        lim1 = math.sqrt(1.0 / feat_dim)
        lim2 = math.sqrt(1.0 / H)
        self.head_W1 = Parameter("head.W1", rng.uniform(-lim1, lim1, (H, feat_dim)))
        self.head_b1 = Parameter("head.b1", np.zeros(H), is_bias=True)
        self.head_w2 = Parameter("head.w2", rng.uniform(-lim2, lim2, (1, H)))
        self.head_b2 = Parameter("head.b2", np.zeros(1), is_bias=True)

    def parameters(self):
        out = []
        for fwd, bwd in self.layers:
            out += fwd.parameters()
            if bwd is not None:
                out += bwd.parameters()
        out += [self.head_W1, self.head_b1, self.head_w2, self.head_b2]
        return out


def count_parameters(model):
    return sum(p.value.size for p in model.parameters())


def model_forward(model, window, training=False, rng=None):
    """Scalar prediction per window; returns (predictions (B,), cache)."""
    spec = model.spec
    X = np.asarray(window, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ShapeError(f"expected (B, t, F) or (t, F), got {X.shape}")
    if X.shape[2] != model.input_dim:
        raise ShapeError(f"window has {X.shape[2]} features, model expects {model.input_dim}")
    if training and spec.dropout > 0.0 and rng is None:
        raise ValidationError("training with dropout requires an rng")

    seq = X
    layer_caches = []
    feature = None
    last = len(model.layers) - 1
    for li, (fwd, bwd) in enumerate(model.layers):
        fwd_seq, fwd_caches = sequence_forward(seq, fwd, "forward")
        lc = {"fwd_caches": fwd_caches, "bwd_caches": None, "mask": None}
        if bwd is not None:
            bwd_seq, bwd_caches = sequence_forward(seq, bwd, "backward")
            lc["bwd_caches"] = bwd_caches
            out_seq = np.concatenate([fwd_seq, bwd_seq], axis=2)
            # final state of each direction: forward's last row, backward's
            # first row (the backward cell ends on input row 0)
            feature = np.concatenate([fwd_seq[:, -1, :], bwd_seq[:, 0, :]], axis=1)
        else:
            out_seq = fwd_seq
            feature = fwd_seq[:, -1, :]
        if li < last:
            out_seq, mask = dropout(out_seq, spec.dropout, rng, training)
            lc["mask"] = mask
            seq = out_seq
        layer_caches.append(lc)

    feat_dropped, feat_mask = dropout(feature, spec.dropout, rng, training)
    a1 = feat_dropped @ model.head_W1.value.T + model.head_b1.value
    z1 = relu(a1)
    pred = (z1 @ model.head_w2.value.T + model.head_b2.value)[:, 0]
    cache = {
        "batch": X.shape[0],
        "timesteps": X.shape[1],
        "layers": layer_caches,
        "feat_dropped": feat_dropped,
        "feat_mask": feat_mask,
        "a1": a1,
        "z1": z1,
    }
    return pred, cache


def model_backward(model, cache, d_pred):
    """Accumulate exact gradients of every parameter from d loss / d prediction."""
    d_pred = np.asarray(d_pred, dtype=np.float64).reshape(-1)
    if d_pred.shape[0] != cache["batch"]:
        raise StaleCache(
            f"cache batch {cache['batch']} does not match gradient length {d_pred.shape[0]}"
        )
    spec = model.spec
    H = spec.hidden
    B = cache["batch"]
    t = cache["timesteps"]

    dp = d_pred[:, None]
    model.head_w2.grad += dp.T @ cache["z1"]
    model.head_b2.grad += dp.sum(axis=0)
    dz1 = dp @ model.head_w2.value
    da1 = dz1 * (cache["a1"] > 0.0)
    model.head_W1.grad += da1.T @ cache["feat_dropped"]
    model.head_b1.grad += da1.sum(axis=0)
    d_feature = (da1 @ model.head_W1.value) * cache["feat_mask"]

    d_above = None  # gradient w.r.t. the (dropped) output sequence of the layer
    last = len(model.layers) - 1
    for li in range(last, -1, -1):
        fwd, bwd = model.layers[li]
        lc = cache["layers"][li]
        if li == last:
            d_fwd_seq = np.zeros((B, t, H))
            d_fwd_seq[:, -1, :] = d_feature[:, :H]
            if bwd is not None:
                d_bwd_seq = np.zeros((B, t, H))
                d_bwd_seq[:, 0, :] = d_feature[:, H:]
        else:
            d_out = d_above * lc["mask"]
            d_fwd_seq = d_out[:, :, :H]
            if bwd is not None:
                d_bwd_seq = d_out[:, :, H:]
        d_below = sequence_backward(d_fwd_seq, lc["fwd_caches"], fwd, "forward")
        if bwd is not None:
            d_below = d_below + sequence_backward(
                d_bwd_seq, lc["bwd_caches"], bwd, "backward"
            )
        d_above = d_below
    return d_above  # gradient w.r.t. the input windows


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainedModel:
    spec: ModelSpec
    model: Model
    scaler: object | None
    loss_history: list  # (train_mse, validation_mse) per epoch
    best_epoch: int


def carve_validation(windows, fraction):
    """Chronological carve: the last fraction of an ordered window list.

    With too few windows for a non-empty carve, validation falls back to the
    training windows themselves.
    """
    n = len(windows)
    n_val = int(math.floor(fraction * n))
    if n_val == 0:
        return list(windows), list(windows)
    return list(windows[: n - n_val]), list(windows[n - n_val :])


def windows_to_arrays(windows):
    X = np.stack([np.asarray(w.features, dtype=np.float64) for w in windows])
    y = np.array([w.target for w in windows], dtype=np.float64)
    return X, y


def train(spec, split, validation_fraction=0.15, scaler=None, lr=1e-3,
          optimizer="adam"):
    """Full-batch training with Adam; keeps the best-validation snapshot.

    The last validation_fraction of the (chronologically ordered) train split
    is carved off for validation. Train and validation MSE are recorded every
    epoch; the returned parameters are the snapshot with the lowest
    validation MSE (no early stopping).
    """
    if not split.train:
        raise EmptyInput("training split is empty")
    train_w, val_w = carve_validation(split.train, validation_fraction)
    if not train_w:
        raise EmptyInput("validation carve left no training windows")
    X_tr, y_tr = windows_to_arrays(train_w)
    X_val, y_val = windows_to_arrays(val_w)
    if X_tr.shape[1] != spec.timesteps:
        raise SpecError(
            f"windows have {X_tr.shape[1]} timesteps, spec says {spec.timesteps}"
        )

    model = Model(spec, X_tr.shape[2])
    params = model.parameters()
    opt = Adam(lr=lr) if optimizer == "adam" else Sgd(lr=lr)
    drop_rng = make_rng(derive_seed(spec.seed, "dropout"))

    history = []
    best_mse = math.inf
    best_values = None
    best_epoch = -1
    for epoch in range(spec.epochs):
        zero_grads(params)
        pred, cache = model_forward(model, X_tr, training=True, rng=drop_rng)
        train_mse = mse(y_tr, pred)
        model_backward(model, cache, (2.0 / y_tr.size) * (pred - y_tr))
        l2_penalty(params, spec.l2_lambda)
        opt.step(params)
        val_pred, _ = model_forward(model, X_val, training=False)
        val_mse = mse(y_val, val_pred)
        if not (math.isfinite(train_mse) and math.isfinite(val_mse)):
            raise DivergenceError(epoch)
        history.append((train_mse, val_mse))
        if val_mse < best_mse:
            best_mse = val_mse
            best_values = [p.value.copy() for p in params]
            best_epoch = epoch
    if best_values is not None:
        for p, v in zip(params, best_values):
            p.value = v
    return TrainedModel(
        spec=spec, model=model, scaler=scaler, loss_history=history,
        best_epoch=best_epoch,
    )


def predict(trained, window):
    """De-scaled prediction for one window. Raw output, never clamped:
    a fitted model may legitimately emit small negative counts."""
    feats = window.features if hasattr(window, "features") else window
    X = np.asarray(feats, dtype=np.float64)
    if X.ndim != 2:
        raise SpecError(f"expected one (t, F) window, got shape {X.shape}")
    if X.shape != (trained.spec.timesteps, trained.model.input_dim):
        raise SpecError(
            f"window shape {X.shape} does not match model "
            f"({trained.spec.timesteps}, {trained.model.input_dim})"
        )
    pred, _ = model_forward(trained.model, X[None], training=False)
    value = float(pred[0])
    if trained.scaler is not None:
        value = trained.scaler.invert_value("cases", value)
    return value


def predict_batch(trained, windows):
    X, _ = windows_to_arrays(windows)
    if X.shape[1] != trained.spec.timesteps or X.shape[2] != trained.model.input_dim:
        raise SpecError(
            f"windows {X.shape[1:]} do not match model "
            f"({trained.spec.timesteps}, {trained.model.input_dim})"
        )
    pred, _ = model_forward(trained.model, X, training=False)
    if trained.scaler is not None:
        lo, hi = trained.scaler._require("cases")
        return lo + pred * (hi - lo)
    return pred


# ---------------------------------------------------------------------------
# persistence: binary parameter snapshot + JSON sidecar


def save_model(trained, bin_path, sidecar_path):
    save_params(trained.model.parameters(), bin_path)
    sidecar = {
        "spec": asdict(trained.spec),
        "input_dim": trained.model.input_dim,
        "scaler": None if trained.scaler is None else trained.scaler.to_dict(),
        "best_epoch": trained.best_epoch,
        "loss_history": [[tr, va] for tr, va in trained.loss_history],
    }
    with open(sidecar_path, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2)
        f.write("\n")


def load_model(bin_path, sidecar_path):
    from .dataprep import Scaler

    with open(sidecar_path, encoding="utf-8") as f:
        sidecar = json.load(f)
    spec = ModelSpec(**sidecar["spec"])
    model = Model(spec, int(sidecar["input_dim"]))
    stored = {p.name: p for p in load_params(bin_path)}
    for p in model.parameters():
        if p.name not in stored:
            raise ValidationError(f"snapshot is missing parameter {p.name}")
        if stored[p.name].value.shape != p.value.shape:
            raise ValidationError(f"snapshot shape mismatch for {p.name}")
        p.value = stored[p.name].value
    scaler = None
    if sidecar["scaler"] is not None:
        scaler = Scaler.from_dict(sidecar["scaler"])
    return TrainedModel(
        spec=spec,
        model=model,
        scaler=scaler,
        loss_history=[tuple(x) for x in sidecar["loss_history"]],
        best_epoch=int(sidecar["best_epoch"]),
    )
