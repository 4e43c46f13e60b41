"""From-scratch 1-D convolutional classifier with a seven-rule optimizer
suite, trained with plain numpy.

Default architecture: three stride-2 same-padded conv layers (64, 128, 256
filters, kernel 3, ReLU), flatten, three ReLU dense layers (256, 128, 64),
and a 3-way softmax head trained with categorical cross-entropy for 20
epochs at batch size 1024, learning rate 0.001, Adam.

The penultimate dense activations and the softmax outputs are both exposed
as embedding taps for the downstream boosting stage.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .bundle import load_bundle, save_bundle
from .dataset import FeatureTable

OPTIMIZER_RULES = ("sgd", "rmsprop", "nadam", "adadelta", "adamax", "adagrad", "adam")

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8
RMSPROP_RHO = 0.9
ADADELTA_RHO = 0.95
ADADELTA_EPS = 1e-6

FORMAT_VERSION = 1


@dataclass(frozen=True)
class CnnConfig:
    input_length: int = 51
    conv_filters: tuple[int, ...] = (64, 128, 256)
    kernel_size: int = 3
    stride: int = 2
    dense_widths: tuple[int, ...] = (256, 128, 64)
    n_classes: int = 3
    optimizer: str = "adam"
    learning_rate: float = 0.001
    epochs: int = 20
    batch_size: int = 1024
    dtype: str = "float32"  # float64 for gradient verification

    def __post_init__(self):
        object.__setattr__(self, "conv_filters", tuple(self.conv_filters))
        object.__setattr__(self, "dense_widths", tuple(self.dense_widths))
        if self.optimizer not in OPTIMIZER_RULES:
            raise ValueError(f"unknown optimizer {self.optimizer!r}; choose from {OPTIMIZER_RULES}")
        if self.stride < 1 or self.kernel_size < 1:
            raise ValueError("stride and kernel_size must be positive")
        if any(w <= 0 for w in self.conv_filters) or any(w <= 0 for w in self.dense_widths):
            raise ValueError("layer widths must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")


def conv_output_lengths(cfg: CnnConfig) -> list[int]:
    """Feature-map length after each conv layer (ceil(L/stride) per layer)."""
    lengths = []
    length = cfg.input_length
    for _ in cfg.conv_filters:
        length = -(-length // cfg.stride)
        lengths.append(length)
    return lengths


def flatten_width(cfg: CnnConfig) -> int:
    lengths = conv_output_lengths(cfg)
    if cfg.conv_filters:
        return lengths[-1] * cfg.conv_filters[-1]
    return cfg.input_length


@dataclass
class CnnModel:
    config: CnnConfig
    seed: int
    conv_weights: list[np.ndarray]  # each (kernel_size * c_in, c_out)
    conv_biases: list[np.ndarray]
    dense_weights: list[np.ndarray]  # hidden layers then the softmax head
    dense_biases: list[np.ndarray]

    def parameters(self) -> list[np.ndarray]:
        params = []
        for w, b in zip(self.conv_weights, self.conv_biases):
            params += [w, b]
        for w, b in zip(self.dense_weights, self.dense_biases):
            params += [w, b]
        return params

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.config.dtype)


def build_cnn(cfg: CnnConfig, seed: int = 0) -> CnnModel:
    """Initialize parameters with uniform fan-in scaling (He-style bounds
    sqrt(6 / fan_in)), biases at zero, deterministically from the seed."""
    lengths = conv_output_lengths(cfg)
    if cfg.conv_filters and lengths[-1] < 1:
        raise ValueError("input too short for the configured conv stack")
    rng = np.random.default_rng(seed)
    dtype = np.dtype(cfg.dtype)

    conv_w, conv_b = [], []
    c_in = 1
    for c_out in cfg.conv_filters:
        fan_in = cfg.kernel_size * c_in
        limit = np.sqrt(6.0 / fan_in)
        conv_w.append(rng.uniform(-limit, limit, (fan_in, c_out)).astype(dtype))
        conv_b.append(np.zeros(c_out, dtype=dtype))
        c_in = c_out

    dense_w, dense_b = [], []
    width = flatten_width(cfg)
    for out in tuple(cfg.dense_widths) + (cfg.n_classes,):
        limit = np.sqrt(6.0 / width)
        dense_w.append(rng.uniform(-limit, limit, (width, out)).astype(dtype))
        dense_b.append(np.zeros(out, dtype=dtype))
        width = out

    return CnnModel(
        config=cfg, seed=seed,
        conv_weights=conv_w, conv_biases=conv_b,
        dense_weights=dense_w, dense_biases=dense_b,
    )


def _same_padding(length: int, kernel: int, stride: int) -> tuple[int, int, int]:
    out_len = -(-length // stride)
    total = max((out_len - 1) * stride + kernel - length, 0)
    left = total // 2
    return out_len, left, total - left


def _im2col(x: np.ndarray, kernel: int, stride: int):
    """(B, L, C) -> (B, L_out, kernel * C) patch matrix under same padding."""
    batch, length, channels = x.shape
    out_len, pad_left, pad_right = _same_padding(length, kernel, stride)
    xp = np.pad(x, ((0, 0), (pad_left, pad_right), (0, 0)))
    starts = np.arange(out_len) * stride
    cols = xp[:, starts[:, None] + np.arange(kernel), :]
    return cols.reshape(batch, out_len, kernel * channels), (length, pad_left, xp.shape[1])


def _col2im(dcols: np.ndarray, kernel: int, stride: int, geom) -> np.ndarray:
    length, pad_left, padded_len = geom
    batch, out_len, kc = dcols.shape
    channels = kc // kernel
    d4 = dcols.reshape(batch, out_len, kernel, channels)
    dxp = np.zeros((batch, padded_len, channels), dtype=dcols.dtype)
    starts = np.arange(out_len) * stride
    for j in range(kernel):
        # targets are unique for fixed j, so fancy += accumulates correctly
        dxp[:, starts + j, :] += d4[:, :, j, :]
    return dxp[:, pad_left:pad_left + length, :]


def _forward_cached(model: CnnModel, x2d: np.ndarray):
    cfg = model.config
    x = np.ascontiguousarray(x2d, dtype=model.dtype)[:, :, None]
    conv_caches = []
    for w, b in zip(model.conv_weights, model.conv_biases):
        cols, geom = _im2col(x, cfg.kernel_size, cfg.stride)
        z = cols @ w + b
        x = np.maximum(z, 0.0)
        conv_caches.append((cols, z, geom))

    batch = x.shape[0]
    h = x.reshape(batch, -1)
    dense_caches = []
    n_dense = len(model.dense_weights)
    for i, (w, b) in enumerate(zip(model.dense_weights, model.dense_biases)):
        z = h @ w + b
        out = z if i == n_dense - 1 else np.maximum(z, 0.0)
        dense_caches.append((h, z))
        h = out
    logits = h
    return logits, conv_caches, dense_caches


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(lse - shifted[np.arange(labels.size), labels]))


def forward(model: CnnModel, batch: np.ndarray):
    """Class probabilities plus named activation taps.

    Returns (probs, taps) where taps["output"] is the softmax output and
    taps["penultimate"] is the last hidden dense activation.
    """
    batch = np.asarray(batch)
    if batch.ndim != 2 or batch.shape[1] != model.config.input_length:
        raise ValueError(
            f"batch must be (rows, {model.config.input_length}), got {batch.shape}"
        )
    logits, _, dense_caches = _forward_cached(model, batch)
    probs = _softmax(logits)
    taps = {"output": probs}
    if len(dense_caches) >= 2:
        penult_z = dense_caches[-1][0]  # input of the head = last hidden ReLU output
        taps["penultimate"] = penult_z
    return probs, taps


def _backward(model: CnnModel, conv_caches, dense_caches, logits, labels):
    """Gradients of the mean cross-entropy, in parameters() order."""
    cfg = model.config
    batch = logits.shape[0]
    probs = _softmax(logits)
    dz = probs.copy()
    dz[np.arange(batch), labels] -= 1.0
    dz /= batch

    dense_grads = []
    dh = dz
    for i in range(len(model.dense_weights) - 1, -1, -1):
        h_in, z = dense_caches[i]
        if i < len(model.dense_weights) - 1:
            dh = dh * (z > 0)
        dw = h_in.T @ dh
        db = dh.sum(axis=0)
        dense_grads.append((dw, db))
        dh = dh @ model.dense_weights[i].T
    dense_grads.reverse()

    conv_grads = []
    if model.conv_weights:
        out_len = conv_caches[-1][1].shape[1]
        dx = dh.reshape(batch, out_len, cfg.conv_filters[-1])
        for i in range(len(model.conv_weights) - 1, -1, -1):
            cols, z, geom = conv_caches[i]
            dzc = dx * (z > 0)
            kc = cols.shape[2]
            c_out = dzc.shape[2]
            dw = cols.reshape(-1, kc).T @ dzc.reshape(-1, c_out)
            db = dzc.sum(axis=(0, 1))
            conv_grads.append((dw, db))
            if i > 0:
                dcols = dzc @ model.conv_weights[i].T
                dx = _col2im(dcols, cfg.kernel_size, cfg.stride, geom)
        conv_grads.reverse()

    grads = []
    for dw, db in conv_grads:
        grads += [dw, db]
    for dw, db in dense_grads:
        grads += [dw, db]
    return grads


@dataclass
class OptimizerState:
    rule: str
    step_count: int
    slots: dict[str, list[np.ndarray]]


def init_optimizer_state(rule: str, params: list[np.ndarray]) -> OptimizerState:
    if rule not in OPTIMIZER_RULES:
        raise ValueError(f"unknown optimizer {rule!r}")
    zeros = lambda: [np.zeros_like(p) for p in params]
    slots: dict[str, list[np.ndarray]] = {}
    if rule in ("adam", "nadam"):
        slots = {"m": zeros(), "v": zeros()}
    elif rule == "adamax":
        slots = {"m": zeros(), "u": zeros()}
    elif rule in ("rmsprop", "adagrad"):
        slots = {"acc": zeros()}
    elif rule == "adadelta":
        slots = {"acc": zeros(), "delta_acc": zeros()}
    return OptimizerState(rule=rule, step_count=0, slots=slots)


def optimizer_step(
    rule: str,
    state: OptimizerState,
    params: list[np.ndarray],
    grads: list[np.ndarray],
    lr: float,
) -> None:
    """Apply one update of the named rule in place, under its standard
    published decay constants. Rejects non-finite gradients."""
    if rule != state.rule:
        raise ValueError(f"state was initialized for {state.rule!r}, not {rule!r}")
    for i, g in enumerate(grads):
        if not np.isfinite(g).all():
            raise ValueError(f"non-finite gradient for parameter {i}")
    state.step_count += 1
    t = state.step_count
    for i, (p, g) in enumerate(zip(params, grads)):
        if rule == "sgd":
            p -= lr * g
        elif rule == "adagrad":
            acc = state.slots["acc"][i]
            acc += g * g
            p -= lr * g / (np.sqrt(acc) + EPS)
        elif rule == "rmsprop":
            acc = state.slots["acc"][i]
            acc *= RMSPROP_RHO
            acc += (1.0 - RMSPROP_RHO) * g * g
            p -= lr * g / (np.sqrt(acc) + EPS)
        elif rule == "adadelta":
            acc = state.slots["acc"][i]
            dacc = state.slots["delta_acc"][i]
            acc *= ADADELTA_RHO
            acc += (1.0 - ADADELTA_RHO) * g * g
            step = np.sqrt((dacc + ADADELTA_EPS) / (acc + ADADELTA_EPS)) * g
            p -= lr * step
            dacc *= ADADELTA_RHO
            dacc += (1.0 - ADADELTA_RHO) * step * step
        elif rule == "adam":
            m, v = state.slots["m"][i], state.slots["v"][i]
            m *= BETA1
            m += (1.0 - BETA1) * g
            v *= BETA2
            v += (1.0 - BETA2) * g * g
            m_hat = m / (1.0 - BETA1 ** t)
            v_hat = v / (1.0 - BETA2 ** t)
            p -= lr * m_hat / (np.sqrt(v_hat) + EPS)
        elif rule == "adamax":
            m, u = state.slots["m"][i], state.slots["u"][i]
            m *= BETA1
            m += (1.0 - BETA1) * g
            np.maximum(BETA2 * u, np.abs(g), out=u)
            p -= (lr / (1.0 - BETA1 ** t)) * m / (u + EPS)
        elif rule == "nadam":
            m, v = state.slots["m"][i], state.slots["v"][i]
            m *= BETA1
            m += (1.0 - BETA1) * g
            v *= BETA2
            v += (1.0 - BETA2) * g * g
            m_hat = m / (1.0 - BETA1 ** (t + 1))
            v_hat = v / (1.0 - BETA2 ** t)
            update = BETA1 * m_hat + (1.0 - BETA1) * g / (1.0 - BETA1 ** t)
            p -= lr * update / (np.sqrt(v_hat) + EPS)
        else:  # pragma: no cover - guarded at init
            raise ValueError(f"unknown optimizer {rule!r}")


@dataclass
class TrainHistory:
    """Per-epoch training loss/accuracy, validation accuracy, and seconds."""

    epochs: list[dict] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,train_loss,train_acc,val_acc,seconds\n")
            for row in self.epochs:
                fh.write(
                    f"{row['epoch']},{row['train_loss']!r},{row['train_acc']!r},"
                    f"{row['val_acc']!r},{row['seconds']!r}\n"
                )


def predict_proba(model: CnnModel, features: np.ndarray, batch_size: int = 4096) -> np.ndarray:
    features = np.asarray(features)
    out = np.empty((features.shape[0], model.config.n_classes), dtype=np.float64)
    for start in range(0, features.shape[0], batch_size):
        logits, _, _ = _forward_cached(model, features[start:start + batch_size])
        out[start:start + logits.shape[0]] = _softmax(logits)
    return out


def _check_training_table(table: FeatureTable, cfg: CnnConfig, name: str) -> None:
    if table.n_rows == 0:
        raise ValueError(f"{name} table is empty")
    if table.n_features != cfg.input_length:
        raise ValueError(
            f"{name} table has {table.n_features} features, expected {cfg.input_length}"
        )
    if table.labels.min() < 0 or table.labels.max() >= cfg.n_classes:
        raise ValueError(f"{name} labels outside [0, {cfg.n_classes})")


def train_cnn(
    model: CnnModel,
    train: FeatureTable,
    val: FeatureTable | None,
    cfg: CnnConfig | None = None,
) -> tuple[CnnModel, TrainHistory]:
    """Mini-batch cross-entropy training with per-epoch seeded shuffling.

    Validation accuracy is recorded for the history only; no early stopping.
    With epochs=0 the model is returned untouched.
    """
    cfg = cfg or model.config
    history = TrainHistory()
    if cfg.epochs == 0:
        return model, history
    _check_training_table(train, cfg, "train")
    if val is not None and val.n_rows:
        _check_training_table(val, cfg, "val")

    x = np.ascontiguousarray(train.features, dtype=model.dtype)
    y = train.labels
    params = model.parameters()
    state = init_optimizer_state(cfg.optimizer, params)

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        rng = np.random.default_rng(np.random.SeedSequence([model.seed, 977, epoch]))
        perm = rng.permutation(x.shape[0])
        loss_sum = 0.0
        correct = 0
        for start in range(0, x.shape[0], cfg.batch_size):
            sel = perm[start:start + cfg.batch_size]
            xb, yb = x[sel], y[sel]
            logits, conv_caches, dense_caches = _forward_cached(model, xb)
            loss_sum += _log_loss(logits, yb) * sel.size
            correct += int((logits.argmax(axis=1) == yb).sum())
            grads = _backward(model, conv_caches, dense_caches, logits, yb)
            optimizer_step(cfg.optimizer, state, params, grads, cfg.learning_rate)
        val_acc = float("nan")
        if val is not None and val.n_rows:
            val_pred = predict_proba(model, val.features).argmax(axis=1)
            val_acc = float((val_pred == val.labels).mean())
        history.epochs.append({
            "epoch": epoch + 1,
            "train_loss": loss_sum / x.shape[0],
            "train_acc": correct / x.shape[0],
            "val_acc": val_acc,
            "seconds": time.perf_counter() - t0,
        })
    return model, history


def batch_loss(model: CnnModel, features: np.ndarray, labels: np.ndarray) -> float:
    logits, _, _ = _forward_cached(model, np.asarray(features))
    return _log_loss(logits, np.asarray(labels))


def batch_gradients(model: CnnModel, features: np.ndarray, labels: np.ndarray) -> list[np.ndarray]:
    logits, conv_caches, dense_caches = _forward_cached(model, np.asarray(features))
    return _backward(model, conv_caches, dense_caches, logits, np.asarray(labels))


def gradient_check(
    model: CnnModel, features: np.ndarray, labels: np.ndarray, eps: float = 1e-5
) -> float:
    """Max relative error between analytic and central finite-difference
    gradients over every parameter. Requires a small float64 model."""
    if model.dtype != np.float64:
        raise ValueError("gradient_check requires a float64 model")
    if model.n_parameters > 10_000:
        raise ValueError("gradient_check is meant for reduced models (<= 1e4 parameters)")
    analytic = batch_gradients(model, features, labels)
    worst = 0.0
    for p, g in zip(model.parameters(), analytic):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            saved = flat[j]
            flat[j] = saved + eps
            up = batch_loss(model, features, labels)
            flat[j] = saved - eps
            down = batch_loss(model, features, labels)
            flat[j] = saved
            numeric = (up - down) / (2.0 * eps)
            denom = max(abs(gflat[j]) + abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[j] - numeric) / denom)
    return worst


EMBEDDING_TAPS = ("output", "penultimate")


def extract_embeddings(model: CnnModel, table: FeatureTable, tap: str = "output") -> FeatureTable:
    """New table whose features are the tapped activations; row order,
    labels, and dpi are unchanged."""
    if tap not in EMBEDDING_TAPS:
        raise ValueError(f"unknown tap {tap!r}; choose from {EMBEDDING_TAPS}")
    feats = np.asarray(table.features)
    outputs = []
    for start in range(0, feats.shape[0], 4096):
        probs, taps = forward(model, feats[start:start + 4096])
        if tap == "penultimate" and "penultimate" not in taps:
            raise ValueError("model has no hidden dense layer to tap")
        outputs.append(np.asarray(taps[tap], dtype=np.float64))
    stacked = (
        np.concatenate(outputs, axis=0)
        if outputs
        else np.empty((0, model.config.n_classes), dtype=np.float64)
    )
    prefix = "out" if tap == "output" else "emb"
    names = tuple(f"{prefix}{j:02d}" for j in range(1, stacked.shape[1] + 1))
    return table.with_features(stacked, names)


def save_cnn(model: CnnModel, path) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "seed": model.seed,
        "n_conv": len(model.conv_weights),
        "n_dense": len(model.dense_weights),
    }
    arrays = {}
    for i, (w, b) in enumerate(zip(model.conv_weights, model.conv_biases)):
        arrays[f"conv_w{i}"] = w
        arrays[f"conv_b{i}"] = b
    for i, (w, b) in enumerate(zip(model.dense_weights, model.dense_biases)):
        arrays[f"dense_w{i}"] = w
        arrays[f"dense_b{i}"] = b
    save_bundle(path, meta, arrays)


def load_cnn(path) -> CnnModel:
    meta, data = load_bundle(path)
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format: {meta.get('format_version')!r}")
    cfg_doc = dict(meta["config"])
    cfg_doc["conv_filters"] = tuple(cfg_doc["conv_filters"])
    cfg_doc["dense_widths"] = tuple(cfg_doc["dense_widths"])
    cfg = CnnConfig(**cfg_doc)
    return CnnModel(
        config=cfg,
        seed=int(meta["seed"]),
        conv_weights=[data[f"conv_w{i}"] for i in range(meta["n_conv"])],
        conv_biases=[data[f"conv_b{i}"] for i in range(meta["n_conv"])],
        dense_weights=[data[f"dense_w{i}"] for i in range(meta["n_dense"])],
        dense_biases=[data[f"dense_b{i}"] for i in range(meta["n_dense"])],
    )
