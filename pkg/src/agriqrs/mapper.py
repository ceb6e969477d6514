"""Neural query-to-cluster mapper.

A two-layer LSTM classifier over single embeddings. Each embedding is
treated as a one-timestep sequence with zero initial state, so the cell
reduces to c = i * g and h = o * tanh(c): the forget gate and all
recurrent weights exist but cannot influence the loss. Their gradients
are structurally zero, and the backward pass returns exact zeros for
them rather than pretending otherwise.

Everything here is plain numpy so the arithmetic is auditable and the
backward pass can be validated against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError

GATE_ORDER = "ifgo"  # slice order inside stacked gate tensors


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 30
    dropout: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    train_fraction: float = 0.8
    hidden1: int = 768
    hidden2: int = 512
    kind: str = "lstm"
    dtype: str = "float32"

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 < self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in (0, 1), got {self.dropout}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )
        if self.hidden1 < 1 or self.hidden2 < 1:
            raise ConfigurationError(
                f"hidden sizes must be >= 1, got {self.hidden1}, {self.hidden2}"
            )
        if self.kind not in ("lstm", "linear"):
            raise ConfigurationError(f"kind must be 'lstm' or 'linear', got {self.kind!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigurationError(f"dtype must be float32 or float64, got {self.dtype!r}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "dropout": self.dropout,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "hidden1": self.hidden1,
            "hidden2": self.hidden2,
            "kind": self.kind,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        keys = (
            "learning_rate",
            "batch_size",
            "epochs",
            "dropout",
            "beta1",
            "beta2",
            "eps",
            "seed",
            "train_fraction",
            "hidden1",
            "hidden2",
            "kind",
            "dtype",
        )
        return cls(**{k: data[k] for k in keys if k in data})


@dataclass
class MapperModel:
    kind: str
    input_dim: int
    hidden1: int
    hidden2: int
    n_classes: int
    params: dict[str, np.ndarray]
    label_map: list[int]
    train_losses: list[float] = field(default_factory=list)

    def tensor_items(self) -> list[tuple[str, np.ndarray]]:
        """Parameters in a fixed, name-sorted order for serialization."""
        return sorted(self.params.items())

    def astype(self, dtype) -> "MapperModel":
        return MapperModel(
            kind=self.kind,
            input_dim=self.input_dim,
            hidden1=self.hidden1,
            hidden2=self.hidden2,
            n_classes=self.n_classes,
            params={k: v.astype(dtype) for k, v in self.params.items()},
            label_map=list(self.label_map),
            train_losses=list(self.train_losses),
        )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # piecewise form avoids overflow warnings for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def init_model(
    input_dim: int,
    n_classes: int,
    config: TrainConfig | None = None,
    label_map: list[int] | None = None,
) -> MapperModel:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init for every tensor of a
    layer, fan_in being the layer's hidden size (dense: its input width)."""
    config = config or TrainConfig()
    if input_dim < 1 or n_classes < 1:
        raise ConfigurationError(
            f"need input_dim >= 1 and n_classes >= 1, got {input_dim}, {n_classes}"
        )
    dtype = np.dtype(config.dtype)
    rng = np.random.default_rng([config.seed, 1])
    params: dict[str, np.ndarray] = {}

    def draw(name, shape, bound):
        params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)

    if config.kind == "lstm":
        h1, h2 = config.hidden1, config.hidden2
        b1 = 1.0 / np.sqrt(h1)
        draw("lstm1.w_x", (4 * h1, input_dim), b1)
        draw("lstm1.w_h", (4 * h1, h1), b1)
        draw("lstm1.b", (4 * h1,), b1)
        b2 = 1.0 / np.sqrt(h2)
        draw("lstm2.w_x", (4 * h2, h1), b2)
        draw("lstm2.w_h", (4 * h2, h2), b2)
        draw("lstm2.b", (4 * h2,), b2)
        bd = 1.0 / np.sqrt(h2)
        draw("dense.w", (n_classes, h2), bd)
        draw("dense.b", (n_classes,), bd)
    else:
        h1 = h2 = input_dim
        bd = 1.0 / np.sqrt(input_dim)
        draw("dense.w", (n_classes, input_dim), bd)
        draw("dense.b", (n_classes,), bd)

    return MapperModel(
        kind=config.kind,
        input_dim=input_dim,
        hidden1=h1,
        hidden2=h2,
        n_classes=n_classes,
        params=params,
        label_map=list(label_map) if label_map is not None else list(range(n_classes)),
    )


def _cell_forward(x: np.ndarray, w_x: np.ndarray, b: np.ndarray, hidden: int):
    pre = x @ w_x.T + b
    i = _sigmoid(pre[:, :hidden])
    g = np.tanh(pre[:, 2 * hidden : 3 * hidden])
    o = _sigmoid(pre[:, 3 * hidden :])
    c = i * g  # forget gate drops out: previous cell state is zero
    tc = np.tanh(c)
    h = o * tc
    return h, {"x": x, "i": i, "g": g, "o": o, "tc": tc, "hidden": hidden}


def _cell_backward(dh: np.ndarray, cache: dict, w_x: np.ndarray):
    i, g, o, tc = cache["i"], cache["g"], cache["o"], cache["tc"]
    hidden = cache["hidden"]
    x = cache["x"]
    do = dh * tc
    dc = dh * o * (1.0 - tc * tc)
    di = dc * g
    dg = dc * i
    dpre = np.zeros((dh.shape[0], 4 * hidden), dtype=dh.dtype)
    dpre[:, :hidden] = di * i * (1.0 - i)
    # forget-gate slice stays zero: it never touches the loss
    dpre[:, 2 * hidden : 3 * hidden] = dg * (1.0 - g * g)
    dpre[:, 3 * hidden :] = do * o * (1.0 - o)
    dw_x = dpre.T @ x
    db = dpre.sum(axis=0)
    dx = dpre @ w_x
    return dx, dw_x, db


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def _dropout_mask(shape, p: float, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return (rng.random(shape) >= p).astype(np.float64) / (1.0 - p)


def _forward(model: MapperModel, x: np.ndarray, drop_mask: np.ndarray | None):
    caches: dict = {}
    if model.kind == "lstm":
        h1, caches["l1"] = _cell_forward(
            x, model.params["lstm1.w_x"], model.params["lstm1.b"], model.hidden1
        )
        h2, caches["l2"] = _cell_forward(
            h1, model.params["lstm2.w_x"], model.params["lstm2.b"], model.hidden2
        )
        if drop_mask is not None:
            h2 = h2 * drop_mask.astype(h2.dtype)
        caches["head_in"] = h2
    else:
        caches["head_in"] = x
    logits = caches["head_in"] @ model.params["dense.w"].T + model.params["dense.b"]
    probs = _softmax(logits)
    caches["probs"] = probs
    caches["drop_mask"] = drop_mask
    return probs, caches


def lstm_forward(
    model: MapperModel,
    batch: np.ndarray,
    mode: str = "infer",
    seed: int = 0,
    dropout: float = 0.2,
) -> np.ndarray:
    """Class probabilities for a batch of embeddings.

    Train mode applies an inverted dropout mask (seeded, reproducible) to
    the second hidden layer; infer mode is deterministic and seed-free.
    """
    if mode not in ("train", "infer"):
        raise ConfigurationError(f"mode must be 'train' or 'infer', got {mode!r}")
    x = np.atleast_2d(np.asarray(batch))
    if x.shape[1] != model.input_dim:
        raise DataError(f"batch width {x.shape[1]} != model input dim {model.input_dim}")
    x = x.astype(model.params["dense.w"].dtype)
    mask = None
    if mode == "train" and model.kind == "lstm":
        mask = _dropout_mask((x.shape[0], model.hidden2), dropout, seed)
    probs, _ = _forward(model, x, mask)
    return probs


def _loss_and_grads(model: MapperModel, x: np.ndarray, y: np.ndarray, drop_mask):
    n = x.shape[0]
    probs, caches = _forward(model, x, drop_mask)
    eps = np.finfo(probs.dtype).tiny
    loss = float(-np.mean(np.log(np.maximum(probs[np.arange(n), y], eps))))

    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    grads: dict[str, np.ndarray] = {}
    grads["dense.w"] = dlogits.T @ caches["head_in"]
    grads["dense.b"] = dlogits.sum(axis=0)
    if model.kind == "lstm":
        dh2 = dlogits @ model.params["dense.w"]
        if drop_mask is not None:
            dh2 = dh2 * drop_mask.astype(dh2.dtype)
        dh1, dw_x2, db2 = _cell_backward(dh2, caches["l2"], model.params["lstm2.w_x"])
        _, dw_x1, db1 = _cell_backward(dh1, caches["l1"], model.params["lstm1.w_x"])
        grads["lstm2.w_x"] = dw_x2
        grads["lstm2.b"] = db2
        grads["lstm2.w_h"] = np.zeros_like(model.params["lstm2.w_h"])
        grads["lstm1.w_x"] = dw_x1
        grads["lstm1.b"] = db1
        grads["lstm1.w_h"] = np.zeros_like(model.params["lstm1.w_h"])
    return loss, grads


def compute_gradients(
    model: MapperModel, batch: np.ndarray, labels: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Cross-entropy loss and analytic gradients, dropout disabled."""
    x = np.atleast_2d(np.asarray(batch)).astype(model.params["dense.w"].dtype)
    y = np.asarray(labels, dtype=np.int64)
    if np.any(y < 0) or np.any(y >= model.n_classes):
        raise DataError("label outside [0, n_classes)")
    return _loss_and_grads(model, x, y, None)


def gradient_check(
    model: MapperModel,
    batch: np.ndarray,
    labels: np.ndarray,
    step: float = 1e-5,
) -> dict[str, float]:
    """Central-difference check of every parameter coordinate.

    Returns the max relative error per tensor plus an ``overall`` entry.
    Structural zeros (recurrent and forget-gate slices) agree at exactly
    zero, so they contribute no error. Use float64 models; float32 noise
    swamps the comparison.
    """
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    _, analytic = _loss_and_grads(model, x, y, None)
    report: dict[str, float] = {}
    worst = 0.0
    for name, tensor in model.tensor_items():
        grad = analytic[name]
        err = 0.0
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.shape[0]):
            keep = flat[idx]
            flat[idx] = keep + step
            up, _ = _loss_and_grads(model, x, y, None)
            flat[idx] = keep - step
            down, _ = _loss_and_grads(model, x, y, None)
            flat[idx] = keep
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(gflat[idx]) + abs(numeric), 1e-8)
            err = max(err, abs(gflat[idx] - numeric) / denom)
        report[name] = err
        worst = max(worst, err)
    report["overall"] = worst
    return report


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], config: TrainConfig):
        self.config = config
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        cfg = self.config
        self.t += 1
        bc1 = 1.0 - cfg.beta1**self.t
        bc2 = 1.0 - cfg.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            p -= (cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)).astype(
                p.dtype
            )


def train_mapper(
    embeddings: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig | None = None,
    n_classes: int | None = None,
    label_map: list[int] | None = None,
) -> MapperModel:
    """Train the classifier. Deterministic given the config seed, and
    invariant to the order of the training examples: inputs are sorted
    into a canonical order before any batching."""
    config = config or TrainConfig()
    x = np.atleast_2d(np.asarray(embeddings))
    y = np.asarray(labels, dtype=np.int64)
    if x.shape[0] != y.shape[0]:
        raise DataError(f"{x.shape[0]} embeddings vs {y.shape[0]} labels")
    if x.shape[0] == 0:
        raise DataError("empty training set")
    m = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if np.any(y < 0) or np.any(y >= m):
        raise DataError(f"labels must lie in [0, {m})")

    dtype = np.dtype(config.dtype)
    x = x.astype(dtype)
    canon = sorted(range(x.shape[0]), key=lambda i: (int(y[i]), x[i].tobytes()))
    x = x[canon]
    y = y[canon]

    model = init_model(x.shape[1], m, config, label_map=label_map)
    optimizer = _Adam(model.params, config)
    n = x.shape[0]
    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, 1000 + epoch]).permutation(n)
        total = 0.0
        for step_idx, start in enumerate(range(0, n, config.batch_size)):
            batch_idx = order[start : start + config.batch_size]
            mask = None
            if model.kind == "lstm":
                mask = _dropout_mask(
                    (batch_idx.shape[0], model.hidden2),
                    config.dropout,
                    [config.seed, 2000 + epoch, step_idx],
                )
            loss, grads = _loss_and_grads(model, x[batch_idx], y[batch_idx], mask)
            optimizer.step(model.params, grads)
            total += loss * batch_idx.shape[0]
        model.train_losses.append(total / n)
    return model


def predict_proba(model: MapperModel, embeddings: np.ndarray) -> np.ndarray:
    return lstm_forward(model, embeddings, mode="infer")


def predict_cluster(model: MapperModel, embedding: np.ndarray) -> tuple[int, float]:
    """Most probable cluster id for one embedding, with its probability."""
    probs = predict_proba(model, np.atleast_2d(embedding))[0]
    cls = int(np.argmax(probs))
    return model.label_map[cls], float(probs[cls])


def split_dataset(
    labels: np.ndarray,
    train_fraction: float = 0.8,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Stratified index split. Every label keeps at least one example on
    each side; labels with fewer than two examples are rejected."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    y = np.asarray(labels, dtype=np.int64)
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for label in np.unique(y):
        members = np.flatnonzero(y == label)
        if members.shape[0] < 2:
            raise DataError(
                f"label {int(label)} has {members.shape[0]} example(s); need at least 2 to split"
            )
        perm = np.random.default_rng([seed, int(label)]).permutation(members.shape[0])
        n_train = int(np.floor(train_fraction * members.shape[0]))
        n_train = max(1, min(members.shape[0] - 1, n_train))
        train_idx.append(members[perm[:n_train]])
        test_idx.append(members[perm[n_train:]])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))
