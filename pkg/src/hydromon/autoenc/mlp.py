"""Mirrored multilayer-perceptron autoencoders.

The decoder is always the exact mirror of the encoder; each part applies
one activation to all of its neurons, and the output layer is identity.
Training minimizes mean absolute reconstruction error with its sign
subgradient; gradient checking switches to squared error so the finite
difference comparison is against a smooth function.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

_ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")
_MOMENTUM = 0.9


class AutoencError(ValueError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    input_width: int
    encoder_widths: tuple[int, ...]
    bottleneck: int
    encoder_activation: str = "tanh"
    decoder_activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "encoder_widths", tuple(int(w) for w in self.encoder_widths))
        if self.input_width < 1:
            raise AutoencError(f"input width must be >= 1, got {self.input_width}")
        if any(w < 1 for w in self.encoder_widths):
            raise AutoencError(f"hidden widths must be >= 1, got {self.encoder_widths}")
        if not 1 <= self.bottleneck < self.input_width:
            raise AutoencError(
                f"bottleneck must lie in [1, {self.input_width - 1}], got {self.bottleneck}"
            )
        for act in (self.encoder_activation, self.decoder_activation):
            if act not in _ACTIVATIONS:
                raise AutoencError(f"activation must be one of {_ACTIVATIONS}, got {act!r}")

    @property
    def layer_widths(self) -> list[int]:
        """Unit counts from input through bottleneck back to output."""
        enc = list(self.encoder_widths)
        return [self.input_width] + enc + [self.bottleneck] + enc[::-1] + [self.input_width]

    @property
    def layer_activations(self) -> list[str]:
        n_enc = len(self.encoder_widths) + 1
        return (
            [self.encoder_activation] * n_enc
            + [self.decoder_activation] * len(self.encoder_widths)
            + ["identity"]
        )

    def to_dict(self) -> dict:
        return {
            "input_width": self.input_width,
            "encoder_widths": list(self.encoder_widths),
            "bottleneck": self.bottleneck,
            "encoder_activation": self.encoder_activation,
            "decoder_activation": self.decoder_activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(
            input_width=d["input_width"],
            encoder_widths=tuple(d["encoder_widths"]),
            bottleneck=d["bottleneck"],
            encoder_activation=d["encoder_activation"],
            decoder_activation=d["decoder_activation"],
        )


@dataclass
class Mlp:
    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int

    def __post_init__(self):
        widths = self.spec.layer_widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise AutoencError("layer count does not match spec")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (widths[l], widths[l + 1]) or b.shape != (widths[l + 1],):
                raise AutoencError(
                    f"layer {l} shapes {w.shape}/{b.shape} do not chain {widths[l]}->{widths[l + 1]}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise AutoencError(f"layer {l} has non-finite parameters")

    def copy(self) -> "Mlp":
        return Mlp(
            spec=self.spec,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            seed=self.seed,
        )


def init(spec: MlpSpec, seed: int) -> Mlp:
    """Seeded uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases."""
    rng = np.random.default_rng(seed)
    widths = spec.layer_widths
    weights = []
    biases = []
    for l in range(len(widths) - 1):
        fan_in, fan_out = widths[l], widths[l + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(spec=spec, weights=weights, biases=biases, seed=seed)


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _act_deriv(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


def _forward_trace(m: Mlp, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    acts = [X]
    pre = []
    for name, w, b in zip(m.spec.layer_activations, m.weights, m.biases):
        z = acts[-1] @ w + b
        pre.append(z)
        acts.append(_act(name, z))
    return acts, pre


def forward(m: Mlp, x: np.ndarray) -> np.ndarray:
    """Reconstruction of a row (d,) or a batch (n, d)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != m.spec.input_width:
        raise AutoencError(f"expected width {m.spec.input_width}, got {X.shape[1]}")
    acts, _ = _forward_trace(m, X)
    out = acts[-1]
    return out[0] if single else out


def loss_mae(y: np.ndarray, yhat: np.ndarray) -> float:
    """Mean absolute difference per component; batches average over rows."""
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise AutoencError(f"shape mismatch: {y.shape} vs {yhat.shape}")
    return float(np.abs(y - yhat).mean())


def row_mae(m: Mlp, X: np.ndarray) -> np.ndarray:
    """Per-row reconstruction MAE for a batch."""
    X = np.asarray(X, dtype=np.float64)
    recon = forward(m, X)
    return np.abs(X - recon).mean(axis=1)


def _backprop(m: Mlp, X: np.ndarray, loss: str) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Parameter gradients of the reconstruction loss on batch X."""
    acts, pre = _forward_trace(m, X)
    n, d = X.shape
    resid = acts[-1] - X
    if loss == "mae":
        delta = np.sign(resid) / (n * d)  # subgradient 0 at exact zeros
    elif loss == "mse":
        delta = 2.0 * resid / (n * d)
    else:
        raise AutoencError(f"unknown loss {loss!r}")
    names = m.spec.layer_activations
    grads_w = [None] * len(m.weights)
    grads_b = [None] * len(m.biases)
    for l in range(len(m.weights) - 1, -1, -1):
        delta = delta * _act_deriv(names[l], pre[l], acts[l + 1])
        grads_w[l] = acts[l].T @ delta
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ m.weights[l].T
    return grads_w, grads_b


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 60
    batch_size: int = 32
    seed: int = 0
    val_fraction: float = 0.15

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise AutoencError(f"learning rate must be > 0, got {self.learning_rate}")
        if not 0.0 < self.val_fraction < 1.0:
            raise AutoencError(f"val fraction must lie in (0, 1), got {self.val_fraction}")
        if self.epochs < 0:
            raise AutoencError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise AutoencError(f"batch size must be >= 1, got {self.batch_size}")


def train(m: Mlp, X, cfg: TrainConfig) -> tuple[Mlp, list[tuple[float, float]]]:
    """Minibatch SGD (momentum 0.9, linearly decaying rate) on MAE loss.

    The validation slice is the tail of the row order; the returned model
    carries the parameters of the best-validation epoch, not the last one.
    """
    data = np.asarray(getattr(X, "data", X), dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != m.spec.input_width:
        raise AutoencError(f"expected (n, {m.spec.input_width}) data, got {data.shape}")
    n = data.shape[0]
    if n < 10:
        raise AutoencError("subset too small to train")

    n_val = max(1, int(round(n * cfg.val_fraction)))
    train_rows = data[: n - n_val]
    val_rows = data[n - n_val:]

    model = m.copy()
    if cfg.epochs == 0:
        return model, []

    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    rng = np.random.default_rng(cfg.seed)
    history: list[tuple[float, float]] = []
    best_val = np.inf
    best_w = [w.copy() for w in model.weights]
    best_b = [b.copy() for b in model.biases]

    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate * (1.0 - epoch / cfg.epochs)
        order = rng.permutation(len(train_rows))
        for start in range(0, len(train_rows), cfg.batch_size):
            batch = train_rows[order[start : start + cfg.batch_size]]
            gw, gb = _backprop(model, batch, "mae")
            for l in range(len(model.weights)):
                vel_w[l] = _MOMENTUM * vel_w[l] - lr * gw[l]
                vel_b[l] = _MOMENTUM * vel_b[l] - lr * gb[l]
                model.weights[l] += vel_w[l]
                model.biases[l] += vel_b[l]
        train_mae = loss_mae(train_rows, forward(model, train_rows))
        val_mae = loss_mae(val_rows, forward(model, val_rows))
        history.append((train_mae, val_mae))
        if val_mae < best_val:
            best_val = val_mae
            best_w = [w.copy() for w in model.weights]
            best_b = [b.copy() for b in model.biases]

    return Mlp(spec=model.spec, weights=best_w, biases=best_b, seed=model.seed), history


def grad_check(m: Mlp, x: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error of backprop vs central finite differences.

    Runs on squared loss; meaningful only with smooth activations (tanh,
    sigmoid, identity).
    """
    x = np.asarray(x, dtype=np.float64)
    X = x[None, :] if x.ndim == 1 else x

    def loss_at() -> float:
        acts, _ = _forward_trace(m, X)
        r = acts[-1] - X
        return float((r * r).mean())

    gw, gb = _backprop(m, X, "mse")
    worst = 0.0
    for params, grads in ((m.weights, gw), (m.biases, gb)):
        for arr, g in zip(params, grads):
            flat = arr.ravel()
            gflat = g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                hi = loss_at()
                flat[i] = orig - eps
                lo = loss_at()
                flat[i] = orig
                fd = (hi - lo) / (2.0 * eps)
                denom = max(abs(gflat[i]), abs(fd), 1e-8)
                worst = max(worst, abs(gflat[i] - fd) / denom)
    return worst


def replace_decoder_mirror(spec: MlpSpec, **changes) -> MlpSpec:
    """Spec copy with changes; mirror structure is preserved by construction."""
    return replace(spec, **changes)
