"""Residual MLP for 2D-to-3D keypoint lifting, trained with plain numpy.

Architecture (all dense, no normalization layers):

    Linear(d_in, h) -> ReLU
    -> n_blocks times: x + ReLU(W2 @ ReLU(W1 @ x + b1) + b2)
    -> Linear(h, d_out)

Inputs are standardized with statistics of the training split; the output
head predicts in standardized units and the model multiplies by the
target standard deviation and adds the target mean before returning, so
predictions (and the training MSE) live in millimeters.  Gradients are
hand-written backprop; Adam does its usual per-parameter rescaling, which
is what makes the millimeter-scale loss trainable at lr 1e-3.

Everything is deterministic given the seed: parameter init, the
train/validation split, and the per-epoch shuffles all come from one
np.random.default_rng.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import NonFiniteLossError, ValidationError

__all__ = [
    "NormStats",
    "init_params",
    "param_count",
    "forward",
    "backward",
    "loss_and_grads",
    "gradient_check",
    "Adam",
    "LiftingModel",
    "TrainHistory",
    "fit_lifting",
    "MlpRegressor",
]

# Features can be exactly constant (a root coordinate after root-centering
# is always 0); flooring the std keeps standardization finite and maps
# such features to exactly 0.
STD_FLOOR = 1e-6


@dataclass(frozen=True)
class NormStats:
    """Per-feature mean/std for standardization, std floored at STD_FLOOR."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x) -> "NormStats":
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] < 2:
            raise ValidationError(f"need a (N >= 2, D) array to fit stats, got shape {x.shape}")
        return cls(mean=x.mean(axis=0), std=np.maximum(x.std(axis=0), STD_FLOOR))

    def standardize(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def unstandardize(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "NormStats":
        return cls(mean=np.asarray(data["mean"], float), std=np.asarray(data["std"], float))


def param_count(d_in: int, d_out: int, hidden: int, n_blocks: int = 2) -> int:
    """Total trainable parameters of the architecture above."""
    return (
        d_in * hidden
        + hidden
        + n_blocks * 2 * (hidden * hidden + hidden)
        + hidden * d_out
        + d_out
    )


def init_params(
    d_in: int, d_out: int, hidden: int, n_blocks: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """He-normal weights, zero biases, in a flat list.

    Layout: [W_in, b_in] + n_blocks * [W1, b1, W2, b2] + [W_out, b_out].
    Weights have shape (fan_in, fan_out); layers compute x @ W + b.
    """
    if min(d_in, d_out, hidden) < 1 or n_blocks < 0:
        raise ValidationError(
            f"bad architecture d_in={d_in} d_out={d_out} hidden={hidden} n_blocks={n_blocks}"
        )

    def linear(fan_in, fan_out):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        return [w, np.zeros(fan_out)]

    params = linear(d_in, hidden)
    for _ in range(n_blocks):
        params += linear(hidden, hidden)
        params += linear(hidden, hidden)
    params += linear(hidden, d_out)
    return params


def forward(params: list[np.ndarray], x: np.ndarray, n_blocks: int = 2):
    """Network output and the cache backward() needs.

    x: (N, d_in) already standardized.  Returns (out (N, d_out), cache).
    """
    h = np.maximum(x @ params[0] + params[1], 0.0)
    cache = {"x": x, "h0": h, "blocks": []}
    for b in range(n_blocks):
        w1, b1, w2, b2 = params[2 + 4 * b : 6 + 4 * b]
        m = np.maximum(h @ w1 + b1, 0.0)
        r = np.maximum(m @ w2 + b2, 0.0)
        cache["blocks"].append((h, m, r))
        h = h + r
    cache["h_final"] = h
    return h @ params[-2] + params[-1], cache


def backward(params: list[np.ndarray], cache: dict, dout: np.ndarray, n_blocks: int = 2):
    """Gradients for every parameter plus the input gradient.

    dout: (N, d_out) gradient of the loss w.r.t. the network output.
    Returns (grads list matching params, dx (N, d_in)).
    """
    grads: list[np.ndarray | None] = [None] * len(params)
    grads[-2] = cache["h_final"].T @ dout
    grads[-1] = dout.sum(axis=0)
    dh = dout @ params[-2].T
    for b in range(n_blocks - 1, -1, -1):
        w1, _, w2, _ = params[2 + 4 * b : 6 + 4 * b]
        h_in, m, r = cache["blocks"][b]
        dr = dh * (r > 0.0)
        grads[4 + 4 * b] = m.T @ dr
        grads[5 + 4 * b] = dr.sum(axis=0)
        dm = (dr @ w2.T) * (m > 0.0)
        grads[2 + 4 * b] = h_in.T @ dm
        grads[3 + 4 * b] = dm.sum(axis=0)
        # Skip connection: upstream gradient flows through unchanged.
        dh = dh + dm @ w1.T
    dh0 = dh * (cache["h0"] > 0.0)
    grads[0] = cache["x"].T @ dh0
    grads[1] = dh0.sum(axis=0)
    return grads, dh0 @ params[0].T


def loss_and_grads(params: list[np.ndarray], x: np.ndarray, y: np.ndarray, n_blocks: int = 2):
    """Mean-squared-error loss, parameter gradients, and input gradient.

    Works in whatever units x/y are given; fit_lifting wraps this with
    the standardization described in the module docstring.
    """
    out, cache = forward(params, x, n_blocks)
    diff = out - y
    loss = float(np.mean(diff * diff))
    dout = 2.0 * diff / diff.size
    grads, dx = backward(params, cache, dout, n_blocks)
    return loss, grads, dx


def gradient_check(seed: int = 0, d_in: int = 5, d_out: int = 4, hidden: int = 7) -> dict:
    """Backprop vs central differences on a tiny network.

    Returns {"params": worst_rel, "inputs": worst_rel} where the relative
    error divides by the finite-difference magnitude floored at 1.
    """
    rng = np.random.default_rng(seed)
    params = init_params(d_in, d_out, hidden, 2, rng)
    x = rng.normal(size=(6, d_in))
    y = rng.normal(size=(6, d_out))
    _, grads, dx = loss_and_grads(params, x, y)
    eps = 1e-6

    worst_p = 0.0
    for pi, p in enumerate(params):
        flat = p.ravel()
        stride = max(1, flat.size // 13)
        for k in range(0, flat.size, stride):
            orig = flat[k]
            flat[k] = orig + eps
            lp = loss_and_grads(params, x, y)[0]
            flat[k] = orig - eps
            lm = loss_and_grads(params, x, y)[0]
            flat[k] = orig
            fd = (lp - lm) / (2 * eps)
            worst_p = max(worst_p, abs(grads[pi].ravel()[k] - fd) / max(1.0, abs(fd)))

    worst_x = 0.0
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            orig = x[i, j]
            x[i, j] = orig + eps
            lp = loss_and_grads(params, x, y)[0]
            x[i, j] = orig - eps
            lm = loss_and_grads(params, x, y)[0]
            x[i, j] = orig
            fd = (lp - lm) / (2 * eps)
            worst_x = max(worst_x, abs(dx[i, j] - fd) / max(1.0, abs(fd)))
    return {"params": worst_p, "inputs": worst_x}


class Adam:
    """Standard Adam with bias correction."""

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if learning_rate <= 0:
            raise ValidationError(f"learning rate must be positive, got {learning_rate}")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1**self.t
        corr2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1


@dataclass
class LiftingModel:
    """Trained network plus the standardization that makes it usable."""

    params: list[np.ndarray]
    in_stats: NormStats
    out_stats: NormStats
    hidden: int
    n_blocks: int

    @property
    def d_in(self) -> int:
        return self.params[0].shape[0]

    @property
    def d_out(self) -> int:
        return self.params[-2].shape[1]

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ValidationError(f"expected (N, {self.d_in}) inputs, got shape {x.shape}")
        out, _ = forward(self.params, self.in_stats.standardize(x), self.n_blocks)
        return self.out_stats.unstandardize(out)

    def to_dict(self) -> dict:
        return {
            "kind": "lifting_mlp",
            "hidden": self.hidden,
            "n_blocks": self.n_blocks,
            "d_in": self.d_in,
            "d_out": self.d_out,
            "in_stats": self.in_stats.to_dict(),
            "out_stats": self.out_stats.to_dict(),
            "params": [p.tolist() for p in self.params],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LiftingModel":
        for key in ("kind", "hidden", "n_blocks", "in_stats", "out_stats", "params"):
            if key not in data:
                raise ValidationError(f"model file missing field {key!r}")
        if data["kind"] != "lifting_mlp":
            raise ValidationError(f"not a lifting model file (kind={data['kind']!r})")
        model = cls(
            params=[np.asarray(p, dtype=float) for p in data["params"]],
            in_stats=NormStats.from_dict(data["in_stats"]),
            out_stats=NormStats.from_dict(data["out_stats"]),
            hidden=int(data["hidden"]),
            n_blocks=int(data["n_blocks"]),
        )
        if len(model.params) != 4 + 4 * model.n_blocks:
            raise ValidationError("model file has the wrong number of parameter arrays")
        return model


def fit_lifting(
    x,
    y,
    hidden: int = 64,
    n_blocks: int = 2,
    epochs: int = 200,
    batch_size: int = 64,
    learning_rate: float = 1e-3,
    val_fraction: float = 0.1,
    seed: int = 0,
) -> tuple[LiftingModel, TrainHistory]:
    """Train a lifting MLP; returns the best-validation-epoch parameters.

    A val_fraction split (seeded, taken off the shuffled data) picks the
    epoch to keep; set val_fraction=0 to train on everything and keep the
    final epoch.  Raises NonFiniteLossError if the loss leaves the reals.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValidationError(f"need matching (N, D) arrays, got {x.shape} and {y.shape}")
    if not (0.0 <= val_fraction < 1.0):
        raise ValidationError(f"val_fraction must be in [0, 1), got {val_fraction}")
    if epochs < 1 or batch_size < 1:
        raise ValidationError(f"epochs and batch_size must be >= 1, got {epochs}, {batch_size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("training data contains non-finite values")

    rng = np.random.default_rng(seed)
    order = rng.permutation(x.shape[0])
    n_val = int(round(val_fraction * x.shape[0]))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if train_idx.size < 2:
        raise ValidationError("not enough training samples after the validation split")
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    in_stats = NormStats.fit(x_train)
    out_stats = NormStats.fit(y_train)
    xs = in_stats.standardize(x_train)
    xs_val = in_stats.standardize(x_val) if n_val else None

    params = init_params(x.shape[1], y.shape[1], hidden, n_blocks, rng)
    opt = Adam(params, learning_rate)
    history = TrainHistory()
    best = [p.copy() for p in params]
    best_val = np.inf

    for epoch in range(epochs):
        perm = rng.permutation(xs.shape[0])
        epoch_loss = 0.0
        for start in range(0, xs.shape[0], batch_size):
            idx = perm[start : start + batch_size]
            xb, yb = xs[idx], y_train[idx]
            out, cache = forward(params, xb, n_blocks)
            pred = out_stats.unstandardize(out)
            diff = pred - yb
            loss = float(np.mean(diff * diff))
            if not np.isfinite(loss):
                raise NonFiniteLossError(f"loss became non-finite at epoch {epoch}")
            dout = (2.0 * diff / diff.size) * out_stats.std
            grads, _ = backward(params, cache, dout, n_blocks)
            opt.step(params, grads)
            epoch_loss += loss * idx.size
        history.train_loss.append(epoch_loss / xs.shape[0])

        if n_val:
            out, _ = forward(params, xs_val, n_blocks)
            val = float(np.mean((out_stats.unstandardize(out) - y_val) ** 2))
            if not np.isfinite(val):
                raise NonFiniteLossError(f"validation loss became non-finite at epoch {epoch}")
            history.val_loss.append(val)
            if val < best_val:
                best_val = val
                best = [p.copy() for p in params]
                history.best_epoch = epoch

    if n_val:
        params = best
    else:
        history.best_epoch = epochs - 1
    model = LiftingModel(
        params=params, in_stats=in_stats, out_stats=out_stats, hidden=hidden, n_blocks=n_blocks
    )
    return model, history


class MlpRegressor(BaseEstimator, RegressorMixin):
    """scikit-learn front for fit_lifting (get_params / fit / predict).

    Thin by design: all real work happens in the functions above, which
    the rest of the package calls directly.
    """

    def __init__(
        self,
        hidden: int = 64,
        n_blocks: int = 2,
        epochs: int = 200,
        batch_size: int = 64,
        learning_rate: float = 1e-3,
        val_fraction: float = 0.1,
        seed: int = 0,
    ):
        self.hidden = hidden
        self.n_blocks = n_blocks
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.val_fraction = val_fraction
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        self.model_, self.history_ = fit_lifting(
            X,
            y,
            hidden=self.hidden,
            n_blocks=self.n_blocks,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            val_fraction=self.val_fraction,
            seed=self.seed,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return self.model_.predict(X)
