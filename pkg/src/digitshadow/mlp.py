"""One-hidden-layer sigmoid MLP trained online by backpropagation with momentum."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset_io import atomic_write_text

MODEL_MAGIC = "MLP1"
_MASK64 = (1 << 64) - 1


class TrainingDivergence(ArithmeticError):
    pass


class ModelFormatError(ValueError):
    pass


class XorShift64Star:
    """xorshift64* generator (Vigna 2014): shifts 12/25/27, multiplier 0x2545F4914F6CDD1D.

    The 64-bit seed is first passed through one splitmix64 step so that
    small or zero seeds still give a nonzero, well-mixed state.
    """

    def __init__(self, seed: int):
        z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        self.state = z or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class MlpLayout:
    n_in: int = 88
    n_hidden: int = 54
    n_out: int = 10

    def __post_init__(self):
        if min(self.n_in, self.n_hidden, self.n_out) < 1:
            raise ValueError(f"all layer sizes must be >= 1: {self}")

    def __str__(self):
        return f"{self.n_in}-{self.n_hidden}-{self.n_out}"


@dataclass
class TrainConfig:
    eta: float = 0.8
    alpha: float = 0.7
    max_epochs: int = 1000
    target_sse: float = 0.01
    seed: int = 0
    target_hi: float = 0.9
    target_lo: float = 0.1

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if not self.target_lo < self.target_hi:
            raise ValueError("target_lo must be below target_hi")


@dataclass
class TrainHistory:
    sse: list[float] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def epochs_run(self) -> int:
        return len(self.sse)


@dataclass(eq=False)
class MlpModel:
    """Weights carry the bias as their last column (a constant +1 input)."""

    layout: MlpLayout
    W1: np.ndarray
    W2: np.ndarray
    V1: np.ndarray = None
    V2: np.ndarray = None

    def __post_init__(self):
        L = self.layout
        self.W1 = np.array(self.W1, dtype=np.float64)
        self.W2 = np.array(self.W2, dtype=np.float64)
        if self.W1.shape != (L.n_hidden, L.n_in + 1) or self.W2.shape != (L.n_out, L.n_hidden + 1):
            raise ValueError(f"weight shapes {self.W1.shape}, {self.W2.shape} do not fit layout {L}")
        if self.V1 is None:
            self.V1 = np.zeros_like(self.W1)
        if self.V2 is None:
            self.V2 = np.zeros_like(self.W2)

    def same_weights(self, other: MlpModel) -> bool:
        return (
            self.layout == other.layout
            and np.array_equal(self.W1, other.W1)
            and np.array_equal(self.W2, other.W2)
        )


def init_model(layout: MlpLayout, seed: int) -> MlpModel:
    """Weights uniform in [-0.5, 0.5) from XorShift64Star(seed), W1 then W2, row-major."""
    rng = XorShift64Star(seed)
    n1 = layout.n_hidden * (layout.n_in + 1)
    n2 = layout.n_out * (layout.n_hidden + 1)
    w = np.array([rng.random() - 0.5 for _ in range(n1 + n2)])
    return MlpModel(
        layout,
        w[:n1].reshape(layout.n_hidden, layout.n_in + 1),
        w[n1:].reshape(layout.n_out, layout.n_hidden + 1),
    )


def sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


def _check_input(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.layout.n_in:
        raise ValueError(f"input has {x.shape[-1]} features, model expects {model.layout.n_in}")
    return x


def forward(model: MlpModel, x):
    """Hidden and output activations for one input vector or a (N, n_in) batch."""
    x = _check_input(model, x)
    with np.errstate(over="ignore"):
        hidden = sigmoid(x @ model.W1[:, :-1].T + model.W1[:, -1])
        out = sigmoid(hidden @ model.W2[:, :-1].T + model.W2[:, -1])
    return hidden, out


def target_vector(label: int, n_out: int, cfg: TrainConfig) -> np.ndarray:
    t = np.full(n_out, cfg.target_lo)
    t[label] = cfg.target_hi
    return t


def sample_error(model: MlpModel, x, label: int, cfg: TrainConfig) -> float:
    """E = sum_k (t_k - out_k)^2 for a single sample."""
    _, out = forward(model, x)
    return float(np.sum((target_vector(label, model.layout.n_out, cfg) - out) ** 2))


def objective(model: MlpModel, x, label: int, cfg: TrainConfig) -> float:
    """Training objective J = E / 2, the quantity backprop descends."""
    return 0.5 * sample_error(model, x, label, cfg)


def gradients(model: MlpModel, x, label: int, cfg: TrainConfig):
    """(dJ/dW1, dJ/dW2, E) for one sample, with J = E / 2 (classic delta rule)."""
    x = _check_input(model, x)
    hidden, out = forward(model, x)
    err = target_vector(label, model.layout.n_out, cfg) - out
    delta_out = -err * out * (1.0 - out)
    delta_hid = (model.W2[:, :-1].T @ delta_out) * hidden * (1.0 - hidden)
    g2 = np.outer(delta_out, np.append(hidden, 1.0))
    g1 = np.outer(delta_hid, np.append(x, 1.0))
    return g1, g2, float(err @ err)


def train_step(model: MlpModel, x, label: int, cfg: TrainConfig) -> float:
    """Apply one online update in place; returns the sample's squared error before the update.

    dW = -eta * dJ/dW + alpha * dW_prev, stored back into the momentum buffers.
    """
    if not 0 <= label < model.layout.n_out:
        raise ValueError(f"label {label} outside 0..{model.layout.n_out - 1}")
    g1, g2, sse = gradients(model, x, label, cfg)
    if not (math.isfinite(sse) and np.isfinite(g1).all() and np.isfinite(g2).all()):
        raise TrainingDivergence("non-finite activation or gradient")
    model.V1 = -cfg.eta * g1 + cfg.alpha * model.V1
    model.V2 = -cfg.eta * g2 + cfg.alpha * model.V2
    model.W1 += model.V1
    model.W2 += model.V2
    return sse


def train(model: MlpModel, X, y, cfg: TrainConfig, on_epoch=None):
    """Online BP with momentum over epochs shuffled by XorShift64Star(cfg.seed).

    Stops after ``cfg.max_epochs`` or once the epoch's mean per-sample SSE is
    at most ``cfg.target_sse``. The input model is left untouched.
    ``on_epoch(epoch, mean_sse, model)`` is called after every epoch.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("training set is empty")
    if len(X) != len(y):
        raise ValueError("feature and label counts differ")
    _check_input(model, X)
    if y.min() < 0 or y.max() >= model.layout.n_out:
        raise ValueError("labels outside the model's class range")

    model = copy.deepcopy(model)
    rng = XorShift64Star(cfg.seed)
    hist = TrainHistory()
    order = list(range(len(X)))
    targets = np.full((model.layout.n_out, model.layout.n_out), cfg.target_lo)
    np.fill_diagonal(targets, cfg.target_hi)

    W1, W2, V1, V2 = model.W1, model.W2, model.V1, model.V2
    eta, alpha = cfg.eta, cfg.alpha
    xs = np.hstack([X, np.ones((len(X), 1))])
    with np.errstate(over="ignore"):              # exp overflow saturates sigmoid cleanly to 0
        for epoch in range(cfg.max_epochs):
            rng.shuffle(order)
            total = 0.0
            for i in order:
                # inlined train_step; W/V are updated in place so model stays in sync
                xi = xs[i]
                h = sigmoid(W1 @ xi)
                h1 = np.append(h, 1.0)
                o = sigmoid(W2 @ h1)
                err = targets[y[i]] - o
                total += err @ err
                d_out = -err * o * (1.0 - o)
                d_hid = (W2[:, :-1].T @ d_out) * h * (1.0 - h)
                V2 *= alpha
                V2 -= eta * np.outer(d_out, h1)
                V1 *= alpha
                V1 -= eta * np.outer(d_hid, xi)
                W2 += V2
                W1 += V1
            mean_sse = total / len(X)
            if not (math.isfinite(mean_sse) and np.isfinite(W1).all() and np.isfinite(W2).all()):
                raise TrainingDivergence(f"training diverged in epoch {epoch + 1}")
            hist.sse.append(float(mean_sse))
            if on_epoch is not None:
                on_epoch(epoch + 1, mean_sse, model)
            if mean_sse <= cfg.target_sse:
                hist.stop_reason = "threshold"
                break
        else:
            hist.stop_reason = "max_epochs"
    return model, hist


def classify(model: MlpModel, x):
    """Argmax class; ties go to the lowest index. Accepts a single vector or a batch."""
    _, out = forward(model, x)
    return np.argmax(out, axis=-1) if out.ndim > 1 else int(np.argmax(out))


def _fmt(row) -> str:
    return " ".join(repr(float(v)) for v in row)


def dumps_model(model: MlpModel) -> str:
    L = model.layout
    lines = [MODEL_MAGIC, f"{L.n_in} {L.n_hidden} {L.n_out}"]
    lines += [_fmt(r) for r in model.W1]
    lines += [_fmt(r) for r in model.W2]
    return "\n".join(lines) + "\n"


def loads_model(text: str, name: str = "<model>") -> MlpModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != MODEL_MAGIC:
        raise ModelFormatError(f"{name}: missing {MODEL_MAGIC} magic")
    try:
        n_in, n_hidden, n_out = (int(v) for v in lines[1].split())
        layout = MlpLayout(n_in, n_hidden, n_out)
        rows = [[float(v) for v in ln.split()] for ln in lines[2:]]
    except (IndexError, ValueError) as exc:
        raise ModelFormatError(f"{name}: {exc}") from None
    if len(rows) != n_hidden + n_out:
        raise ModelFormatError(f"{name}: expected {n_hidden + n_out} weight rows, found {len(rows)}")
    w1, w2 = rows[:n_hidden], rows[n_hidden:]
    if any(len(r) != n_in + 1 for r in w1) or any(len(r) != n_hidden + 1 for r in w2):
        raise ModelFormatError(f"{name}: weight row length does not match layout {layout}")
    return MlpModel(layout, np.array(w1), np.array(w2))


def save_model(model: MlpModel, path) -> None:
    atomic_write_text(path, dumps_model(model))


def load_model(path) -> MlpModel:
    path = Path(path)
    return loads_model(path.read_text(), str(path))
