"""
Dense feedforward networks trained from scratch.

Used twice in the pipeline: as the per-frame uncertainty regressor (linear
output, MSE loss) and as the acoustic senone classifier (softmax output,
cross-entropy loss) whose posteriors become pseudo-log-likelihoods.
"""
import logging
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp, softmax
from tqdm import tqdm

from uwdecode.errors import (
    ConfigError,
    DimMismatch,
    EmptyDataset,
    IoError,
    MissingFeature,
    ModelFormatError,
)

logger = logging.getLogger(__name__)

HIDDEN_TANH = 'tanh'
OUTPUT_LINEAR = 'linear'
OUTPUT_SOFTMAX = 'softmax'
LOSS_MSE = 'mse'
LOSS_CE = 'cross-entropy'

# hidden layer sizes of the regressor topologies
TOPOLOGIES: Dict[str, Tuple[int, ...]] = {
    'C1': (40, 40, 20, 40, 40),
    'C2': (80, 80, 40, 80, 80),
    'C3': (40, 40, 40, 40, 40),
    'C4': (80, 80, 80, 80, 80),
}

FEATURE_VARIANTS = ('f1', 'f2', 'f3')

MODEL_MAGIC = b'UWMLP'
MODEL_VERSION = 1
_ACTIVATION_CODES = {HIDDEN_TANH: 0, OUTPUT_LINEAR: 1, OUTPUT_SOFTMAX: 2}
_ACTIVATION_NAMES = {code: name for name, code in _ACTIVATION_CODES.items()}


@dataclass(frozen=True)
class MLPSpec:
    """Layer sizes input -> hidden... -> output plus activations and init seed"""
    layer_sizes: Tuple[int, ...]
    hidden_activation: str = HIDDEN_TANH
    output_activation: str = OUTPUT_LINEAR
    rng_seed: int = 0

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    @property
    def loss(self) -> str:
        return LOSS_CE if self.output_activation == OUTPUT_SOFTMAX else LOSS_MSE

    def validate(self) -> 'MLPSpec':
        if len(self.layer_sizes) < 3:
            raise ConfigError(f"Need at least one hidden layer, got sizes {self.layer_sizes}")
        if any(int(size) < 1 for size in self.layer_sizes):
            raise ConfigError(f"All layer sizes must be >= 1, got {self.layer_sizes}")
        if self.hidden_activation != HIDDEN_TANH:
            raise ConfigError(f"Unsupported hidden activation '{self.hidden_activation}'")
        if self.output_activation not in (OUTPUT_LINEAR, OUTPUT_SOFTMAX):
            raise ConfigError(f"Unsupported output activation '{self.output_activation}'")
        return self


def regressor_spec(topology: str, input_dim: int, seed: int = 0) -> MLPSpec:
    if topology not in TOPOLOGIES:
        raise ConfigError(f"Unknown topology '{topology}', expected one of {sorted(TOPOLOGIES)}")
    return MLPSpec(layer_sizes=(input_dim,) + TOPOLOGIES[topology] + (1,),
                   output_activation=OUTPUT_LINEAR, rng_seed=seed).validate()


def classifier_spec(input_dim: int, hidden: Sequence[int], n_states: int, seed: int = 0) -> MLPSpec:
    return MLPSpec(layer_sizes=(input_dim,) + tuple(hidden) + (n_states,),
                   output_activation=OUTPUT_SOFTMAX, rng_seed=seed).validate()


@dataclass
class TrainConfig:
    """Mini-batch gradient descent settings; one 'iteration' is one epoch"""
    epochs: int = 20
    learning_rate: float = 0.01
    batch_size: int = 32
    split: Tuple[float, float, float] = (0.70, 0.15, 0.15)
    early_stop: bool = False
    patience: int = 3
    seed: int = 0
    show_progress: bool = False

    def validate(self) -> 'TrainConfig':
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if len(self.split) != 3 or any(f < 0 for f in self.split) or abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must be three non-negative values summing to 1, got {self.split}")
        return self


@dataclass
class TrainingHistory:
    """Loss per epoch; index 0 holds the loss before the first update"""
    epochs_run: int = 0
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    test_loss: List[float] = field(default_factory=list)

    def final(self) -> Tuple[float, float, float]:
        if not self.train_loss:
            return float('nan'), float('nan'), float('nan')
        return self.train_loss[-1], self.val_loss[-1], self.test_loss[-1]


class MLPModel:
    """Weights, biases and input standardization of one trained network"""

    def __init__(self, spec: MLPSpec, weights: List[np.ndarray], biases: List[np.ndarray],
                 input_mean: Optional[np.ndarray] = None, input_std: Optional[np.ndarray] = None,
                 history: Optional[TrainingHistory] = None):
        self.spec = spec.validate()
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        n_in = spec.input_size
        self.input_mean = np.zeros(n_in) if input_mean is None else np.asarray(input_mean, dtype=np.float64)
        self.input_std = np.ones(n_in) if input_std is None else np.asarray(input_std, dtype=np.float64)
        self.history = history or TrainingHistory()
        self._check_shapes()

    @classmethod
    def initialize(cls, spec: MLPSpec) -> 'MLPModel':
        """Uniform init in +-1/sqrt(fan_in), seeded by the spec"""
        spec.validate()
        rng = np.random.default_rng(spec.rng_seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
            limit = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-limit, limit, size=fan_out))
        return cls(spec, weights, biases)

    @classmethod
    def zeros(cls, spec: MLPSpec) -> 'MLPModel':
        sizes = spec.layer_sizes
        return cls(spec,
                   [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(b) for b in sizes[1:]])

    def _check_shapes(self):
        sizes = self.spec.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ModelFormatError("Layer count does not match spec")
        for w, b, fan_in, fan_out in zip(self.weights, self.biases, sizes[:-1], sizes[1:]):
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ModelFormatError(f"Parameter shape {w.shape}/{b.shape} does not match ({fan_in}, {fan_out})")
        if self.input_mean.shape != (sizes[0],) or self.input_std.shape != (sizes[0],):
            raise ModelFormatError("Standardization statistics do not match input size")

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.input_mean) / self.input_std

    def _as_batch(self, x: np.ndarray) -> Tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.shape[1] != self.spec.input_size:
            raise DimMismatch(f"Input has {arr.shape[1]} features, network expects {self.spec.input_size}")
        return arr, single

    def _activations(self, z: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """Hidden activations (input included) and output pre-activation"""
        acts = [z]
        a = z
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w + b)
            acts.append(a)
        return acts, a @ self.weights[-1] + self.biases[-1]

    def _output(self, logits: np.ndarray) -> np.ndarray:
        if self.spec.output_activation == OUTPUT_SOFTMAX:
            return softmax(logits, axis=-1)
        return logits

    def forward(self, x: np.ndarray) -> np.ndarray:
        """
        Deterministic forward pass.

        Args:
            x: One input vector or a (N, input_size) batch of raw (unstandardized) inputs

        Returns:
            Output vector(s); softmax networks return probabilities
        """
        batch, single = self._as_batch(x)
        _, logits = self._activations(self.standardize(batch))
        out = self._output(logits)
        return out[0] if single else out

    def loss_value(self, x: np.ndarray, target: np.ndarray, loss: Optional[str] = None) -> float:
        batch, _ = self._as_batch(x)
        target = np.atleast_2d(np.asarray(target, dtype=np.float64))
        _, logits = self._activations(self.standardize(batch))
        return _loss(logits, target, loss or self.spec.loss)

    def loss_and_gradients(self, x: np.ndarray, target: np.ndarray,
                           loss: Optional[str] = None) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
        """Backpropagate one batch; returns (loss, weight grads, bias grads)"""
        loss = loss or self.spec.loss
        _check_loss(self.spec, loss)
        batch, _ = self._as_batch(x)
        target = np.atleast_2d(np.asarray(target, dtype=np.float64))
        if target.shape != (batch.shape[0], self.spec.output_size):
            raise DimMismatch(f"Targets {target.shape} do not match outputs ({batch.shape[0]}, {self.spec.output_size})")

        acts, logits = self._activations(self.standardize(batch))
        n = batch.shape[0]
        if loss == LOSS_CE:
            delta = (softmax(logits, axis=-1) - target) / n
        else:
            delta = 2.0 * (logits - target) / target.size
        value = _loss(logits, target, loss)

        grad_w: List[np.ndarray] = [None] * len(self.weights)
        grad_b: List[np.ndarray] = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grad_w[layer] = acts[layer].T @ delta
            grad_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (1.0 - acts[layer] ** 2)
        return value, grad_w, grad_b


def _check_loss(spec: MLPSpec, loss: str):
    if loss == LOSS_CE and spec.output_activation != OUTPUT_SOFTMAX:
        raise ConfigError("Cross-entropy loss needs a softmax output layer")
    if loss == LOSS_MSE and spec.output_activation != OUTPUT_LINEAR:
        raise ConfigError("MSE loss needs a linear output layer")
    if loss not in (LOSS_MSE, LOSS_CE):
        raise ConfigError(f"Unknown loss '{loss}'")


def _loss(logits: np.ndarray, target: np.ndarray, loss: str) -> float:
    if loss == LOSS_CE:
        log_p = logits - logsumexp(logits, axis=-1, keepdims=True)
        return float(-np.sum(target * log_p) / logits.shape[0])
    return float(np.mean((logits - target) ** 2))


def forward(model: MLPModel, x: np.ndarray) -> np.ndarray:
    return model.forward(x)


def split_indices(n: int, fractions: Tuple[float, float, float],
                  rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic train/val/test partition of range(n)"""
    order = rng.permutation(n)
    n_train = max(1, int(round(fractions[0] * n)))
    n_val = min(int(round(fractions[1] * n)), n - n_train)
    return order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]


def _subset_loss(model: MLPModel, x: np.ndarray, y: np.ndarray, idx: np.ndarray, loss: str) -> float:
    if len(idx) == 0:
        return float('nan')
    return model.loss_value(x[idx], y[idx], loss)


def train(spec: MLPSpec, inputs: np.ndarray, targets: np.ndarray,
          cfg: TrainConfig = TrainConfig()) -> MLPModel:
    """
    Train a network with plain mini-batch gradient descent.

    Runs exactly cfg.epochs passes (unless early stopping is enabled) over the
    training part of a seeded 70/15/15 split and records train/val/test loss
    after every epoch.

    Args:
        spec: Network topology; the loss follows the output activation
        inputs: (N, input_size) raw inputs; standardization stats come from the training part
        targets: (N, output_size) or (N,) regression targets / one-hot classes
        cfg: Optimizer and split settings

    Returns:
        Trained MLPModel with its TrainingHistory
    """
    spec.validate()
    cfg.validate()
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.shape[0] == 0:
        raise EmptyDataset("No training samples")
    if y.ndim == 1:
        y = y[:, None]
    if x.ndim != 2 or x.shape[1] != spec.input_size:
        raise DimMismatch(f"Inputs {x.shape} do not match input size {spec.input_size}")
    if y.shape != (x.shape[0], spec.output_size):
        raise DimMismatch(f"Targets {y.shape} do not match ({x.shape[0]}, {spec.output_size})")

    loss = spec.loss
    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx, test_idx = split_indices(x.shape[0], cfg.split, rng)

    model = MLPModel.initialize(spec)
    std = x[train_idx].std(axis=0)
    model.input_mean = x[train_idx].mean(axis=0)
    model.input_std = np.where(std > 1e-12, std, 1.0)

    history = model.history

    def _record():
        history.train_loss.append(_subset_loss(model, x, y, train_idx, loss))
        history.val_loss.append(_subset_loss(model, x, y, val_idx, loss))
        history.test_loss.append(_subset_loss(model, x, y, test_idx, loss))

    _record()
    best_val, stale = np.inf, 0
    epochs = tqdm(range(cfg.epochs), desc='epochs', leave=False, disable=not cfg.show_progress)
    for epoch in epochs:
        order = rng.permutation(train_idx)
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, grad_w, grad_b = model.loss_and_gradients(x[batch], y[batch], loss)
            for layer in range(len(model.weights)):
                model.weights[layer] -= cfg.learning_rate * grad_w[layer]
                model.biases[layer] -= cfg.learning_rate * grad_b[layer]
        history.epochs_run = epoch + 1
        _record()
        logger.debug(f"Epoch {epoch + 1}/{cfg.epochs}: train {history.train_loss[-1]:.5f}, "
                     f"val {history.val_loss[-1]:.5f}")

        if cfg.early_stop and len(val_idx):
            if history.val_loss[-1] < best_val:
                best_val, stale = history.val_loss[-1], 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    logger.info(f"Early stop after epoch {epoch + 1}")
                    break

    train_l, val_l, test_l = history.final()
    logger.info(f"Trained {spec.layer_sizes} for {history.epochs_run} epochs: "
                f"train {train_l:.5f}, val {val_l:.5f}, test {test_l:.5f}")
    return model


def gradient_check(model: MLPModel, x: np.ndarray, target: np.ndarray,
                   loss: Optional[str] = None, step: float = 1e-6) -> float:
    """
    Largest relative disagreement between backprop and central differences.

    Error per parameter is |g_bp - g_fd| / max(|g_bp| + |g_fd|, 1e-8).
    """
    loss = loss or model.spec.loss
    _, grad_w, grad_b = model.loss_and_gradients(x, target, loss)
    worst = 0.0
    for params, grads in ((model.weights, grad_w), (model.biases, grad_b)):
        for param, grad in zip(params, grads):
            for idx in np.ndindex(param.shape):
                original = param[idx]
                param[idx] = original + step
                plus = model.loss_value(x, target, loss)
                param[idx] = original - step
                minus = model.loss_value(x, target, loss)
                param[idx] = original
                fd = (plus - minus) / (2.0 * step)
                err = abs(grad[idx] - fd) / max(abs(grad[idx]) + abs(fd), 1e-8)
                worst = max(worst, err)
    return worst


@dataclass(frozen=True)
class FeatureAssembly:
    """Regressor input variant and its dimension"""
    variant: str
    n_mel: int = 40

    def __post_init__(self):
        if self.variant not in FEATURE_VARIANTS:
            raise ConfigError(f"Unknown feature variant '{self.variant}', expected one of {FEATURE_VARIANTS}")

    @property
    def input_dim(self) -> int:
        return self.n_mel + (2 if self.variant == 'f2' else 1)


@dataclass
class FrameData:
    """Per-frame components the regressor inputs are assembled from"""
    log_norm_energy: Optional[np.ndarray] = None
    noisy_static: Optional[np.ndarray] = None
    enhanced_static: Optional[np.ndarray] = None
    model_uv: Optional[np.ndarray] = None


def assemble_input(variant: FeatureAssembly, data: FrameData) -> np.ndarray:
    """
    Build regressor inputs.

        f1 = [e_t, noisy statics]
        f2 = [e_t, mean model UV, enhanced statics]
        f3 = [e_t, enhanced statics]

    Works on one frame (scalar energy, 1-D statics) or T frames.
    """
    if data.log_norm_energy is None:
        raise MissingFeature("log_norm_energy is required for every variant")
    needs = {
        'f1': ('noisy_static',),
        'f2': ('model_uv', 'enhanced_static'),
        'f3': ('enhanced_static',),
    }[variant.variant]
    for name in needs:
        if getattr(data, name) is None:
            raise MissingFeature(f"Variant {variant.variant} needs '{name}'")

    energy = np.asarray(data.log_norm_energy, dtype=np.float64)
    single = energy.ndim == 0
    columns = [energy.reshape(-1, 1)]
    if variant.variant == 'f2':
        columns.append(np.asarray(data.model_uv, dtype=np.float64).reshape(-1, 1))
    statics = data.noisy_static if variant.variant == 'f1' else data.enhanced_static
    columns.append(np.atleast_2d(np.asarray(statics, dtype=np.float64)))

    if len({col.shape[0] for col in columns}) != 1:
        raise DimMismatch("Per-frame components have different frame counts")
    assembled = np.hstack(columns)
    if assembled.shape[1] != variant.input_dim:
        raise DimMismatch(f"Assembled {assembled.shape[1]} features, {variant.variant} expects {variant.input_dim}")
    return assembled[0] if single else assembled


def predict_uncertainty(model: MLPModel, inputs: np.ndarray) -> np.ndarray:
    """Regressor output clamped at 0: one value per input row"""
    out = np.maximum(model.forward(inputs), 0.0)
    if out.ndim == 2 and out.shape[1] == 1:
        return out[:, 0]
    if out.ndim == 1 and out.shape[0] == 1:
        return out[0]
    return out


def acoustic_posteriors(model: MLPModel, x: np.ndarray) -> np.ndarray:
    """p(q_t = s | x_t) from a softmax classifier, one row per frame"""
    if model.spec.output_activation != OUTPUT_SOFTMAX:
        raise ConfigError("Acoustic posteriors need a softmax classifier")
    return model.forward(x)


def state_priors(alignments: Sequence[np.ndarray], n_states: int) -> np.ndarray:
    """
    Relative frequency of each state over all aligned frames.

    States never seen get 1/(10 * total frames) before renormalization.
    """
    frames = [np.asarray(a, dtype=np.int64).ravel() for a in alignments]
    frames = [a for a in frames if a.size]
    if not frames:
        raise EmptyDataset("No aligned frames to count")
    states = np.concatenate(frames)
    if states.min() < 0 or states.max() >= n_states:
        raise DimMismatch(f"Alignment state ids outside [0, {n_states})")

    counts = np.bincount(states, minlength=n_states).astype(np.float64)
    total = counts.sum()
    priors = counts / total
    unseen = counts == 0
    if unseen.any():
        logger.warning(f"{int(unseen.sum())} state(s) never aligned; flooring their priors")
        priors[unseen] = 1.0 / (10.0 * total)
        priors /= priors.sum()
    return priors


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def save_model(model: MLPModel, path: str):
    """
    Write the versioned little-endian model file.

    Layout: magic, version, layer count + sizes, activation codes, seed,
    standardization mean/std, epochs run and final losses, then each layer's
    weights and biases as float64.
    """
    spec = model.spec
    sizes = spec.layer_sizes
    parts = [
        struct.pack('<5sH', MODEL_MAGIC, MODEL_VERSION),
        struct.pack('<I', len(sizes)),
        struct.pack(f'<{len(sizes)}I', *sizes),
        struct.pack('<BBQ', _ACTIVATION_CODES[spec.hidden_activation],
                    _ACTIVATION_CODES[spec.output_activation], spec.rng_seed),
        model.input_mean.astype('<f8').tobytes(),
        model.input_std.astype('<f8').tobytes(),
        struct.pack('<I3d', model.history.epochs_run, *model.history.final()),
    ]
    for w, b in zip(model.weights, model.biases):
        parts.append(w.astype('<f8').tobytes())
        parts.append(b.astype('<f8').tobytes())
    try:
        with open(path, 'wb') as f:
            f.write(b''.join(parts))
    except OSError as e:
        raise IoError(f"Could not write model {path}: {e}") from e


def load_model(path: str) -> MLPModel:
    try:
        with open(path, 'rb') as f:
            blob = f.read()
    except OSError as e:
        raise IoError(f"Could not read model {path}: {e}") from e

    offset = 0

    def _take(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(blob):
            raise ModelFormatError(f"Truncated model file {path}")
        values = struct.unpack_from(fmt, blob, offset)
        offset += size
        return values

    def _floats(count: int) -> np.ndarray:
        nonlocal offset
        size = 8 * count
        if offset + size > len(blob):
            raise ModelFormatError(f"Truncated model file {path}")
        arr = np.frombuffer(blob, dtype='<f8', count=count, offset=offset).astype(np.float64)
        offset += size
        return arr

    magic, version = _take('<5sH')
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"{path} is not a model file")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"Unsupported model version {version}")
    (n_sizes,) = _take('<I')
    sizes = tuple(_take(f'<{n_sizes}I'))
    hidden_code, output_code, seed = _take('<BBQ')
    try:
        spec = MLPSpec(layer_sizes=sizes, hidden_activation=_ACTIVATION_NAMES[hidden_code],
                       output_activation=_ACTIVATION_NAMES[output_code], rng_seed=seed)
    except KeyError as e:
        raise ModelFormatError(f"Unknown activation code in {path}") from e
    mean = _floats(sizes[0])
    std = _floats(sizes[0])
    epochs_run, train_l, val_l, test_l = _take('<I3d')

    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(_floats(fan_in * fan_out).reshape(fan_in, fan_out))
        biases.append(_floats(fan_out))
    if offset != len(blob):
        raise ModelFormatError(f"Trailing bytes in model file {path}")

    history = TrainingHistory(epochs_run=epochs_run, train_loss=[train_l],
                              val_loss=[val_l], test_loss=[test_l])
    return MLPModel(spec, weights, biases, mean, std, history)


def write_training_curve(model: MLPModel, path: str):
    """epoch, train_*, val_*, test_* per epoch (epoch 0 = before training)"""
    h = model.history
    tag = 'mse' if model.spec.loss == LOSS_MSE else 'ce'
    frame = pd.DataFrame({
        'epoch': np.arange(len(h.train_loss)),
        f'train_{tag}': h.train_loss,
        f'val_{tag}': h.val_loss,
        f'test_{tag}': h.test_loss,
    })
    try:
        frame.to_csv(path, index=False)
    except OSError as e:
        raise IoError(f"Could not write training curve {path}: {e}") from e
