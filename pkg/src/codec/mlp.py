"""
18-10-10-2 perceptron predicting the two low-band harmonic gains (dB).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from dsp.mfcc import FEATURE_COUNT, FeatureVector
from exceptions import PreconditionError

logger = logging.getLogger(__name__)

LAYER_SIZES = (FEATURE_COUNT, 10, 10, 2)
FD_STEP = 1e-5
GRADIENT_ABS_TOL = 1e-8
_STD_FLOOR = 1e-8


def _finite_array(values, shape: Tuple[int, ...], name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.shape != shape:
        raise PreconditionError(detail=f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(detail=f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MlpNetwork:
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    feature_means: np.ndarray
    feature_stds: np.ndarray
    mfcc_tag: str = "mfcc-c0"

    def __post_init__(self):
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise PreconditionError(detail="Network needs exactly two hidden layers and one output layer")
        weights = tuple(
            _finite_array(w, (LAYER_SIZES[i + 1], LAYER_SIZES[i]), f"W{i + 1}")
            for i, w in enumerate(self.weights)
        )
        biases = tuple(
            _finite_array(b, (LAYER_SIZES[i + 1],), f"b{i + 1}") for i, b in enumerate(self.biases)
        )
        means = _finite_array(self.feature_means, (FEATURE_COUNT,), "feature_means")
        stds = _finite_array(self.feature_stds, (FEATURE_COUNT,), "feature_stds")
        if np.any(stds <= 0.0):
            raise PreconditionError(detail="feature_stds must be positive")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "feature_means", means)
        object.__setattr__(self, "feature_stds", stds)

    @property
    def layer_sizes(self) -> Tuple[int, ...]:
        return LAYER_SIZES

    def parameters(self) -> List[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def with_parameters(self, params: Sequence[np.ndarray]) -> "MlpNetwork":
        return MlpNetwork(
            weights=tuple(params[0::2]),
            biases=tuple(params[1::2]),
            feature_means=self.feature_means,
            feature_stds=self.feature_stds,
            mfcc_tag=self.mfcc_tag,
        )


@dataclass(frozen=True, eq=False)
class TrainingSample:
    features: FeatureVector
    targets: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "targets", _finite_array(self.targets, (2,), "targets"))


def glorot_network(rng: np.random.Generator, means=None, stds=None, mfcc_tag: str = "mfcc-c0") -> MlpNetwork:
    weights, biases = [], []
    for fan_in, fan_out in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpNetwork(
        weights=tuple(weights),
        biases=tuple(biases),
        feature_means=np.zeros(FEATURE_COUNT) if means is None else means,
        feature_stds=np.ones(FEATURE_COUNT) if stds is None else stds,
        mfcc_tag=mfcc_tag,
    )


# -------------------------------------------------
# Propagation
# -------------------------------------------------

def _as_matrix(features: Union[FeatureVector, np.ndarray]) -> np.ndarray:
    x = features.as_array() if isinstance(features, FeatureVector) else np.asarray(features, dtype=np.float64)
    x = np.atleast_2d(x)
    if x.shape[1] != FEATURE_COUNT:
        raise PreconditionError(detail=f"Expected {FEATURE_COUNT} features, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise PreconditionError(detail="Features must be finite")
    return x


def _propagate(params: Sequence[np.ndarray], xn: np.ndarray):
    w1, b1, w2, b2, w3, b3 = params
    h1 = np.tanh(xn @ w1.T + b1)
    h2 = np.tanh(h1 @ w2.T + b2)
    return h1, h2, h2 @ w3.T + b3


def _backprop(params: Sequence[np.ndarray], xn: np.ndarray, targets: np.ndarray):
    """Gradients of 0.5 * sum ||y - t||^2 / batch."""
    w1, _, w2, _, w3, _ = params
    h1, h2, y = _propagate(params, xn)
    dy = (y - targets) / xn.shape[0]
    dz2 = (dy @ w3) * (1.0 - h2 * h2)
    dz1 = (dz2 @ w2) * (1.0 - h1 * h1)
    return [dz1.T @ xn, dz1.sum(axis=0), dz2.T @ h1, dz2.sum(axis=0), dy.T @ h2, dy.sum(axis=0)]


def _normalize(net: MlpNetwork, x: np.ndarray) -> np.ndarray:
    return (x - net.feature_means) / net.feature_stds


def forward(net: MlpNetwork, f: Union[FeatureVector, np.ndarray]) -> np.ndarray:
    """Two dB gains for one feature vector, or an (n, 2) array for a batch."""
    x = _as_matrix(f)
    _, _, y = _propagate(net.parameters(), _normalize(net, x))
    return y[0] if (isinstance(f, FeatureVector) or np.asarray(f).ndim == 1) else y


def _stack(samples: Sequence[TrainingSample]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.stack([s.features.as_array() for s in samples])
    t = np.stack([s.targets for s in samples])
    return x, t


def mean_squared_error(net: MlpNetwork, samples: Sequence[TrainingSample]) -> float:
    x, t = _stack(samples)
    return float(np.mean((forward(net, x) - t) ** 2))


# -------------------------------------------------
# Training
# -------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrainingResult:
    network: MlpNetwork
    mse: float
    history: Tuple[float, ...]  # training MSE after every epoch


def train(
    samples: Sequence[TrainingSample],
    *,
    learning_rate: float = 1e-3,
    epochs: int = 200,
    seed: int = 0,
    batch_size: int = 32,
    momentum: float = 0.9,
    mfcc_tag: str = "mfcc-c0",
) -> TrainingResult:
    """Mini-batch gradient descent with momentum on dB-domain MSE."""
    if len(samples) == 0:
        raise PreconditionError(detail="Training needs at least one sample")
    if epochs < 1 or batch_size < 1 or learning_rate <= 0.0 or not 0.0 <= momentum < 1.0:
        raise PreconditionError(detail="Invalid training hyper-parameters")

    x, t = _stack(samples)
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds < _STD_FLOOR, 1.0, stds)
    xn = (x - means) / stds

    rng = np.random.default_rng(seed)
    net = glorot_network(rng, means, stds, mfcc_tag)
    params = [p.copy() for p in net.parameters()]
    velocity = [np.zeros_like(p) for p in params]
    n = xn.shape[0]
    history: List[float] = []
    report_every = max(1, epochs // 10)

    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            grads = _backprop(params, xn[batch], t[batch])
            for p, v, g in zip(params, velocity, grads):
                v *= momentum
                v -= learning_rate * g
                p += v
        _, _, y = _propagate(params, xn)
        history.append(float(np.mean((y - t) ** 2)))
        if not np.isfinite(history[-1]):
            raise PreconditionError(detail="Training diverged; lower the learning rate",
                                    extra={"epoch": epoch})
        if (epoch + 1) % report_every == 0:
            logger.info("mlp.epoch", extra={"epoch": epoch + 1, "mse": history[-1]})

    trained = net.with_parameters(params)
    return TrainingResult(trained, mean_squared_error(trained, samples), tuple(history))


# -------------------------------------------------
# Verification
# -------------------------------------------------

def gradient_check(net: MlpNetwork, sample: TrainingSample, step: float = FD_STEP) -> float:
    """Max relative error between backprop and central differences over every parameter."""
    xn = _normalize(net, _as_matrix(sample.features))
    t = sample.targets[None, :]
    params = [p.copy() for p in net.parameters()]
    analytic = _backprop(params, xn, t)

    def loss() -> float:
        _, _, y = _propagate(params, xn)
        return 0.5 * float(np.sum((y - t) ** 2))

    worst = 0.0
    for p, g in zip(params, analytic):
        flat, grad = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            up = loss()
            flat[i] = saved - step
            down = loss()
            flat[i] = saved
            numeric = (up - down) / (2.0 * step)
            diff = abs(grad[i] - numeric)
            if diff <= GRADIENT_ABS_TOL:
                continue
            worst = max(worst, diff / max(abs(grad[i]), abs(numeric)))
    return worst
