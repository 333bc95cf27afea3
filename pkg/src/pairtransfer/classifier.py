"""Label-probability models ``f(X; theta)`` over flat parameter vectors.

The trainer only needs five things from a model: a parameter count, an
initial parameter vector, class probabilities, the mean cross-entropy and its
gradient. :class:`MLPArchitecture` supplies them for a one-hidden-layer tanh
network; any object with the same methods can be dropped into
:class:`ClassifierState`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .timeseries import TimeSeries

PROB_FLOOR = 1e-12


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class MLPArchitecture:
    """Flattened ``K*T`` input -> ``hidden`` tanh units -> ``n_labels`` softmax.

    Parameter layout in ``theta``: ``W1 (hidden, K*T)``, ``b1 (hidden,)``,
    ``W2 (n_labels, hidden)``, ``b2 (n_labels,)``, each flattened row-major.
    """

    K: int
    T: int
    hidden: int = 32
    n_labels: int = 2

    def __post_init__(self):
        if min(self.K, self.T, self.hidden) < 1 or self.n_labels < 2:
            raise ValueError(f"invalid architecture {self}")

    @property
    def n_inputs(self) -> int:
        return self.K * self.T

    @property
    def n_params(self) -> int:
        d, h, L = self.n_inputs, self.hidden, self.n_labels
        return h * d + h + L * h + L

    def unpack(self, theta):
        d, h, L = self.n_inputs, self.hidden, self.n_labels
        i = 0
        W1 = theta[i:i + h * d].reshape(h, d); i += h * d
        b1 = theta[i:i + h]; i += h
        W2 = theta[i:i + L * h].reshape(L, h); i += L * h
        b2 = theta[i:i + L]
        return W1, b1, W2, b2

    def bias_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_params, dtype=bool)
        d, h, L = self.n_inputs, self.hidden, self.n_labels
        mask[h * d:h * d + h] = True
        mask[-L:] = True
        return mask

    def initial_theta(self, seed, scheme: str = "uniform01") -> np.ndarray:
        """Biases are zero under every scheme.

        ``uniform01`` draws each weight from Uniform[0, 1]. ``glorot`` draws
        from the symmetric Glorot-uniform range per layer.
        """
        rng = np.random.default_rng(seed)
        theta = np.zeros(self.n_params)
        weights = ~self.bias_mask()
        if scheme == "uniform01":
            theta[weights] = rng.uniform(0.0, 1.0, size=weights.sum())
        elif scheme == "glorot":
            d, h, L = self.n_inputs, self.hidden, self.n_labels
            s1 = np.sqrt(6.0 / (d + h))
            s2 = np.sqrt(6.0 / (h + L))
            theta[:h * d] = rng.uniform(-s1, s1, size=h * d)
            off = h * d + h
            theta[off:off + L * h] = rng.uniform(-s2, s2, size=L * h)
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        return theta

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3 or X.shape[1:] != (self.K, self.T):
            raise ValueError(f"expected input of shape (n, {self.K}, {self.T}), got {X.shape}")
        return X.reshape(X.shape[0], -1)

    def logits(self, theta, X) -> np.ndarray:
        W1, b1, W2, b2 = self.unpack(theta)
        hid = np.tanh(self._check(X) @ W1.T + b1)
        return hid @ W2.T + b2

    def predict_proba(self, theta, X) -> np.ndarray:
        return softmax(self.logits(theta, X))

    def loss_and_gradient(self, theta, X, y, need_grad: bool = True):
        """Mean clamped cross-entropy and its exact gradient."""
        W1, b1, W2, b2 = self.unpack(theta)
        x = self._check(X)
        y = np.asarray(y, dtype=int)
        n = x.shape[0]
        hid = np.tanh(x @ W1.T + b1)
        p = softmax(hid @ W2.T + b2)
        py = p[np.arange(n), y]
        loss = float(-np.log(np.maximum(py, PROB_FLOOR)).mean())
        if not need_grad:
            return loss, None
        dz = p.copy()
        dz[np.arange(n), y] -= 1.0
        # clamped rows have a flat loss, hence zero gradient
        dz[py <= PROB_FLOOR] = 0.0
        dz /= n
        dW2 = dz.T @ hid
        db2 = dz.sum(axis=0)
        da = (dz @ W2) * (1.0 - hid ** 2)
        dW1 = da.T @ x
        db1 = da.sum(axis=0)
        return loss, np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2])

    def to_dict(self) -> dict:
        return {"type": "mlp", "K": self.K, "T": self.T, "hidden": self.hidden, "n_labels": self.n_labels}


def architecture_from_dict(d: dict):
    if d.get("type") != "mlp":
        raise ValueError(f"unknown architecture type {d.get('type')!r}")
    return MLPArchitecture(int(d["K"]), int(d["T"]), int(d["hidden"]), int(d["n_labels"]))


@dataclass(frozen=True, eq=False)
class ClassifierState:
    architecture: MLPArchitecture
    theta: np.ndarray
    rng_seed: int = 0
    init_scheme: str = "uniform01"

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.shape != (self.architecture.n_params,):
            raise ValueError(
                f"theta has {theta.size} entries, architecture needs {self.architecture.n_params}"
            )
        if not np.all(np.isfinite(theta)):
            raise NumericError("non-finite model parameters")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    def replace(self, theta) -> "ClassifierState":
        return ClassifierState(self.architecture, theta, self.rng_seed, self.init_scheme)


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray

    @property
    def label(self) -> int:
        return int(np.argmax(self.probabilities))


def init(architecture, seed: int = 0, scheme: str = "uniform01") -> ClassifierState:
    return ClassifierState(architecture, architecture.initial_theta(seed, scheme), seed, scheme)


def _as_arrays(batch, y=None):
    if y is not None:
        return batch, y
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    X = np.stack([x.values if isinstance(x, TimeSeries) else np.asarray(x, float) for x, _ in batch])
    return X, np.array([int(c) for _, c in batch])


def forward(state: ClassifierState, X) -> Prediction:
    """Class probabilities for one ``K x T`` series."""
    values = X.values if isinstance(X, TimeSeries) else np.asarray(X, dtype=float)
    if values.ndim != 2:
        raise ValueError("forward expects a single K x T series; use predict_proba for batches")
    return Prediction(state.architecture.predict_proba(state.theta, values)[0])


def predict_proba(state: ClassifierState, X) -> np.ndarray:
    return state.architecture.predict_proba(state.theta, X)


def predict(state: ClassifierState, X) -> np.ndarray:
    """Argmax labels; ties resolve to the lowest label id."""
    return np.argmax(predict_proba(state, X), axis=1)


def loss(state: ClassifierState, batch, y=None) -> float:
    """Mean cross-entropy over ``batch``.

    ``batch`` is either a list of ``(series, label)`` pairs or, with ``y``
    given, an ``(n, K, T)`` array.
    """
    X, y = _as_arrays(batch, y)
    if len(y) == 0:
        raise ValueError("empty batch")
    return state.architecture.loss_and_gradient(state.theta, X, y, need_grad=False)[0]


def gradient(state: ClassifierState, batch, y=None) -> np.ndarray:
    X, y = _as_arrays(batch, y)
    if len(y) == 0:
        raise ValueError("empty batch")
    return state.architecture.loss_and_gradient(state.theta, X, y)[1]


def loss_and_gradient(state: ClassifierState, X, y):
    if len(y) == 0:
        raise ValueError("empty batch")
    return state.architecture.loss_and_gradient(state.theta, X, y)


def step(state: ClassifierState, grad, lr: float) -> ClassifierState:
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.theta.shape:
        raise ValueError(f"gradient has shape {grad.shape}, theta has {state.theta.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient")
    return state.replace(state.theta - lr * grad)
