#!/usr/bin/env python
# coding: utf-8
"""
From-scratch dense, LSTM and GRU layers for the wildfire classifiers.

All tensors are float64 numpy arrays, batch first: (batch, features) or
(batch, steps, features). Each layer caches what its backward pass needs, so a
backward call always refers to the most recent forward call.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, root_validator, validator

from config import RNN_HIDDEN, ModelKind
from errors import ShapeError, TrainingError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "wildfire-nn/1"
DEFAULT_EPOCHS = {ModelKind.LR: 300, ModelKind.LSTM: 20, ModelKind.GRU: 20}

LSTM_GATES = ("i", "f", "o", "g")
GRU_GATES = ("z", "r", "h")
# Entries below this magnitude are compared by absolute error in gradient_check.
GRADIENT_CHECK_FLOOR = 1e-5


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def activate_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation at pre-activation z (with a = activate(z))."""
    if name == "linear":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    raise ValueError(f"unknown activation {name!r}")


# ---------------------------------------------------------------------------
# Initialisation
# ---------------------------------------------------------------------------

def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return np.ascontiguousarray(q * np.sign(np.diag(r)))


# ---------------------------------------------------------------------------
# Single-step functions
# ---------------------------------------------------------------------------

def _check_width(x: np.ndarray, expected: int, what: str) -> None:
    if x.shape[-1] != expected:
        raise ShapeError(f"{what} has width {x.shape[-1]}, expected {expected}")


def dense_forward(x: np.ndarray, params: Dict[str, np.ndarray], activation: str = "linear") -> np.ndarray:
    """activation(x W^T + b) for x of shape (..., in)."""
    W, b = params["W"], params["b"]
    _check_width(x, W.shape[1], "dense input")
    return activate(activation, x @ W.T + b)


def _gate(params, name, x, h):
    return x @ params[f"W_{name}"].T + h @ params[f"U_{name}"].T + params[f"b_{name}"]


def _lstm_step(x_t, h_prev, c_prev, params, activation):
    units = params["U_i"].shape[0]
    _check_width(x_t, params["W_i"].shape[1], "lstm input")
    _check_width(h_prev, units, "lstm hidden state")
    _check_width(c_prev, units, "lstm cell state")

    i = sigmoid(_gate(params, "i", x_t, h_prev))
    f = sigmoid(_gate(params, "f", x_t, h_prev))
    o = sigmoid(_gate(params, "o", x_t, h_prev))
    zg = _gate(params, "g", x_t, h_prev)
    g = activate(activation, zg)
    c = f * c_prev + i * g
    ac = activate(activation, c)
    h = o * ac
    return h, c, {"x": x_t, "h_prev": h_prev, "c_prev": c_prev, "i": i, "f": f, "o": o, "zg": zg, "g": g, "c": c, "ac": ac}


def lstm_step(x_t, h_prev, c_prev, params: Dict[str, np.ndarray], activation: str = "tanh"):
    """
    One LSTM step without peepholes.

    Args:
        x_t: Input, (in,) or (batch, in)
        h_prev: Previous hidden state
        c_prev: Previous cell state
        params: W_*, U_*, b_* for gates i, f, o and candidate g
        activation: Candidate and cell-output activation (gates are sigmoids)

    Returns:
        (h_t, c_t)
    """
    h, c, _ = _lstm_step(x_t, h_prev, c_prev, params, activation)
    return h, c


def _gru_step(x_t, h_prev, params, activation):
    units = params["U_z"].shape[0]
    _check_width(x_t, params["W_z"].shape[1], "gru input")
    _check_width(h_prev, units, "gru hidden state")

    z = sigmoid(_gate(params, "z", x_t, h_prev))
    r = sigmoid(_gate(params, "r", x_t, h_prev))
    rh = r * h_prev
    zh = _gate(params, "h", x_t, rh)
    h_tilde = activate(activation, zh)
    h = (1.0 - z) * h_prev + z * h_tilde
    return h, {"x": x_t, "h_prev": h_prev, "z": z, "r": r, "rh": rh, "zh": zh, "h_tilde": h_tilde}


def gru_step(x_t, h_prev, params: Dict[str, np.ndarray], activation: str = "tanh") -> np.ndarray:
    """One GRU step; the reset gate scales h_prev before the candidate's recurrent weights."""
    h, _ = _gru_step(x_t, h_prev, params, activation)
    return h


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

class DenseLayer:
    """Fully connected layer; applied per step when given (batch, steps, in)."""

    def __init__(self, in_dim: int, out_dim: int, activation: str, rng: np.random.Generator):
        self.activation = activation
        self.params = {"W": glorot_uniform(rng, out_dim, in_dim), "b": np.zeros(out_dim)}
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        W, b = self.params["W"], self.params["b"]
        _check_width(x, W.shape[1], "dense input")
        z = x @ W.T + b
        a = activate(self.activation, z)
        self._cache = (x, z, a)
        return a

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x, z, a = self._cache
        dz = grad * activate_grad(self.activation, z, a)
        out_dim, in_dim = self.params["W"].shape
        self.grads["W"] = dz.reshape(-1, out_dim).T @ x.reshape(-1, in_dim)
        self.grads["b"] = dz.reshape(-1, out_dim).sum(axis=0)
        return dz @ self.params["W"]


class _RecurrentLayer:
    gates: Tuple[str, ...] = ()

    def __init__(self, in_dim: int, units: int, activation: str, return_sequences: bool, rng: np.random.Generator):
        self.units = units
        self.activation = activation
        self.return_sequences = return_sequences
        self.params: Dict[str, np.ndarray] = {}
        for gate in self.gates:
            self.params[f"W_{gate}"] = glorot_uniform(rng, units, in_dim)
        for gate in self.gates:
            self.params[f"U_{gate}"] = orthogonal(rng, units)
        for gate in self.gates:
            self.params[f"b_{gate}"] = np.zeros(units)
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._steps: List[dict] = []

    def _zero_grads(self) -> None:
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def _accumulate(self, gate: str, dz: np.ndarray, x: np.ndarray, h: np.ndarray) -> None:
        self.grads[f"W_{gate}"] += dz.T @ x
        self.grads[f"U_{gate}"] += dz.T @ h
        self.grads[f"b_{gate}"] += dz.sum(axis=0)

    def _output_grad(self, grad: np.ndarray, steps: int, t: int) -> np.ndarray:
        if self.return_sequences:
            return grad[:, t]
        return grad if t == steps - 1 else 0.0


class LstmLayer(_RecurrentLayer):
    gates = LSTM_GATES

    def __init__(self, in_dim: int, units: int, activation: str, return_sequences: bool, rng: np.random.Generator):
        super().__init__(in_dim, units, activation, return_sequences, rng)
        self.params["b_f"][:] = 1.0

    def forward(self, x: np.ndarray, training: bool = False, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        batch, steps, _ = x.shape
        h = np.zeros((batch, self.units))
        c = np.zeros((batch, self.units))
        self._steps = []
        outputs = []
        for t in range(steps):
            h, c, cache = _lstm_step(x[:, t], h, c, self.params, self.activation)
            self._steps.append(cache)
            outputs.append(h)
        return np.stack(outputs, axis=1) if self.return_sequences else h

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self._zero_grads()
        steps = len(self._steps)
        dx = np.zeros((self._steps[0]["x"].shape[0], steps, self.params["W_i"].shape[1]))
        dh_next = 0.0
        dc_next = 0.0
        for t in reversed(range(steps)):
            s = self._steps[t]
            dh = self._output_grad(grad, steps, t) + dh_next
            dzo = dh * s["ac"] * s["o"] * (1.0 - s["o"])
            dc = dc_next + dh * s["o"] * activate_grad(self.activation, s["c"], s["ac"])
            dzf = dc * s["c_prev"] * s["f"] * (1.0 - s["f"])
            dzi = dc * s["g"] * s["i"] * (1.0 - s["i"])
            dzg = dc * s["i"] * activate_grad(self.activation, s["zg"], s["g"])
            dc_next = dc * s["f"]

            dh_next = 0.0
            for gate, dz in (("i", dzi), ("f", dzf), ("o", dzo), ("g", dzg)):
                self._accumulate(gate, dz, s["x"], s["h_prev"])
                dx[:, t] += dz @ self.params[f"W_{gate}"]
                dh_next = dh_next + dz @ self.params[f"U_{gate}"]
        return dx


class GruLayer(_RecurrentLayer):
    gates = GRU_GATES

    def forward(self, x: np.ndarray, training: bool = False, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        batch, steps, _ = x.shape
        h = np.zeros((batch, self.units))
        self._steps = []
        outputs = []
        for t in range(steps):
            h, cache = _gru_step(x[:, t], h, self.params, self.activation)
            self._steps.append(cache)
            outputs.append(h)
        return np.stack(outputs, axis=1) if self.return_sequences else h

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self._zero_grads()
        steps = len(self._steps)
        dx = np.zeros((self._steps[0]["x"].shape[0], steps, self.params["W_z"].shape[1]))
        dh_next = 0.0
        for t in reversed(range(steps)):
            s = self._steps[t]
            dh = self._output_grad(grad, steps, t) + dh_next
            dzz = dh * (s["h_tilde"] - s["h_prev"]) * s["z"] * (1.0 - s["z"])
            dzh = dh * s["z"] * activate_grad(self.activation, s["zh"], s["h_tilde"])
            drh = dzh @ self.params["U_h"]
            dzr = drh * s["h_prev"] * s["r"] * (1.0 - s["r"])

            self._accumulate("z", dzz, s["x"], s["h_prev"])
            self._accumulate("r", dzr, s["x"], s["h_prev"])
            self._accumulate("h", dzh, s["x"], s["rh"])

            dx[:, t] = dzz @ self.params["W_z"] + dzr @ self.params["W_r"] + dzh @ self.params["W_h"]
            dh_next = (
                dh * (1.0 - s["z"])
                + drh * s["r"]
                + dzz @ self.params["U_z"]
                + dzr @ self.params["U_r"]
            )
        return dx


class DropoutLayer:
    """Inverted dropout: kept activations are scaled by 1/(1-rate) during training only."""

    def __init__(self, rate: float):
        self.rate = rate
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.frozen_mask: Optional[np.ndarray] = None
        self._mask = None

    def forward(self, x: np.ndarray, training: bool = False, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if self.frozen_mask is not None:
            self._mask = self.frozen_mask
        else:
            if rng is None:
                raise TrainingError("train-mode dropout needs a random generator")
            self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad if self._mask is None else grad * self._mask


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

class ModelSpec(BaseModel):
    """
    Classifier configuration.

    steps is l_w-1; per_step_dim is 80 (binary) or 81 (multiclass). hidden is
    the width of the two recurrent layers and stays (128, 256) outside of
    tiny gradient-check models.
    """

    kind: ModelKind
    steps: int
    per_step_dim: int
    n_classes: int
    hidden: Tuple[int, int] = RNN_HIDDEN
    dropout_rate: float = 0.2
    epochs: Optional[int] = None
    batch_size: int = 32
    learning_rate: float = 0.001
    rho: float = 0.9
    epsilon: float = 1e-8
    output_activation: str = "relu"
    seed: int = 0

    class Config:
        allow_mutation = False

    @validator("steps", "per_step_dim", "batch_size")
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @validator("n_classes")
    def _at_least_two_classes(cls, value: int) -> int:
        if value < 2:
            raise ValueError("n_classes must be >= 2")
        return value

    @root_validator(skip_on_failure=True)
    def _default_epochs(cls, values):
        if values.get("epochs") is None:
            values["epochs"] = DEFAULT_EPOCHS[values["kind"]]
        return values

    @property
    def input_dim(self) -> int:
        return self.steps * self.per_step_dim


class SequenceModel:
    """
    LR: one sigmoid dense layer on the flat input.
    LSTM/GRU: per-step linear dense -> recurrent(hidden[0], full sequence)
    -> recurrent(hidden[1], last step) -> dropout -> sigmoid dense.
    """

    def __init__(self, spec: ModelSpec, debug: bool = False):
        self.spec = spec
        self.debug = debug
        rng = np.random.default_rng(spec.seed)
        if spec.kind == ModelKind.LR:
            self.layers = [DenseLayer(spec.input_dim, spec.n_classes, "sigmoid", rng)]
        else:
            recurrent = LstmLayer if spec.kind == ModelKind.LSTM else GruLayer
            first, second = spec.hidden
            self.layers = [
                DenseLayer(spec.per_step_dim, spec.per_step_dim, "linear", rng),
                recurrent(spec.per_step_dim, first, spec.output_activation, True, rng),
                recurrent(first, second, spec.output_activation, False, rng),
                DropoutLayer(spec.dropout_rate),
                DenseLayer(second, spec.n_classes, "sigmoid", rng),
            ]

    def prepare(self, x: np.ndarray) -> np.ndarray:
        """Bring (batch, D) or (batch, steps, per_step) input into this model's layout."""
        x = np.asarray(x, dtype=np.float64)
        spec = self.spec
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim == 3:
            if x.shape[1:] != (spec.steps, spec.per_step_dim):
                raise ShapeError(f"input shape {x.shape[1:]} != ({spec.steps}, {spec.per_step_dim})")
            x = x.reshape(len(x), -1)
        if x.ndim != 2 or x.shape[1] != spec.input_dim:
            raise ShapeError(f"input width {x.shape[-1]} != {spec.input_dim}")
        if spec.kind == ModelKind.LR:
            return x
        return x.reshape(len(x), spec.steps, spec.per_step_dim)

    def forward(self, x: np.ndarray, training: bool = False, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Scores (batch, n_classes) for input already passed through prepare()."""
        out = x
        for layer in self.layers:
            out = layer.forward(out, training, rng)
            if self.debug and not np.all(np.isfinite(out)):
                raise TrainingError(f"non-finite activations after {type(layer).__name__}")
        return out

    def backward(self, grad_scores: np.ndarray) -> Dict[str, np.ndarray]:
        """Backpropagate d(loss)/d(scores) through every layer; returns the parameter gradients."""
        grad = grad_scores
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return self.gradients()

    def parameters(self) -> Dict[str, np.ndarray]:
        return {f"{i}.{name}": value for i, layer in enumerate(self.layers) for name, value in layer.params.items()}

    def gradients(self) -> Dict[str, np.ndarray]:
        return {f"{i}.{name}": value for i, layer in enumerate(self.layers) for name, value in layer.grads.items()}

    def set_parameters(self, values: Dict[str, np.ndarray]) -> None:
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                key = f"{i}.{name}"
                if values[key].shape != layer.params[name].shape:
                    raise ShapeError(f"{key}: shape {values[key].shape} != {layer.params[name].shape}")
                layer.params[name] = np.array(values[key], dtype=np.float64)


def model_forward(model: SequenceModel, x: np.ndarray, mode: str = "eval", rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Class scores for one sample (1-D result) or a batch.

    Args:
        model: The classifier
        x: Flat or per-step input
        mode: "train" applies dropout, "eval" does not
        rng: Dropout generator, required in train mode
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    single = np.ndim(x) == 1 or (np.ndim(x) == 2 and model.spec.kind != ModelKind.LR and np.shape(x) == (model.spec.steps, model.spec.per_step_dim))
    batch = np.asarray(x)[None] if single else x
    scores = model.forward(model.prepare(batch), training=(mode == "train"), rng=rng)
    return scores[0] if single else scores


def mse_loss(scores: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean squared error over classes (and over the batch for 2-D input).

    Returns:
        (loss, gradient with respect to scores)
    """
    scores = np.asarray(scores, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if scores.shape != target.shape:
        raise ShapeError(f"scores {scores.shape} and target {target.shape} differ")
    diff = scores - target
    n_classes = scores.shape[-1]
    batch = scores.shape[0] if scores.ndim == 2 else 1
    loss = float(np.mean(diff ** 2))
    return loss, 2.0 * diff / (n_classes * batch)


def compute_gradients(
    model: SequenceModel,
    x: np.ndarray,
    target: np.ndarray,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Forward, loss and full backpropagation through time for a prepared batch."""
    scores = model.forward(x, training, rng)
    loss, grad = mse_loss(scores, target)
    return loss, model.backward(grad)


def backward(model: SequenceModel, x: np.ndarray, target: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients of the eval-mode MSE for sample(s) x against one-hot target(s)."""
    x = model.prepare(x)
    target = np.atleast_2d(target)
    _, grads = compute_gradients(model, x, target)
    return {k: v.copy() for k, v in grads.items()}


def gradient_check(
    spec: ModelSpec,
    h: float = 1e-5,
    n_samples: int = 1,
    seed: Optional[int] = None,
    floor: float = GRADIENT_CHECK_FLOOR,
    details: Optional[Dict[str, Dict[str, float]]] = None,
) -> float:
    """
    Compare analytic gradients with central differences for every parameter entry.

    Inputs have magnitudes in [0.5, 1.5] with random signs; targets are random
    one-hot vectors. Dropout (if any) uses one frozen train-mode mask.

    Args:
        spec: Model to build and check
        h: Central-difference step
        n_samples: Batch size of the random inputs
        seed: Input and initialisation seed (defaults to spec.seed)
        floor: Lower bound on the denominator; entries whose analytic and
            numeric gradients are both below it are judged by absolute error
        details: Optional dict filled with per-tensor {"element", "norm"} errors

    Returns:
        max over all entries of |g_a - g_n| / max(|g_a|, |g_n|, floor)
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    model = SequenceModel(spec)
    magnitude = rng.uniform(0.5, 1.5, size=(n_samples, spec.input_dim))
    x = model.prepare(magnitude * rng.choice([-1.0, 1.0], size=magnitude.shape))
    target = np.eye(spec.n_classes)[rng.integers(0, spec.n_classes, size=n_samples)]

    dropout_layers = [layer for layer in model.layers if isinstance(layer, DropoutLayer)]
    training = bool(dropout_layers) and spec.dropout_rate > 0
    if training:
        model.forward(x, True, rng)
        for layer in dropout_layers:
            layer.frozen_mask = layer._mask

    _, grads = compute_gradients(model, x, target, training, rng)
    analytic = {k: v.copy() for k, v in grads.items()}

    worst = 0.0
    for name, param in model.parameters().items():
        flat = param.reshape(-1)
        numeric = np.zeros(flat.size)
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + h
            loss_plus, _ = mse_loss(model.forward(x, training, rng), target)
            flat[index] = original - h
            loss_minus, _ = mse_loss(model.forward(x, training, rng), target)
            flat[index] = original
            numeric[index] = (loss_plus - loss_minus) / (2 * h)
        exact = analytic[name].reshape(-1)

        scale = np.maximum(np.maximum(np.abs(exact), np.abs(numeric)), floor)
        element_error = float(np.max(np.abs(exact - numeric) / scale)) if flat.size else 0.0
        norm_scale = max(np.linalg.norm(exact), np.linalg.norm(numeric), floor)
        norm_error = float(np.linalg.norm(exact - numeric) / norm_scale)
        logger.debug("gradient check %s: element error %.3e, norm error %.3e", name, element_error, norm_error)
        if details is not None:
            details[name] = {"element": element_error, "norm": norm_error}
        worst = max(worst, element_error)
    return worst


# ---------------------------------------------------------------------------
# Optimisation
# ---------------------------------------------------------------------------

@dataclass
class RmsPropState:
    learning_rate: float = 0.001
    rho: float = 0.9
    epsilon: float = 1e-8
    mean_square: Dict[str, np.ndarray] = field(default_factory=dict)


def rmsprop_update(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: RmsPropState,
) -> Tuple[Dict[str, np.ndarray], RmsPropState]:
    """
    ms <- rho*ms + (1-rho)*g^2;  p <- p - lr*g/sqrt(ms + eps).

    Parameter arrays are updated in place and returned with the state.
    """
    for name, param in params.items():
        grad = grads[name]
        if grad.shape != param.shape:
            raise ShapeError(f"{name}: gradient {grad.shape} != parameter {param.shape}")
        ms = state.mean_square.get(name)
        if ms is None:
            ms = np.zeros_like(param)
        ms = state.rho * ms + (1.0 - state.rho) * grad * grad
        state.mean_square[name] = ms
        param -= state.learning_rate * grad / np.sqrt(ms + state.epsilon)
    return params, state


@dataclass
class TrainResult:
    model: SequenceModel
    loss_history: List[float]


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[labels]


def train(spec: ModelSpec, X: np.ndarray, y: np.ndarray, seed: int = 0, debug: bool = False) -> TrainResult:
    """
    Mini-batch RMSProp on shuffled data for spec.epochs epochs.

    Args:
        spec: Model configuration (spec.seed drives initialisation)
        X: Inputs, flat or per-step
        y: Class indices in [0, n_classes)
        seed: Drives the shuffle order and the dropout masks

    Returns:
        TrainResult with the trained model and the mean loss of every epoch
    """
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise TrainingError("cannot train on an empty dataset")
    if y.min() < 0 or y.max() >= spec.n_classes:
        raise TrainingError(f"labels must lie in [0, {spec.n_classes})")

    model = SequenceModel(spec, debug=debug)
    inputs = model.prepare(X)
    if len(inputs) != len(y):
        raise TrainingError(f"{len(inputs)} inputs but {len(y)} labels")
    targets = one_hot(y, spec.n_classes)

    rng = np.random.default_rng(seed)
    state = RmsPropState(spec.learning_rate, spec.rho, spec.epsilon)
    params = model.parameters()
    history = []
    for epoch in range(spec.epochs):
        order = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(order), spec.batch_size):
            batch = order[start:start + spec.batch_size]
            loss, grads = compute_gradients(model, inputs[batch], targets[batch], True, rng)
            rmsprop_update(params, grads, state)
            total += loss * len(batch)
        history.append(total / len(y))
        logger.debug("%s epoch %d/%d loss %.6f", spec.kind.value, epoch + 1, spec.epochs, history[-1])
    return TrainResult(model, history)


def predict(model: SequenceModel, X: np.ndarray) -> np.ndarray:
    """Argmax class index per sample; ties go to the lowest index."""
    scores = model.forward(model.prepare(X), training=False)
    return np.argmax(scores, axis=1)


class NeuralClassifier:
    """
    fit/predict wrapper so the experiment harness can treat every model kind alike.
    """

    def __init__(self, spec: ModelSpec, train_seed: int = 0):
        self.spec = spec
        self.train_seed = train_seed
        self.model: Optional[SequenceModel] = None
        self.loss_history: List[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "NeuralClassifier":
        result = train(self.spec, X, y, self.train_seed)
        self.model = result.model
        self.loss_history = result.loss_history
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.model is None:
            raise TrainingError("classifier has not been fitted")
        return predict(self.model, X)

    def score(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_model(model: SequenceModel, path: str) -> None:
    """Write a versioned .npz checkpoint (spec JSON plus every parameter tensor)."""
    arrays = {name: value for name, value in model.parameters().items()}
    np.savez_compressed(
        path,
        __format__=np.array(CHECKPOINT_FORMAT),
        __spec__=np.array(model.spec.json()),
        **arrays,
    )


def load_model(path: str) -> SequenceModel:
    with np.load(path, allow_pickle=False) as data:
        if "__format__" not in data.files or str(data["__format__"]) != CHECKPOINT_FORMAT:
            raise TrainingError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
        spec = ModelSpec(**json.loads(str(data["__spec__"])))
        values = {name: data[name] for name in data.files if not name.startswith("__")}
    model = SequenceModel(spec)
    model.set_parameters(values)
    return model


def write_loss_history(history: List[float], path: str) -> None:
    pd.DataFrame({"epoch": range(1, len(history) + 1), "loss": history}).to_csv(path, index=False)
