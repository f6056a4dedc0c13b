"""Feed-forward network with ``a * tanh`` hidden units.

Forward passes return a trace that :func:`backward` consumes; gradients are
taken with respect to an output-space gradient supplied by the caller, which
is how the kNN objective (whose gradient lives on generated points) reaches
the weights.
"""

from __future__ import annotations

import itertools
import json
import os
import tempfile
import zipfile
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

CHECKPOINT_FORMAT = "sgn-checkpoint"
CHECKPOINT_VERSION = 1
OUTPUT_ACTIVATIONS = ("linear", "tanh", "sigmoid", "clip")

_tokens = itertools.count(1)


class CheckpointError(ValueError):
    pass


class StaleTraceError(ValueError):
    pass


@dataclass
class NetworkParams:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]  # weights[l] has shape (layer_dims[l+1], layer_dims[l])
    biases: list[np.ndarray]
    activation_gain: float = 5.0
    output_activation: str = "linear"
    token: int = field(default_factory=lambda: next(_tokens), compare=False, repr=False)

    def __post_init__(self):
        self.layer_dims = tuple(int(n) for n in self.layer_dims)
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise ValueError(f"invalid layer dims {self.layer_dims}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output activation must be one of {OUTPUT_ACTIVATIONS}")
        n_layers = len(self.layer_dims) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ValueError("need one weight matrix and bias vector per layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_dims[l + 1], self.layer_dims[l])
            if w.shape != expect or b.shape != (expect[0],):
                raise ValueError(f"layer {l}: weight {w.shape} / bias {b.shape}, expected {expect}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.layer_dims, [w.copy() for w in self.weights],
                             [b.copy() for b in self.biases], self.activation_gain,
                             self.output_activation)

    def same_values(self, other: "NetworkParams") -> bool:
        """Bitwise equality of dims, gain, flags and every parameter."""
        return (self.layer_dims == other.layer_dims
                and self.activation_gain == other.activation_gain
                and self.output_activation == other.output_activation
                and all(a.tobytes() == b.tobytes() for a, b in zip(self.arrays(), other.arrays())))


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def scaled(self, c: float) -> "Gradients":
        return Gradients([c * w for w in self.weights], [c * b for b in self.biases])

    def norm(self) -> float:
        return float(np.sqrt(sum(np.vdot(a, a) for a in self.arrays())))


@dataclass
class ForwardTrace:
    params_token: int
    activations: list[np.ndarray]  # activations[0] is the input batch
    hidden_pre: list[np.ndarray] = field(default_factory=list)

    @property
    def batch_size(self) -> int:
        return self.activations[0].shape[0]

    def rows(self, idx) -> "ForwardTrace":
        """Restrict the trace to a subset of batch rows."""
        return ForwardTrace(self.params_token, [a[idx] for a in self.activations],
                            [p[idx] for p in self.hidden_pre])


def init(layer_dims, activation_gain: float, rng: np.random.Generator,
         output_activation: str = "linear", output_scale: float = 1.0) -> NetworkParams:
    """Zero-mean Gaussian weights with standard deviation ``1/sqrt(fan_in)``; zero biases.

    ``output_scale`` further multiplies the last layer's weights, which sets
    the initial spread of the generated outputs.
    """
    dims = tuple(int(n) for n in layer_dims)
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"invalid layer dims {dims}")
    weights = [rng.standard_normal((n_out, n_in)) / np.sqrt(n_in)
               for n_in, n_out in zip(dims[:-1], dims[1:])]
    weights[-1] *= output_scale
    biases = [np.zeros(n_out) for n_out in dims[1:]]
    return NetworkParams(dims, weights, biases, float(activation_gain), output_activation)


def set_output_offset(params: NetworkParams, target) -> None:
    """Set the output bias so a zero pre-activation maps to ``target`` (in place)."""
    t = np.asarray(target, dtype=np.float64)
    if params.output_activation == "sigmoid":
        t = logit(np.clip(t, 1e-3, 1 - 1e-3))
    elif params.output_activation == "tanh":
        a = params.activation_gain
        t = np.arctanh(np.clip(t / a, -1 + 1e-6, 1 - 1e-6))
    params.biases[-1] = t.copy()


def forward(params: NetworkParams, z_batch) -> tuple[np.ndarray, ForwardTrace]:
    z = np.asarray(z_batch, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or z.shape[1] != params.input_dim:
        raise ValueError(f"input must have {params.input_dim} columns, got shape {z.shape}")
    a = params.activation_gain
    acts = [z]
    n_layers = len(params.weights)
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = acts[-1] @ w.T
        h += b
        last = l == n_layers - 1
        if not last or params.output_activation == "tanh":
            h = a * np.tanh(h)
        elif params.output_activation == "sigmoid":
            h = expit(h)
        elif params.output_activation == "clip":
            np.clip(h, 0.0, 1.0, out=h)
        acts.append(h)
    return acts[-1], ForwardTrace(params.token, acts)


def generate(params: NetworkParams, z_batch) -> np.ndarray:
    return forward(params, z_batch)[0]


def backward(params: NetworkParams, trace: ForwardTrace, dl_dy) -> Gradients:
    """Chain rule from per-row output gradients to parameter gradients, summed over rows."""
    if trace.params_token != params.token:
        raise StaleTraceError("trace was produced by different parameters")
    g = np.asarray(dl_dy, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != (trace.batch_size, params.output_dim):
        raise ValueError(f"output gradient shape {g.shape} does not match trace "
                         f"({trace.batch_size}, {params.output_dim})")
    a = params.activation_gain
    n_layers = len(params.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    delta = g
    for l in range(n_layers - 1, -1, -1):
        out = trace.activations[l + 1]
        if l < n_layers - 1 or params.output_activation == "tanh":
            # d/du a*tanh(u) = a - act^2 / a
            delta = delta * (a - out * out / a)
        elif params.output_activation == "sigmoid":
            delta = delta * (out * (1.0 - out))
        elif params.output_activation == "clip":
            # zero slope where the output sits on a bound
            delta = delta * ((out > 0.0) & (out < 1.0))
        gw[l] = delta.T @ trace.activations[l]
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ params.weights[l]
    return Gradients(gw, gb)


def sgd_step(params: NetworkParams, grads: Gradients, eta: float) -> NetworkParams:
    """Plain gradient step ``w - eta * g``; returns new parameters."""
    if not eta > 0:
        raise ValueError("learning rate must be positive")
    for p, g in zip(params.arrays(), grads.arrays()):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    return NetworkParams(params.layer_dims,
                         [w - eta * gw for w, gw in zip(params.weights, grads.weights)],
                         [b - eta * gb for b, gb in zip(params.biases, grads.biases)],
                         params.activation_gain, params.output_activation)


def _write_npz(f, arrays: dict[str, np.ndarray]) -> None:
    # Same layout as np.savez, but with a fixed entry timestamp so identical
    # parameters always produce identical bytes.
    with zipfile.ZipFile(f, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, a in arrays.items():
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w", force_zip64=True) as member:
                np.lib.format.write_array(member, np.ascontiguousarray(a), allow_pickle=False)


def save_checkpoint(params: NetworkParams, path, metadata: dict | None = None) -> None:
    """Write an ``.npz`` container (see README for the layout), atomically."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_dims": list(params.layer_dims),
        "activation_gain": params.activation_gain,
        "output_activation": params.output_activation,
        "metadata": metadata or {},
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{l}"] = w
        arrays[f"b{l}"] = b
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            _write_npz(f, arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        with np.load(path, allow_pickle=False) as npz:
            arrays = {k: npz[k] for k in npz.files}
    except FileNotFoundError:
        raise
    except (zipfile.BadZipFile, ValueError, OSError, EOFError) as e:
        raise CheckpointError(f"{path}: not a readable checkpoint ({e})") from e
    if "header" not in arrays:
        raise CheckpointError(f"{path}: missing header")
    try:
        header = json.loads(arrays.pop("header").tobytes().decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header") from e
    if header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not an sgn checkpoint")
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")
    return header, arrays


def load_checkpoint(path) -> NetworkParams:
    header, arrays = _read_checkpoint(path)
    dims = header["layer_dims"]
    n_layers = len(dims) - 1
    try:
        weights = [arrays[f"W{l}"].astype(np.float64, copy=False) for l in range(n_layers)]
        biases = [arrays[f"b{l}"].astype(np.float64, copy=False) for l in range(n_layers)]
        return NetworkParams(dims, weights, biases, float(header["activation_gain"]),
                             header["output_activation"])
    except (KeyError, ValueError) as e:
        raise CheckpointError(f"{path}: inconsistent parameter payload ({e})") from e


def load_checkpoint_metadata(path) -> dict:
    return _read_checkpoint(path)[0]["metadata"]
