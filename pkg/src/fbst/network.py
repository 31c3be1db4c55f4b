"""Dense feed-forward network with exact reverse-mode derivatives.

The network is a plain MLP with a scalar linear output head, evaluated
for one explicit flat parameter vector.  Everything here is a pure
function of its arguments and runs in float64, so results are bitwise
reproducible and safe to call from concurrent workers.

Parameter layout (fixed so flat vectors are portable across runs):
layer by layer from the input side, each layer contributes its weight
matrix of shape (fan_in, fan_out) raveled in C order, followed by its
bias vector of length fan_out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import as_float_matrix, as_float_vector

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class NetworkArchitecture:
    """Shape description of the MLP: input width, hidden widths, activation."""

    input_dim: int
    hidden_widths: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        if len(self.hidden_widths) < 1:
            raise ValueError("at least one hidden layer is required")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError(f"hidden widths must be positive, got {self.hidden_widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )

    @property
    def layer_dims(self) -> tuple[int, ...]:
        # scalar regression head, no output activation
        return (self.input_dim, *self.hidden_widths, 1)

    @property
    def n_layers(self) -> int:
        return len(self.hidden_widths) + 1

    @property
    def parameter_count(self) -> int:
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))

    def layer_slices(self) -> list[tuple[slice, slice, tuple[int, int]]]:
        """(weight_slice, bias_slice, (fan_in, fan_out)) per layer."""
        dims = self.layer_dims
        out = []
        offset = 0
        for i in range(len(dims) - 1):
            fan_in, fan_out = dims[i], dims[i + 1]
            w = slice(offset, offset + fan_in * fan_out)
            offset = w.stop
            b = slice(offset, offset + fan_out)
            offset = b.stop
            out.append((w, b, (fan_in, fan_out)))
        return out


def check_parameters(arch: NetworkArchitecture, params) -> np.ndarray:
    params = as_float_vector(params, "params")
    if params.shape[0] != arch.parameter_count:
        raise ValueError(
            f"parameter vector length {params.shape[0]} does not match "
            f"architecture parameter_count {arch.parameter_count}"
        )
    return params


def unpack_parameters(arch: NetworkArchitecture, params: np.ndarray):
    """Views of the flat vector as per-layer (weights, bias) arrays."""
    params = check_parameters(arch, params)
    layers = []
    for w_sl, b_sl, (fan_in, fan_out) in arch.layer_slices():
        layers.append((params[w_sl].reshape(fan_in, fan_out), params[b_sl]))
    return layers


def pack_parameters(arch: NetworkArchitecture, layers) -> np.ndarray:
    flat = np.empty(arch.parameter_count)
    for (w_sl, b_sl, shape), (W, b) in zip(arch.layer_slices(), layers):
        if W.shape != shape or b.shape != (shape[1],):
            raise ValueError(f"layer arrays {W.shape}/{b.shape} do not match {shape}")
        flat[w_sl] = np.asarray(W, dtype=np.float64).ravel()
        flat[b_sl] = np.asarray(b, dtype=np.float64)
    return flat


def init_parameters(arch: NetworkArchitecture, rng: np.random.Generator) -> np.ndarray:
    """Fan-in-scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer."""
    flat = np.empty(arch.parameter_count)
    for w_sl, b_sl, (fan_in, fan_out) in arch.layer_slices():
        bound = 1.0 / np.sqrt(fan_in)
        flat[w_sl] = rng.uniform(-bound, bound, fan_in * fan_out)
        flat[b_sl] = rng.uniform(-bound, bound, fan_out)
    return flat


@dataclass
class ForwardTrace:
    """Retained per-layer state of one forward pass over a batch of inputs.

    ``pre_activations[l]`` holds the linear outputs of layer l and
    ``activations[l]`` the values fed into layer l+1; ``activations[-1]``
    is unset for the linear output head.
    """

    inputs: np.ndarray
    pre_activations: list = field(default_factory=list)
    activations: list = field(default_factory=list)
    outputs: np.ndarray | None = None


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(z: np.ndarray, activation: str) -> np.ndarray:
    # relu subgradient at exactly 0 is defined as 0
    if activation == "relu":
        return (z > 0.0).astype(np.float64)
    t = np.tanh(z)
    return 1.0 - t * t


def forward_batch(arch: NetworkArchitecture, params, X, return_trace: bool = False):
    """Evaluate the network on a (n, input_dim) batch; returns (n,) outputs."""
    X = as_float_matrix(X)
    if X.shape[1] != arch.input_dim:
        raise ValueError(
            f"input has {X.shape[1]} features, architecture expects {arch.input_dim}"
        )
    layers = unpack_parameters(arch, params)
    trace = ForwardTrace(inputs=X) if return_trace else None
    a = X
    for idx, (W, b) in enumerate(layers):
        z = a @ W + b
        if idx < len(layers) - 1:
            a_next = _activate(z, arch.activation)
        else:
            a_next = z
        if trace is not None:
            trace.pre_activations.append(z)
            trace.activations.append(a_next)
        a = a_next
    out = a[:, 0]
    if trace is not None:
        trace.outputs = out
        return out, trace
    return out


def forward(arch: NetworkArchitecture, params, x):
    """Single-instance forward pass; returns (prediction, trace)."""
    x = as_float_vector(x, "x")
    if x.shape[0] != arch.input_dim:
        raise ValueError(
            f"input has {x.shape[0]} features, architecture expects {arch.input_dim}"
        )
    out, trace = forward_batch(arch, params, x.reshape(1, -1), return_trace=True)
    return float(out[0]), trace


def input_gradient_batch(arch: NetworkArchitecture, params, X) -> np.ndarray:
    """d prediction / d input for every row of X; shape (n, input_dim)."""
    X = as_float_matrix(X)
    _, trace = forward_batch(arch, params, X, return_trace=True)
    layers = unpack_parameters(arch, params)
    # delta starts as d out / d z_last = 1
    delta = np.ones((X.shape[0], 1))
    for idx in range(len(layers) - 1, 0, -1):
        W, _ = layers[idx]
        delta = delta @ W.T
        delta *= _activate_grad(trace.pre_activations[idx - 1], arch.activation)
    W0, _ = layers[0]
    return delta @ W0.T


def input_gradient(arch: NetworkArchitecture, params, x) -> np.ndarray:
    x = as_float_vector(x, "x")
    if x.shape[0] != arch.input_dim:
        raise ValueError(
            f"input has {x.shape[0]} features, architecture expects {arch.input_dim}"
        )
    return input_gradient_batch(arch, params, x.reshape(1, -1))[0]


def backprop_parameters(
    arch: NetworkArchitecture, params, trace: ForwardTrace, d_out: np.ndarray
) -> np.ndarray:
    """Flat parameter gradient given d loss / d output per batch row."""
    layers = unpack_parameters(arch, params)
    grad = np.zeros(arch.parameter_count)
    slices = arch.layer_slices()
    delta = np.asarray(d_out, dtype=np.float64).reshape(-1, 1)
    for idx in range(len(layers) - 1, -1, -1):
        a_prev = trace.inputs if idx == 0 else trace.activations[idx - 1]
        w_sl, b_sl, shape = slices[idx]
        grad[w_sl] = (a_prev.T @ delta).ravel()
        grad[b_sl] = delta.sum(axis=0)
        if idx > 0:
            W, _ = layers[idx]
            delta = delta @ W.T
            delta *= _activate_grad(trace.pre_activations[idx - 1], arch.activation)
    return grad


def param_gradient(arch: NetworkArchitecture, params, X, y, loss: str = "mse") -> np.ndarray:
    """Gradient of the batch loss with respect to every parameter."""
    if loss != "mse":
        raise ValueError(f"unsupported loss {loss!r}; only 'mse' is implemented")
    X = as_float_matrix(X)
    y = as_float_vector(y, "y")
    if X.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"batch X/y row mismatch: {X.shape[0]} vs {y.shape[0]}")
    preds, trace = forward_batch(arch, params, X, return_trace=True)
    d_out = 2.0 * (preds - y) / X.shape[0]
    return backprop_parameters(arch, params, trace, d_out)
