"""Dense networks with exact reverse-mode gradients, plus the Adam optimizer.

Networks are plain lists of affine layers, each followed by an elementwise
activation.  Inputs are either a single vector of shape ``(in,)`` or a batch
of row vectors of shape ``(batch, in)``; gradients are summed over the batch.

Parameter draw order for :func:`mlp_init` is fixed: layer by layer from the
input side, the weight matrix in row-major ``(out, in)`` order, then the bias.
"""
from dataclasses import dataclass, field
import math

import numpy as np

__all__ = [
    "ACTIVATIONS", "Layer", "Mlp", "GradientSet", "AdamState", "NonFiniteError",
    "activate", "activation_derivative", "mlp_init", "mlp_forward", "mlp_backward",
    "adam_step", "clip_grad_norm",
]

ACTIVATIONS = ("gaussian", "tanh", "relu", "linear")
_ALIASES = {"rectifier": "relu", "identity": "linear"}
WEIGHT_INITS = ("normal", "uniform_fan_in", "orthogonal")


class NonFiniteError(FloatingPointError):
    """Raised when a gradient, loss or network output contains NaN or inf."""


def _canonical(tag):
    tag = _ALIASES.get(tag, tag)
    if tag not in ACTIVATIONS:
        raise ValueError(f"unknown activation {tag!r}; expected one of {ACTIVATIONS}")
    return tag


def activate(tag, z):
    if tag == "gaussian":
        return np.exp(-z * z)
    if tag == "tanh":
        return np.tanh(z)
    if tag == "relu":
        return np.maximum(z, 0.0)
    return z


def activation_derivative(tag, z, y):
    """Derivative of the activation at pre-activation ``z`` (``y`` is the activated value)."""
    if tag == "gaussian":
        return -2.0 * z * y
    if tag == "tanh":
        return 1.0 - y * y
    if tag == "relu":
        return (z > 0.0).astype(z.dtype)
    return np.ones_like(z)


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]


class Mlp:
    """Feed-forward network ``y = act_L(W_L ... act_1(W_1 x + b_1) ... + b_L)``."""

    def __init__(self, layers):
        if not layers:
            raise ValueError("an Mlp needs at least one layer")
        for i, layer in enumerate(layers):
            layer.activation = _canonical(layer.activation)
            if layer.weight.ndim != 2 or layer.bias.shape != (layer.out_dim,):
                raise ValueError(f"layer {i}: weight {layer.weight.shape} and bias {layer.bias.shape} disagree")
            if i and layer.in_dim != layers[i - 1].out_dim:
                raise ValueError(
                    f"layer {i} expects input width {layer.in_dim}, previous layer emits {layers[i - 1].out_dim}")
        self.layers = list(layers)
        # bumped on every in-place parameter update; lets backward reject stale caches
        self.version = 0

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    @property
    def sizes(self):
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    @property
    def activations(self):
        return [layer.activation for layer in self.layers]

    def parameters(self):
        """Parameter arrays in draw order (W_1, b_1, W_2, b_2, ...)."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def n_parameters(self):
        return sum(p.size for p in self.parameters())

    def copy(self):
        return Mlp([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def __call__(self, x):
        return mlp_forward(self, x)[0]

    def __repr__(self):
        return f"Mlp(sizes={self.sizes}, activations={self.activations})"


@dataclass
class GradientSet:
    weights: list
    biases: list

    def arrays(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def scale(self, factor):
        for a in self.arrays():
            a *= factor
        return self

    def sq_norm(self):
        return sum(float(np.dot(a.ravel(), a.ravel())) for a in self.arrays())

    def add(self, other):
        for a, b in zip(self.arrays(), other.arrays()):
            a += b
        return self

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    @classmethod
    def zeros_like(cls, net):
        return cls([np.zeros_like(l.weight) for l in net.layers], [np.zeros_like(l.bias) for l in net.layers])


def mlp_init(layer_sizes, activations, weight_init="normal", rng=None, gains=None):
    """Build a network with widths ``layer_sizes`` (input width first).

    ``weight_init`` is one of

    * ``"normal"``: weights and biases i.i.d. standard normal;
    * ``"uniform_fan_in"``: weights and biases i.i.d. U(-1/sqrt(fan_in), 1/sqrt(fan_in));
    * ``"orthogonal"``: orthogonal weights scaled by ``gains[i]``, zero biases.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("layer_sizes needs an input width and at least one layer width")
    if any(s <= 0 for s in sizes):
        raise ValueError(f"all widths must be positive, got {sizes}")
    if len(activations) != len(sizes) - 1:
        raise ValueError(f"{len(sizes) - 1} layers but {len(activations)} activations")
    if weight_init not in WEIGHT_INITS:
        raise ValueError(f"unknown weight_init {weight_init!r}")
    if rng is None:
        raise ValueError("mlp_init needs an explicit random stream")
    layers = []
    for i, (n_in, n_out, act) in enumerate(zip(sizes[:-1], sizes[1:], activations)):
        if weight_init == "normal":
            w = rng.standard_normal((n_out, n_in))
            b = rng.standard_normal(n_out)
        elif weight_init == "uniform_fan_in":
            bound = 1.0 / math.sqrt(n_in)
            w = rng.uniform(-bound, bound, (n_out, n_in))
            b = rng.uniform(-bound, bound, n_out)
        else:
            gain = 1.0 if gains is None else gains[i]
            w = gain * _orthogonal(n_out, n_in, rng)
            b = np.zeros(n_out)
        layers.append(Layer(w, b, act))
    return Mlp(layers)


def _orthogonal(rows, cols, rng):
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q *= np.sign(np.diag(r))
    return q if rows >= cols else q.T


def mlp_forward(net, x):
    """Forward pass; returns ``(y, cache)``.  The cache feeds :func:`mlp_backward`."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim or x.ndim not in (1, 2):
        raise ValueError(f"input of shape {x.shape} does not match network input width {net.input_dim}")
    inputs, preacts, outputs = [], [], []
    h = x
    for layer in net.layers:
        z = h @ layer.weight.T + layer.bias
        y = activate(layer.activation, z)
        inputs.append(h)
        preacts.append(z)
        outputs.append(y)
        h = y
    cache = {"net": id(net), "version": net.version, "inputs": inputs, "preacts": preacts, "outputs": outputs}
    return h, cache


def mlp_backward(net, cache, output_grad):
    """Gradients of ``<output_grad, y>`` with respect to every weight and bias.

    For a batch, the pairing is summed over rows.  Returns the gradient of
    the input as a second value (handy for chaining).
    """
    if cache.get("net") != id(net) or cache.get("version") != net.version:
        raise ValueError("cache was produced by a different network or before a parameter update")
    g = np.asarray(output_grad, dtype=float)
    if g.shape != cache["outputs"][-1].shape:
        raise ValueError(f"output_grad shape {g.shape} != output shape {cache['outputs'][-1].shape}")
    n = len(net.layers)
    dws, dbs = [None] * n, [None] * n
    for i in range(n - 1, -1, -1):
        layer = net.layers[i]
        dz = g * activation_derivative(layer.activation, cache["preacts"][i], cache["outputs"][i])
        h = cache["inputs"][i]
        if dz.ndim == 1:
            dws[i] = np.outer(dz, h)
            dbs[i] = dz.copy()
        else:
            dws[i] = dz.T @ h
            dbs[i] = dz.sum(axis=0)
        g = dz @ layer.weight
    return GradientSet(dws, dbs), g


def clip_grad_norm(grad_sets, max_norm):
    """Rescale several gradient sets jointly so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    total = math.sqrt(sum(gs.sq_norm() for gs in grad_sets))
    if max_norm is not None and total > max_norm:
        factor = max_norm / (total + 1e-6)
        for gs in grad_sets:
            gs.scale(factor)
    return total


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_net(cls, net, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        params = net.parameters()
        return cls(lr, beta1, beta2, eps, 0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(net, grads, state):
    """One bias-corrected Adam update, applied in place.  Descends along ``grads``."""
    params = net.parameters()
    garrs = grads.arrays()
    if len(garrs) != len(params) or any(g.shape != p.shape for g, p in zip(garrs, params)):
        raise ValueError("gradient shapes do not match the network")
    if len(state.m) != len(params) or any(m.shape != p.shape for m, p in zip(state.m, params)):
        raise ValueError("optimizer state does not match the network")
    if not grads.is_finite():
        raise NonFiniteError("non-finite gradient entries; update rejected")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, garrs, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    net.version += 1
    return net, state
