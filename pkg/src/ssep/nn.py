"""Dense feedforward networks with hand-written backpropagation and Adam.

Networks operate on 2-D batches of shape ``(batch, features)``; a 1-D input
is treated as a batch of one and the output is squeezed back to 1-D.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")


@dataclass
class DenseNet:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "linear"

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("a network needs at least an input and an output layer")
        if self.hidden_activation not in ACTIVATIONS or self.output_activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.hidden_activation!r}/{self.output_activation!r}"
            )
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("parameter count does not match layer_sizes")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[k], self.layer_sizes[k + 1])
            if W.shape != expected or b.shape != (expected[1],):
                raise ValueError(f"layer {k}: weight {W.shape} / bias {b.shape}, expected {expected}")

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    def params(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]``; arrays are views, not copies."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(
            list(self.layer_sizes),
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())

    def __call__(self, x):
        return forward(self, x)[0]


@dataclass
class Cache:
    """Per-layer inputs and post-activations recorded by :func:`forward`."""

    net_id: int
    inputs: list[np.ndarray]
    outputs: list[np.ndarray]
    squeeze: bool


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: DenseNet, learning_rate: float, **kwargs) -> "AdamState":
        zeros = [np.zeros_like(p) for p in net.params()]
        return cls(
            learning_rate,
            first_moment=zeros,
            second_moment=[z.copy() for z in zeros],
            **kwargs,
        )

    def copy(self) -> "AdamState":
        return AdamState(
            self.learning_rate, self.beta1, self.beta2, self.epsilon, self.step_count,
            [m.copy() for m in self.first_moment], [v.copy() for v in self.second_moment],
        )


def init_net(layer_sizes, hidden_activation="relu", output_activation="linear", seed=0,
             output_scale=None) -> DenseNet:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.

    ``output_scale``, if given, replaces the bound of the last layer so the
    network starts close to zero output. ``seed`` may be an int or a
    ``numpy.random.Generator``.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {layer_sizes!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    n_layers = len(sizes) - 1
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        if output_scale is not None and k == n_layers - 1:
            bound = output_scale
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenseNet(sizes, weights, biases, hidden_activation, output_activation)


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(out, grad, kind):
    # derivative expressed through the activation output
    if kind == "relu":
        return grad * (out > 0.0)
    if kind == "tanh":
        return grad * (1.0 - out * out)
    return grad


def forward(net: DenseNet, x) -> tuple[np.ndarray, Cache]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2 or h.shape[1] != net.n_in:
        raise ValueError(f"input shape {x.shape} does not match input width {net.n_in}")
    inputs, outputs = [], []
    last = len(net.weights) - 1
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        h = _activate(h @ W + b, net.output_activation if k == last else net.hidden_activation)
        outputs.append(h)
    return (h[0] if squeeze else h), Cache(id(net), inputs, outputs, squeeze)


def _backward(net, cache, output_grad, want_params):
    if cache.net_id != id(net) or len(cache.inputs) != len(net.weights):
        raise ValueError("cache was not produced by this network")
    g = np.asarray(output_grad, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    if g.shape != cache.outputs[-1].shape:
        raise ValueError(f"output_grad shape {g.shape} != output shape {cache.outputs[-1].shape}")
    grads = [None] * (2 * len(net.weights))
    last = len(net.weights) - 1
    for k in range(last, -1, -1):
        kind = net.output_activation if k == last else net.hidden_activation
        g = _activation_grad(cache.outputs[k], g, kind)
        if want_params:
            grads[2 * k] = cache.inputs[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
        if k > 0 or not want_params:
            g = g @ net.weights[k].T
    return grads, g


def backward_params(net: DenseNet, cache: Cache, output_grad) -> list[np.ndarray]:
    """Gradient of ``sum(output_grad * output)`` w.r.t. ``net.params()``.

    For batched inputs the contributions of all rows are summed.
    """
    return _backward(net, cache, output_grad, True)[0]


def backward_input(net: DenseNet, cache: Cache, output_grad) -> np.ndarray:
    """Gradient of ``sum(output_grad * output)`` w.r.t. the network input."""
    g = _backward(net, cache, output_grad, False)[1]
    return g[0] if cache.squeeze else g


def adam_step(net: DenseNet, grads, opt: AdamState) -> tuple[DenseNet, AdamState]:
    """One bias-corrected Adam descent step, applied in place.

    Returns ``(net, opt)`` for convenience. To ascend, pass negated gradients.
    """
    params = net.params()
    if len(grads) != len(params) or len(opt.first_moment) != len(params):
        raise ValueError("gradient / optimizer state does not match the network")
    opt.step_count += 1
    t = opt.step_count
    b1, b2 = opt.beta1, opt.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, opt.first_moment, opt.second_moment):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= opt.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + opt.epsilon)
    return net, opt
