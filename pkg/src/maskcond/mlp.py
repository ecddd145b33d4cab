"""Dense ReLU networks with exact reverse-mode gradients.

Parameters are plain float64 arrays. A network with layer sizes
(d0, d1, ..., dL) applies y = W_L f(... f(W_1 x + b_1) ...) + b_L with
f = ReLU; the output layer is linear. The heavy lifting lives in
maskcond.kernels; this module owns parameter containers, validation,
and the flat parameter ordering used by the optimizer and checkpoints.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError, ShapeError


@dataclass
class Mlp:
    """Weights, biases, and spectral-norm warm-start state, one entry per layer."""

    weights: list
    biases: list
    sn_state: list = field(default_factory=list)

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def sizes(self):
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def in_dim(self):
        return self.weights[0].shape[1]

    @property
    def out_dim(self):
        return self.weights[-1].shape[0]


def init_mlp(sizes, rng):
    """He-initialized network. Draw order per layer: weight, then sn state."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ShapeError(f"need at least input and output sizes >= 1, got {sizes}")
    weights, biases, sn_state = [], [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in)
        weights.append(np.ascontiguousarray(w))
        biases.append(np.zeros(fan_out))
        u = rng.standard_normal(fan_out)
        sn_state.append(u / np.linalg.norm(u))
    return Mlp(weights, biases, sn_state)


def params(mlp):
    """Flat parameter list [W0, b0, W1, b1, ...]; the package-wide ordering."""
    out = []
    for w, b in zip(mlp.weights, mlp.biases):
        out.append(w)
        out.append(b)
    return out


def param_names(mlp):
    out = []
    for l in range(mlp.n_layers):
        out.append(f"layer{l}.weight")
        out.append(f"layer{l}.bias")
    return out


def set_params(mlp, flat):
    if len(flat) != 2 * mlp.n_layers:
        raise ShapeError("parameter list length does not match network depth")
    for l in range(mlp.n_layers):
        w, b = flat[2 * l], flat[2 * l + 1]
        if w.shape != mlp.weights[l].shape or b.shape != mlp.biases[l].shape:
            raise ShapeError(f"parameter shapes changed at layer {l}")
        mlp.weights[l] = np.ascontiguousarray(w)
        mlp.biases[l] = b


def _check_batch(mlp, x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != mlp.in_dim:
        raise ShapeError(f"expected batch of shape (n, {mlp.in_dim}), got {x.shape}")
    return x


def mlp_forward_batch(mlp, x):
    """Returns the activation list [x, h1, ..., y]; pass it back to backward."""
    return kernels.forward(mlp.weights, mlp.biases, _check_batch(mlp, x))


def mlp_forward(mlp, x):
    """Single input vector. Returns (y, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (mlp.in_dim,):
        raise ShapeError(f"expected input of shape ({mlp.in_dim},), got {x.shape}")
    acts = mlp_forward_batch(mlp, x[None, :])
    return acts[-1][0], acts


def mlp_backward_batch(mlp, acts, gy, need_input_grad=False, need_param_grads=True):
    """Gradients of sum_i <gy_i, y_i>. Returns (flat param grads or None, dx or None)."""
    gy = np.ascontiguousarray(gy, dtype=np.float64)
    if gy.shape != acts[-1].shape:
        raise ShapeError(f"gy shape {gy.shape} does not match output {acts[-1].shape}")
    dws, dbs, dx = kernels.backward(
        mlp.weights, acts, gy,
        need_input_grad=need_input_grad, need_param_grads=need_param_grads,
    )
    if not need_param_grads:
        return None, dx
    flat = []
    for dw, db in zip(dws, dbs):
        flat.append(dw)
        flat.append(db)
    return flat, dx


def mlp_backward(mlp, cache, gy):
    """Single-vector counterpart of mlp_backward_batch; returns (grads, input_grad)."""
    gy = np.asarray(gy, dtype=np.float64)
    flat, dx = mlp_backward_batch(mlp, cache, gy[None, :], need_input_grad=True)
    return flat, dx[0]


def input_gradient_sq_norm_batch(mlp, x):
    """(vals, flat grads of sum(vals)) for a scalar-output network."""
    if mlp.out_dim != 1:
        raise ContractError(
            f"input gradient norms are defined for scalar outputs, got out_dim {mlp.out_dim}"
        )
    x = _check_batch(mlp, x)
    acts = kernels.forward(mlp.weights, mlp.biases, x)
    vals, dws, dbs = kernels.grad_norm_backward(mlp.weights, acts)
    flat = []
    for dw, db in zip(dws, dbs):
        flat.append(dw)
        flat.append(db)
    return vals, flat


def input_gradient_sq_norm(mlp, x):
    """|| d y / d x ||^2 at a single input, with its parameter gradients."""
    x = np.asarray(x, dtype=np.float64)
    vals, flat = input_gradient_sq_norm_batch(mlp, x[None, :])
    return float(vals[0]), flat
