"""Pure numpy implementation of the batched MLP kernels.

Reference semantics for the compiled backend in _kernels_cy.pyx; both expose
the same three functions and must agree to rounding error. Layer l maps
acts[l] (n, d_l) to acts[l+1] = f(acts[l] @ W[l].T + b[l]) with ReLU on every
layer except the last, which is linear. ReLU is treated as having zero second
derivative everywhere, including the kink.
"""

import numpy as np

BACKEND = "numpy"


def forward(weights, biases, x):
    """Run the network on a batch. Returns [x, h1, ..., y] (post-activation)."""
    acts = [x]
    h = x
    last = len(weights) - 1
    for l, (w, b) in enumerate(zip(weights, biases)):
        a = h @ w.T
        a += b
        if l < last:
            np.maximum(a, 0.0, out=a)
        acts.append(a)
        h = a
    return acts


def backward(weights, acts, gy, need_input_grad=False, need_param_grads=True):
    """Reverse-mode gradients for a forward() call.

    gy is the gradient of a scalar objective with respect to the output batch.
    Returns (dws, dbs, dx); dws/dbs are None when need_param_grads is false,
    dx is None when need_input_grad is false.
    """
    n_layers = len(weights)
    dws = [None] * n_layers if need_param_grads else None
    dbs = [None] * n_layers if need_param_grads else None
    delta = gy
    for l in range(n_layers - 1, -1, -1):
        if l < n_layers - 1:
            # acts[l + 1] is post-ReLU; its zeros mark dead units.
            delta = delta * (acts[l + 1] > 0.0)
        if need_param_grads:
            dws[l] = delta.T @ acts[l]
            dbs[l] = delta.sum(axis=0)
        if l > 0 or need_input_grad:
            delta = delta @ weights[l]
    dx = delta if need_input_grad else None
    return dws, dbs, dx


def grad_norm_backward(weights, acts):
    """Squared input-gradient norms of a scalar-output network, with gradients.

    For each batch row i, vals[i] = || d y_i / d x_i ||^2. Also returns the
    gradient of sum(vals) with respect to every weight matrix (bias gradients
    are identically zero and are returned as zeros). ReLU curvature is zero,
    so the activation masks from the forward pass are treated as constants.
    """
    n_layers = len(weights)
    n = acts[0].shape[0]

    # p[l] = d y / d preactivation of layer l, one row per batch element.
    p = [None] * n_layers
    p[n_layers - 1] = np.ones((n, weights[n_layers - 1].shape[0]))
    for l in range(n_layers - 2, -1, -1):
        p[l] = (p[l + 1] @ weights[l + 1]) * (acts[l + 1] > 0.0)
    g = p[0] @ weights[0]
    vals = np.einsum("ij,ij->i", g, g)

    dws = [np.zeros_like(w) for w in weights]
    dbs = [np.zeros(w.shape[0]) for w in weights]
    lam = 2.0 * g
    dws[0] += p[0].T @ lam
    lam = lam @ weights[0].T
    for l in range(n_layers - 1):
        t = lam * (acts[l + 1] > 0.0)
        dws[l + 1] += p[l + 1].T @ t
        if l + 1 < n_layers - 1:
            lam = t @ weights[l + 1].T
    return vals, dws, dbs
