"""Adam and the one-sided spectral ceiling.

Both are written out explicitly rather than imported so every update the
training loop makes is visible and testable in isolation.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError


@dataclass
class AdamState:
    """First/second moment accumulators, aligned with a flat parameter list."""

    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_init(param_list, lr=1e-4, beta1=0.5, beta2=0.999, eps=1e-8):
    return AdamState(
        lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=0,
        m=[np.zeros_like(p) for p in param_list],
        v=[np.zeros_like(p) for p in param_list],
    )


def adam_step(state, param_list, grad_list, names=None):
    """One Adam update with bias correction. Returns (new params, new state).

    Pure: inputs are not mutated. Non-finite gradients raise NumericError
    naming the offending parameter block.
    """
    if len(param_list) != len(state.m) or len(grad_list) != len(state.m):
        raise ShapeError("parameter/gradient lists do not match optimizer state")
    t = state.t + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    new_params, new_m, new_v = [], [], []
    for i, (p, g) in enumerate(zip(param_list, grad_list)):
        if not np.isfinite(g).all():
            label = names[i] if names is not None else f"param[{i}]"
            raise NumericError(f"non-finite gradient in block {label}")
        m = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        step = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_params.append(p - step)
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(
        lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
        t=t, m=new_m, v=new_v,
    )


def sigma_max(w, u, iters=1):
    """Power-iteration estimate of the top singular value of w.

    u is the warm-start left-singular vector (unit norm); returns
    (sigma_estimate, updated u). A zero matrix returns (0.0, u) unchanged.
    """
    w = np.asarray(w, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if w.ndim != 2 or u.shape != (w.shape[0],):
        raise ShapeError(f"state shape {u.shape} does not match matrix {w.shape}")
    sigma = 0.0
    for _ in range(max(1, int(iters))):
        v = w.T @ u
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0, u
        v /= nv
        wu = w @ v
        sigma = float(np.linalg.norm(wu))
        if sigma == 0.0:
            return 0.0, u
        u = wu / sigma
    return sigma, u


def sigma_max_converged(w, u, rtol=1e-10, max_iters=200):
    """Iterate sigma_max until the estimate stabilizes. Returns (sigma, u)."""
    sigma_prev = -1.0
    for _ in range(max_iters):
        sigma, u = sigma_max(w, u, iters=1)
        if sigma == 0.0 or abs(sigma - sigma_prev) <= rtol * max(sigma, 1e-30):
            return sigma, u
        sigma_prev = sigma
    return sigma, u


def one_sided_sn_project(w, u, iters=1):
    """Divide w by its estimated spectral norm only when that estimate exceeds 1.

    Returns (projected w, sigma estimate, updated u). The estimate comes from
    `iters` warm-started power iterations; callers needing a guaranteed
    ceiling should use project_spectral_ceiling.
    """
    sigma, u = sigma_max(w, u, iters=iters)
    if sigma > 1.0:
        return w / sigma, sigma, u
    return w, sigma, u


def project_spectral_ceiling(w, u, tol=1e-9, max_rounds=8):
    """Project w to sigma_max(w) <= 1 + tol using converged estimates.

    Re-estimates after each division so the guarantee holds for the true
    spectral norm, not just the running estimate. Returns (w, sigma, u) with
    sigma the final converged estimate of the returned matrix.
    """
    for _ in range(max_rounds):
        sigma, u = sigma_max_converged(w, u)
        if sigma <= 1.0 + tol:
            return w, sigma, u
        w = w / sigma
    sigma, u = sigma_max_converged(w, u)
    return w, sigma, u
