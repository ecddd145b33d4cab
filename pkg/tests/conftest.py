"""Shared test helpers: finite differences and tolerance conventions.

Gradient checks compare analytic gradients to central finite differences at
the whole-vector level: rel = ||g_an - g_fd|| / max(||g_an||, ||g_fd||, tiny).
Per-coordinate ratios are noise-dominated wherever both entries are near zero,
so the vector-norm form is what "relative error" means throughout this suite.
"""

import numpy as np
import pytest


def fd_gradient(f, x, eps=1e-6):
    """Central-difference gradient of scalar f at 1-d point x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2.0 * eps)
    return g


def rel_vec_err(analytic, fd, tiny=1e-8):
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    fd = np.asarray(fd, dtype=np.float64).ravel()
    denom = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(fd)), tiny)
    return float(np.linalg.norm(analytic - fd)) / denom


def flatten_params(param_list):
    return np.concatenate([np.asarray(p, dtype=np.float64).ravel() for p in param_list])


def unflatten_like(vec, param_list):
    out = []
    pos = 0
    for p in param_list:
        size = p.size
        out.append(np.ascontiguousarray(vec[pos:pos + size].reshape(p.shape)))
        pos += size
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
