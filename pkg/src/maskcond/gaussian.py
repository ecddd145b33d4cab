"""Exact multivariate Gaussian oracle.

Closed-form conditionals, densities, entropies, and samplers for the ground
truth the generative model is trained against. All conditioning is expressed
through an availability/request mask pair; coordinate order inside a subset is
always ascending original index.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import rng as rng_mod
from .errors import DegenerateConditioningError, NotSpdError, ShapeError
from .linalg import check_symmetric, cholesky_spd, logdet_spd, solve_spd

LOG_2PI = math.log(2.0 * math.pi)

# Pivot floor below which a conditional covariance counts as degenerate.
_DEGENERATE_PIVOT = 1e-10


@dataclass(frozen=True)
class Gaussian:
    """Mean vector and SPD covariance, validated at construction."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if mu.ndim != 1:
            raise ShapeError(f"mean must be a vector, got shape {mu.shape}")
        if sigma.shape != (mu.size, mu.size):
            raise ShapeError(
                f"covariance shape {sigma.shape} does not match mean of size {mu.size}"
            )
        if not np.isfinite(mu).all():
            raise ShapeError("mean has non-finite entries")
        check_symmetric(sigma)
        cholesky_spd(sigma)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self):
        return self.mu.size


@dataclass(frozen=True)
class ConditionalMoments:
    """Moments of X_r given X_a = x_a, coordinates in ascending request order."""

    mu: np.ndarray
    sigma: np.ndarray
    requested_idx: np.ndarray
    available_idx: np.ndarray


def reference_gaussian():
    """The 3-d benchmark Gaussian used throughout the workbench."""
    return rho_gaussian(0.5)


def rho_gaussian(rho):
    """Mean (2, 4, 6) with covariance [[1, rho, rho^2], [rho, 1, 0], [rho^2, 0, 1]]."""
    rho = float(rho)
    mu = np.array([2.0, 4.0, 6.0])
    sigma = np.array([
        [1.0, rho, rho * rho],
        [rho, 1.0, 0.0],
        [rho * rho, 0.0, 1.0],
    ])
    return Gaussian(mu, sigma)


def _mask_indices(g, mask):
    a = np.asarray(mask.a)
    r = np.asarray(mask.r)
    if a.size != g.dim or r.size != g.dim:
        raise ShapeError(
            f"mask length {a.size}/{r.size} does not match dimension {g.dim}"
        )
    return np.flatnonzero(a), np.flatnonzero(r)


def marginal(g, idx):
    """Marginal Gaussian over the coordinates idx (ascending order)."""
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size == 0:
        return None
    return Gaussian(g.mu[idx], g.sigma[np.ix_(idx, idx)])


def conditional_moments(g, mask, x_available):
    """Closed-form moments of X_r | X_a = x_a.

    mu = mu_r + S_ra S_aa^-1 (x_a - mu_a) and S = S_rr - S_ra S_aa^-1 S_ar,
    computed through the Cholesky of S_aa. Empty request gives empty moments;
    empty availability gives the marginal over the request.
    """
    idx_a, idx_r = _mask_indices(g, mask)
    x_available = np.asarray(x_available, dtype=np.float64).reshape(-1)
    if x_available.size != idx_a.size:
        raise ShapeError(
            f"got {x_available.size} available values for {idx_a.size} available coordinates"
        )
    if idx_r.size == 0:
        return ConditionalMoments(
            np.zeros(0), np.zeros((0, 0)), idx_r, idx_a
        )
    if idx_a.size == 0:
        sub = marginal(g, idx_r)
        return ConditionalMoments(sub.mu.copy(), sub.sigma.copy(), idx_r, idx_a)

    s_aa = g.sigma[np.ix_(idx_a, idx_a)]
    s_ra = g.sigma[np.ix_(idx_r, idx_a)]
    s_rr = g.sigma[np.ix_(idx_r, idx_r)]
    try:
        gain = solve_spd(s_aa, s_ra.T).T
    except NotSpdError as exc:
        raise DegenerateConditioningError(
            f"available-block covariance is not invertible: {exc}"
        ) from None
    mu_c = g.mu[idx_r] + gain @ (x_available - g.mu[idx_a])
    sigma_c = s_rr - gain @ s_ra.T
    sigma_c = 0.5 * (sigma_c + sigma_c.T)
    try:
        cholesky_spd(sigma_c, min_pivot=_DEGENERATE_PIVOT * max(1.0, float(sigma_c.max())))
    except NotSpdError as exc:
        raise DegenerateConditioningError(f"conditional covariance degenerate: {exc}") from None
    return ConditionalMoments(mu_c, sigma_c, idx_r, idx_a)


def sample_joint(g, n, seed):
    """n joint samples, one per row. seed may be an int or a live Generator."""
    n = int(n)
    if n < 0:
        raise ShapeError("sample count must be >= 0")
    gen = rng_mod.stream(seed, rng_mod.ORACLE) if not isinstance(seed, np.random.Generator) else seed
    lower = cholesky_spd(g.sigma)
    z = gen.standard_normal((n, g.dim))
    return g.mu + z @ lower.T


def sample_conditional(g, mask, x_available, n, seed):
    """n samples of X_r | X_a = x_a, rows ordered by ascending request index."""
    n = int(n)
    if n < 0:
        raise ShapeError("sample count must be >= 0")
    cm = conditional_moments(g, mask, x_available)
    gen = rng_mod.stream(seed, rng_mod.ORACLE) if not isinstance(seed, np.random.Generator) else seed
    if cm.mu.size == 0:
        return np.zeros((n, 0))
    lower = cholesky_spd(cm.sigma)
    z = gen.standard_normal((n, cm.mu.size))
    return cm.mu + z @ lower.T


def log_density_joint(g, x):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != g.dim:
        raise ShapeError(f"point of size {x.size} in dimension {g.dim}")
    diff = x - g.mu
    quad = float(diff @ solve_spd(g.sigma, diff))
    return -0.5 * (g.dim * LOG_2PI + logdet_spd(g.sigma) + quad)


def log_density_conditional(g, mask, x_available, x_requested):
    """log p(x_r | x_a) under the exact conditional."""
    cm = conditional_moments(g, mask, x_available)
    x_requested = np.asarray(x_requested, dtype=np.float64).reshape(-1)
    if x_requested.size != cm.mu.size:
        raise ShapeError(
            f"got {x_requested.size} requested values for {cm.mu.size} requested coordinates"
        )
    if cm.mu.size == 0:
        return 0.0
    diff = x_requested - cm.mu
    quad = float(diff @ solve_spd(cm.sigma, diff))
    return -0.5 * (cm.mu.size * LOG_2PI + logdet_spd(cm.sigma) + quad)


def entropy_of_covariance(sigma):
    """Differential entropy of a Gaussian with the given covariance (0-d gives 0)."""
    sigma = np.asarray(sigma, dtype=np.float64)
    d = sigma.shape[0] if sigma.ndim == 2 else 0
    if d == 0:
        return 0.0
    return 0.5 * d * (1.0 + LOG_2PI) + 0.5 * logdet_spd(sigma)


def differential_entropy(g):
    return entropy_of_covariance(g.sigma)


def conditional_entropy(g, mask):
    """h(X_r | X_a); does not depend on the conditioning value for Gaussians."""
    idx_a, idx_r = _mask_indices(g, mask)
    if idx_r.size == 0:
        warnings.warn("conditional entropy of an empty request is 0 by convention")
        return 0.0
    cm = conditional_moments(g, mask, g.mu[idx_a])
    return entropy_of_covariance(cm.sigma)


def mutual_information(g, mask):
    """I(X_r; X_a) = h(X_r) - h(X_r | X_a) >= 0."""
    idx_a, idx_r = _mask_indices(g, mask)
    if idx_r.size == 0:
        return 0.0
    h_marg = entropy_of_covariance(g.sigma[np.ix_(idx_r, idx_r)])
    if idx_a.size == 0:
        return 0.0
    return h_marg - conditional_entropy(g, mask)


def mse_lower_bound(g, mask):
    """trace of the conditional covariance: the least achievable mean squared
    error of any estimator of X_r from X_a."""
    idx_a, idx_r = _mask_indices(g, mask)
    if idx_r.size == 0:
        return 0.0
    cm = conditional_moments(g, mask, g.mu[idx_a])
    return float(np.trace(cm.sigma))
