"""Availability/request mask pairs and their sampling distributions.

A pair (a, r) marks coordinates whose values are given (a) and coordinates the
model must produce (r). Raw draws may overlap; resolve_overlap applies
r' = r * (1 - a), so a wins and the stored pair is always disjoint. The pair
(a=0, r=all ones) plays a special role: it asks for a full joint sample, and
by default the training sampler never emits it (include_joint_mask is the
exact probability with which it is emitted instead of a Bernoulli draw).
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng as rng_mod
from .errors import ConfigError, ShapeError

# Rejection attempts per requested pair before declaring the spec infeasible.
_MAX_REJECTS = 1000


@dataclass(frozen=True)
class MaskPair:
    """A disjoint binary availability/request pair over d coordinates."""

    a: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        r = np.asarray(self.r, dtype=np.float64)
        if a.ndim != 1 or a.shape != r.shape:
            raise ShapeError(f"mask vectors must share one dimension, got {a.shape} and {r.shape}")
        for name, m in (("a", a), ("r", r)):
            if not np.isin(m, (0.0, 1.0)).all():
                raise ShapeError(f"mask {name} must be binary")
        if float(np.dot(a, r)) != 0.0:
            raise ShapeError("masks overlap; build the pair through resolve_overlap")
        a.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "r", r)

    @property
    def dim(self):
        return self.a.size

    def bits(self):
        """Serialized form, e.g. 'a=100, r=011'."""
        return f"a={mask_to_bits(self.a)}, r={mask_to_bits(self.r)}"

    def __eq__(self, other):
        if not isinstance(other, MaskPair):
            return NotImplemented
        return np.array_equal(self.a, other.a) and np.array_equal(self.r, other.r)

    def __hash__(self):
        return hash((self.a.tobytes(), self.r.tobytes()))


def mask_to_bits(m):
    return "".join("1" if v else "0" for v in np.asarray(m))


def bits_to_mask(s):
    s = s.strip()
    if not s or any(c not in "01" for c in s):
        raise ConfigError(f"mask bitstring must be nonempty 0/1 characters, got {s!r}")
    return np.array([float(c) for c in s])


def pair_from_bits(a_bits, r_bits):
    return resolve_overlap(bits_to_mask(a_bits), bits_to_mask(r_bits))


def resolve_overlap(a, r):
    """Apply the availability-wins rule r' = r * (1 - a) and return a MaskPair."""
    a = np.asarray(a, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if a.shape != r.shape or a.ndim != 1:
        raise ShapeError(f"mask vectors must share one dimension, got {a.shape} and {r.shape}")
    return MaskPair(a.copy(), r * (1.0 - a))


def apply_mask(x, m):
    """Elementwise x * m; broadcasts over a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if x.shape[-1] != m.size:
        raise ShapeError(f"last axis of {x.shape} does not match mask length {m.size}")
    return x * m


def joint_pair(d):
    """The (a=0, r=all ones) pair that requests a full joint sample."""
    return MaskPair(np.zeros(d), np.ones(d))


def enumerate_mask_pairs(d, include_empty_available=True):
    """All disjoint pairs with r != 0, sorted lexicographically by (a, r).

    There are 3^d - 2^d of them, so this is only practical up to d around 12
    even though the contract allows d <= 20.
    """
    d = int(d)
    if d < 1 or d > 20:
        raise ShapeError(f"enumeration supports 1 <= d <= 20, got {d}")
    pairs = []
    for a_code in range(2 ** d):
        a = np.array([float((a_code >> (d - 1 - i)) & 1) for i in range(d)])
        free = np.flatnonzero(a == 0.0)
        if not include_empty_available and a.sum() == 0.0:
            continue
        k = free.size
        for r_code in range(1, 2 ** k):
            r = np.zeros(d)
            for j, coord in enumerate(free):
                r[coord] = float((r_code >> (k - 1 - j)) & 1)
            if r.sum() == 0.0:
                continue
            pairs.append(MaskPair(a, r))
    return pairs


@dataclass(frozen=True)
class MaskSpec:
    """Distribution over mask pairs used during training.

    kind 'bernoulli' draws a_i ~ Bern(p_a), r_i ~ Bern(p_r), resolves overlap,
    and rejects r' = 0 (and a = 0 when allow_empty_available is false).
    kind 'enumerate-uniform' draws uniformly over enumerate_mask_pairs(d).
    kind 'fixed-list' draws uniformly over the pairs given.

    include_joint_mask is the exact probability of emitting (a=0, r=1...1)
    instead; at 0 that pair is never emitted by any kind.
    """

    kind: str = "bernoulli"
    p_a: float = 0.5
    p_r: float = 0.5
    allow_empty_available: bool = True
    include_joint_mask: float = 0.0
    pairs: tuple = field(default=None)

    def __post_init__(self):
        if self.kind not in ("bernoulli", "enumerate-uniform", "fixed-list"):
            raise ConfigError(f"unknown mask spec kind {self.kind!r}")
        for name in ("p_a", "p_r", "include_joint_mask"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.kind == "bernoulli" and self.p_r == 0.0:
            raise ConfigError("p_r = 0 can never produce a nonempty request")
        if self.kind == "fixed-list":
            if not self.pairs:
                raise ConfigError("fixed-list specs need a nonempty pairs tuple")
            object.__setattr__(self, "pairs", tuple(self.pairs))
        elif self.pairs is not None:
            raise ConfigError("pairs is only meaningful for fixed-list specs")


def _candidate_pool(spec, d):
    # Pairs an index-based kind may emit, with the joint pair handled separately.
    if spec.kind == "enumerate-uniform":
        pool = enumerate_mask_pairs(d, include_empty_available=spec.allow_empty_available)
    else:
        pool = list(spec.pairs)
        for p in pool:
            if p.dim != d:
                raise ConfigError(f"fixed-list pair has dimension {p.dim}, expected {d}")
            if p.r.sum() == 0.0:
                raise ConfigError("fixed-list pairs must have a nonempty request")
            if not spec.allow_empty_available and p.a.sum() == 0.0:
                raise ConfigError("fixed-list pair has empty availability but the spec forbids it")
    pool = [p for p in pool if p != joint_pair(d)]
    if not pool:
        raise ConfigError("mask spec admits no valid pairs besides the joint pair")
    return pool


def sample_mask_batch(spec, d, n, rng):
    """Draw n pairs; returns (A, R) float arrays of shape (n, d).

    Draw order is fixed for determinism: first the joint-mask coin for every
    row (only when include_joint_mask > 0), then the per-row draws, redrawing
    invalid rows in place. A row that stays invalid for 1000 attempts raises
    ConfigError (the spec is then effectively infeasible).
    """
    d, n = int(d), int(n)
    if d < 1 or n < 0:
        raise ShapeError(f"need d >= 1 and n >= 0, got d={d}, n={n}")
    a_out = np.zeros((n, d))
    r_out = np.zeros((n, d))
    if n == 0:
        return a_out, r_out

    joint = np.zeros(n, dtype=bool)
    if spec.include_joint_mask > 0.0:
        joint = rng.random(n) < spec.include_joint_mask

    pending = np.flatnonzero(~joint)
    if spec.kind == "bernoulli":
        attempts = 0
        while pending.size:
            attempts += 1
            if attempts > _MAX_REJECTS:
                raise ConfigError(
                    f"mask rejection did not terminate after {_MAX_REJECTS} attempts; "
                    "the Bernoulli rates admit no valid pair"
                )
            a = (rng.random((pending.size, d)) < spec.p_a).astype(np.float64)
            r = (rng.random((pending.size, d)) < spec.p_r).astype(np.float64)
            r *= 1.0 - a
            ok = r.sum(axis=1) > 0.0
            if not spec.allow_empty_available:
                ok &= a.sum(axis=1) > 0.0
            # The joint pair only ever comes from the explicit coin above.
            is_joint = (a.sum(axis=1) == 0.0) & (r.sum(axis=1) == d)
            ok &= ~is_joint
            rows = pending[ok]
            a_out[rows] = a[ok]
            r_out[rows] = r[ok]
            pending = pending[~ok]
    elif pending.size:
        pool = _candidate_pool(spec, d)
        idx = rng.integers(0, len(pool), size=pending.size)
        for row, k in zip(pending, idx):
            a_out[row] = pool[k].a
            r_out[row] = pool[k].r

    if joint.any():
        jp = joint_pair(d)
        a_out[joint] = jp.a
        r_out[joint] = jp.r
    return a_out, r_out


def sample_mask_pair(spec, d, rng):
    """Draw a single MaskPair from the spec."""
    a, r = sample_mask_batch(spec, d, 1, rng)
    return MaskPair(a[0], r[0])
