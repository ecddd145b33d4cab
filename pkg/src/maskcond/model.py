"""Mask-conditioned generator and discriminator.

The generator maps [x*a, a, r, z] to a full d-vector whose requested
coordinates should follow the conditional law of the data; the discriminator
scores [requested_part, x*a, a, r] with a single logit. Conditioning on the
mask slots can be disabled per network (the slots are then zero-substituted,
keeping input sizes fixed) to measure how much the explicit masks matter.
"""

from dataclasses import dataclass

import numpy as np

from . import rng as rng_mod
from .errors import ShapeError
from .masks import MaskPair
from .mlp import Mlp, init_mlp, mlp_forward_batch

DEFAULT_HIDDEN = (64, 64)


@dataclass(frozen=True)
class ConditioningMode:
    """Which networks get to see the mask slots."""

    generator_masks: bool = True
    discriminator_masks: bool = True

    def label(self):
        g = "a,r" if self.generator_masks else "none"
        d = "a,r" if self.discriminator_masks else "none"
        return f"disc={d}/gen={g}"


@dataclass
class NcGenerator:
    mlp: Mlp
    data_dim: int
    z_dim: int
    condition_on_masks: bool = True
    encoder_depth: int = 2

    @property
    def hidden(self):
        return self.mlp.sizes[1:-1]


@dataclass
class NcDiscriminator:
    mlp: Mlp
    data_dim: int
    condition_on_masks: bool = True


def make_generator(d, rng, z_dim=None, hidden=DEFAULT_HIDDEN,
                   condition_on_masks=True, encoder_depth=None):
    """Build a generator with He-initialized weights from the given stream.

    z_dim defaults to d; encoder_depth (the layers spectral normalization
    constrains and embed() exposes) defaults to the number of hidden layers.
    """
    d = int(d)
    z_dim = d if z_dim is None else int(z_dim)
    hidden = tuple(int(h) for h in hidden)
    if d < 1 or z_dim < 1 or not hidden:
        raise ShapeError("generator needs d >= 1, z_dim >= 1, and a hidden layer")
    encoder_depth = len(hidden) if encoder_depth is None else int(encoder_depth)
    if not 1 <= encoder_depth <= len(hidden):
        raise ShapeError(
            f"encoder_depth must lie in [1, {len(hidden)}], got {encoder_depth}"
        )
    sizes = (3 * d + z_dim,) + hidden + (d,)
    return NcGenerator(
        mlp=init_mlp(sizes, rng), data_dim=d, z_dim=z_dim,
        condition_on_masks=bool(condition_on_masks), encoder_depth=encoder_depth,
    )


def make_discriminator(d, rng, hidden=DEFAULT_HIDDEN, condition_on_masks=True):
    d = int(d)
    hidden = tuple(int(h) for h in hidden)
    if d < 1 or not hidden:
        raise ShapeError("discriminator needs d >= 1 and a hidden layer")
    sizes = (4 * d,) + hidden + (1,)
    return NcDiscriminator(
        mlp=init_mlp(sizes, rng), data_dim=d,
        condition_on_masks=bool(condition_on_masks),
    )


def _rows(x, d, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != d:
        raise ShapeError(f"{name} must have {d} columns, got shape {x.shape}")
    return x


def _mask_rows(m, d, n, name):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = np.broadcast_to(m, (n, d)).copy() if m.size == d else m
    if m.ndim != 2 or m.shape != (n, d):
        raise ShapeError(f"{name} must broadcast to ({n}, {d}), got shape {m.shape}")
    return m


def assemble_generator_input_batch(x, a, r, z, condition_on_masks=True):
    """Stack [x*a, a, r, z] row-wise; mask slots zeroed when conditioning is off.

    x*a is computed here, so callers pass raw data rows; unavailable
    coordinates never reach the network.
    """
    x = _rows(x, np.asarray(x).shape[-1], "x")
    n, d = x.shape
    a = _mask_rows(a, d, n, "a")
    r = _mask_rows(r, d, n, "r")
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    if z.shape[0] != n:
        raise ShapeError(f"z has {z.shape[0]} rows, expected {n}")
    if condition_on_masks:
        return np.ascontiguousarray(np.hstack([x * a, a, r, z]))
    zero = np.zeros_like(a)
    return np.ascontiguousarray(np.hstack([x * a, zero, zero, z]))


def assemble_generator_input(x, mask, z, condition_on_masks=True):
    """Single-row convenience over the batch assembler."""
    if not isinstance(mask, MaskPair):
        raise ShapeError("mask must be a MaskPair")
    out = assemble_generator_input_batch(
        np.asarray(x)[None, :], mask.a, mask.r, np.asarray(z)[None, :],
        condition_on_masks=condition_on_masks,
    )
    return out[0]


def assemble_discriminator_input_batch(first_slot, x, a, r, condition_on_masks=True):
    """Stack [first_slot, x*a, a, r]; first_slot is x*r for real rows and the
    (possibly r-masked) generator output for fake rows."""
    x = _rows(x, np.asarray(x).shape[-1], "x")
    n, d = x.shape
    first_slot = _rows(first_slot, d, "first_slot")
    if first_slot.shape[0] != n:
        raise ShapeError(f"first_slot has {first_slot.shape[0]} rows, expected {n}")
    a = _mask_rows(a, d, n, "a")
    r = _mask_rows(r, d, n, "r")
    if condition_on_masks:
        return np.ascontiguousarray(np.hstack([first_slot, x * a, a, r]))
    zero = np.zeros_like(a)
    return np.ascontiguousarray(np.hstack([first_slot, x * a, zero, zero]))


def assemble_discriminator_input(first_slot, x, mask, condition_on_masks=True):
    if not isinstance(mask, MaskPair):
        raise ShapeError("mask must be a MaskPair")
    out = assemble_discriminator_input_batch(
        np.asarray(first_slot)[None, :], np.asarray(x)[None, :], mask.a, mask.r,
        condition_on_masks=condition_on_masks,
    )
    return out[0]


def generate_batch(gen, x, a, r, z, return_acts=False):
    """Full generated vectors for a batch; requested coordinates are the
    meaningful ones, the rest are reconstruction byproducts."""
    inp = assemble_generator_input_batch(x, a, r, z, gen.condition_on_masks)
    acts = mlp_forward_batch(gen.mlp, inp)
    return (acts[-1], acts) if return_acts else acts[-1]


def generate(gen, x, mask, z):
    """Single draw: returns the generated d-vector."""
    if not isinstance(mask, MaskPair):
        raise ShapeError("mask must be a MaskPair")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (gen.z_dim,):
        raise ShapeError(f"z must have shape ({gen.z_dim},), got {z.shape}")
    return generate_batch(gen, np.asarray(x)[None, :], mask.a, mask.r, z[None, :])[0]


def embed_batch(gen, x, a, r):
    """Deterministic encoder features: run the first encoder_depth layers at z=0."""
    x = _rows(x, gen.data_dim, "x")
    n = x.shape[0]
    z = np.zeros((n, gen.z_dim))
    inp = assemble_generator_input_batch(x, a, r, z, gen.condition_on_masks)
    h = inp
    for l in range(gen.encoder_depth):
        h = h @ gen.mlp.weights[l].T + gen.mlp.biases[l]
        np.maximum(h, 0.0, out=h)
    return h


def embed(gen, x, mask):
    if not isinstance(mask, MaskPair):
        raise ShapeError("mask must be a MaskPair")
    return embed_batch(gen, np.asarray(x)[None, :], mask.a, mask.r)[0]


def score_batch(disc, assembled, return_acts=False):
    """Discriminator logits for pre-assembled input rows."""
    acts = mlp_forward_batch(disc.mlp, assembled)
    logits = acts[-1][:, 0]
    return (logits, acts) if return_acts else logits


def score(disc, assembled):
    """Logit for one assembled input row."""
    assembled = np.asarray(assembled, dtype=np.float64)
    return float(score_batch(disc, assembled[None, :])[0])
