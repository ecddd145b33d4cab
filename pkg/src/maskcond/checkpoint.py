"""Checkpoint and dataset files.

Everything is JSON with a canonical layout (sorted keys, fixed separators,
repr-exact floats), so saving a loaded checkpoint reproduces the file byte for
byte. A checkpoint carries the full run configuration snapshot, both networks
with their spectral warm-start state, and the training loop's Philox counter.
"""

import dataclasses
import json

import numpy as np

from .errors import ConfigError, ShapeError
from .gaussian import Gaussian, reference_gaussian, rho_gaussian
from .masks import MaskSpec, mask_to_bits, pair_from_bits
from .mlp import Mlp
from .model import ConditioningMode, NcDiscriminator, NcGenerator
from .training import TrainConfig

FORMAT_VERSION = 1


def _dump_canonical(obj, path):
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def gaussian_to_dict(g):
    return {"mean": list(map(float, g.mu)), "cov": [list(map(float, row)) for row in g.sigma]}


def gaussian_from_dict(d):
    """Accepts {mean, cov} or {mean, rho}; exactly one of cov/rho."""
    if d is None:
        return reference_gaussian()
    if not isinstance(d, dict):
        raise ConfigError("gaussian section must be an object")
    has_cov = "cov" in d
    has_rho = "rho" in d
    if has_cov == has_rho:
        raise ConfigError("gaussian section needs exactly one of 'cov' or 'rho'")
    if has_rho:
        g = rho_gaussian(float(d["rho"]))
        if "mean" in d:
            g = Gaussian(np.asarray(d["mean"], dtype=np.float64), g.sigma)
        return g
    if "mean" not in d:
        raise ConfigError("gaussian section with 'cov' also needs 'mean'")
    return Gaussian(np.asarray(d["mean"], dtype=np.float64),
                    np.asarray(d["cov"], dtype=np.float64))


def mask_spec_to_dict(spec):
    out = {
        "kind": spec.kind,
        "p_a": spec.p_a,
        "p_r": spec.p_r,
        "allow_empty_available": spec.allow_empty_available,
        "include_joint_mask": spec.include_joint_mask,
    }
    if spec.pairs is not None:
        out["pairs"] = [[mask_to_bits(p.a), mask_to_bits(p.r)] for p in spec.pairs]
    return out


def mask_spec_from_dict(d):
    d = dict(d)
    pairs = d.pop("pairs", None)
    if pairs is not None:
        d["pairs"] = tuple(pair_from_bits(a, r) for a, r in pairs)
    return MaskSpec(**d)


def train_config_to_dict(cfg):
    out = dataclasses.asdict(cfg)
    out["conditioning"] = {
        "generator_masks": cfg.conditioning.generator_masks,
        "discriminator_masks": cfg.conditioning.discriminator_masks,
    }
    out["mask_spec"] = mask_spec_to_dict(cfg.mask_spec)
    out["hidden"] = list(cfg.hidden)
    return out


def train_config_from_dict(d):
    d = dict(d)
    if "conditioning" in d and isinstance(d["conditioning"], dict):
        d["conditioning"] = ConditioningMode(**d["conditioning"])
    if "mask_spec" in d and isinstance(d["mask_spec"], dict):
        d["mask_spec"] = mask_spec_from_dict(d["mask_spec"])
    if "hidden" in d:
        d["hidden"] = tuple(d["hidden"])
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
    return TrainConfig(**d)


def _mlp_to_dict(mlp):
    return {
        "layers": [
            {"weight": [list(map(float, row)) for row in w], "bias": list(map(float, b))}
            for w, b in zip(mlp.weights, mlp.biases)
        ],
        "sn_state": [list(map(float, u)) for u in mlp.sn_state],
    }


def _mlp_from_dict(d):
    weights, biases = [], []
    for layer in d["layers"]:
        weights.append(np.ascontiguousarray(layer["weight"], dtype=np.float64))
        biases.append(np.asarray(layer["bias"], dtype=np.float64))
    sn_state = [np.asarray(u, dtype=np.float64) for u in d["sn_state"]]
    return Mlp(weights, biases, sn_state)


def _rng_state_to_jsonable(state):
    def conv(v):
        if isinstance(v, np.ndarray):
            return {"__ndarray__": v.dtype.str, "data": [int(x) for x in v]}
        if isinstance(v, np.integer):
            return int(v)
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        return v

    return conv(state)


def _rng_state_from_jsonable(state):
    def conv(v):
        if isinstance(v, dict) and "__ndarray__" in v:
            return np.array(v["data"], dtype=np.dtype(v["__ndarray__"]))
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        return v

    return conv(state)


@dataclasses.dataclass
class Checkpoint:
    generator: NcGenerator
    discriminator: object
    train_config: TrainConfig
    gaussian: Gaussian
    rng_state: object = None
    steps_completed: int = 0
    format_version: int = FORMAT_VERSION


def save_checkpoint(ckpt, path):
    gen = ckpt.generator
    payload = {
        "format_version": int(ckpt.format_version),
        "config": {
            "gaussian": gaussian_to_dict(ckpt.gaussian),
            "train": train_config_to_dict(ckpt.train_config),
        },
        "generator": {
            "data_dim": gen.data_dim,
            "z_dim": gen.z_dim,
            "condition_on_masks": gen.condition_on_masks,
            "encoder_depth": gen.encoder_depth,
            **_mlp_to_dict(gen.mlp),
        },
        "discriminator": None,
        "rng": {
            "steps_completed": int(ckpt.steps_completed),
            "state": _rng_state_to_jsonable(ckpt.rng_state) if ckpt.rng_state else None,
        },
    }
    if ckpt.discriminator is not None:
        disc = ckpt.discriminator
        payload["discriminator"] = {
            "data_dim": disc.data_dim,
            "condition_on_masks": disc.condition_on_masks,
            **_mlp_to_dict(disc.mlp),
        }
    _dump_canonical(payload, path)


def load_checkpoint(path):
    try:
        with open(path) as f:
            payload = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"checkpoint {path} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise ConfigError(f"checkpoint {path} is missing format_version")
    if payload["format_version"] != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported checkpoint format_version {payload['format_version']}, "
            f"this build reads {FORMAT_VERSION}"
        )
    try:
        gsec = payload["generator"]
        gen = NcGenerator(
            mlp=_mlp_from_dict(gsec),
            data_dim=int(gsec["data_dim"]),
            z_dim=int(gsec["z_dim"]),
            condition_on_masks=bool(gsec["condition_on_masks"]),
            encoder_depth=int(gsec["encoder_depth"]),
        )
        disc = None
        if payload.get("discriminator") is not None:
            dsec = payload["discriminator"]
            disc = NcDiscriminator(
                mlp=_mlp_from_dict(dsec),
                data_dim=int(dsec["data_dim"]),
                condition_on_masks=bool(dsec["condition_on_masks"]),
            )
        cfg = train_config_from_dict(payload["config"]["train"])
        g = gaussian_from_dict(payload["config"]["gaussian"])
        rng_sec = payload.get("rng") or {}
        return Checkpoint(
            generator=gen, discriminator=disc, train_config=cfg, gaussian=g,
            rng_state=_rng_state_from_jsonable(rng_sec.get("state")),
            steps_completed=int(rng_sec.get("steps_completed", 0)),
            format_version=FORMAT_VERSION,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"checkpoint {path} is malformed: {exc}") from None


def checkpoint_roundtrip(ckpt, scratch_dir):
    """Save, load, save again; True when both files are byte-identical."""
    import os

    p1 = os.path.join(scratch_dir, "ckpt_roundtrip_a.json")
    p2 = os.path.join(scratch_dir, "ckpt_roundtrip_b.json")
    save_checkpoint(ckpt, p1)
    save_checkpoint(load_checkpoint(p1), p2)
    with open(p1, "rb") as f:
        b1 = f.read()
    with open(p2, "rb") as f:
        b2 = f.read()
    return b1 == b2


def write_dataset(path, rows, seed):
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ShapeError(f"dataset must be 2-d, got shape {rows.shape}")
    payload = {
        "d": int(rows.shape[1]),
        "n": int(rows.shape[0]),
        "seed": int(seed),
        "rows": [list(map(float, row)) for row in rows],
    }
    _dump_canonical(payload, path)


def read_dataset(path):
    try:
        with open(path) as f:
            payload = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"dataset {path} is not valid JSON: {exc}") from None
    try:
        rows = np.asarray(payload["rows"], dtype=np.float64)
        d, n = int(payload["d"]), int(payload["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"dataset {path} is malformed: {exc}") from None
    if rows.shape != (n, d):
        raise ConfigError(
            f"dataset {path} declares shape ({n}, {d}) but rows have {rows.shape}"
        )
    return rows, payload
