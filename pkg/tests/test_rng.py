import numpy as np
import pytest

from maskcond import rng as rng_mod


def test_stream_deterministic():
    a = rng_mod.stream(0, rng_mod.DATA).standard_normal(8)
    b = rng_mod.stream(0, rng_mod.DATA).standard_normal(8)
    assert np.array_equal(a, b)


def test_streams_diverge_by_seed_and_path():
    base = rng_mod.stream(0, rng_mod.DATA).standard_normal(8)
    other_seed = rng_mod.stream(1, rng_mod.DATA).standard_normal(8)
    other_path = rng_mod.stream(0, rng_mod.EVAL).standard_normal(8)
    deeper = rng_mod.stream(0, rng_mod.DATA, 1).standard_normal(8)
    assert not np.array_equal(base, other_seed)
    assert not np.array_equal(base, other_path)
    assert not np.array_equal(base, deeper)


def test_stream_passthrough():
    gen = rng_mod.stream(3, rng_mod.LOOP)
    assert rng_mod.stream(gen) is gen
    with pytest.raises(ValueError):
        rng_mod.stream(gen, rng_mod.LOOP)


def test_uses_philox():
    gen = rng_mod.stream(0, rng_mod.DATA)
    assert type(gen.bit_generator).__name__ == "Philox"


def test_labels_distinct():
    labels = [rng_mod.DATA, rng_mod.INIT_GENERATOR, rng_mod.INIT_DISCRIMINATOR,
              rng_mod.LOOP, rng_mod.EVAL, rng_mod.SAMPLE, rng_mod.ORACLE]
    assert len(set(labels)) == len(labels)
