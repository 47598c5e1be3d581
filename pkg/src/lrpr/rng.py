"""Reproducible random streams.

Every random object in the package is drawn from an ``RngSpec``: a base
seed plus a 64-bit stream id. Stream ids for a given purpose are derived
by hashing, so independent draws (ensemble, noise, signal, trial) never
share a stream and results do not depend on scheduling order.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_id(purpose, *index):
    """Stable 64-bit id for ``(purpose, *index)``."""
    key = repr((str(purpose),) + tuple(int(i) for i in index)).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class RngSpec:
    base_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("base_seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {value}")

    def generator(self):
        seq = np.random.SeedSequence(int(self.base_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(seq))

    def derive(self, purpose, *index):
        """Child spec on the same base seed, keyed by this stream and purpose."""
        return RngSpec(self.base_seed, stream_id(purpose, self.stream_id, *index))

    def to_dict(self):
        return {"base_seed": int(self.base_seed), "stream_id": int(self.stream_id)}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["base_seed"]), int(data["stream_id"]))


def as_rng_spec(rng):
    if isinstance(rng, RngSpec):
        return rng
    return RngSpec(int(rng))


def complex_normal(gen, shape):
    """CN(0, 1) samples ``(g1 + i g2) / sqrt(2)``, so ``E|g|^2 = 1``."""
    g = gen.standard_normal(tuple(shape) + (2,))
    return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)
