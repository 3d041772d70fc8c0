"""Deterministic random number generation.

Built on numpy's Philox counter-based bit generator: the same 64-bit
seed produces the same draw sequence on every platform and run. Child
streams are derived by hashing the parent seed with a string tag, so
independent components (init, sampler, per-sample data) never share or
reorder draws.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .tensor import default_dtype

__all__ = ["Rng", "derive_seed"]


def derive_seed(seed: int, tag: str) -> int:
    """Stable 64-bit child seed from (seed, tag)."""
    digest = hashlib.blake2b(f"{seed}:{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class Rng:
    """Counter-based RNG with reproducible, platform-independent draws."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def child(self, tag: str) -> "Rng":
        """Independent stream keyed by this seed and ``tag``."""
        return Rng(derive_seed(self.seed, tag))

    def uniform(self, shape=(), low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape).astype(default_dtype())

    def normal(self, shape=(), mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        return self._gen.normal(mean, std, size=shape).astype(default_dtype())

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice_bits(self, n: int, p: float = 0.5) -> np.ndarray:
        return (self._gen.uniform(0.0, 1.0, size=n) < p).astype(np.int64)
