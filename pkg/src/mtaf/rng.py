"""Deterministic random streams for permutations and simulations.

Every permutation round of every SNP gets its own counter-based Philox
stream keyed by (seed, snp id, round); permutation b is the b-th draw from
that stream, so results are independent of thread count and of the order
SNPs are processed in.  String ids are hashed with SHA-256 rather than
Python's randomized hash so keys are stable across processes and runs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

PERM_CHUNK = 2048


def stable_digest(label: str) -> int:
    """64-bit stable hash of a string label."""
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


def keyed_generator(*entropy: int) -> np.random.Generator:
    """Philox generator keyed by a tuple of non-negative integers."""
    seq = np.random.SeedSequence([int(e) & 0xFFFFFFFFFFFFFFFF for e in entropy])
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class PermutationPlan:
    """Reproducible source of permutation index blocks per (SNP, round)."""

    seed: int

    def stream(self, snp_id: str, round_index: int) -> np.random.Generator:
        return keyed_generator(self.seed, stable_digest(snp_id), round_index)

    def simulation_stream(self, scenario_id: str, replicate: int) -> np.random.Generator:
        return keyed_generator(self.seed, stable_digest(scenario_id), 0x5EED, replicate)


def permutation_block(gen: np.random.Generator, count: int, n: int) -> np.ndarray:
    """``count`` independent uniform permutations of range(n), one per row."""
    idx = np.tile(np.arange(n, dtype=np.int64), (count, 1))
    gen.permuted(idx, axis=1, out=idx)
    return idx
