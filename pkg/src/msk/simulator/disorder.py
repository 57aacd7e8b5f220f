"""Reproducible disorder: couplings g_ij keyed by (seed, i, j)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import BadSize
from ..model import SpeciesStructure, species_sizes

_U53 = 2.0 ** -53
_MASK64 = (1 << 64) - 1


def _standard_normals_row(seed: int, i: int, n: int) -> np.ndarray:
    """Normals z_{i,0..n-1}; entry j comes from Philox block j of stream (seed, i) only."""
    bg = np.random.Philox(key=[seed & _MASK64, 0], counter=[0, i, 0, 0])
    words = bg.random_raw(4 * n).reshape(n, 4)
    u1 = (words[:, 0] >> np.uint64(11)) * _U53
    u2 = (words[:, 1] >> np.uint64(11)) * _U53
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def sample_seeds(base_seed: int, n: int) -> np.ndarray:
    """Independent 64-bit seeds for samples 0..n-1 of a run."""
    return np.array(
        [np.random.SeedSequence([base_seed & _MASK64, k]).generate_state(1, np.uint64)[0]
         for k in range(n)],
        dtype=np.uint64,
    )


@dataclass(frozen=True, eq=False)
class DisorderSample:
    N: int
    species_sizes: np.ndarray
    couplings: np.ndarray  # strictly upper triangular g_ij
    seed: int

    @cached_property
    def species(self) -> np.ndarray:
        """Species label of each spin; species occupy contiguous index blocks."""
        return np.repeat(np.arange(self.species_sizes.size), self.species_sizes)

    def interaction(self, beta: float) -> np.ndarray:
        """Symmetric J with zero diagonal so that H = sigma^T J sigma / 2 + h sum sigma."""
        G = self.couplings + self.couplings.T
        return beta / np.sqrt(self.N) * G


def sample_disorder(s: SpeciesStructure, N: int, seed: int) -> DisorderSample:
    N = int(N)
    sizes = species_sizes(s.lam, N)
    if N < s.m or np.any(sizes == 0):
        raise BadSize(f"N = {N} leaves a species empty (sizes {sizes.tolist()})")
    seed = int(seed) & _MASK64
    lab = np.repeat(np.arange(s.m), sizes)
    sd = np.sqrt(s.delta2[lab[:, None], lab[None, :]])
    g = np.zeros((N, N))
    for i in range(N - 1):
        z = _standard_normals_row(seed, i, N)
        g[i, i + 1:] = z[i + 1:] * sd[i, i + 1:]
    g.flags.writeable = False
    sizes.flags.writeable = False
    return DisorderSample(N, sizes, g, seed)
