"""Uniform random coordinate subsets of fixed size."""
from __future__ import annotations

import numpy as np

# above this block size a vectorised draw is cheaper than the scalar swap loop
_SWAP_LOOP_MAX_TAU = 64


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


class TauNiceSampler:
    """Draws size-``tau`` subsets of ``{0, ..., N-1}``, all equally likely.

    Small blocks use a partial Fisher-Yates shuffle over a persistent index
    permutation (any starting permutation keeps the draw uniform); larger
    blocks fall back to ``Generator.choice`` without replacement.  Returned
    subsets are sorted.
    """

    def __init__(self, N: int, tau: int, seed: int = 0):
        if not 1 <= tau <= N:
            raise ValueError(f"tau must be in [1, N={N}], got {tau}")
        self.N = int(N)
        self.tau = int(tau)
        self.seed = int(seed)
        self.rng = make_rng(seed)
        self._perm = np.arange(self.N, dtype=np.intp)
        self._full = np.arange(self.N, dtype=np.intp)

    def sample(self) -> np.ndarray:
        N, tau = self.N, self.tau
        if tau == N:
            return self._full.copy()
        if tau == 1:
            return np.array([self.rng.integers(N)], dtype=np.intp)
        if tau <= _SWAP_LOOP_MAX_TAU:
            perm = self._perm
            picks = self.rng.integers(np.arange(tau), N)
            for i, j in enumerate(picks.tolist()):
                perm[i], perm[j] = perm[j], perm[i]
            return np.sort(perm[:tau])
        return np.sort(self.rng.choice(N, size=tau, replace=False)).astype(np.intp)

    def __iter__(self):
        while True:
            yield self.sample()


def subset_expectation_check(sampler: TauNiceSampler, weights, trials: int) -> float:
    """Monte-Carlo estimate of ``E[sum_{i in S} weights_i]``.

    For a uniform sampler the exact value is ``tau / N * sum(weights)``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (sampler.N,):
        raise ValueError("weights must have length N")
    total = 0.0
    for _ in range(trials):
        total += float(weights[sampler.sample()].sum())
    return total / trials
