"""Seeded sampling policy shared by every constant-estimation loop.

Scans are exhaustive whenever the population fits the budget; above it they
fall back to seeded uniform draws and the report records the sample spec so
reruns reproduce identical constants.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_PAIR_BUDGET = 200_000


@dataclass(frozen=True)
class SampleSpec:
    mode: str          # "exhaustive" or "sampled"
    population: int
    drawn: int
    seed: int | None

    def to_dict(self):
        return {"mode": self.mode, "population": self.population,
                "drawn": self.drawn, "seed": self.seed}


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))


def sample_indices(population, budget, seed):
    """Indices of scanned items: all of them, or a seeded subset."""
    if budget is None or population <= budget:
        return np.arange(population, dtype=np.int64), SampleSpec("exhaustive", population, population, None)
    rng = rng_for(seed)
    idx = np.sort(rng.choice(population, size=budget, replace=False))
    return idx, SampleSpec("sampled", population, budget, seed)


def sample_unordered_pairs(n, budget, seed):
    """Pairs (i, j) with i < j from range(n), exhaustive below budget."""
    population = n * (n - 1) // 2
    if budget is None or population <= budget:
        us, vs = np.triu_indices(n, k=1)
        return us.astype(np.int64), vs.astype(np.int64), SampleSpec(
            "exhaustive", population, population, None)
    rng = rng_for(seed)
    us = rng.integers(0, n, size=2 * budget)
    vs = rng.integers(0, n, size=2 * budget)
    keep = us < vs
    us, vs = us[keep][:budget], vs[keep][:budget]
    return us, vs, SampleSpec("sampled", population, len(us), seed)


def sample_ordered_pairs(n, m, budget, seed, skip_diagonal=False):
    """Ordered pairs from range(n) x range(m)."""
    population = n * m - (min(n, m) if skip_diagonal else 0)
    if budget is None or population <= budget:
        us, vs = np.meshgrid(np.arange(n, dtype=np.int64),
                             np.arange(m, dtype=np.int64), indexing="ij")
        us, vs = us.ravel(), vs.ravel()
        if skip_diagonal:
            keep = us != vs
            us, vs = us[keep], vs[keep]
        return us, vs, SampleSpec("exhaustive", population, len(us), None)
    rng = rng_for(seed)
    us = rng.integers(0, n, size=budget + (budget // 4 if skip_diagonal else 0))
    vs = rng.integers(0, m, size=len(us))
    if skip_diagonal:
        keep = us != vs
        us, vs = us[keep][:budget], vs[keep][:budget]
    return us, vs, SampleSpec("sampled", population, len(us), seed)
