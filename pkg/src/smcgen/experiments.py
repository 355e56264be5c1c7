"""Replicated genealogy experiments: rescaled pair times and block-count tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import make_rng
from .diagnostics import DEFAULT_ALPHA, FitReport, chi_square_block_counts, ks_exp1
from .genealogy import (GenealogyPath, extract_genealogy, pair_coalescence_time,
                        rescaled_block_counts, sample_terminal, simulate_neutral_genealogy)
from .kingman import block_count_marginal
from .models import ModelSpec
from .resampling import Scheme
from .smc import run_smc

DEFAULT_GRID = (0.5, 1.0, 2.0)


def default_horizon(N: int) -> int:
    """Generation cap for neutral multinomial runs.

    One step merges a given pair with probability 1/N, so a pair survives
    T steps with probability (1 - 1/N)^T ~ exp(-T/N); 4 N ln 100 leaves
    about 1e-8 of pairs uncoalesced.
    """
    return int(math.ceil(4 * N * math.log(100)))


def replicate_genealogy(model: Optional[ModelSpec], scheme, N: int, T: int, n: int,
                        seed: int, replicate: int, stop_at_mrca: bool = True) -> GenealogyPath:
    """One replicate on stream (seed, replicate).

    model=None (or a neutral model) uses the lineage-only neutral sampler;
    any other model runs the full particle system and extracts the genealogy
    of n uniformly sampled terminal particles.
    """
    rng = make_rng(seed, replicate)
    if model is None or model.name.startswith("neutral"):
        return simulate_neutral_genealogy(N, n, scheme, T, rng, stop_at_mrca=stop_at_mrca)
    trace = run_smc(model, N, T, scheme, rng)
    return extract_genealogy(trace.ancestry_matrix(), sample_terminal(N, n, rng))


@dataclass
class PairTimeResult:
    N: int
    scheme: str
    T: int
    times: np.ndarray          # coalesced replicates only
    censored: int
    fit: Optional[FitReport]

    @property
    def replicates(self) -> int:
        return self.times.size + self.censored

    @property
    def coalesced_fraction(self) -> float:
        return self.times.size / self.replicates

    @property
    def mean(self) -> float:
        return float(self.times.mean()) if self.times.size else math.nan

    @property
    def se(self) -> float:
        return float(self.times.std(ddof=1) / math.sqrt(self.times.size)) if self.times.size > 1 \
            else math.nan


def pair_time_experiment(N: int, replicates: int, seed: int = 0, scheme="multinomial",
                         T: Optional[int] = None, model: Optional[ModelSpec] = None,
                         alpha: float = DEFAULT_ALPHA) -> PairTimeResult:
    """Rescaled merger times of two sampled lineages over independent replicates."""
    T = default_horizon(N) if T is None else T
    times, censored = [], 0
    for r in range(replicates):
        t = pair_coalescence_time(replicate_genealogy(model, scheme, N, T, 2, seed, r))
        if t is None:
            censored += 1
        else:
            times.append(t)
    times = np.array(times)
    fit = ks_exp1(times, alpha) if times.size >= 30 else None
    return PairTimeResult(N, Scheme.parse(scheme).value, T, times, censored, fit)


@dataclass
class BlockCountResult:
    N: int
    n: int
    scheme: str
    T: int
    grid: tuple
    table: np.ndarray                 # len(grid) x n, column k-1 counts k blocks
    censored: np.ndarray              # per grid point
    fits: list = field(default_factory=list)   # FitReport or None per grid point

    @property
    def replicates(self) -> int:
        return int(self.table[0].sum() + self.censored[0])


def block_count_experiment(N: int, n: int, replicates: int, seed: int = 0, scheme="systematic",
                           T: Optional[int] = None, grid: Sequence[float] = DEFAULT_GRID,
                           model: Optional[ModelSpec] = None,
                           alpha: float = DEFAULT_ALPHA) -> BlockCountResult:
    """Tabulate block counts at rescaled times and compare with the n-coalescent.

    Censored replicates are excluded from the tables; a grid point with no
    uncensored replicate gets no fit (None).
    """
    T = default_horizon(N) if T is None else T
    grid = tuple(float(t) for t in grid)
    table = np.zeros((len(grid), n), dtype=np.int64)
    censored = np.zeros(len(grid), dtype=np.int64)
    for r in range(replicates):
        path = replicate_genealogy(model, scheme, N, T, n, seed, r)
        for i, k in enumerate(rescaled_block_counts(path, grid).block_counts):
            if k is None:
                censored[i] += 1
            else:
                table[i, k - 1] += 1
    fits = []
    for i, t in enumerate(grid):
        if table[i].sum() == 0:
            fits.append(None)
        else:
            fits.append(chi_square_block_counts(table[i], block_count_marginal(n, t), alpha,
                                                label=f"Kingman n={n} t={t:g}"))
    return BlockCountResult(N, n, Scheme.parse(scheme).value, T, grid, table, censored, fits)
