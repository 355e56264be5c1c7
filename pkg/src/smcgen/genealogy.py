"""Reverse-time genealogies of sampled terminal particles.

Time runs backwards: step s = 0 is the terminal generation T and backward
step s uses the forward ancestry row T - s.  The pair merger rate c_N(s)
and the multiple-merger bound D_N(s) of step s are computed from the
offspring counts of that same row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (AncestryMatrix, MalformedInputError, Partition, SizeError, counts_from_rows,
                   fmt_float)
from .resampling import resample_counts_batch

CENSORED = None


def pair_merger_rate(nu) -> float:
    """c_N = sum_i (nu_i)_2 / (N)_2."""
    nu = np.asarray(nu, dtype=float)
    N = nu.size
    if N < 2:
        raise SizeError("pair merger rate needs N >= 2")
    return float(np.dot(nu, nu - 1) / (N * (N - 1)))


def multiple_merger_bound(nu) -> float:
    """D_N = sum_i (nu_i)_2 {nu_i + sum_{j != i} nu_j^2 / N} / (N (N)_2)."""
    nu = np.asarray(nu, dtype=float)
    N = nu.size
    if N < 2:
        raise SizeError("multiple merger bound needs N >= 2")
    sq = nu * nu
    inner = nu + (sq.sum() - sq) / N
    return float(np.dot(nu * (nu - 1), inner) / (N * N * (N - 1)))


def merger_rates(offspring: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise c_N and D_N for a (rows x N) offspring matrix."""
    nu = np.asarray(offspring, dtype=np.int64)
    N = nu.shape[1]
    if N < 2:
        raise SizeError("N must be >= 2")
    ff2 = nu * (nu - 1)
    sq = nu * nu
    c = ff2.sum(axis=1) / (N * (N - 1))
    # N^3 (N-1) D_N = sum_i (nu_i)_2 (N nu_i + sum_{j != i} nu_j^2), exact in integers
    inner = N * nu + sq.sum(axis=1, keepdims=True) - sq
    d = (ff2 * inner).sum(axis=1) / (N ** 3 * (N - 1))
    return c, d


def tau(cN_sequence: Sequence[float], t: float):
    """min{s >= 1 : c_N(1) + ... + c_N(s) >= t}, or math.inf if never reached."""
    clock = np.cumsum(np.asarray(cN_sequence, dtype=float))
    s = int(np.searchsorted(clock, t, side="left"))
    return math.inf if s >= clock.size else s + 1


@dataclass(frozen=True)
class GenealogyPath:
    """Backward partitions G_0..G_S with per-step c_N, D_N and clock.

    Arrays are indexed by backward step; entry 0 belongs to the terminal
    generation and carries c_N = D_N = 0 and clock 0.
    """

    partitions: tuple
    cN: np.ndarray
    DN: np.ndarray
    cumulative_clock: np.ndarray

    @property
    def n(self) -> int:
        return self.partitions[0].n

    @property
    def steps(self) -> int:
        return len(self.partitions) - 1

    def block_counts(self) -> np.ndarray:
        return np.array([len(p) for p in self.partitions])

    @property
    def coalesced(self) -> bool:
        return len(self.partitions[-1]) == 1

    def to_csv(self, header_comment: Optional[str] = None) -> str:
        lines = [f"# {header_comment}"] if header_comment else []
        lines.append("t,n_blocks,c_N,D_N,cum_clock")
        for s, p in enumerate(self.partitions):
            lines.append(f"{s},{len(p)},{fmt_float(self.cN[s])},{fmt_float(self.DN[s])},"
                         f"{fmt_float(self.cumulative_clock[s])}")
        return "\n".join(lines) + "\n"


class _Builder:
    """Accumulates one backward step at a time."""

    def __init__(self, sample: np.ndarray):
        self.lineages = np.array(sample, dtype=np.int64)
        self.partitions = [Partition.singletons(len(sample))]
        self.n_blocks = len(sample)
        self.cN = [0.0]
        self.DN = [0.0]

    def step(self, row: np.ndarray, c: float, d: float) -> None:
        self.lineages = row[self.lineages]
        k = len(set(self.lineages.tolist()))
        if k < self.n_blocks:
            self.partitions.append(Partition.from_labels(self.lineages.tolist()))
            self.n_blocks = k
        else:
            self.partitions.append(self.partitions[-1])
        self.cN.append(c)
        self.DN.append(d)

    def finish(self) -> GenealogyPath:
        cN = np.array(self.cN)
        return GenealogyPath(tuple(self.partitions), cN, np.array(self.DN), np.cumsum(cN))


def _check_sample(sample, N) -> np.ndarray:
    sample = np.asarray(sample, dtype=np.int64).ravel()
    if sample.size == 0:
        raise MalformedInputError("empty sample")
    if len(set(sample.tolist())) != sample.size:
        raise MalformedInputError("duplicate sample indices")
    if sample.min() < 0 or sample.max() >= N:
        raise MalformedInputError("sample index outside {1..N}")
    return sample


def extract_genealogy(ancestry, sample) -> GenealogyPath:
    """Genealogy of the terminal particles `sample` (0-based indices)."""
    if not isinstance(ancestry, AncestryMatrix):
        ancestry = AncestryMatrix(ancestry)
    sample = _check_sample(sample, ancestry.N)
    rows = ancestry.rows[::-1]
    c, d = merger_rates(counts_from_rows(rows))
    b = _Builder(sample)
    for s in range(ancestry.T):
        b.step(rows[s], float(c[s]), float(d[s]))
    return b.finish()


def sample_terminal(N: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n distinct terminal indices, uniform without replacement."""
    if not 1 <= n <= N:
        raise SizeError("need 1 <= n <= N")
    return rng.choice(N, size=n, replace=False)


def _distinct_positions(K: int, n: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """K rows of n distinct uniform indices in 0..N-1 (a uniform ordered n-subset each)."""
    if 4 * n > N:
        return np.argsort(rng.random((K, N)), axis=1)[:, :n]
    pos = rng.integers(0, N, size=(K, n))
    while True:
        srt = np.sort(pos, axis=1)
        bad = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
        if not bad.any():
            return pos
        pos[bad] = rng.integers(0, N, size=(int(bad.sum()), n))


def simulate_neutral_genealogy(N: int, n: int, scheme, T: int, rng: np.random.Generator,
                               stop_at_mrca: bool = True, chunk: int = 64) -> GenealogyPath:
    """Backward genealogy of n terminal particles under constant potentials.

    With g identically 1 every generation has uniform weights, so the
    offspring counts are i.i.d. draws of the resampling scheme, independent
    of the particle positions, and can be drawn directly in backward order.
    Given the counts, the slot-to-parent map is a uniform arrangement of the
    sorted parent multiset, so the parents of k distinct tracked slots are
    the entries of that multiset at a uniform ordered k-subset of positions.
    Only the sampled lineages are followed.  The result has the same law as
    extracting the genealogy of n uniformly sampled terminal particles from
    a neutral SMC run of horizon T.  With `stop_at_mrca` the walk ends once
    the sample has a single ancestor.
    """
    if N < 2:
        raise SizeError("N must be >= 2")
    if not 1 <= n <= N:
        raise SizeError("need 1 <= n <= N")
    w = np.full(N, 1.0 / N)
    partitions = [Partition.singletons(n)]
    cN, DN = [0.0], [0.0]
    block_of = np.arange(n)   # sample member -> current lineage
    k = n
    done = 0
    while done < T and not (stop_at_mrca and k == 1):
        K = min(chunk, T - done)
        counts = resample_counts_batch(scheme, w, K, rng)
        c, d = merger_rates(counts)
        # position p in row j of the sorted parent multiset belongs to parent #{cum <= p}
        cum = np.cumsum(counts, axis=1) + N * np.arange(K)[:, None]
        pos = _distinct_positions(K, n, N, rng) + N * np.arange(K)[:, None]
        parents = np.searchsorted(cum.ravel(), pos.ravel(), side="right").reshape(K, n)
        for j in range(K):
            if stop_at_mrca and k == 1:
                break
            par = parents[j, :k].tolist()
            if len(set(par)) < k:
                _, inv = np.unique(par, return_inverse=True)
                block_of = inv[block_of]
                k = int(inv.max()) + 1
                partitions.append(Partition.from_labels(block_of.tolist()))
            else:
                partitions.append(partitions[-1])
            cN.append(float(c[j]))
            DN.append(float(d[j]))
            done += 1
    cN = np.array(cN)
    return GenealogyPath(tuple(partitions), cN, np.array(DN), np.cumsum(cN))


@dataclass(frozen=True)
class RescaledSample:
    grid: tuple
    block_counts: tuple  # int, or None where censored


def rescaled_block_counts(path: GenealogyPath, grid) -> RescaledSample:
    """Block count of G_{tau(t)} for each t in the (ascending) grid.

    t = 0 gives the terminal partition.  When the realised clock never
    reaches t the entry is censored (None), unless the sample has already
    reached its common ancestor, in which case it stays at one block.
    """
    grid = tuple(float(t) for t in grid)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted ascending")
    clock = path.cumulative_clock[1:]
    counts = []
    for t in grid:
        if t <= 0:
            counts.append(len(path.partitions[0]))
            continue
        s = int(np.searchsorted(clock, t, side="left")) + 1
        if s <= path.steps:
            counts.append(len(path.partitions[s]))
        elif path.coalesced:
            counts.append(1)
        else:
            counts.append(CENSORED)
    return RescaledSample(grid, tuple(counts))


def merger_times(path: GenealogyPath) -> np.ndarray:
    """Rescaled times of the merger events, one entry per lost block.

    A merger at backward step s is dated by the clock reading
    c_N(1) + ... + c_N(s) of that step.
    """
    counts = path.block_counts()
    lost = counts[:-1] - counts[1:]
    steps = np.repeat(np.arange(1, counts.size), lost)
    return path.cumulative_clock[steps]


def pair_coalescence_time(path: GenealogyPath) -> Optional[float]:
    """Rescaled merger time of a two-lineage sample, None if not coalesced."""
    if path.n != 2:
        raise SizeError("pair coalescence time needs n = 2")
    times = merger_times(path)
    return float(times[0]) if times.size else None


def distinct_ancestor_count(ancestry, sample, t: int) -> int:
    """Number of distinct ancestors, t generations back, of the sampled terminal particles."""
    if not isinstance(ancestry, AncestryMatrix):
        ancestry = AncestryMatrix(ancestry)
    if not 0 <= t <= ancestry.T:
        raise IndexError(f"t must lie in 0..{ancestry.T}")
    idx = _check_sample(sample, ancestry.N)
    for r in range(ancestry.T - 1, ancestry.T - 1 - t, -1):
        idx = ancestry.rows[r][idx]
    return int(np.unique(idx).size)
