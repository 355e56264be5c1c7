"""Kingman's n-coalescent: generator, simulator and block-count marginals."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .core import Partition, SizeError

SPECTRAL_MAX_N = 12


def set_partitions(n: int) -> list:
    """All partitions of {1..n} in canonical form (Bell(n) of them)."""
    def rec(elems):
        if not elems:
            yield []
            return
        first, rest = elems[0], elems[1:]
        for sub in rec(rest):
            for i in range(len(sub)):
                yield sub[:i] + [[first] + sub[i]] + sub[i + 1:]
            yield [[first]] + sub
    return [Partition(tuple(tuple(b) for b in p), n) for p in rec(list(range(1, n + 1)))]


def merges_one_pair(xi: Partition, eta: Partition) -> bool:
    """True iff eta is obtained from xi by merging exactly one pair of blocks."""
    return len(eta) == len(xi) - 1 and eta.is_coarsening_of(xi)


def generator_matrix(n: int):
    """Return (partitions, Q) with Q the n-coalescent generator."""
    parts = set_partitions(n)
    Q = np.zeros((len(parts), len(parts)))
    for i, xi in enumerate(parts):
        for j, eta in enumerate(parts):
            if merges_one_pair(xi, eta):
                Q[i, j] = 1.0
        k = len(xi)
        Q[i, i] = -k * (k - 1) / 2
    return parts, Q


def simulate_kingman(n: int, horizon: float, rng: np.random.Generator) -> list:
    """Jump chain of the n-coalescent up to `horizon`.

    Returns [(0, singletons), (t_1, G_1), ...]; each jump merges a uniformly
    chosen pair of blocks after an Exp(k(k-1)/2) holding time.
    """
    if n < 1:
        raise SizeError("n must be >= 1")
    blocks = [[i] for i in range(1, n + 1)]
    t = 0.0
    events = [(0.0, Partition.singletons(n))]
    while len(blocks) > 1:
        k = len(blocks)
        t += rng.exponential(2.0 / (k * (k - 1)))
        if t > horizon:
            break
        i, j = sorted(rng.choice(k, size=2, replace=False))
        merged = blocks[i] + blocks.pop(j)
        blocks[i] = merged
        events.append((t, Partition(tuple(tuple(b) for b in blocks), n)))
    return events


def coalescence_times(n: int, rng: np.random.Generator) -> np.ndarray:
    """Times at which the block count drops, n -> n-1 -> ... -> 1."""
    ev = simulate_kingman(n, np.inf, rng)
    return np.array([t for t, _ in ev[1:]])


def _rate(k: int) -> Fraction:
    return Fraction(k * (k - 1), 2)


@lru_cache(maxsize=None)
def _spectral_coefficients(n: int) -> tuple:
    """coef[k][j] with P(k blocks at t) = sum_j coef[k][j] exp(-rate(j) t)."""
    table = []
    for k in range(1, n + 1):
        prod = Fraction(1)
        for m in range(k + 1, n + 1):
            prod *= _rate(m)
        row = {}
        for j in range(k, n + 1):
            den = Fraction(1)
            for m in range(k, n + 1):
                if m != j:
                    den *= _rate(m) - _rate(j)
            row[j] = prod / den
        table.append(row)
    return tuple(table)


def block_count_marginal(n: int, t: float, method: str = "spectral") -> np.ndarray:
    """Law of the number of blocks at time t, as a vector over k = 1..n.

    method="spectral" uses the exact eigen-expansion with rational
    coefficients (n <= 12); method="ode" integrates the forward equations
    of the pure-death chain numerically and has no size limit.
    """
    if n < 1:
        raise SizeError("n must be >= 1")
    if t < 0:
        raise ValueError("t must be >= 0")
    if method == "ode":
        return _block_count_ode(n, t)
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    if n > SPECTRAL_MAX_N:
        raise SizeError(f"spectral marginals are limited to n <= {SPECTRAL_MAX_N} "
                        "because of cancellation; use method='ode'")
    if n == 1:
        return np.ones(1)
    coef = _spectral_coefficients(n)
    decay = {j: np.exp(-float(_rate(j)) * t) for j in range(1, n + 1)}
    p = np.array([sum(float(c) * decay[j] for j, c in row.items()) for row in coef])
    # rounding can leave values of order -1e-16 where the true mass is ~0
    return np.clip(p, 0.0, None)


def death_chain_generator(n: int) -> np.ndarray:
    """Generator of the block-count chain on states 1..n (index k-1)."""
    L = np.zeros((n, n))
    for k in range(2, n + 1):
        r = k * (k - 1) / 2
        L[k - 1, k - 1] = -r
        L[k - 1, k - 2] = r
    return L


def _block_count_ode(n: int, t: float) -> np.ndarray:
    p0 = np.zeros(n)
    p0[-1] = 1.0
    if t == 0:
        return p0
    L = death_chain_generator(n)
    sol = solve_ivp(lambda _, p: p @ L, (0.0, t), p0, method="DOP853",
                    rtol=1e-12, atol=1e-14)
    p = np.clip(sol.y[:, -1], 0.0, None)
    return p / p.sum()


def expected_pair_coalescence_time() -> float:
    """Mean of the Exp(1) merger time of two lineages."""
    return 1.0
