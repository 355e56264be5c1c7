"""Brute-force oracles and the named validation suites.

Every check returns a `Check(name, passed, detail)`; a suite is a list of
checks.  Oracles here are written independently of the code they check
(enumeration, exact rational arithmetic, explicit path following).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .core import Partition, make_rng
from .diagnostics import (rounding_moment_bound, csmc_moment_bound, estimate_moment_ratio,
                          expected_pair_merger_rate, monte_carlo_pair_merger_rate,
                          moment_ratio_from_counts, second_moment_multinomial,
                          second_moment_stochastic_rounding, timescale_delta, DEFAULT_ALPHA,
                          chi_square_block_counts, ks_exp1)
from .genealogy import (extract_genealogy, merger_rates, multiple_merger_bound,
                        pair_merger_rate, rescaled_block_counts, tau)
from .kingman import (block_count_marginal, generator_matrix, merges_one_pair,
                      simulate_kingman)
from .models import bounded_potential_model, hmm_exact_likelihood, hmm_model, two_state_hmm
from .resampling import (STOCHASTIC_ROUNDING, Scheme, assign_slots_batch, is_two_point_support,
                         resample_counts_batch)
from .smc import marginal_likelihood, run_smc


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


# ---------------------------------------------------------------- oracles

def binomial_second_moment(w, N: int) -> Fraction:
    """E[(X)_2] for X ~ Binomial(N, w), summed exactly over the pmf."""
    w = Fraction(w)
    return sum(Fraction(k * (k - 1)) * math.comb(N, k) * w**k * (1 - w) ** (N - k)
               for k in range(N + 1))


def two_point_second_moment(w, N: int) -> Fraction:
    """E[(X)_2] for X in {floor(Nw), floor(Nw) + 1} with mean N w, exact."""
    x = N * Fraction(w)
    k = math.floor(x)
    p = x - k
    return (1 - p) * k * (k - 1) + p * (k + 1) * k


def path_following_partitions(rows, sample) -> list:
    """G_0..G_T by following every sampled particle back and comparing ancestors pairwise.

    rows[t][i] is the 0-based parent in generation t of particle i of
    generation t+1; `sample` holds 0-based terminal indices.
    """
    rows = [list(map(int, r)) for r in rows]
    T = len(rows)
    n = len(sample)
    out = []
    for s in range(T + 1):
        anc = []
        for i in sample:
            x = int(i)
            for t in range(T - 1, T - 1 - s, -1):
                x = rows[t][x]
            anc.append(x)
        parent = list(range(n))

        def find(u):
            while parent[u] != u:
                u = parent[u]
            return u

        for i, j in itertools.combinations(range(n), 2):
            if {anc[i]} & {anc[j]}:
                parent[find(j)] = find(i)
        out.append(Partition.from_labels([find(i) for i in range(n)]))
    return out


def distinct_arrangements(nu) -> list:
    """All parent vectors with family sizes nu (0-based parents)."""
    base = [i for i, c in enumerate(nu) for _ in range(c)]
    return sorted(set(itertools.permutations(base)))


# ---------------------------------------------------------------- resampling

def _random_weights(rng, N):
    # mix of flat, peaked and sparse weight vectors
    kind = rng.integers(3)
    if kind == 0:
        w = rng.dirichlet(np.ones(N))
    elif kind == 1:
        w = rng.dirichlet(np.full(N, 0.2))
    else:
        w = rng.dirichlet(np.ones(N)) * (rng.random(N) < 0.5)
        if w.sum() == 0:
            w[rng.integers(N)] = 1.0
    return w / w.sum()


def check_sum_exactness(seed: int = 0, vectors: int = 10_000) -> list:
    rng = make_rng(seed, 1)
    checks = []
    for scheme in Scheme:
        bad = 0
        for _ in range(vectors):
            N = int(rng.integers(2, 65))
            nu = resample_counts_batch(scheme, _random_weights(rng, N), 1, rng)[0]
            bad += int(nu.sum() != N or nu.min() < 0)
        checks.append(Check(f"sum exactness [{scheme.value}]", bad == 0,
                            f"{vectors} weight vectors, {bad} violations"))
    return checks


def check_unbiasedness(seed: int = 0, replicates: int = 100_000,
                       sizes: Sequence[int] = (4, 16, 64)) -> list:
    """|mean(nu_i) - N w_i| <= 4 SE on at least 99% of coordinates, per scheme."""
    rng = make_rng(seed, 2)
    weights = {}
    for N in sizes:
        # flat weights with a couple of exact zeros; tiny positive weights would
        # almost never be drawn and leave a zero empirical SE
        w = rng.dirichlet(np.ones(N))
        w[rng.choice(N, size=max(1, N // 16), replace=False)] = 0.0
        weights[N] = w / w.sum()
    checks = []
    for scheme in Scheme:
        within = total = 0
        worst = 0.0
        for N, w in weights.items():
            nu = resample_counts_batch(scheme, w, replicates, rng)
            mean = nu.mean(axis=0)
            se = nu.std(axis=0, ddof=1) / math.sqrt(replicates)
            err = np.abs(mean - N * w)
            ok = err <= 4 * se + 1e-9
            within += int(ok.sum())
            total += N
            z = np.where(se > 0, err / np.where(se > 0, se, 1), np.where(err > 1e-9, np.inf, 0))
            worst = max(worst, float(z.max()))
        checks.append(Check(f"unbiasedness [{scheme.value}]", within >= 0.99 * total,
                            f"{within}/{total} coordinates within 4 SE, max |z|={worst:.2f}, "
                            f"{replicates} draws per N in {tuple(sizes)}"))
    return checks


def check_two_point_support(seed: int = 0, vectors: int = 2_000, draws: int = 50) -> list:
    """Strict for the systematic variants; residual_stratified is reported as a probe."""
    rng = make_rng(seed, 3)
    checks = []
    for scheme in (Scheme.SYSTEMATIC, Scheme.RESIDUAL_SYSTEMATIC, Scheme.RESIDUAL_STRATIFIED):
        bad = 0
        for _ in range(vectors):
            N = int(rng.integers(2, 65))
            w = _random_weights(rng, N)
            nu = resample_counts_batch(scheme, w, draws, rng)
            bad += sum(not is_two_point_support(row, w) for row in nu)
        if scheme in STOCHASTIC_ROUNDING:
            checks.append(Check(f"two-point support [{scheme.value}]", bad == 0,
                                f"{vectors * draws} draws, {bad} outside support"))
        else:
            checks.append(Check(f"two-point support probe [{scheme.value}]", True,
                                f"informational: {bad}/{vectors * draws} draws outside support"))
    return checks


UNIFORMITY_CASES = ((2, 0), (1, 1), (3, 0, 0), (2, 1, 0), (1, 1, 1), (0, 1, 2),
                    (4, 0, 0, 0), (3, 1, 0, 0), (2, 2, 0, 0), (2, 1, 1, 0), (1, 1, 1, 1),
                    (0, 2, 1, 1))


def check_slot_uniformity(seed: int = 0, draws: int = 100_000,
                          alpha: float = DEFAULT_ALPHA) -> list:
    """Slot assignment given counts is uniform over all consistent assignments."""
    rng = make_rng(seed, 4)
    checks = []
    for nu in UNIFORMITY_CASES:
        arrangements = distinct_arrangements(nu)
        index = {a: i for i, a in enumerate(arrangements)}
        rows = assign_slots_batch(np.tile(nu, (draws, 1)), rng)
        freq = np.zeros(len(arrangements))
        unknown = 0
        for row, c in zip(*np.unique(rows, axis=0, return_counts=True)):
            key = tuple(int(v) for v in row)
            if key in index:
                freq[index[key]] += c
            else:
                unknown += c
        if len(arrangements) == 1:
            ok, detail = unknown == 0, f"single arrangement, {unknown} invalid draws"
        else:
            stat, p = stats.chisquare(freq)
            ok = unknown == 0 and p > alpha
            detail = (f"{len(arrangements)} arrangements, chi2={stat:.3f} p={p:.4f}, "
                      f"{unknown} invalid draws")
        checks.append(Check(f"slot uniformity nu={nu}", ok, detail))
    return checks


def check_systematic_second_moment(seed: int = 0, replicates: int = 100_000) -> list:
    """Monte Carlo E[(nu_i)_2] under systematic resampling vs the closed form, 4 SE."""
    rng = make_rng(seed, 5)
    checks = []
    for N in (8, 32):
        w = _random_weights(rng, N)
        nu = resample_counts_batch(Scheme.SYSTEMATIC, w, replicates, rng).astype(float)
        ff2 = nu * (nu - 1)
        mean = ff2.mean(axis=0)
        se = ff2.std(axis=0, ddof=1) / math.sqrt(replicates)
        exact = second_moment_stochastic_rounding(w, N)
        ok = np.abs(mean - exact) <= 4 * se + 1e-9
        checks.append(Check(f"systematic E[(nu)_2] closed form N={N}", bool(ok.all()),
                            f"{int(ok.sum())}/{N} coordinates within 4 SE"))
    return checks


def suite_resampling(seed: int = 0) -> list:
    return (check_sum_exactness(seed) + check_unbiasedness(seed) + check_two_point_support(seed)
            + check_slot_uniformity(seed) + check_systematic_second_moment(seed))


# ---------------------------------------------------------------- genealogy

def check_genealogy_equivalence(seed: int = 0, cases: int = 10_000) -> Check:
    rng = make_rng(seed, 10)
    mismatches = 0
    for _ in range(cases):
        N = int(rng.integers(2, 6))
        T = int(rng.integers(0, 5))
        rows = rng.integers(0, N, size=(T, N))
        n = int(rng.integers(1, N + 1))
        sample = rng.choice(N, size=n, replace=False)
        got = list(extract_genealogy(rows.reshape(T, N), sample).partitions)
        if got != path_following_partitions(rows, sample):
            mismatches += 1
    return Check("genealogy vs path-following oracle", mismatches == 0,
                 f"{cases} random instances with N <= 5, T <= 4, {mismatches} mismatches")


def random_offspring(rng, N: int, size: int) -> np.ndarray:
    """Offspring vectors (sum N) from multinomials with varied concentration."""
    out = np.empty((size, N), dtype=np.int64)
    for r in range(size):
        out[r] = rng.multinomial(N, _random_weights(rng, N))
    return out


def check_rate_inequality(seed: int = 0, vectors: int = 100_000, tol: float = 1e-12) -> Check:
    """c_N^2 <= D_N N / (N - 1) on random offspring vectors, N in 3..64."""
    rng = make_rng(seed, 11)
    Ns = rng.integers(3, 65, size=vectors)
    worst = -math.inf
    bad = 0
    for N in np.unique(Ns):
        N = int(N)
        nu = random_offspring(rng, N, int((Ns == N).sum()))
        c, d = merger_rates(nu)
        gap = c * c - d * N / (N - 1)
        bad += int((gap > tol).sum())
        worst = max(worst, float(gap.max()))
    # scalar formulas agree with the vectorised ones
    nu = random_offspring(rng, 17, 200)
    c, d = merger_rates(nu)
    agree = all(abs(pair_merger_rate(v) - ci) < 1e-15 and abs(multiple_merger_bound(v) - di) < 1e-15
                for v, ci, di in zip(nu, c, d))
    return Check("c_N^2 <= D_N N/(N-1)", bad == 0 and agree,
                 f"{vectors} offspring vectors, {bad} violations, max gap {worst:.3g}")


def check_merger_rate_range(seed: int = 0, vectors: int = 20_000) -> Check:
    rng = make_rng(seed, 12)
    bad = 0
    for _ in range(vectors):
        N = int(rng.integers(2, 33))
        nu = random_offspring(rng, N, 1)[0]
        c = pair_merger_rate(nu)
        if not 0 <= c <= 1:
            bad += 1
        if (c == 0) != bool(nu.max() <= 1) or (c == 1) != bool(nu.max() == N):
            bad += 1
    for N in (2, 5, 9):
        one = np.zeros(N, dtype=int)
        one[0] = N
        bad += int(pair_merger_rate(one) != 1) + int(pair_merger_rate(np.ones(N)) != 0)
    return Check("c_N range and extremes", bad == 0, f"{vectors} vectors, {bad} violations")


def check_block_monotonicity(seed: int = 0, cases: int = 2_000) -> Check:
    rng = make_rng(seed, 13)
    bad = 0
    for _ in range(cases):
        N = int(rng.integers(2, 20))
        T = int(rng.integers(1, 30))
        rows = rng.integers(0, N, size=(T, N))
        n = int(rng.integers(1, N + 1))
        path = extract_genealogy(rows, rng.choice(N, n, replace=False))
        counts = path.block_counts()
        coarser = all(b.is_coarsening_of(a) for a, b in zip(path.partitions, path.partitions[1:]))
        grid = np.sort(rng.random(5) * (path.cumulative_clock[-1] + 0.5))
        rescaled = rescaled_block_counts(path, grid).block_counts
        known = [k for k in rescaled if k is not None]
        bad += int(np.any(np.diff(counts) > 0) or not coarser
                   or any(b > a for a, b in zip(known, known[1:])))
    return Check("block counts non-increasing along paths", bad == 0,
                 f"{cases} random ancestries, {bad} violations")


def check_tau_properties(seed: int = 0, cases: int = 2_000) -> Check:
    """tau is non-decreasing and left-continuous: tau(t) = tau(t - h) for small h > 0."""
    rng = make_rng(seed, 14)
    bad = 0
    for _ in range(cases):
        c = rng.random(int(rng.integers(1, 30))) * (rng.random() < 0.9)
        clock = np.cumsum(c)
        ts = np.sort(rng.random(20) * (clock[-1] + 1.0))
        vals = [tau(c, t) for t in ts]
        bad += int(any(b < a for a, b in zip(vals, vals[1:])))
        for s, level in enumerate(clock, start=1):
            if level > 0 and (tau(c, level) > s or tau(c, level - 1e-9 * max(level, 1)) > s):
                bad += 1
            # just above a level the clock must run past step s
            if s < clock.size and level < clock[-1] and tau(c, level * (1 + 1e-9) + 1e-15) <= s:
                bad += 1
    return Check("tau monotone and left-continuous", bad == 0, f"{cases} clocks, {bad} violations")


def suite_genealogy(seed: int = 0) -> list:
    return [check_genealogy_equivalence(seed), check_rate_inequality(seed),
            check_merger_rate_range(seed), check_block_monotonicity(seed),
            check_tau_properties(seed)]


# ---------------------------------------------------------------- kingman

def check_generator(max_n: int = 6) -> Check:
    bad = 0
    for n in range(1, max_n + 1):
        parts, Q = generator_matrix(n)
        bad += int(np.max(np.abs(Q.sum(axis=1))) != 0)
        for i, xi in enumerate(parts):
            k = len(xi)
            targets = sum(merges_one_pair(xi, eta) for eta in parts)
            bad += int(targets != k * (k - 1) // 2)
            bad += int(np.count_nonzero(Q[i]) != targets + (k > 1))
    return Check("generator rows and pair-merger targets", bad == 0,
                 f"n = 1..{max_n}, {bad} violations")


def check_marginals_vs_ode() -> Check:
    worst = 0.0
    for n in range(2, 13):
        for t in (0.0, 0.05, 0.25, 0.5, 1.0, 2.0, 5.0):
            p = block_count_marginal(n, t)
            q = block_count_marginal(n, t, method="ode")
            worst = max(worst, float(np.max(np.abs(p - q))), abs(p.sum() - 1))
    return Check("spectral marginals vs ODE", worst < 1e-8, f"max deviation {worst:.3g}")


def kingman_block_count_sample(n: int, grid: Sequence[float], replicates: int, seed: int
                               ) -> np.ndarray:
    """len(grid) x n table of block counts of simulated n-coalescents."""
    grid = np.asarray(grid, dtype=float)
    table = np.zeros((grid.size, n), dtype=np.int64)
    horizon = float(grid.max())
    for r in range(replicates):
        ev = simulate_kingman(n, horizon, make_rng(seed, r))
        times = np.array([t for t, _ in ev])
        idx = np.searchsorted(times, grid, side="right") - 1
        for g, i in enumerate(idx):
            table[g, len(ev[i][1]) - 1] += 1
    return table


def check_kingman_self_calibration(seed: int = 0, replicates: int = 100_000,
                                   alpha: float = DEFAULT_ALPHA,
                                   sizes: Sequence[int] = (2, 4, 6)) -> list:
    grid = (0.25, 1.0, 2.0)
    checks = []
    for n in sizes:
        table = kingman_block_count_sample(n, grid, replicates, seed * 1000 + n)
        for t, row in zip(grid, table):
            rep = chi_square_block_counts(row, block_count_marginal(n, t), alpha)
            checks.append(Check(f"simulator vs marginal n={n} t={t:g}", rep.passed, rep.line()))
    return checks


def check_kingman_times(seed: int = 0, replicates: int = 100_000) -> list:
    checks = []
    for n, expected in ((2, 1.0), (3, 4.0 / 3.0)):
        tot = np.empty(replicates)
        bad = 0
        for r in range(replicates):
            ev = simulate_kingman(n, math.inf, make_rng(seed + 7, r))
            sizes = [len(p) for _, p in ev]
            bad += int(any(a - b != 1 for a, b in zip(sizes, sizes[1:])))
            tot[r] = ev[-1][0]
        se = tot.std(ddof=1) / math.sqrt(replicates)
        checks.append(Check(f"n={n} total coalescence time mean", abs(tot.mean() - expected) <= 3 * se
                            and bad == 0,
                            f"mean {tot.mean():.4f} vs {expected:.4f}, 3 SE = {3 * se:.4f}, "
                            f"{bad} multiple mergers"))
        if n == 2:
            v = tot.var(ddof=1)
            v_se = math.sqrt(np.var((tot - tot.mean()) ** 2, ddof=1) / replicates)
            checks.append(Check("n=2 merger time variance", abs(v - 1) <= 3 * v_se,
                                f"variance {v:.4f} vs 1, 3 SE = {3 * v_se:.4f}"))
            rep = ks_exp1(tot)
            checks.append(Check("n=2 merger time KS vs Exp(1)", rep.passed, rep.line()))
    return checks


def suite_kingman(seed: int = 0, replicates: int = 100_000) -> list:
    return ([check_generator(), check_marginals_vs_ode()]
            + check_kingman_self_calibration(seed, replicates)
            + check_kingman_times(seed, replicates))


# ---------------------------------------------------------------- moments

def check_moment_bound(seed: int = 0, sizes: Sequence[int] = (16, 64, 256), T: int = 100,
                       replicates: int = 200, a: float = 2.0) -> list:
    """Bounded model, systematic resampling: ratio <= (a^2+1)^3/(2(N-2)) + 3 SE, decreasing in N."""
    model = bounded_potential_model(a=a)
    checks = []
    ratios = []
    for N in sizes:
        rep = estimate_moment_ratio(model, Scheme.SYSTEMATIC, N, T, replicates, seed=seed)
        b = rounding_moment_bound(a, N)
        ratio = rep.ratio if rep.ratio_defined else 0.0
        se = rep.ratio_se if rep.ratio_defined else 0.0
        ratios.append(ratio)
        checks.append(Check(f"moment ratio bound N={N}", ratio <= b + 3 * se,
                            f"ratio {ratio:.4g} (SE {se:.2g}, max over t {rep.max_ratio_over_t:.3g}) "
                            f"<= b_N {b:.4g}; lhs {rep.lhs:.4g} rhs {rep.rhs:.4g}"))
    dec = all(y < x for x, y in zip(ratios, ratios[1:]))
    checks.append(Check("moment ratio decreasing in N", dec,
                        ", ".join(f"N={N}: {r:.4g}" for N, r in zip(sizes, ratios))))
    return checks


def check_moment_recomputation(seed: int = 0) -> list:
    checks = []
    rep = moment_ratio_from_counts([np.array([[3, 1, 0, 0]])])
    checks.append(Check("moment ratio hand example nu=(3,1,0,0)",
                        rep.lhs == 0.25 and rep.rhs == 0.5 and rep.ratio == 0.5,
                        f"lhs {rep.lhs} rhs {rep.rhs} ratio {rep.ratio}"))
    rep = moment_ratio_from_counts([np.ones((3, 5), dtype=int)] * 2)
    checks.append(Check("moment ratio undefined for nu = 1", not rep.ratio_defined,
                        f"lhs {rep.lhs} rhs {rep.rhs}"))
    # lhs/rhs equal a direct recomputation from stored offspring counts
    model = bounded_potential_model()
    rng_seed = seed + 99
    counts = [run_smc(model, 12, 20, Scheme.SYSTEMATIC, make_rng(rng_seed, r)).offspring
              for r in range(5)]
    rep = estimate_moment_ratio(model, Scheme.SYSTEMATIC, 12, 20, 5, seed=rng_seed)
    N = 12
    third = np.mean([sum(math.perm(int(v), 3) for v in row) / math.perm(N, 3)
                     for c in counts for row in c])
    second = np.mean([sum(math.perm(int(v), 2) for v in row) / math.perm(N, 2)
                      for c in counts for row in c])
    checks.append(Check("moment ratio recomputation from offspring counts",
                        abs(rep.lhs - third) < 1e-15 and abs(rep.rhs - second) < 1e-15,
                        f"lhs {rep.lhs} vs {third}, rhs {rep.rhs} vs {second}"))
    return checks


def suite_moment(seed: int = 0) -> list:
    return check_moment_recomputation(seed) + check_moment_bound(seed)


def check_csmc_bound(seed: int = 0, sizes: Sequence[int] = (16, 64), T: int = 50,
                     replicates: int = 40, a: float = 2.0, eps: float = 0.5) -> list:
    """Conditional SMC: ratio <= (3a^6/(2eps^6) + a^10/eps^10)/N + 3 SE; invariants on every run."""
    model = bounded_potential_model(a=a, eps=eps)
    checks = []
    for N in sizes:
        try:
            rep = estimate_moment_ratio(model, Scheme.MULTINOMIAL, N, T, replicates, seed=seed,
                                        csmc=True, check_bounds=True)
        except AssertionError as exc:
            checks.append(Check(f"conditional SMC N={N}", False, f"invariant broken: {exc}"))
            continue
        b = csmc_moment_bound(a, eps, N)
        checks.append(Check(f"conditional SMC invariants N={N}", True,
                            f"{replicates} runs x {T} generations"))
        checks.append(Check(f"conditional SMC moment ratio N={N}",
                            rep.ratio <= b + 3 * rep.ratio_se,
                            f"ratio {rep.ratio:.4g} (SE {rep.ratio_se:.2g}) <= b_N {b:.6g}"))
    return checks


def suite_csmc(seed: int = 0) -> list:
    return check_csmc_bound(seed)


# ---------------------------------------------------------------- time scales

def check_delta_sweep(seed: int = 0, pairs: int = 1_000_000) -> Check:
    rng = make_rng(seed, 20)
    N = rng.integers(1, 129, size=pairs)
    w = rng.random(pairs)
    # a quarter of the sweep sits exactly on the lattice k/N, including 0 and 1
    lattice = rng.random(pairs) < 0.25
    w[lattice] = np.floor(rng.random(int(lattice.sum())) * (N[lattice] + 1)) / N[lattice]
    d = timescale_delta(w, N)
    edges = timescale_delta(np.array([0.0, 1.0, 1.0]), np.array([7, 7, 128]))
    ok = bool(d.min() >= -1e-12) and bool(np.all(np.abs(edges) <= 1e-12))
    return Check("multinomial minus stochastic rounding second moment >= 0", ok,
                 f"{pairs} (w, N) pairs with N <= 128, min {d.min():.3g}")


def check_closed_forms_by_enumeration(max_N: int = 12, tol: float = 1e-12) -> Check:
    worst = 0.0
    for N in range(1, max_N + 1):
        ws = sorted(set([k / N for k in range(N + 1)] + [i / 37 for i in range(38)]))
        for w in ws:
            m = second_moment_multinomial(w, N)
            s = second_moment_stochastic_rounding(w, N)
            worst = max(worst, abs(m - float(binomial_second_moment(w, N))),
                        abs(s - float(two_point_second_moment(w, N))))
    return Check("second-moment closed forms vs enumeration", worst <= tol,
                 f"N <= {max_N}, max abs error {worst:.3g}")


def check_equal_rate(seed: int = 0, replicates: int = 100_000, sizes: Sequence[int] = (16, 64)
                     ) -> list:
    """Fixed weights: E[c_N] agrees across systematic, residual_systematic and the closed form."""
    rng = make_rng(seed, 21)
    checks = []
    for N in sizes:
        w = _random_weights(rng, N)
        exact = expected_pair_merger_rate(w, "stochastic_rounding")
        m1, s1 = monte_carlo_pair_merger_rate(Scheme.SYSTEMATIC, w, replicates, rng)
        m2, s2 = monte_carlo_pair_merger_rate(Scheme.RESIDUAL_SYSTEMATIC, w, replicates, rng)
        ok = (abs(m1 - exact) <= 4 * s1 + 1e-12 and abs(m2 - exact) <= 4 * s2 + 1e-12
              and abs(m1 - m2) <= 4 * math.hypot(s1, s2) + 1e-12)
        checks.append(Check(f"equal E[c_N] across stochastic roundings N={N}", ok,
                            f"systematic {m1:.6f} (SE {s1:.2g}), residual_systematic {m2:.6f} "
                            f"(SE {s2:.2g}), closed form {exact:.6f}"))
    return checks


def suite_timescale(seed: int = 0) -> list:
    return [check_delta_sweep(seed), check_closed_forms_by_enumeration()] + check_equal_rate(seed)


# ---------------------------------------------------------------- likelihood

def check_marginal_likelihood(seed: int = 0, N: int = 256, replicates: int = 20_000) -> Check:
    """Mean Z_hat of the bootstrap filter on the two-state HMM within 3 SE of the exact value."""
    hmm = two_state_hmm()
    model = hmm_model(hmm)
    z = np.array([marginal_likelihood(run_smc(model, N, hmm.T, Scheme.MULTINOMIAL,
                                              make_rng(seed, r)))
                  for r in range(replicates)])
    exact = hmm_exact_likelihood(hmm)
    se = z.std(ddof=1) / math.sqrt(replicates)
    return Check("mean Z_hat vs exact HMM likelihood", abs(z.mean() - exact) <= 3 * se,
                 f"mean {z.mean():.8f} (SE {se:.2g}) vs exact {exact:.8f}, N={N}, "
                 f"{replicates} runs")


SUITES: dict[str, Callable[[int], list]] = {
    "resampling": suite_resampling,
    "genealogy": suite_genealogy,
    "kingman": suite_kingman,
    "moment": suite_moment,
    "timescale": suite_timescale,
    "csmc": suite_csmc,
}


def run_suite(name: str, seed: int = 0) -> list:
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](seed)
