"""Empirical checks of the moment conditions and goodness-of-fit tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .core import SizeError, falling_factorial_array, make_rng, MalformedInputError
from .genealogy import merger_rates
from .models import ModelSpec
from .resampling import STOCHASTIC_ROUNDING, Scheme, resample_counts_batch
from .smc import ImmortalPath, SmcTrace, check_csmc_invariants, run_csmc, run_smc

DEFAULT_ALPHA = 0.001


def rounding_moment_bound(a: float, N: int) -> float:
    """b_N = (a^2 + 1)^3 / (2 (N - 2)) for stochastic rounding with 1/a <= g <= a."""
    return (a * a + 1) ** 3 / (2 * (N - 2))


def csmc_moment_bound(a: float, eps: float, N: int) -> float:
    """b_N = (3 a^6 / (2 eps^6) + a^10 / eps^10) / N for multinomial conditional SMC."""
    r = a / eps
    return (1.5 * r**6 + r**10) / N


@dataclass
class MomentRatioReport:
    N: int
    lhs: float
    rhs: float
    ratio: float          # nan when rhs == 0
    lhs_se: float
    rhs_se: float
    ratio_se: float
    bound: Optional[float]
    max_ratio_over_t: float
    replicates: int
    generations: int
    per_replicate: np.ndarray = field(repr=False, default=None)

    @property
    def ratio_defined(self) -> bool:
        return self.rhs > 0

    def within_bound(self, n_se: float = 3.0) -> Optional[bool]:
        if self.bound is None:
            return None
        if not self.ratio_defined:
            return True
        return self.ratio <= self.bound + n_se * self.ratio_se

    def as_dict(self) -> dict:
        keys = ("N", "lhs", "rhs", "ratio", "lhs_se", "rhs_se", "ratio_se", "bound",
                "max_ratio_over_t", "replicates", "generations")
        return {k: getattr(self, k) for k in keys}


def _third_second(offspring: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    N = offspring.shape[1]
    nu = np.asarray(offspring, dtype=float)
    third = falling_factorial_array(nu, 3).sum(axis=1) / (N * (N - 1) * (N - 2))
    second = falling_factorial_array(nu, 2).sum(axis=1) / (N * (N - 1))
    return third, second


def moment_ratio_from_counts(counts: Sequence[np.ndarray], bound: Optional[float] = None
                             ) -> MomentRatioReport:
    """Moment-ratio report from per-replicate (generations x N) offspring arrays.

    lhs and rhs average sum_i (nu_i)_3 / (N)_3 and sum_i (nu_i)_2 / (N)_2 over
    all generations of all replicates.  Standard errors treat replicates as
    the independent units; the ratio error uses the delta method.
    """
    counts = [np.atleast_2d(np.asarray(c)) for c in counts]
    if not counts:
        raise SizeError("need at least one replicate")
    N = counts[0].shape[1]
    if N <= 3:
        raise SizeError("moment ratio needs N > 3")
    thirds, seconds = zip(*(_third_second(c) for c in counts))
    L = np.array([x.mean() for x in thirds])
    R = np.array([x.mean() for x in seconds])
    lhs, rhs = float(L.mean()), float(R.mean())
    n = len(counts)

    def se(v):
        return float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan

    if rhs > 0:
        ratio = lhs / rhs
        ratio_se = se(L - ratio * R) / rhs
    else:
        ratio, ratio_se = math.nan, math.nan

    gens = min(c.shape[0] for c in counts)
    if gens:
        Lt = np.mean([x[:gens] for x in thirds], axis=0)
        Rt = np.mean([x[:gens] for x in seconds], axis=0)
        ok = Rt > 0
        max_t = float(np.max(Lt[ok] / Rt[ok])) if ok.any() else math.nan
    else:
        max_t = math.nan
    return MomentRatioReport(N, lhs, rhs, ratio, se(L), se(R), ratio_se, bound, max_t, n,
                             int(sum(c.shape[0] for c in counts)),
                             per_replicate=np.column_stack([L, R]))


def estimate_moment_ratio(model: ModelSpec, scheme, N: int, T: int, replicates: int,
                          seed: int = 0, csmc: bool = False,
                          check_bounds: bool = False) -> MomentRatioReport:
    """Run `replicates` independent SMC (or conditional SMC) runs and report the ratio.

    Replicate r uses stream (seed, r).  For conditional SMC the immortal
    trajectory is a path traced back from a uniformly chosen terminal
    particle of a preliminary standard run, occupying slot 1 throughout;
    the immortal-lineage invariants are asserted on every run.
    The attached bound is the closed-form b_N that applies to the setting,
    if any.
    """
    if replicates < 2:
        raise SizeError("need at least two replicates")
    if N <= 3:
        raise SizeError("moment ratio needs N > 3")
    scheme = Scheme.parse(scheme)
    counts = []
    for r in range(replicates):
        rng = make_rng(seed, r)
        if csmc:
            ref = run_smc(model, N, T, Scheme.MULTINOMIAL, rng)
            immortal = ImmortalPath.from_trace(ref, int(rng.integers(N)))
            trace = run_csmc(model, N, T, immortal, rng, check_bounds=check_bounds)
            check_csmc_invariants(trace, immortal)
        else:
            trace = run_smc(model, N, T, scheme, rng, check_bounds=check_bounds)
        counts.append(trace.offspring)
    bound = None
    if model.a is not None:
        if csmc and model.eps is not None:
            bound = csmc_moment_bound(model.a, model.eps, N)
        elif not csmc and scheme in STOCHASTIC_ROUNDING:
            bound = rounding_moment_bound(model.a, N)
    return moment_ratio_from_counts(counts, bound)


# Fixed-weight second factorial moments of a single family size.

def second_moment_multinomial(w, N: int):
    """E[(nu_i)_2] = N (N - 1) w_i^2 under multinomial resampling."""
    w = np.asarray(w, dtype=float)
    out = N * (N - 1) * w * w
    return float(out) if out.ndim == 0 else out


def second_moment_stochastic_rounding(w, N: int):
    """E[(nu_i)_2] = k (2 (N w_i - k) + k - 1), k = floor(N w_i), under stochastic rounding."""
    w = np.asarray(w, dtype=float)
    x = N * w
    k = np.floor(x)
    out = k * (2 * (x - k) + k - 1)
    return float(out) if out.ndim == 0 else out


def timescale_delta(w, N: int):
    """Multinomial minus stochastic-rounding second moment (never negative)."""
    return second_moment_multinomial(w, N) - second_moment_stochastic_rounding(w, N)


def expected_pair_merger_rate(w, kind: str = "stochastic_rounding") -> float:
    """E[c_N | w] for fixed weights under multinomial or any stochastic rounding."""
    w = np.asarray(w, dtype=float)
    N = w.size
    if kind == "multinomial":
        m = second_moment_multinomial(w, N)
    elif kind == "stochastic_rounding":
        m = second_moment_stochastic_rounding(w, N)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return float(np.sum(m) / (N * (N - 1)))


def monte_carlo_pair_merger_rate(scheme, w, replicates: int, rng: np.random.Generator
                                 ) -> tuple[float, float]:
    """Mean and standard error of c_N over repeated resampling of fixed weights."""
    counts = resample_counts_batch(scheme, w, replicates, rng)
    c, _ = merger_rates(counts)
    return float(c.mean()), float(c.std(ddof=1) / math.sqrt(replicates))


@dataclass(frozen=True)
class FitReport:
    kind: str
    statistic: float
    sample_size: int
    reference: str
    alpha: float
    p_value: float
    critical_value: float
    passed: bool
    df: Optional[int] = None

    def line(self) -> str:
        verdict = "pass" if self.passed else "fail"
        extra = f" df={self.df}" if self.df is not None else ""
        return (f"{self.kind} vs {self.reference}: stat={self.statistic:.6g} "
                f"crit={self.critical_value:.6g} p={self.p_value:.4g}{extra} n={self.sample_size} "
                f"alpha={self.alpha:g} -> {verdict}")


def ks_exp1(samples, alpha: float = DEFAULT_ALPHA) -> FitReport:
    """One-sample Kolmogorov-Smirnov test against the Exp(1) law.

    Critical values come from the asymptotic Kolmogorov distribution for
    100 or more samples and from the exact finite-n law below that.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise SizeError("no samples")
    if n < 30:
        raise SizeError("KS test needs at least 30 samples")
    F = -np.expm1(-np.clip(x, 0.0, None))
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    if n >= 100:
        crit = float(stats.kstwobign.isf(alpha) / math.sqrt(n))
        p = float(stats.kstwobign.sf(d * math.sqrt(n)))
    else:
        crit = float(stats.kstwo.isf(alpha, n))
        p = float(stats.kstwo.sf(d, n))
    return FitReport("KS", d, n, "Exp(1)", alpha, p, crit, d < crit)


def _pool(observed, expected, probs, min_expected=5.0, min_prob=1e-6):
    groups_o, groups_e = [], []
    acc_o = acc_e = acc_p = 0.0
    for o, e, p in zip(observed, expected, probs):
        acc_o += o
        acc_e += e
        acc_p += p
        if acc_e >= min_expected and acc_p >= min_prob:
            groups_o.append(acc_o)
            groups_e.append(acc_e)
            acc_o = acc_e = acc_p = 0.0
    if acc_e > 0 or acc_o > 0:
        if groups_o:
            groups_o[-1] += acc_o
            groups_e[-1] += acc_e
        else:
            groups_o.append(acc_o)
            groups_e.append(acc_e)
    return np.array(groups_o), np.array(groups_e)


def chi_square_block_counts(empirical, reference, alpha: float = DEFAULT_ALPHA,
                            label: str = "Kingman block counts") -> FitReport:
    """Pearson chi-square of observed block-count frequencies against a law.

    Adjacent categories are pooled until each pooled cell has expected
    count >= 5 and probability >= 1e-6.
    """
    obs = np.asarray(empirical, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if obs.shape != ref.shape or obs.ndim != 1:
        raise MalformedInputError("empirical and reference must have the same length")
    total = obs.sum()
    if total <= 0:
        raise SizeError("no observations")
    o, e = _pool(obs, total * ref, ref)
    stat = float(np.sum((o - e) ** 2 / e))
    df = len(o) - 1
    if df == 0:
        return FitReport("chi-square", stat, int(total), label, alpha, 1.0, math.inf, True, 0)
    p = float(stats.chi2.sf(stat, df))
    crit = float(stats.chi2.isf(alpha, df))
    return FitReport("chi-square", stat, int(total), label, alpha, p, crit, p > alpha, df)


def weight_spread_frequency(trace: SmcTrace, delta: float) -> float:
    """Fraction of generations with max_i w_i - min_i w_i >= 2 delta / N."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    w = trace.weights
    spread = w.max(axis=1) - w.min(axis=1)
    return float(np.mean(spread >= 2 * delta / trace.N))
