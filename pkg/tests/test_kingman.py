import math

import numpy as np
import pytest

from smcgen.core import SizeError, make_rng
from smcgen.kingman import (block_count_marginal, coalescence_times, death_chain_generator,
                            expected_pair_coalescence_time, generator_matrix, merges_one_pair,
                            set_partitions, simulate_kingman)

BELL = [1, 1, 2, 5, 15, 52, 203]


@pytest.mark.parametrize("n", range(1, 7))
def test_generator_structure(n):
    parts, Q = generator_matrix(n)
    assert len(parts) == BELL[n]
    assert np.all(Q.sum(axis=1) == 0)
    for i, xi in enumerate(parts):
        k = len(xi)
        assert Q[i, i] == -k * (k - 1) / 2
        off = [j for j in range(len(parts)) if j != i and Q[i, j] != 0]
        assert len(off) == k * (k - 1) // 2
        assert all(Q[i, j] == 1 and merges_one_pair(xi, parts[j]) for j in off)


def test_set_partitions_distinct():
    parts = set_partitions(5)
    assert len(set(parts)) == 52


def test_simulate_n1_has_no_events():
    assert len(simulate_kingman(1, 10.0, make_rng(0))) == 1


def test_simulate_single_pair_mergers_only():
    for r in range(200):
        ev = simulate_kingman(6, math.inf, make_rng(1, r))
        sizes = [len(p) for _, p in ev]
        assert sizes == list(range(6, 0, -1))
        assert all(b.is_coarsening_of(a) for (_, a), (_, b) in zip(ev, ev[1:]))
        assert all(t2 > t1 for (t1, _), (t2, _) in zip(ev, ev[1:]))


def test_horizon_truncates():
    ev = simulate_kingman(10, 0.01, make_rng(2))
    assert all(t <= 0.01 for t, _ in ev)


def test_pair_time_mean_and_variance():
    reps = 20_000
    t = np.array([coalescence_times(2, make_rng(3, r))[0] for r in range(reps)])
    se = t.std(ddof=1) / math.sqrt(reps)
    assert abs(t.mean() - expected_pair_coalescence_time()) <= 3 * se
    v_se = math.sqrt(np.var((t - t.mean()) ** 2, ddof=1) / reps)
    assert abs(t.var(ddof=1) - 1) <= 3 * v_se


def test_three_lineage_total_time():
    reps = 20_000
    t = np.array([coalescence_times(3, make_rng(4, r))[-1] for r in range(reps)])
    assert abs(t.mean() - 4 / 3) <= 3 * t.std(ddof=1) / math.sqrt(reps)


def test_expected_pair_time():
    assert expected_pair_coalescence_time() == 1.0


@pytest.mark.parametrize("t", [0.0, 0.1, 1.0, 3.0])
def test_two_lineages_marginal(t):
    p = block_count_marginal(2, t)
    assert p[1] == pytest.approx(math.exp(-t), abs=1e-15)


@pytest.mark.parametrize("n", range(1, 13))
def test_marginal_at_zero_is_point_mass(n):
    p = block_count_marginal(n, 0.0)
    assert p[-1] == pytest.approx(1.0, abs=1e-12) and p[:-1].sum() == pytest.approx(0, abs=1e-12)


def test_marginal_matches_dense_ode():
    p = block_count_marginal(4, 0.5)
    q = block_count_marginal(4, 0.5, method="ode")
    assert np.max(np.abs(p - q)) <= 1e-8


def test_marginal_matches_matrix_exponential():
    from scipy.linalg import expm
    for n in (3, 7, 12):
        for t in (0.05, 0.7, 2.5):
            exact = expm(death_chain_generator(n) * t)[n - 1]
            p = block_count_marginal(n, t)
            assert np.max(np.abs(p - exact)) <= 1e-10
            assert abs(p.sum() - 1) <= 1e-10 and p.min() >= 0


def test_marginal_refuses_large_n():
    with pytest.raises(SizeError, match="ode"):
        block_count_marginal(13, 1.0)
    p = block_count_marginal(20, 1.0, method="ode")
    assert abs(p.sum() - 1) <= 1e-10
    with pytest.raises(ValueError):
        block_count_marginal(4, -1.0)
