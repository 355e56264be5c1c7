import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smcgen.core import (AncestryMatrix, MalformedInputError, Partition, RngStream, SizeError,
                         counts_from_assignment, counts_from_rows, falling_factorial,
                         falling_factorial_array, fmt_float, make_rng, merge_by_ancestor,
                         offspring_counts, weight_vector)


def test_falling_factorial_examples():
    assert falling_factorial(4, 2) == 12
    assert falling_factorial(3, 0) == 1
    assert falling_factorial(2, 3) == 0


@given(st.integers(0, 40), st.integers(0, 40))
def test_falling_factorial_matches_product(a, b):
    prod = 1
    for k in range(b):
        prod *= a - k
    assert falling_factorial(a, b) == prod
    assert math.isclose(falling_factorial_array(np.array([a]), b)[0], prod, rel_tol=1e-12)


def test_falling_factorial_rejects_negative():
    with pytest.raises(ValueError):
        falling_factorial(-1, 2)


def test_weight_vector_renormalises():
    w = weight_vector([1, 1, 2])
    assert np.allclose(w, [0.25, 0.25, 0.5])
    assert abs(w.sum() - 1) <= 1e-12


@pytest.mark.parametrize("bad", [[], [0, 0], [1, -1], [np.nan, 1], [np.inf, 1]])
def test_weight_vector_rejects(bad):
    with pytest.raises(MalformedInputError):
        weight_vector(bad)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50).filter(lambda v: sum(v) > 0))
def test_weight_vector_sums_to_one(values):
    w = weight_vector(values)
    assert abs(w.sum() - 1) <= 1e-12
    assert np.all(w >= 0)


def test_offspring_counts_validation():
    assert list(offspring_counts([2, 0, 1])) == [2, 0, 1]
    with pytest.raises(MalformedInputError):
        offspring_counts([2, 2, 0])
    with pytest.raises(MalformedInputError):
        offspring_counts([3, -1, 1])
    with pytest.raises(MalformedInputError):
        offspring_counts([1.5, 1.5])


def test_counts_from_assignment_examples():
    assert list(counts_from_assignment([1, 1, 3], one_based=True)) == [2, 0, 1]
    assert list(counts_from_assignment([1, 2, 3], one_based=True)) == [1, 1, 1]
    assert list(counts_from_assignment([2, 2, 2], one_based=True)) == [0, 3, 0]
    with pytest.raises(MalformedInputError):
        counts_from_assignment([0, 4, 1])


@given(st.integers(1, 30).flatmap(lambda N: st.lists(st.integers(0, N - 1), min_size=N,
                                                      max_size=N)))
def test_counts_from_assignment_sum_to_n(a):
    nu = counts_from_assignment(a)
    assert nu.sum() == len(a)
    assert np.array_equal(counts_from_rows([a])[0], nu)


def test_partition_canonical_form():
    p = Partition(((3, 1), (2,)), 3)
    assert p.blocks == ((1, 3), (2,))
    assert str(p) == "{{1,3},{2}}"
    assert Partition.from_labels(["x", "y", "x"]) == p
    assert len(Partition.singletons(4)) == 4


def test_partition_rejects_non_partitions():
    with pytest.raises(MalformedInputError):
        Partition(((1, 2), (2, 3)), 3)
    with pytest.raises(MalformedInputError):
        Partition(((1,),), 2)


def test_merge_by_ancestor_examples():
    s3 = Partition.singletons(3)
    assert str(merge_by_ancestor(s3, [5, 5, 7])) == "{{1,2},{3}}"
    assert str(merge_by_ancestor(Partition.singletons(2), [4, 9])) == "{{1},{2}}"
    assert str(merge_by_ancestor(s3, [2, 2, 2])) == "{{1,2,3}}"
    p = Partition(((1, 3), (2,)), 3)
    assert str(merge_by_ancestor(p, {(1, 3): 0, (2,): 0})) == "{{1,2,3}}"
    with pytest.raises(MalformedInputError):
        merge_by_ancestor(s3, [1, 2])


def test_coarsening():
    fine = Partition.singletons(3)
    coarse = Partition(((1, 2), (3,)), 3)
    assert coarse.is_coarsening_of(fine)
    assert not fine.is_coarsening_of(coarse)


def test_rng_stream_reproducible_and_distinct():
    a = make_rng(7, 3).random(5)
    b = RngStream(7, 3).generator().random(5)
    assert np.array_equal(a, b)
    c = make_rng(7, 4).random(10_000)
    d = make_rng(7, 3).random(10_000)
    assert not np.array_equal(c, d)
    # crude independence check between neighbouring streams
    assert abs(np.corrcoef(c, d)[0, 1]) < 0.05


def test_ancestry_matrix_csv_round_trip():
    rows = np.array([[0, 0, 2], [1, 2, 2]])
    m = AncestryMatrix(rows)
    text = m.to_csv("seed=1 config_hash=abc")
    assert text.splitlines()[0] == "# seed=1 config_hash=abc"
    assert text.splitlines()[1] == "t,a1,a2,a3"
    assert text.splitlines()[2] == "0,1,1,3"
    assert AncestryMatrix.from_csv(text) == m
    assert np.array_equal(m.offspring(), [[2, 0, 1], [0, 1, 2]])


def test_ancestry_matrix_copies_and_freezes():
    rows = np.array([[0, 1]])
    m = AncestryMatrix(rows)
    rows[0, 0] = 1
    assert m.rows[0, 0] == 0
    with pytest.raises(ValueError):
        m.rows[0, 0] = 1
    with pytest.raises(MalformedInputError):
        AncestryMatrix([[0, 2]])


@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_float_round_trips(x):
    assert float(fmt_float(x)) == x


def test_size_error_is_value_error():
    assert issubclass(SizeError, ValueError)
    assert math.isclose(falling_factorial_array([5.0], 3)[0], 60)
