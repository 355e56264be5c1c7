import math

import numpy as np
import pytest

from smcgen.core import make_rng
from smcgen.genealogy import merger_rates
from smcgen.models import (DiscreteHmm, ModelParameterError, bounded_potential_model,
                           hmm_exact_likelihood, hmm_filtering_marginals,
                           hmm_likelihood_by_enumeration, neutral_model, parse_model,
                           two_state_hmm)
from smcgen.resampling import resample_counts_batch
from smcgen.smc import run_smc


def test_neutral_weights_uniform():
    tr = run_smc(neutral_model(2), 7, 4, "systematic", make_rng(0), check_bounds=True)
    assert np.all(tr.weights == 1 / 7)
    assert tr.states.shape == (5, 7, 2)


def test_neutral_multinomial_pair_rate_is_one_over_n():
    N, reps = 10, 50_000
    c, _ = merger_rates(resample_counts_batch("multinomial", np.full(N, 1 / N), reps, make_rng(1)))
    assert abs(c.mean() - 1 / N) <= 4 * c.std(ddof=1) / math.sqrt(reps)


def test_bounded_a1_is_neutral():
    tr = run_smc(bounded_potential_model(a=1.0), 9, 5, "multinomial", make_rng(2))
    assert np.allclose(tr.weights, 1 / 9, rtol=0, atol=1e-15)


def test_bounded_weights_below_a_squared_over_n():
    a, N = 2.0, 32
    model = bounded_potential_model(a=a, eps=0.5)
    tr = run_smc(model, N, 100, "systematic", make_rng(3), check_bounds=True)
    assert tr.weights.max() <= a * a / N + 1e-15
    assert tr.weights.min() >= 1 / (a * a * N) - 1e-15


def test_eps_one_gives_reference_kernel():
    m = bounded_potential_model(a=2.0, eps=1.0)
    assert m.params["lam"] == 0.0
    x = np.linspace(0, 0.99, 50)
    assert np.all(m.kernel_density(1, x, x[::-1]) == 1.0)


def test_mixing_bounds_hold_for_declared_eps():
    for eps in (0.2, 0.5, 0.9):
        m = bounded_potential_model(a=3.0, eps=eps)
        rng = make_rng(4)
        x = rng.random(1000)
        m.check_mixing(1, x, m.sample_kernel(1, x, rng))
        m.check_mixing(1, x, x)  # densest point of the local window


@pytest.mark.parametrize("kw", [dict(a=0.5), dict(eps=0.0), dict(eps=1.5), dict(width=1.0)])
def test_bounded_rejects_bad_parameters(kw):
    with pytest.raises(ModelParameterError):
        bounded_potential_model(**kw)


def test_check_potentials_raises_outside_bounds():
    m = bounded_potential_model(a=2.0)
    m.check_potentials(np.array([0.5, 2.0, 1.0]))
    with pytest.raises(AssertionError):
        m.check_potentials(np.array([2.1]))


def test_hmm_single_state_is_product():
    hmm = DiscreteHmm(np.array([[1.0]]), np.array([[0.5, 0.2, 0.9]]))
    assert math.isclose(hmm_exact_likelihood(hmm), 0.5 * 0.2 * 0.9, rel_tol=1e-14)


def test_hmm_t0_is_single_sum():
    hmm = DiscreteHmm(np.array([[0.5, 0.5], [0.1, 0.9]]), np.array([[0.3], [0.6]]),
                      initial=np.array([0.25, 0.75]))
    assert math.isclose(hmm_exact_likelihood(hmm), 0.25 * 0.3 + 0.75 * 0.6, rel_tol=1e-14)


def test_hmm_forward_matches_enumeration():
    hmm = DiscreteHmm(np.array([[0.7, 0.3], [0.4, 0.6]]),
                      np.array([[0.2, 0.5, 0.9], [0.6, 0.1, 0.3]]),
                      initial=np.array([0.5, 0.5]))
    assert math.isclose(hmm_exact_likelihood(hmm), hmm_likelihood_by_enumeration(hmm),
                        rel_tol=1e-13)
    big = two_state_hmm()
    assert math.isclose(hmm_exact_likelihood(big), hmm_likelihood_by_enumeration(big),
                        rel_tol=1e-13)
    f = hmm_filtering_marginals(big)
    assert f.shape == (6, 2) and np.allclose(f.sum(axis=1), 1)


def test_hmm_text_round_trip(tmp_path):
    hmm = two_state_hmm()
    path = tmp_path / "h.txt"
    path.write_text(hmm.to_text())
    back = DiscreteHmm.read(path)
    assert np.array_equal(back.transition, hmm.transition)
    assert np.array_equal(back.emission, hmm.emission)
    assert np.array_equal(back.initial, hmm.initial)
    # initial row optional, uniform by default
    text = "2 1\n0.5 0.5\n0.5 0.5\n0.1 0.2\n0.3 0.4\n"
    assert np.array_equal(DiscreteHmm.from_text(text).initial, [0.5, 0.5])
    with pytest.raises(ModelParameterError):
        DiscreteHmm.from_text("2 1\n0.5 0.5\n")


def test_hmm_rejects_bad_tables():
    with pytest.raises(ModelParameterError):
        DiscreteHmm(np.array([[0.5, 0.6], [0.5, 0.5]]), np.ones((2, 2)))
    with pytest.raises(ModelParameterError):
        DiscreteHmm(np.eye(2), np.zeros((2, 2)))


def test_parse_model(tmp_path):
    assert parse_model("neutral").name == "neutral"
    assert parse_model("neutral(d=3)").params["d"] == 3
    m = parse_model("bounded(a=3,eps=0.25,seed=4)")
    assert m.a == 3.0 and m.eps == 0.25
    assert parse_model("hmm").params["T"] == 5
    p = tmp_path / "m.txt"
    p.write_text(two_state_hmm().to_text())
    assert parse_model(f"hmm(file={p})").params["m"] == 2
    for bad in ("nope", "bounded(a)", "bounded(a=x)", "(("):
        with pytest.raises(ModelParameterError):
            parse_model(bad)
