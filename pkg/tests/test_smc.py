import json
import math

import numpy as np
import pytest
from scipy import stats

from smcgen.core import SizeError, make_rng
from smcgen.models import (ModelSpec, bounded_potential_model, hmm_filtering_marginals, hmm_model,
                           neutral_model, two_state_hmm)
from smcgen.resampling import Scheme
from smcgen.smc import (DegenerateWeightsError, ImmortalPath, check_csmc_invariants,
                        export_trace, filtering_estimate, marginal_likelihood, read_weights_csv,
                        run_csmc, run_smc)


def _model(g0, g=None, name="custom"):
    return ModelSpec(name=name,
                     sample_initial=lambda rng, N: np.arange(N, dtype=float),
                     sample_kernel=lambda t, x, rng: x.copy(),
                     g0=g0,
                     potential=g or (lambda t, xp, x: np.ones(len(x))))


@pytest.mark.parametrize("scheme", list(Scheme))
def test_neutral_weights_and_zhat(scheme):
    tr = run_smc(neutral_model(), 6, 5, scheme, make_rng(0))
    assert np.all(tr.weights == 1 / 6)
    assert marginal_likelihood(tr) == 1.0
    assert tr.ancestry.shape == (5, 6) and tr.offspring.sum(axis=1).tolist() == [6] * 5


def test_point_mass_initial_weights():
    m = _model(lambda x: np.array([1.0, 0.0]))
    tr = run_smc(m, 2, 1, "multinomial", make_rng(1))
    assert tr.ancestry[0].tolist() == [0, 0]


def test_zhat_with_no_steps_is_mean_g0():
    m = _model(lambda x: x + 1.0)
    tr = run_smc(m, 4, 0, "multinomial", make_rng(2))
    assert marginal_likelihood(tr) == pytest.approx(2.5, rel=1e-15)


def test_degenerate_weights_raise_with_generation():
    m = _model(lambda x: np.ones(len(x)), lambda t, xp, x: np.zeros(len(x)))
    with pytest.raises(DegenerateWeightsError) as err:
        run_smc(m, 3, 4, "systematic", make_rng(3))
    assert err.value.generation == 1


def test_size_preconditions():
    with pytest.raises(SizeError):
        run_smc(neutral_model(), 1, 3, "multinomial", make_rng(0))
    with pytest.raises(SizeError):
        run_smc(neutral_model(), 3, -1, "multinomial", make_rng(0))


def test_same_seed_same_trace():
    m = bounded_potential_model()
    a = run_smc(m, 16, 30, "systematic", make_rng(5, 2))
    b = run_smc(m, 16, 30, "systematic", make_rng(5, 2))
    assert np.array_equal(a.ancestry, b.ancestry) and np.array_equal(a.weights, b.weights)


def test_filtering_estimate_constant_and_range():
    tr = run_smc(bounded_potential_model(), 10, 3, "multinomial", make_rng(4))
    assert filtering_estimate(tr, 2, lambda x: np.ones(len(x))) == pytest.approx(1.0, abs=1e-15)
    assert filtering_estimate(tr, 3, lambda x: (x >= 0) & (x < 1)) == pytest.approx(1.0)
    with pytest.raises(IndexError):
        filtering_estimate(tr, 4, lambda x: x)


def test_filtering_matches_forward_algorithm():
    hmm = two_state_hmm()
    model = hmm_model(hmm)
    exact = hmm_filtering_marginals(hmm)[hmm.T, 1]
    reps = 800
    est = np.array([filtering_estimate(run_smc(model, 1024, hmm.T, "multinomial",
                                               make_rng(6, r)),
                                       hmm.T, lambda x: (x == 1).astype(float))
                    for r in range(reps)])
    # the self-normalised estimate has O(1/N) bias (about -0.04 at N=16),
    # so N is taken large enough for the bias to sit well inside 3 SE
    assert abs(est.mean() - exact) <= 3 * est.std(ddof=1) / math.sqrt(reps)


def test_zhat_unbiased_small():
    hmm = two_state_hmm()
    model = hmm_model(hmm)
    reps = 3000
    from smcgen.models import hmm_exact_likelihood
    z = np.array([marginal_likelihood(run_smc(model, 32, hmm.T, "systematic", make_rng(7, r)))
                  for r in range(reps)])
    assert abs(z.mean() - hmm_exact_likelihood(hmm)) <= 3 * z.std(ddof=1) / math.sqrt(reps)


def _immortal(model, N, T, seed):
    ref = run_smc(model, N, T, "multinomial", make_rng(seed))
    return ref, ImmortalPath.from_trace(ref, 0)


def test_csmc_immortal_slot_survives():
    model = bounded_potential_model()
    _, imm = _immortal(model, 2, 10, 8)
    tr = run_csmc(model, 2, 10, imm, make_rng(9))
    assert np.all(tr.ancestry[:, 0] == 0)
    assert np.all(tr.offspring[:, 0] >= 1)
    check_csmc_invariants(tr, imm)


def test_csmc_custom_slots_and_positions():
    model = bounded_potential_model()
    ref, _ = _immortal(model, 5, 6, 10)
    slots = np.array([4, 0, 3, 3, 1, 2, 4])
    imm = ImmortalPath.from_trace(ref, 2, slots=slots)
    tr = run_csmc(model, 5, 6, imm, make_rng(11), check_bounds=True)
    check_csmc_invariants(tr, imm)
    for t in range(6):
        assert tr.ancestry[t][slots[t + 1]] == slots[t]
        assert tr.states[t][slots[t]] == imm.positions[t]


def test_csmc_other_slots_uniform_under_neutral():
    model = neutral_model()
    N, T = 4, 200
    _, imm = _immortal(model, N, T, 12)
    tr = run_csmc(model, N, T, imm, make_rng(13))
    free = tr.ancestry[:, 1:].ravel()
    assert stats.chisquare(np.bincount(free, minlength=N)).pvalue > 0.001


def test_csmc_rejects_other_schemes_and_bad_paths():
    model = neutral_model()
    _, imm = _immortal(model, 3, 4, 14)
    with pytest.raises(ValueError):
        run_csmc(model, 3, 4, imm, make_rng(0), scheme="systematic")
    with pytest.raises(ValueError):
        run_csmc(model, 3, 5, imm, make_rng(0))


def test_invariant_checker_detects_breakage():
    model = neutral_model()
    _, imm = _immortal(model, 3, 4, 15)
    tr = run_csmc(model, 3, 4, imm, make_rng(16))
    broken = ImmortalPath(imm.positions + 1.0, imm.slot_indices)
    with pytest.raises(AssertionError):
        check_csmc_invariants(tr, broken)


def test_export_trace(tmp_path):
    tr = run_smc(bounded_potential_model(), 5, 3, "stratified", make_rng(17))
    out = export_trace(tr, tmp_path / "rep", seed=17, config_hash="deadbeef")
    anc = (out / "ancestry.csv").read_text().splitlines()
    assert anc[0] == "# seed=17 config_hash=deadbeef"
    wts = (out / "weights.csv").read_text().splitlines()
    assert wts[0] == anc[0] and wts[1] == "t,w1,w2,w3,w4,w5"
    assert np.array_equal(read_weights_csv(out / "weights.csv"), tr.weights)
    meta = json.loads((out / "meta.json").read_text())
    assert meta["Zhat"] == marginal_likelihood(tr) and meta["scheme"] == "stratified"
    assert {"N", "T", "model", "seed", "config_hash"} <= set(meta)
