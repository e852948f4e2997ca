from fractions import Fraction

import pytest

from pgl.core import (check_measure, make_bond_params, make_gen_params, measure_iid, measure_reversible_chain,
                      sample_invariant_measures, words_of_length)
from pgl.kernels import bond_envelope_kernel, generalized_envelope_kernel
from pgl.pushforward import (A_PARTITION, LinearFunctional, conditional_prob, lemma_D, partition_words,
                             pushforward, pushforward_word, sample_gen_points, verify_bound_lemmas,
                             verify_identity_lemmas)
from pgl.polynomials import Polynomial

F = Fraction
UNIFORM = measure_iid(F(1, 3), F(1, 3), F(1, 3), 5)
CHAIN = measure_reversible_chain([[1, 3, 1], [3, 1, 2], [1, 2, 6]], 5)


def test_conditional_probabilities():
    g = generalized_envelope_kernel(make_gen_params("0.1", "0.2", "0.3"))
    assert conditional_prob(g, "D", "WD") == F("0.7") * F("0.7")
    assert conditional_prob(generalized_envelope_kernel(make_gen_params(0, 0, 0)), "W", "WW") == 0
    k = generalized_envelope_kernel(make_gen_params("0.1", 0, "0.1"))
    assert conditional_prob(k, "LD", "WWD") == F("0.729")
    with pytest.raises(ValueError):
        conditional_prob(k, "LD", "WD")


def test_single_site_pushforwards():
    zero = generalized_envelope_kernel(make_gen_params(0, 0, 0))
    assert pushforward_word(zero, UNIFORM, "D") == F(1, 3)
    all_l = measure_iid(0, 1, 0, 3)
    assert pushforward_word(bond_envelope_kernel(make_bond_params(1, 0)), all_l, "L") == 1


def test_pushforward_is_a_measure():
    k = generalized_envelope_kernel(make_gen_params("0.1", "0.05", "0.3"))
    for m in (UNIFORM, CHAIN):
        push = pushforward(k, m, method="enumerate")
        assert sum(push(w) for w in "WLD") == 1
        assert check_measure(push).ok


def test_transfer_and_enumeration_routes_agree():
    k = generalized_envelope_kernel(make_gen_params(F(1, 7), F(1, 11), F(2, 9)))
    for m in sample_invariant_measures(6, seed=2, max_len=5):
        if m.chain is None:
            continue
        for w in words_of_length(3):
            assert pushforward_word(k, m, w, "transfer") == pushforward_word(k, m, w, "enumerate")


@pytest.mark.parametrize("params,measure", [(("0.01", "0.02", "0.01"), CHAIN), ((0, 0, 0), UNIFORM)])
def test_identity_lemmas(params, measure):
    res = verify_identity_lemmas(make_gen_params(*params), measure)
    assert [r.value for r in res] == [0, 0]


def test_identity_negative_control():
    broken = lemma_D().with_coefficient("DD", -lemma_D().terms["DD"])
    res = verify_identity_lemmas(make_gen_params("0.1", "0.1", "0.1"), UNIFORM, overrides={"D": broken})
    assert res[0].value != 0 and not res[0].passed


@pytest.mark.parametrize("params,measure", [
    (("0.01", "0.01", "0.01"), measure_iid(F(2, 5), F(2, 5), F(1, 5), 5)),
    (("0.02", "0.02", "0.02"), CHAIN),
    (("0.01", "0", "0.01"), UNIFORM),
])
def test_bound_lemmas(params, measure):
    res = verify_bound_lemmas(make_gen_params(*params), measure)
    margins = [r for r in res if r.kind == "margin"]
    assert len(margins) == 13
    assert all(r.passed for r in res)


def test_bound_lemmas_require_small_box():
    with pytest.raises(ValueError):
        verify_bound_lemmas(make_gen_params("0.1", "0", "0"), UNIFORM)


def test_partition_covers_lwd_preimages_once():
    words = [w for piece in A_PARTITION.values() for w in partition_words(piece)]
    assert len(words) == len(set(words))


def test_linear_functional_arithmetic():
    (x,) = Polynomial.variables("x")
    f = LinearFunctional([(x, "D"), (1, "WD")])
    g = f + f.scaled(2) - f
    assert g.coefficients_at({"x": F(1, 2)}) == {"D": F(1), "WD": F(2)}
    assert f.max_len() == 2


def test_lemma_point_sampler():
    pts = sample_gen_points(30, seed=4, bound=F(1, 50))
    assert all(p.in_theta and p.small for p in pts)
    assert pts == sample_gen_points(30, seed=4, bound=F(1, 50))
