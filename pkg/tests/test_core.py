from fractions import Fraction

import pytest

from pgl.core import (ParameterError, SeedSpec, as_fraction, check_measure, check_word, make_bond_params,
                      make_gen_params, measure_from_table, measure_iid, measure_reversible_chain, reflect,
                      sample_invariant_measures, words_of_length)


def test_float_inputs_are_read_as_decimals():
    assert as_fraction(0.01) == Fraction(1, 100)
    assert as_fraction("3/7") == Fraction(3, 7)
    with pytest.raises(TypeError):
        as_fraction(True)


def test_generalized_params_flags():
    g = make_gen_params(0.01, 0.02, 0.01)
    assert g.in_theta and g.small
    with pytest.raises(ParameterError):
        make_gen_params(0.6, 0.6, 0.1)
    zero = make_gen_params(0, 0, 0)
    assert not zero.in_theta


def test_bond_params_flags():
    assert make_bond_params(0.2, 0.0).in_theta_prime
    with pytest.raises(ParameterError):
        make_bond_params(0.6, 0.6)
    assert not make_bond_params(0, 0).in_theta_prime


@pytest.mark.parametrize("word,mirrored", [("LWD", "DWL"), ("D", "D"), ("WDL", "LDW")])
def test_reflect(word, mirrored):
    assert reflect(word) == mirrored


def test_bad_word_rejected():
    with pytest.raises(ValueError):
        check_word("WXD")


def test_iid_measures():
    m = measure_iid(Fraction(1, 3), Fraction(1, 3), Fraction(1, 3), 2)
    assert all(m(w) == Fraction(1, 9) for w in words_of_length(2))
    m = measure_iid(1, 0, 0, 3)
    assert m("WWW") == 1 and sum(m(w) for w in words_of_length(3)) == 1 and m("WWL") == 0
    assert measure_iid(Fraction(1, 2), Fraction(3, 10), Fraction(1, 5), 2)("WD") == Fraction(1, 10)


def test_reversible_chain_measures():
    ones = measure_reversible_chain([[1] * 3] * 3, 2)
    assert ones("LD") == Fraction(1, 9)
    m = measure_reversible_chain([[2, 1, 1], [1, 1, 1], [1, 1, 1]], 4)
    assert m("WD") == m("DW")
    assert all(m(w) == m(reflect(w)) for w in words_of_length(4))
    assert check_measure(m).ok


def test_consistency_check_catches_corruption():
    m = measure_iid(Fraction(1, 3), Fraction(1, 3), Fraction(1, 3), 3)
    assert check_measure(m).ok
    table = dict(m.table)
    table["WL"] += Fraction(1, 100)
    bad = check_measure(measure_from_table(table, 3))
    assert not bad.ok and bad.normalization > 0


def test_sampled_measures_are_consistent():
    for m in sample_invariant_measures(12, seed=3, max_len=5):
        assert check_measure(m).ok, m.label


def test_seed_streams():
    a = SeedSpec(5).generator().random(4)
    assert (a == SeedSpec(5).generator().random(4)).all()
    assert not (a == SeedSpec(5).child(1).generator().random(4)).all()
    with pytest.raises(ValueError):
        SeedSpec(-1)
