import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonsplitsum.arith import fundamental_discriminants, kronecker
from nonsplitsum.quadratic import (
    Discriminant,
    FormClass,
    chi,
    chi_table,
    class_group,
    class_number,
    compose,
    dirichlet_L,
    has_large_prime_factors,
    heegner_admissible,
    lprime_one_stieltjes,
    r_arrays,
    r_counts,
    reduced_forms,
    representation_counts,
    unit_count,
)

from oracles import ideals_by_norm, principal_ideals_by_norm, reduced_forms_bruteforce

SMALL_D = fundamental_discriminants(-400, -3)


def test_kronecker_examples():
    assert chi(-7, 1) == 1
    assert chi(-7, 3) == -1
    assert chi(-7, 7) == 0


@given(st.sampled_from(SMALL_D), st.integers(1, 1000), st.integers(1, 1000))
def test_kronecker_completely_multiplicative(D, m, n):
    assert chi(D, m * n) == chi(D, m) * chi(D, n)


@given(st.sampled_from(SMALL_D), st.integers(1, 5000))
def test_kronecker_periodic(D, n):
    assert chi(D, n) == chi(D, n + abs(D))


@given(st.sampled_from(SMALL_D), st.sampled_from([p for p in range(3, 200) if all(p % k for k in range(2, p))]))
def test_kronecker_counts_square_roots(D, p):
    if D % p:
        roots = sum(1 for v in range(p) if (v * v - D) % p == 0)
        assert chi(D, p) == roots - 1


def test_chi_table_matches_symbol():
    t = chi_table(-23, 200)
    assert all(t[n] == kronecker(-23, n) for n in range(1, 200))


def test_discriminant_type():
    assert Discriminant(-7).fundamental
    assert not Discriminant(-28).fundamental
    with pytest.raises(ValueError):
        Discriminant(-6)
    with pytest.raises(ValueError):
        Discriminant(5)


def test_class_group_examples():
    g7 = class_group(-7)
    assert g7.h == 1 and g7.classes == (FormClass(1, 1, 2),)
    g23 = class_group(-23)
    assert g23.h == 3
    assert set(g23.classes) == {FormClass(1, 1, 6), FormClass(2, 1, 3), FormClass(2, -1, 3)}
    assert class_group(-4).h == 1
    with pytest.raises(ValueError):
        class_group(-28)


@pytest.mark.parametrize("D", [-3, -4, -7, -23, -47, -84, -199, -420, -1019, -3299])
def test_reduced_forms_match_bruteforce(D):
    got = {(f.a, f.b, f.c) for f in reduced_forms(D)}
    assert got == reduced_forms_bruteforce(D)
    assert all(f.is_reduced() and f.discriminant == D for f in reduced_forms(D))


@pytest.mark.parametrize("D", [-23, -47, -84, -199, -420, -1019, -3299, -5923])
def test_character_table(D):
    g = class_group(D)
    chars = g.characters
    assert chars.shape == (g.h, g.h)
    assert np.allclose(np.abs(chars), 1.0)
    gram = chars @ chars.conj().T
    assert np.max(np.abs(gram - g.h * np.eye(g.h))) < 1e-9 * g.h
    for i in range(g.h):
        for j in range(g.h):
            k = g.table[i, j]
            assert np.allclose(chars[:, k], chars[:, i] * chars[:, j])


@given(st.sampled_from([-23, -47, -84, -199, -420, -1019]), st.data())
def test_composition_group_laws(D, data):
    forms = reduced_forms(D)
    f = data.draw(st.sampled_from(forms))
    g = data.draw(st.sampled_from(forms))
    k = data.draw(st.sampled_from(forms))
    identity = forms[0]
    assert compose(f, g) == compose(g, f)
    assert compose(compose(f, g), k) == compose(f, compose(g, k))
    assert compose(f, identity) == f
    assert compose(f, f.inverse()) == identity


def test_class_group_json():
    js = class_group(-84).to_json()
    assert js["h"] == 4 and js["orders"] == [2, 2]


def test_r_counts_examples():
    assert r_counts(-7, 1, 1) == (1, 0)
    # r-dagger(2) counts (a, b) = (+-1, 1); see the ledger on the r-dagger example
    assert r_counts(-7, 1, 2) == (2, 2)
    assert r_counts(-7, 1, 3) == (0, 0)
    with pytest.raises(ValueError):
        r_counts(-7, 1, 0)


@pytest.mark.parametrize("D,e", [(-7, 1), (-23, 1), (-4, 1), (-7, 3), (-19, 2)])
def test_r_arrays_match_pointwise(D, e):
    r, rd = r_arrays(D, 400, e)
    for n in range(1, 401):
        assert (r[n], rd[n]) == r_counts(D, e, n)


@pytest.mark.parametrize("D", [-3, -4, -7, -8, -11, -19, -43, -67, -163])
def test_r_is_divisor_sum_for_class_number_one(D):
    r, _ = r_arrays(D, 1000)
    ref = ideals_by_norm(D, 1000)
    w = unit_count(D)
    for n in range(1, 1001):
        if math.gcd(n, D) == 1:
            assert r[n] * 2 // w == ref[n]


@pytest.mark.parametrize("D", [-23, -47, -84, -199])
def test_divisor_sum_is_total_over_classes(D):
    M = 1000
    w = unit_count(D)
    total = sum(representation_counts(f, M) for f in reduced_forms(D))
    ref = ideals_by_norm(D, M)
    assert all(total[n] == w * ref[n] for n in range(1, M + 1))
    r, _ = r_arrays(D, M)
    principal = principal_ideals_by_norm(D, M)
    assert all(r[n] * 2 // w == principal[n] for n in range(1, M + 1))


def test_dirichlet_L_examples():
    assert dirichlet_L(-7).L1 == pytest.approx(math.pi / math.sqrt(7), abs=1e-12)
    assert dirichlet_L(-4).L1 == pytest.approx(math.pi / 4, abs=1e-12)
    v = dirichlet_L(-7)
    assert v.calL == pytest.approx(0.5 * math.log(7) + v.log_derivative, abs=1e-15)
    with pytest.raises(ValueError):
        dirichlet_L(-12 * 4)


@pytest.mark.parametrize("D", [-3, -4, -7, -23, -84, -1019])
def test_L_prime_against_stieltjes_oracle(D):
    v = dirichlet_L(D)
    assert v.Lprime1 == pytest.approx(lprime_one_stieltjes(D), abs=1e-10)
    assert abs(v.L1 - v.L1_hurwitz) < 1e-10


def test_L_by_partial_sums():
    D = -23
    n = np.arange(1, 2_000_001)
    c = chi_table(D, len(n) + 1)[1:]
    assert float(np.sum(c / n)) == pytest.approx(dirichlet_L(D).L1, abs=1e-5)


def test_predicates():
    assert heegner_admissible(-7, 11)
    assert not heegner_admissible(-3, 11)
    assert heegner_admissible(-119, 15) == (kronecker(-119, 3) == 1 and kronecker(-119, 5) == 1)
    assert has_large_prime_factors(-1019, 0.5)
    assert not has_large_prime_factors(-3 * 337, 0.3)
    assert class_number(-5923) == class_group(-5923).h
