import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from nonsplitsum.arith import divisors, euler_phi, mobius
from nonsplitsum.expsums import (
    JSumParams,
    cancellation_exponent_fit,
    check_index_symmetry,
    check_reduction_lemma,
    check_twisted_multiplicativity,
    chi_from_jsum,
    default_family,
    jsum,
    jsum_crt,
    jsum_fast,
    jsum_via_kloosterman,
    kloosterman,
    kloosterman_row,
    ramanujan,
    theorem_a_window,
    weil_bound,
)
from nonsplitsum.quadratic import chi

from oracles import jsum_textbook, kloosterman_direct, ramanujan_direct

ODD_PRIMES = [p for p in range(3, 101) if all(p % k for k in range(2, p))]


def test_kloosterman_examples():
    assert kloosterman(1, 1, 2) == pytest.approx(1.0, abs=1e-12)
    assert kloosterman(1, 1, 3) == pytest.approx(-1.0, abs=1e-12)
    assert kloosterman(1, 2, 5) == pytest.approx(-(1 + math.sqrt(5)), abs=1e-12)


@given(st.integers(-50, 50), st.integers(-50, 50), st.integers(1, 60))
def test_kloosterman_matches_direct(m, n, q):
    assert kloosterman(m, n, q) == pytest.approx(kloosterman_direct(m, n, q).real, abs=1e-9)
    assert abs(kloosterman_direct(m, n, q).imag) < 1e-9


def test_kloosterman_row():
    row = kloosterman_row(3, 21)
    assert np.allclose(row, [kloosterman(3, n, 21) for n in range(21)], atol=1e-9)


@pytest.mark.parametrize("q", [1, 2, 7, 30, 97, 210, 512, 997, 1000])
def test_weil_bound(q):
    rng = np.random.default_rng(q)
    for m, n in rng.integers(0, 10**6, size=(25, 2)):
        assert abs(kloosterman(int(m), int(n), q)) <= weil_bound(int(m), int(n), q) + 1e-9


def test_ramanujan_examples():
    assert ramanujan(6, 0) == 2 == euler_phi(6)
    assert ramanujan(6, 3) == -2
    assert ramanujan(5, 1) == -1


@given(st.integers(1, 200), st.integers(-300, 300))
def test_ramanujan_closed_form(q, n):
    ref = sum(d * mobius(q // d) for d in divisors(q) if n % d == 0)
    assert ramanujan(q, n) == ref
    assert ramanujan(q, n) == pytest.approx(ramanujan_direct(q, n), abs=1e-8)


def test_jsum_examples():
    assert abs(jsum((1, 0, 1, 0), 2)) < 1e-12
    assert jsum((7, 0, 0, 0), 3) == pytest.approx(-1.0, abs=1e-12)
    assert jsum((5, 2, -2, 9), 1) == pytest.approx(1.0, abs=1e-15)
    # the prefactor e_2(r1 r2) survives at q = 1; see the ledger
    assert jsum((5, 3, -2, 9), 1) == pytest.approx(-1.0, abs=1e-15)


def test_params_type():
    p = JSumParams(1, 2, 3, 4, 5)
    assert p.swapped() == JSumParams(3, 4, 1, 2, 5)
    assert p.with_modulus(7).q == 7
    with pytest.raises(ValueError):
        JSumParams(1, 0, 1, 0, 0)


@given(
    st.integers(-40, 40), st.integers(-40, 40), st.integers(-40, 40), st.integers(-40, 40), st.integers(1, 40)
)
def test_jsum_matches_textbook(n1, r1, n2, r2, q):
    ref = jsum_textbook(n1, r1, n2, r2, q)
    p = (n1, r1, n2, r2)
    assert abs(jsum(p, q) - ref) < 1e-9
    assert abs(jsum_fast(p, q) - ref) < 1e-9
    assert abs(jsum_crt(p, q) - ref) < 1e-9


@given(st.integers(-500, 500), st.integers(-500, 500), st.integers(-500, 500), st.integers(1, 200))
def test_jt_identity(d, m, l, q):
    assert abs(jsum_via_kloosterman(d, m, l, q) - jsum((d, 0, m, l), q)) < 1e-9


def test_jt_examples():
    assert abs(jsum_via_kloosterman(1, 1, 0, 2)) < 1e-12
    for q in (4, 9, 12):
        direct = sum(ramanujan(q, n * n) for n in range(q)) / q
        assert jsum_via_kloosterman(0, 0, 0, q) == pytest.approx(direct, abs=1e-9)
        assert jsum((0, 0, 0, 0), q) == pytest.approx(direct, abs=1e-9)
    assert jsum_via_kloosterman(17, 3, 5, 1) == pytest.approx(1.0, abs=1e-15)


@given(
    st.integers(1, 50),
    st.integers(1, 50),
    st.tuples(st.integers(-30, 30), st.integers(-30, 30), st.integers(-30, 30), st.integers(-30, 30)),
)
def test_twisted_multiplicativity(q, q_prime, p):
    assume(math.gcd(q, q_prime) == 1)
    assert check_twisted_multiplicativity(p, q, q_prime) < 1e-8


def test_twisted_multiplicativity_examples():
    assert check_twisted_multiplicativity((1, 0, 1, 0), 3, 5) < 1e-8
    assert check_twisted_multiplicativity((4, 1, 2, 3), 1, 7) < 1e-12
    with pytest.raises(ValueError):
        check_twisted_multiplicativity((1, 0, 1, 0), 4, 6)


@given(
    st.tuples(st.integers(-30, 30), st.integers(-30, 30), st.integers(-30, 30), st.integers(-30, 30)),
    st.integers(1, 100),
)
def test_index_symmetry(p, q):
    assert check_index_symmetry(p, q) < 1e-8


def test_reduction_lemma_examples():
    assert check_reduction_lemma(-7, 0, 1, 1, 3, 5) < 1e-8
    assert check_reduction_lemma(-7, 2, 3, 1, 1, 5) == 0.0
    with pytest.raises(ValueError):
        check_reduction_lemma(-7, 0, 1, 1, 7, 5)
    with pytest.raises(ValueError):
        check_reduction_lemma(-7, 0, 1, 1, 9, 5)


@given(
    st.sampled_from([-7, -19, -23, -43, -84, -163]),
    st.integers(-10, 10),
    st.integers(-10, 10),
    st.sampled_from([1, 3, 5, 15, 7 * 11]),
    st.sampled_from([1, 3, 5, 11, 13, 15, 33, 39, 65]),
    st.integers(1, 30),
)
def test_reduction_lemma_property(D, l, m, e, N2, q):
    assume(math.gcd(N2, D) == 1 and math.gcd(N2, q) == 1)
    assert check_reduction_lemma(D, l, m, e, N2, q) < 1e-8


@pytest.mark.parametrize("D", [-3, -4, -7, -8, -23, -84, -163])
def test_chi_from_jsum(D):
    for p in ODD_PRIMES:
        if D % p:
            assert abs(chi_from_jsum(D, p) - chi(D, p)) < 1e-9


def test_window_examples():
    p = (-7, 0, 1, 0)
    assert theorem_a_window(p, 1.0) == 0
    assert theorem_a_window(p, 16, a=40) == 0
    ref = sum(jsum(p, q) for q in range(17, 32))
    assert abs(theorem_a_window(p, 16) - ref) < 1e-9
    ref3 = sum(jsum(p, q) for q in range(18, 32, 3))
    assert abs(theorem_a_window(p, 16, a=3, summand=jsum) - ref3) < 1e-9


def test_fit_controls():
    grid = [32, 64, 128, 256, 512, 1024]
    family = default_family(1, 0)
    one = cancellation_exponent_fit(family, grid, summand=lambda p: 1.0)
    assert one.slope == pytest.approx(1.0, abs=0.02)
    alternating = cancellation_exponent_fit(family, grid, summand=lambda p: (-1) ** p.q)
    assert abs(alternating.slope) < 0.05
    with pytest.raises(ValueError):
        cancellation_exponent_fit(family, grid[:4])


def test_family_shape():
    fam = default_family(4, 0)(128)
    assert len(fam) == 4
    for p in fam:
        assert p.n1 % 4 == 3
        assert 0.5 < p.C / 128**2 < 2.0
