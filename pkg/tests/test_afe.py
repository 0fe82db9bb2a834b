import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import loggamma
from sympy import primerange

from nonsplitsum import afe
from nonsplitsum.arith import fundamental_discriminants, kronecker
from nonsplitsum.coeffs import coefficient_table
from nonsplitsum.quadratic import (
    EULER_GAMMA,
    class_group,
    dirichlet_L,
    heegner_admissible,
    lprime_one_stieltjes,
    r_arrays,
    unit_count,
)

from oracles import ideals_by_norm, petersson_norm_prime_level

ADMISSIBLE_SMALL = [D for D in fundamental_discriminants(-600, -7) if heegner_admissible(D, 11)]


@pytest.fixture(scope="module")
def sym2(table11):
    return afe.sym2_values(table11)


def block_primes(lo, hi, level=11):
    return [p for p in primerange(lo, hi) if p % 4 == 3 and kronecker(-p, level) == 1]


# ---------------------------------------------------------------- weight V


def test_weight_V_small_y():
    y = 1e-6
    assert abs(afe.weight_V(y) - (-math.log(y) - 2 * (EULER_GAMMA + math.log(2 * math.pi)))) < 1e-2
    assert afe.V_CONSTANT == pytest.approx(2 * (EULER_GAMMA + math.log(2 * math.pi)))


def test_weight_V_large_y():
    assert abs(afe.weight_V(50.0)) < 1e-8


@pytest.mark.parametrize("y", [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0, 1e3])
def test_contour_shift_invariance(y):
    a = afe.weight_V_contour(y, 2.0)
    b = afe.weight_V_contour(y, 3.0)
    assert abs(a - b) < 1e-9 * max(1.0, abs(a))
    if y < 1:
        c = afe.weight_V_contour(y, -0.5)
        assert abs(a - c) < 1e-9 * max(1.0, abs(a))


@given(st.floats(1e-4, 20))
def test_closed_form_matches_contour(y):
    assert afe.weight_V_fast(y) == pytest.approx(afe.weight_V(y), rel=1e-9, abs=1e-15)


def test_weight_V_decay():
    y = np.geomspace(1, 200, 60)
    v = afe.weight_V_fast(y)
    for A in range(1, 7):
        scaled = v * y**A
        assert np.all(np.diff(scaled[y >= 2 * A]) < 0)
    assert afe.weight_V_fast(200.0) * 200.0**6 < 1e-60


def test_weight_V_rejects_nonpositive():
    with pytest.raises(ValueError):
        afe.weight_V(0.0)


# ---------------------------------------------------------------- Rankin coefficients


def rankin_oracle_trivial(table, D, n):
    """a_n for the trivial character when h = 1: sum_{m^2 k = n, (m,N)=1} chi_D(m) lam(k) #ideals(k)."""
    ideals = ideals_by_norm(D, n)
    total = 0.0
    m = 1
    while m * m <= n:
        if n % (m * m) == 0 and math.gcd(m, table.level) == 1:
            k = n // (m * m)
            total += kronecker(D, m) * table.lam(k) * ideals[k]
        m += 1
    return total


def test_rankin_examples(table11):
    g = class_group(-7)
    rc = afe.rankin_coeffs(table11, g, 0, 10)
    assert rc.values[1] == pytest.approx(1.0)
    assert rc.values[2] == pytest.approx(2 * table11.lam(2))
    for n in range(1, 11):
        assert rc.values[n] == pytest.approx(rankin_oracle_trivial(table11, -7, n), abs=1e-12)


def test_rankin_orthogonality(table11):
    D = -23
    g = class_group(D)
    A = afe.rankin_coeffs_all(table11, g, 50)
    r, _ = r_arrays(D, 50)
    principal = r * 2 / unit_count(D)
    for n in range(1, 51):
        expected = 0.0
        m = 1
        while m * m <= n:
            if n % (m * m) == 0 and math.gcd(m, 11) == 1:
                k = n // (m * m)
                expected += kronecker(D, m) * principal[k] * table11.lam(k)
            m += 1
        assert np.mean(A[:, n]) == pytest.approx(expected, abs=1e-12)


def test_rankin_trivial_character_real(table11):
    A = afe.rankin_coeffs_all(table11, class_group(-47), 300)
    assert np.max(np.abs(A[0].imag)) < 1e-12


def test_rankin_table_too_short():
    with pytest.raises(ValueError):
        afe.rankin_coeffs_all(coefficient_table(11, 100), class_group(-7), 200)


# ---------------------------------------------------------------- central derivatives


def lprime_with_other_G(table, D, G, T=60.0, dt=0.005):
    """L'(1/2) with V built from G(s) = G(s)/s^2 on Re s = 1; equals the G = 1/s^2 value for the right gamma factor."""
    group = class_group(D)
    cond = abs(D) * table.level
    M = 40 * cond
    A = afe.rankin_coeffs_all(table, group, M)
    n = np.arange(1, M + 1)
    t = np.arange(-T, T + dt / 2, dt)
    s = 1.0 + 1j * t
    kernel = np.exp(2 * (loggamma(1 + s) - s * math.log(2 * math.pi))) * G(s) / (s * s)
    V = np.array([(np.exp(-s * math.log(y)) @ kernel).real * dt / (2 * math.pi) for y in n / cond])
    return 2 * np.real(A[:, 1:] @ (V / np.sqrt(n)))


@pytest.mark.parametrize("D", [-7, -35])
def test_lprime_independent_of_test_function(table11, D):
    base = afe.lprime_half_all(table11, class_group(D))
    other = lprime_with_other_G(table11, D, lambda s: np.exp(s * s))
    assert np.allclose(base, other, rtol=1e-5, atol=1e-6)


def test_lprime_examples(table11):
    g7 = class_group(-7)
    v = afe.lprime_half(table11, g7, 0)
    assert v > 0
    assert v == pytest.approx(0.311100175958805, rel=1e-9)


def test_conjugate_characters_agree(table11):
    D = next(D for D in ADMISSIBLE_SMALL if class_group(D).h >= 3)
    g = class_group(D)
    vals = afe.lprime_half_all(table11, g)
    for i in range(g.h):
        j = int(np.argmin(np.abs(g.characters - g.characters[i].conj()).sum(axis=1)))
        assert vals[i] == pytest.approx(vals[j], abs=1e-10)


def test_lprime_nonnegative(table11):
    worst = min(float(afe.lprime_half_all(table11, class_group(D)).min()) for D in ADMISSIBLE_SMALL)
    assert worst >= -1e-6


def test_lprime_table_too_short():
    with pytest.raises(ValueError):
        afe.lprime_half_all(coefficient_table(11, 50), class_group(-7))


# ---------------------------------------------------------------- family moment


@pytest.mark.parametrize("D", [-7, -19, -35, -43, -79, -107, -151, -184])
def test_family_moment_routes(table11, D):
    if not heegner_admissible(D, 11):
        pytest.skip("not admissible")
    fm = afe.family_moment(table11, D)
    assert fm.discrepancy < 1e-6
    assert fm.value == fm.r_route


def test_family_moment_class_number_one(table11):
    fm = afe.family_moment(table11, -7)
    assert fm.h == 1
    assert fm.character_route == pytest.approx(afe.lprime_half(table11, class_group(-7), 0), rel=1e-14)


def test_family_moment_rejects_inadmissible(table11):
    assert not heegner_admissible(-23, 11)
    with pytest.raises(ValueError):
        afe.family_moment(table11, -23)


# ---------------------------------------------------------------- symmetric square


def test_sym2_positive_and_stable(table11, sym2):
    assert sym2.L1 > 0
    assert sym2.converged
    doubled = afe.sym2_values(table11, M=1600)
    assert abs(doubled.L1 - sym2.L1) < 1e-4 * sym2.L1
    assert abs(doubled.log_derivative - sym2.log_derivative) < 1e-4


def test_sym2_smoothed_partial_sums_approach(table11, sym2):
    gaps = [abs(afe.sym2_smoothed(table11, X) - sym2.L1) for X in (1e3, 1e4, 1e5)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-4


def test_sym2_against_petersson_norm(table11, sym2):
    norm = petersson_norm_prime_level(table11.entries[:301].astype(float), 11)
    predicted = 11 / (8 * math.pi**3) * sym2.L1
    assert norm == pytest.approx(predicted, rel=0.05)


def test_sym2_coefficients_euler_product(table11):
    c = afe.sym2_coefficients(table11, 200)
    # coefficient at a prime p is lam(p^2) and at p^2 picks up the zeta(2s) factor
    for p in (2, 3, 5, 7, 13):
        lam_p2 = table11.a(p * p) / p
        assert c[p] == pytest.approx(lam_p2)
    assert c[11] == pytest.approx(table11.a(121) / 11)


# ---------------------------------------------------------------- main term


def main_term_oracle(table, D, sym2):
    """Residue at s = 0 of the diagonal Mellin integrand, from mpmath's L(s, chi_D) and zeta."""
    level = table.level
    chars = [kronecker(D, a) for a in range(abs(D))]
    cond = abs(D) * level
    with mpmath.workdps(30):

        def H(s):
            w = 1 + 2 * s
            L = mpmath.dirichlet(w, chars)
            Z = mpmath.zeta(2 + 4 * s)
            for p in (11,) if level == 11 else ():
                L *= 1 - kronecker(D, p) * mpmath.mpf(p) ** (-w)
                Z *= 1 - mpmath.mpf(p) ** (-(2 + 4 * s))
            S = sym2.L1 * mpmath.exp(2 * s * sym2.log_derivative)
            gamma_ratio = (2 * mpmath.pi) ** (-2 * s) * mpmath.gamma(1 + s) ** 2
            return 2 * L * S / Z * mpmath.mpf(cond) ** s * gamma_ratio

        return float(mpmath.diff(H, 0))


@pytest.mark.parametrize("D", [-7, -151, -1019])
def test_main_term_against_residue_oracle(table11, sym2, D):
    assert afe.main_term(table11, D, sym2) == pytest.approx(main_term_oracle(table11, D, sym2), rel=1e-8)


def test_main_term_euler_adjustment(table11, sym2):
    parts = afe.main_term_parts(table11, -7, sym2)
    assert parts.L1_restricted == pytest.approx(dirichlet_L(-7).L1 * (1 - 1 / 11))
    assert parts.zeta2_restricted == pytest.approx(math.pi**2 / 6 * (1 - 1 / 121))
    expected = dirichlet_L(-7).log_derivative + math.log(11) / 10
    assert parts.logderiv_restricted == pytest.approx(expected)
    stieltjes = lprime_one_stieltjes(-7) / dirichlet_L(-7).L1 + math.log(11) / 10
    assert parts.logderiv_restricted == pytest.approx(stieltjes, abs=1e-10)


def test_main_term_variants(table11, sym2):
    parts = afe.main_term_parts(table11, -1019, sym2)
    gap = parts.bracket("derived") - parts.bracket("printed")
    assert gap == pytest.approx(-parts.zeta_logderiv_restricted)
    with pytest.raises(ValueError):
        parts.bracket("other")


def test_main_term_positive(table11, sym2):
    for D in fundamental_discriminants(-2000, -100):
        if heegner_admissible(D, 11):
            assert afe.main_term(table11, D, sym2) > 0


# ---------------------------------------------------------------- diagonal and remainder


def test_diagonal_two_routes(table11):
    direct = afe.diagonal_term(table11, -7)
    contour = afe.diagonal_term_contour(table11, -7)
    assert abs(direct - contour) < 1e-3 * abs(contour)


def test_diagonal_m_tail(table11):
    D = -7
    cond = 11 * 7
    m = int(math.sqrt(cond) * 50)
    assert abs(afe.weight_V_fast(m * m / cond)) / m < 1e-8


def test_diagonal_gap_shrinks(table11, sym2):
    medians = []
    for lo, hi in ((100, 200), (800, 1600), (5000, 10000)):
        ps = block_primes(lo, hi)
        ps = ps[:: max(1, len(ps) // 8)]
        gaps = [abs(afe.diagonal_term(table11, -p) / afe.main_term(table11, -p, sym2) - 1) for p in ps]
        medians.append(float(np.median(gaps)))
    assert medians[0] > medians[1] > medians[2]


def test_dagger_support(table11):
    for D in (-7, -43, -1019, -4003):
        _, dag = r_arrays(D, 3 * abs(D))
        n = np.flatnonzero(dag)
        assert n.min() >= abs(D) / 4


def test_dagger_m1_trend(table11):
    medians = []
    for lo, hi in ((100, 200), (800, 1600), (5000, 10000)):
        ps = block_primes(lo, hi)
        ps = ps[:: max(1, len(ps) // 8)]
        medians.append(float(np.median([abs(afe.dagger_sums(table11, -p, [1])[0]) for p in ps])))
    assert medians[0] > medians[1] > medians[2]


def test_dagger_large_m(table11):
    D = -1019
    m = int(10 * math.sqrt(11 * abs(D))) + 1
    assert abs(afe.dagger_sums(table11, D, [m])[0]) < 1e-6


def test_remainder_decomposition(table11, sym2):
    rd = afe.remainder_decomposition(table11, -1019, sym2=sym2)
    assert rd.remainder == pytest.approx(rd.moment - rd.diagonal)
    assert rd.moment == pytest.approx(afe.family_moment(table11, -1019).value)
    assert len(rd.dagger_sums) == 5
    assert rd.main_term == pytest.approx(afe.main_term(table11, -1019, sym2))


def test_truncation_length_grows():
    assert afe.truncation_length(-7, 11) < afe.truncation_length(-1019, 11) < afe.truncation_length(-9991, 11)
